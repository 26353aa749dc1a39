import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from preflab.core import PreferenceLabel, Segment
from preflab.teacher import (
    HumanTeacher,
    TeacherConfig,
    TicketClosedError,
    TicketError,
    perfect_label,
    scripted_label,
)


def seg(value, sid="x", h=50):
    return Segment(sid, np.zeros((h, 2)), np.zeros((h, 1)), float(value), 0)


CFG = TeacherConfig(epsilon=0.5, H=50, r_avg=1.0)  # threshold 25


class TestScripted:
    def test_clear_gap(self):
        assert scripted_label(seg(100), seg(130), CFG) is PreferenceLabel.PREFER_SECOND

    def test_below_threshold_skips(self):
        assert scripted_label(seg(100), seg(120), CFG) is PreferenceLabel.NO_COMP

    def test_boundary_is_not_skipped(self):
        # strict inequality: |25| is not < 25
        assert scripted_label(seg(100), seg(125), CFG) is PreferenceLabel.PREFER_SECOND
        assert scripted_label(seg(125), seg(100), CFG) is PreferenceLabel.PREFER_FIRST

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="length"):
            scripted_label(seg(0, h=10), seg(1, h=10), CFG)

    def test_negative_r_avg_uses_magnitude(self):
        cfg = TeacherConfig(epsilon=0.5, H=50, r_avg=-1.0)
        assert cfg.threshold == 25
        assert scripted_label(seg(0), seg(10), cfg) is PreferenceLabel.NO_COMP

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TeacherConfig(epsilon=0.0, H=50, r_avg=1.0)
        with pytest.raises(ValueError):
            TeacherConfig(epsilon=1.0, H=50, r_avg=1.0)
        with pytest.raises(ValueError):
            TeacherConfig(epsilon=0.5, H=50, r_avg=float("inf"))

    @settings(max_examples=50, deadline=None)
    @given(
        r0=st.floats(-100, 100),
        r1=st.floats(-100, 100),
        eps=st.floats(0.01, 0.99),
    )
    def test_antisymmetry(self, r0, r1, eps):
        cfg = TeacherConfig(epsilon=eps, H=50, r_avg=0.7)
        fwd = scripted_label(seg(r0, "a"), seg(r1, "b"), cfg)
        rev = scripted_label(seg(r1, "a"), seg(r0, "b"), cfg)
        flip = {
            PreferenceLabel.PREFER_FIRST: PreferenceLabel.PREFER_SECOND,
            PreferenceLabel.PREFER_SECOND: PreferenceLabel.PREFER_FIRST,
            PreferenceLabel.NO_COMP: PreferenceLabel.NO_COMP,
        }
        assert rev is flip[fwd]

    @settings(max_examples=50, deadline=None)
    @given(
        r0=st.floats(-100, 100),
        r1=st.floats(-100, 100),
        eps_lo=st.floats(0.01, 0.5),
        eps_hi=st.floats(0.5, 0.99),
    )
    def test_raising_epsilon_never_unskips(self, r0, r1, eps_lo, eps_hi):
        lo = scripted_label(seg(r0, "a"), seg(r1, "b"), TeacherConfig(eps_lo, 50, 1.0))
        hi = scripted_label(seg(r0, "a"), seg(r1, "b"), TeacherConfig(eps_hi, 50, 1.0))
        if lo is PreferenceLabel.NO_COMP:
            assert hi is PreferenceLabel.NO_COMP

    def test_clarity_nonincreasing_in_epsilon(self):
        # over uniform random pairs the skip fraction grows with epsilon
        for seed in range(3):
            rng = np.random.default_rng(seed)
            returns = rng.uniform(0, 50, size=(1000, 2))
            fractions = []
            for eps in (0.1, 0.5, 0.7):
                cfg = TeacherConfig(eps, 50, r_avg=0.5)
                labels = [
                    scripted_label(seg(a, "a"), seg(b, "b"), cfg) for a, b in returns
                ]
                fractions.append(
                    sum(1 for l in labels if l is PreferenceLabel.NO_COMP) / len(labels)
                )
            assert fractions[0] <= fractions[1] <= fractions[2]


class TestPerfect:
    def test_examples(self):
        assert perfect_label(seg(1), seg(2)) is PreferenceLabel.PREFER_SECOND
        assert perfect_label(seg(2), seg(1)) is PreferenceLabel.PREFER_FIRST
        assert perfect_label(seg(1), seg(1)) is PreferenceLabel.NO_COMP


class TestHumanAdapter:
    def queries(self, n):
        return [(seg(i, f"a{i}"), seg(i + 0.5, f"b{i}")) for i in range(n)]

    def test_skip_maps_to_no_comp(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        ticket = teacher.current_ticket()
        triple = teacher.resolve(ticket.ticket_id, "skip")
        assert triple.label is PreferenceLabel.NO_COMP

    def test_first_maps_to_prefer_first(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        triple = teacher.resolve(teacher.current_ticket().ticket_id, "first")
        assert triple.label is PreferenceLabel.PREFER_FIRST

    def test_double_resolve_errors(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        tid = teacher.current_ticket().ticket_id
        teacher.resolve(tid, "second")
        with pytest.raises(TicketClosedError, match="ticket closed"):
            teacher.resolve(tid, "first")

    def test_unknown_ticket_errors(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        with pytest.raises(TicketError):
            teacher.resolve("nope", "first")

    def test_pending_query_is_stable(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(2), 0)
        assert teacher.current_ticket().ticket_id == teacher.current_ticket().ticket_id
        teacher.resolve(teacher.current_ticket().ticket_id, "skip")
        assert teacher.current_ticket().ticket_id == "t0-1"

    def test_wait_returns_round_batch(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(3), 2)

        def resolve_all():
            for _ in range(3):
                teacher.resolve(teacher.current_ticket().ticket_id, "first")

        thread = threading.Thread(target=resolve_all)
        thread.start()
        batch = teacher.wait_for_round(timeout=5)
        thread.join()
        assert len(batch) == 3 and all(t.round == 2 for t in batch)

    def test_wait_times_out(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        with pytest.raises(TimeoutError):
            teacher.wait_for_round(timeout=0.05)

    def test_concurrent_resolves_settle_once(self):
        teacher = HumanTeacher()
        teacher.submit_round(self.queries(1), 0)
        tid = teacher.current_ticket().ticket_id
        outcomes = []
        barrier = threading.Barrier(2)

        def race(answer):
            barrier.wait()
            try:
                teacher.resolve(tid, answer)
                outcomes.append("ok")
            except TicketClosedError:
                outcomes.append("closed")

        threads = [threading.Thread(target=race, args=(a,)) for a in ("first", "second")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(outcomes) == ["closed", "ok"]
