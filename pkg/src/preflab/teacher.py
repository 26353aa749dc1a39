"""Preference label sources.

The scripted teacher mimics a labeler who cannot tell segments apart when
their hidden returns are close: a query is skipped whenever the absolute
return difference falls below ``epsilon * H * |r_avg|``. The perfect teacher
is the zero-threshold limit. The human adapter queues live queries behind
tickets for the HTTP labeling service.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

from .core import PreferenceLabel, PreferenceTriple, Segment


@dataclass(frozen=True)
class TeacherConfig:
    """Scripted-teacher knobs; ``epsilon`` is the skip rate."""

    epsilon: float
    H: int
    r_avg: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie strictly inside (0, 1)")
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if not abs(self.r_avg) < float("inf"):
            raise ValueError("r_avg must be finite")

    @property
    def threshold(self) -> float:
        # |r_avg| so a dense negative-reward env still skips near-ties
        return self.epsilon * self.H * abs(self.r_avg)


def scripted_label(seg0: Segment, seg1: Segment, cfg: TeacherConfig) -> PreferenceLabel:
    """Label by hidden returns; skip when the gap is under the threshold.

    The skip condition is a strict inequality, so a gap exactly at the
    threshold still gets a preference.
    """
    if len(seg0) != cfg.H or len(seg1) != cfg.H:
        raise ValueError(
            f"segments must have length H={cfg.H}, got {len(seg0)} and {len(seg1)}"
        )
    gap = seg0.true_return - seg1.true_return
    if abs(gap) < cfg.threshold:
        return PreferenceLabel.NO_COMP
    if gap == 0.0:
        # exact tie and threshold == 0: no meaningful preference exists
        return PreferenceLabel.NO_COMP
    return PreferenceLabel.PREFER_FIRST if gap > 0 else PreferenceLabel.PREFER_SECOND


def perfect_label(seg0: Segment, seg1: Segment) -> PreferenceLabel:
    """Zero-threshold teacher: higher return wins, exact ties are skipped."""
    if seg0.true_return == seg1.true_return:
        return PreferenceLabel.NO_COMP
    if seg0.true_return > seg1.true_return:
        return PreferenceLabel.PREFER_FIRST
    return PreferenceLabel.PREFER_SECOND


# ---------------------------------------------------------------------------
# Human-in-the-loop adapter
# ---------------------------------------------------------------------------


_ANSWERS = {
    "first": PreferenceLabel.PREFER_FIRST,
    "second": PreferenceLabel.PREFER_SECOND,
    "skip": PreferenceLabel.NO_COMP,
}


class TicketError(KeyError):
    """Unknown ticket id."""


class TicketClosedError(ValueError):
    """Ticket was already resolved."""


@dataclass
class Ticket:
    ticket_id: str
    seg0: Segment
    seg1: Segment
    round: int
    resolved: bool = False


class HumanTeacher:
    """Single-session pending-ticket table between the harness and the UI.

    The harness enqueues a round of queries and blocks in
    ``wait_for_round``; the labeling service resolves tickets one at a time.
    All mutation happens under one lock, so concurrent resolves of the same
    ticket settle exactly once.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._done = threading.Condition(self._lock)
        self._queue: list[Ticket] = []
        self._tickets: dict[str, Ticket] = {}
        self._results: list[PreferenceTriple] = []
        self._round = 0
        self._labels_done = 0
        self._labels_needed = 0

    def set_budget(self, labels_needed: int) -> None:
        with self._lock:
            self._labels_needed = labels_needed

    def submit_round(self, queries: Sequence[tuple[Segment, Segment]], round_index: int) -> None:
        with self._lock:
            if self._queue:
                raise RuntimeError("previous round still has pending queries")
            self._round = round_index
            for i, (seg0, seg1) in enumerate(queries):
                ticket = Ticket(f"t{round_index}-{i}", seg0, seg1, round_index)
                self._queue.append(ticket)
                self._tickets[ticket.ticket_id] = ticket

    def current_ticket(self) -> Ticket | None:
        """The pending query, stable across repeated calls until resolved."""
        with self._lock:
            return self._queue[0] if self._queue else None

    def resolve(self, ticket_id: str, answer: str) -> PreferenceTriple:
        if answer not in _ANSWERS:
            raise ValueError(f"answer must be one of {sorted(_ANSWERS)}, got {answer!r}")
        with self._lock:
            ticket = self._tickets.get(ticket_id)
            if ticket is None:
                raise TicketError(ticket_id)
            if ticket.resolved:
                raise TicketClosedError("ticket closed")
            ticket.resolved = True
            self._queue.remove(ticket)
            triple = PreferenceTriple(
                seg0=ticket.seg0,
                seg1=ticket.seg1,
                label=_ANSWERS[answer],
                round=ticket.round,
            )
            self._results.append(triple)
            self._labels_done += 1
            self._done.notify_all()
            return triple

    def wait_for_round(self, timeout: float | None = None) -> list[PreferenceTriple]:
        """Block until every query of the submitted round is labeled."""
        with self._lock:
            if not self._done.wait_for(lambda: not self._queue, timeout=timeout):
                raise TimeoutError(
                    f"human labels not received within {timeout} seconds"
                )
            batch = [t for t in self._results if t.round == self._round]
            return batch

    def status(self) -> dict:
        with self._lock:
            return {
                "round": self._round,
                "labels_done": self._labels_done,
                "labels_needed": self._labels_needed,
            }

    def history(self) -> list[PreferenceTriple]:
        with self._lock:
            return list(self._results)
