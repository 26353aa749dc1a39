import json
import threading
import time

import pytest
import requests

from preflab.harness import ExperimentConfig
from preflab.service import LabelingServer


def human_config(**overrides):
    base = dict(
        seeds=(0,),
        teacher="human",
        env_kind="pointmass",
        n_total=4,
        m=2,
        epsilon=0.5,
        h=6,
        max_episode_len=12,
        n_episodes=16,
        n_segments=30,
        n_eval_queries=20,
        n_eval_segments=20,
        pool_size=60,
        n_init=40,
        n_emb=15,
        n_reward=2,
        reward_hidden=8,
        reward_batch=4,
        ensemble_size=2,
        d=4,
        human_timeout_s=30.0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture
def server(tmp_path):
    srv = LabelingServer(human_config(), out_dir=tmp_path / "artifacts", port=0)
    srv.start()
    yield srv
    srv.shutdown()


def wait_for_query(base, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        resp = requests.get(f"{base}/api/query", timeout=5)
        if resp.status_code == 200:
            return resp.json()
        time.sleep(0.05)
    raise AssertionError("no query became available")


class TestLabelingService:
    def test_full_session_round_trip(self, server, tmp_path):
        base = f"http://127.0.0.1:{server.port}"

        status = requests.get(f"{base}/api/status", timeout=5).json()
        assert status["labels_needed"] == 4
        assert status["experiment_id"] == "seed-0"

        query = wait_for_query(base)
        assert set(query) == {"ticket_id", "seg0", "seg1"}
        for side in ("seg0", "seg1"):
            payload = query[side]
            assert len(payload["points"]) == 6
            assert payload["start"] == payload["points"][0]
            assert set(payload["goal"]) == {"x", "y", "radius"}

        # idempotent pending query
        again = requests.get(f"{base}/api/query", timeout=5).json()
        assert again["ticket_id"] == query["ticket_id"]

        # unknown ticket -> 404; malformed -> 400
        resp = requests.post(
            f"{base}/api/label", json={"ticket_id": "nope", "answer": "first"}, timeout=5
        )
        assert resp.status_code == 404
        resp = requests.post(f"{base}/api/label", json={"answer": "first"}, timeout=5)
        assert resp.status_code == 400
        resp = requests.post(
            f"{base}/api/label",
            json={"ticket_id": query["ticket_id"], "answer": "perhaps"},
            timeout=5,
        )
        assert resp.status_code == 400

        # skip resolves to a stored no-comparison label
        resp = requests.post(
            f"{base}/api/label",
            json={"ticket_id": query["ticket_id"], "answer": "skip"},
            timeout=5,
        )
        assert resp.status_code == 200
        assert resp.json()["label"] == "skip"
        assert requests.get(f"{base}/api/status", timeout=5).json()["labels_done"] == 1

        # double label on the resolved ticket -> 409
        resp = requests.post(
            f"{base}/api/label",
            json={"ticket_id": query["ticket_id"], "answer": "first"},
            timeout=5,
        )
        assert resp.status_code == 409

        answers = ["first", "second", "skip"]
        sent = [(query["ticket_id"], "skip")]
        for answer in answers:
            nxt = wait_for_query(base)
            resp = requests.post(
                f"{base}/api/label",
                json={"ticket_id": nxt["ticket_id"], "answer": answer},
                timeout=5,
            )
            assert resp.status_code == 200
            sent.append((nxt["ticket_id"], answer))

        final = server.wait(timeout=60)
        assert server.error is None
        assert final is not None and final["total_labels"] == 4

        history = requests.get(f"{base}/api/history", timeout=5).json()
        assert len(history) == 4
        assert [h["label"] for h in history] == ["skip", "first", "second", "skip"]

        # all rounds consumed: no pending query remains
        assert requests.get(f"{base}/api/query", timeout=5).status_code == 204

        metrics = (tmp_path / "artifacts" / "metrics.jsonl").read_text().splitlines()
        assert len(metrics) == 2
        first_round = json.loads(metrics[0])
        assert first_round["labels_skip"] == 1 and first_round["labels_first"] == 1

    def test_concurrent_labels_resolve_exactly_once(self, server):
        base = f"http://127.0.0.1:{server.port}"
        query = wait_for_query(base)
        codes = []
        barrier = threading.Barrier(2)

        def fire(answer):
            barrier.wait()
            resp = requests.post(
                f"{base}/api/label",
                json={"ticket_id": query["ticket_id"], "answer": answer},
                timeout=5,
            )
            codes.append(resp.status_code)

        threads = [threading.Thread(target=fire, args=(a,)) for a in ("first", "second")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200, 409]


class TestStaticUI:
    def test_serves_bundle_and_blocks_traversal(self, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html>labeler</html>")
        srv = LabelingServer(
            human_config(), out_dir=tmp_path / "artifacts", port=0, ui_dir=ui
        )
        srv.start()
        try:
            base = f"http://127.0.0.1:{srv.port}"
            resp = requests.get(f"{base}/", timeout=5)
            assert resp.status_code == 200 and "labeler" in resp.text
            resp = requests.get(f"{base}/../secrets", timeout=5)
            assert resp.status_code == 404
        finally:
            srv.shutdown()


class TestTimeout:
    def test_unlabeled_round_times_out(self, tmp_path):
        srv = LabelingServer(
            human_config(human_timeout_s=0.3), out_dir=tmp_path / "artifacts", port=0
        )
        srv.start()
        try:
            srv.wait(timeout=30)
            assert isinstance(srv.error, TimeoutError)
        finally:
            srv.shutdown()
