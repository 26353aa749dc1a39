"""HTTP service backing the live human-labeling UI.

Endpoints (all JSON):

* ``GET /api/status``  -> {round, labels_done, labels_needed, experiment_id}
* ``GET /api/query``   -> the pending ticket with both segments as path
  polylines, or 204 when no query is waiting
* ``POST /api/label``  -> {ticket_id, answer: "first"|"second"|"skip"};
  unknown ticket 404, already-resolved ticket 409
* ``GET /api/history`` -> triples labeled so far in this session

Everything mutating goes through the single-session ticket table, so
concurrent labels for the same ticket resolve exactly once. Static files
from ``ui_dir`` are served at ``/`` when a built frontend is available.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .harness import ExperimentConfig, run_experiment
from .teacher import HumanTeacher, TicketClosedError, TicketError

logger = logging.getLogger(__name__)


class LabelingSession:
    """Glue between one running experiment and the HTTP handlers."""

    def __init__(self, teacher: HumanTeacher, env, experiment_id: str):
        self.teacher = teacher
        self.env = env
        self.experiment_id = experiment_id

    def status(self) -> dict:
        payload = self.teacher.status()
        payload["experiment_id"] = self.experiment_id
        return payload

    def query_payload(self) -> dict | None:
        ticket = self.teacher.current_ticket()
        if ticket is None:
            return None
        goal = self.env.goal_marker()

        def seg_payload(segment):
            points = self.env.segment_points(segment)
            return {"points": points, "start": points[0], "goal": goal}

        return {
            "ticket_id": ticket.ticket_id,
            "seg0": seg_payload(ticket.seg0),
            "seg1": seg_payload(ticket.seg1),
        }

    def label(self, ticket_id: str, answer: str) -> dict:
        triple = self.teacher.resolve(ticket_id, answer)
        return {"ticket_id": ticket_id, "label": triple.label.value, "round": triple.round}

    def history_payload(self) -> list[dict]:
        return [
            {
                "seg0": t.seg0.id,
                "seg1": t.seg1.id,
                "label": t.label.value,
                "round": t.round,
            }
            for t in self.teacher.history()
        ]


def _make_handler(session: LabelingSession, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("http: " + fmt, *args)

        def _send_json(self, code: int, payload) -> None:
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_empty(self, code: int) -> None:
            self.send_response(code)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            path = self.path.split("?")[0]
            if path == "/api/status":
                self._send_json(200, session.status())
            elif path == "/api/query":
                payload = session.query_payload()
                if payload is None:
                    self._send_empty(204)
                else:
                    self._send_json(200, payload)
            elif path == "/api/history":
                self._send_json(200, session.history_payload())
            else:
                self._serve_static(path)

        def do_POST(self):
            path = self.path.split("?")[0]
            if path != "/api/label":
                self._send_json(404, {"error": "unknown endpoint"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                ticket_id = body["ticket_id"]
                answer = body["answer"]
            except (ValueError, KeyError) as exc:
                self._send_json(400, {"error": f"bad request: {exc}"})
                return
            try:
                self._send_json(200, session.label(ticket_id, answer))
            except TicketError:
                self._send_json(404, {"error": f"unknown ticket {ticket_id!r}"})
            except TicketClosedError:
                self._send_json(409, {"error": "ticket closed"})
            except ValueError as exc:
                self._send_json(400, {"error": str(exc)})

        def _serve_static(self, path: str) -> None:
            if ui_dir is None:
                self._send_json(404, {"error": "no UI bundle configured"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
            body = target.read_bytes()
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


class LabelingServer:
    """Threaded HTTP server plus the experiment running in the background."""

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: str | Path,
        port: int = 0,
        host: str = "127.0.0.1",
        ui_dir: str | Path | None = None,
        seed: int | None = None,
    ):
        if config.teacher != "human":
            raise ValueError("the labeling service requires teacher = human")
        self.config = config
        self.out_dir = Path(out_dir)
        self.teacher = HumanTeacher()
        self.teacher.set_budget(config.n_total)
        self.session = LabelingSession(
            self.teacher, config.build_env(), experiment_id=f"seed-{config.seeds[0] if seed is None else seed}"
        )
        ui_path = Path(ui_dir) if ui_dir else None
        ThreadingHTTPServer.request_queue_size = 64
        self.httpd = ThreadingHTTPServer((host, port), _make_handler(self.session, ui_path))
        self.seed = seed
        self.result: dict | None = None
        self.error: Exception | None = None
        self._experiment_thread: threading.Thread | None = None
        self._server_thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        def run():
            try:
                self.result = run_experiment(
                    self.config, seed=self.seed, out_dir=self.out_dir, human=self.teacher
                )
            except Exception as exc:  # surfaced via .error for the caller
                self.error = exc
                logger.exception("experiment failed")

        self._experiment_thread = threading.Thread(target=run, daemon=True)
        self._experiment_thread.start()
        self._server_thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._server_thread.start()

    def wait(self, timeout: float | None = None) -> dict | None:
        self._experiment_thread.join(timeout=timeout)
        return self.result

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
