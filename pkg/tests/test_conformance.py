"""Shared request/response corpus: the scoring client must parse the
recorded service responses exactly and the goldens must keep their invariants.

The corpus under conformance/ was recorded once against the live scoring
service and is pinned to the model id it reported.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from navsynth.scorer import RemoteBackend, ViewObservation, score_candidates

CORPUS = Path(__file__).resolve().parents[1] / "conformance"
PINNED_MODEL = "palette-tiny-v1"

CASES = sorted((CORPUS / "cases").glob("*.json"))


class _ReplayHandler(BaseHTTPRequestHandler):
    response_payload: dict = {}

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        self.__class__.captured = json.loads(self.rfile.read(length))
        payload = json.dumps(self.response_payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


@pytest.fixture(scope="module")
def replay_server():
    server = HTTPServer(("127.0.0.1", 0), _ReplayHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _ReplayHandler
    server.shutdown()


def _load(case_path: Path) -> dict:
    return json.loads(case_path.read_text(encoding="utf-8"))


def test_corpus_exists():
    assert CASES, "conformance corpus missing; run: python3 -m clip_service.record_corpus conformance"
    assert (CORPUS / "images" / "kitchen.png").is_file()


@pytest.mark.parametrize("case_path", CASES, ids=lambda p: p.stem)
def test_recorded_responses_parse_in_client(replay_server, case_path):
    url, handler = replay_server
    case = _load(case_path)
    handler.response_payload = case["response"]
    candidates = case["request"]["candidates"]
    backend = RemoteBackend(url)
    view = ViewObservation(view_id="conformance#0", image_ref=str(CORPUS / "images" / "kitchen.png"))
    scores = score_candidates(view, candidates, backend)
    for got, want in zip(scores, case["response"]["scores"]):
        assert got == pytest.approx(want, abs=1e-6)
    assert len(scores) == len(candidates)
    assert all(-1.0 <= s <= 1.0 for s in scores)
    assert handler.captured["candidates"] == candidates
    assert handler.captured["prompt"] == case["request"]["prompt"]


def test_golden_kitchen_vs_garage_ordering():
    case = _load(CORPUS / "cases" / "kitchen_vs_garage_b64.json")
    assert case["model"] == PINNED_MODEL
    scores = dict(zip(case["request"]["candidates"], case["response"]["scores"]))
    assert scores["kitchen"] > scores["garage"]


def test_all_cases_pinned_to_one_model():
    models = {_load(p)["model"] for p in CASES}
    assert models == {PINNED_MODEL}
