"""Protocol conformance for the scoring service, including corpus replay."""

from __future__ import annotations

import base64
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from clip_service.app import create_app
from clip_service.palette import MODEL_ID

CORPUS = Path(__file__).resolve().parents[2] / "conformance"


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def kitchen_b64() -> str:
    return base64.b64encode((CORPUS / "images" / "kitchen.png").read_bytes()).decode("ascii")


def test_health_reports_model(client):
    resp = client.get("/v1/health")
    assert resp.status_code == 200
    payload = resp.json()
    assert payload["status"] == "ok"
    assert payload["model"] == MODEL_ID
    assert payload["model"]


def test_503_while_model_loading():
    app = create_app()
    # no lifespan: the startup hook never ran, so the model is absent
    bare = TestClient(app)
    assert bare.get("/v1/health").status_code == 503
    resp = bare.post(
        "/v1/score",
        json={"image": kitchen_b64(), "candidates": ["kitchen"], "prompt": "a photo of {}"},
    )
    assert resp.status_code == 503


def test_identical_requests_identical_scores(client):
    body = {"image": kitchen_b64(), "candidates": ["kitchen", "garage"], "prompt": "a photo of {}"}
    first = client.post("/v1/score", json=body).json()
    second = client.post("/v1/score", json=body).json()
    assert first == second


def test_single_candidate_score_in_range(client):
    body = {"image": kitchen_b64(), "candidates": ["kitchen"], "prompt": "a photo of {}"}
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 200
    scores = resp.json()["scores"]
    assert len(scores) == 1
    assert -1.0 <= scores[0] <= 1.0


def test_batch_of_b_returns_exactly_b(client):
    candidates = [f"phrase {i}" for i in range(17)]
    body = {"image": kitchen_b64(), "candidates": candidates, "prompt": "a photo of {}"}
    scores = client.post("/v1/score", json=body).json()["scores"]
    assert len(scores) == 17


def test_golden_kitchen_vs_garage_ordering(client):
    assert client.get("/v1/health").json()["model"] == MODEL_ID
    body = {
        "image": kitchen_b64(),
        "candidates": ["kitchen", "garage"],
        "prompt": "a photo of {}",
    }
    scores = client.post("/v1/score", json=body).json()["scores"]
    assert scores[0] > scores[1]


def test_error_empty_candidates(client):
    body = {"image": kitchen_b64(), "candidates": [], "prompt": "a photo of {}"}
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_error_bad_base64(client):
    body = {"image": "!!!notbase64!!!", "candidates": ["kitchen"], "prompt": "a photo of {}"}
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400
    assert "base64" in resp.json()["error"]


def test_error_undecodable_image(client):
    garbage = base64.b64encode(b"garbage bytes, no image").decode("ascii")
    body = {"image": garbage, "candidates": ["kitchen"], "prompt": "a photo of {}"}
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400


def test_error_missing_path(client):
    body = {
        "image": {"path": "/nope/missing.png"},
        "candidates": ["kitchen"],
        "prompt": "a photo of {}",
    }
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400
    assert "not found" in resp.json()["error"]


def test_error_prompt_without_placeholder(client):
    body = {"image": kitchen_b64(), "candidates": ["kitchen"], "prompt": "a photo of"}
    resp = client.post("/v1/score", json=body)
    assert resp.status_code == 400


def test_path_and_base64_agree(client):
    path_body = {
        "image": {"path": str(CORPUS / "images" / "kitchen.png")},
        "candidates": ["kitchen", "plant"],
        "prompt": "a photo of {}",
    }
    b64_body = dict(path_body, image=kitchen_b64())
    assert (
        client.post("/v1/score", json=path_body).json()
        == client.post("/v1/score", json=b64_body).json()
    )


def _corpus_cases():
    return sorted((CORPUS / "cases").glob("*.json"))


@pytest.mark.parametrize("case_path", _corpus_cases(), ids=lambda p: p.stem)
def test_conformance_corpus_replay(client, case_path):
    """Live responses must match the recorded goldens for the pinned model."""
    case = json.loads(case_path.read_text(encoding="utf-8"))
    assert case["model"] == MODEL_ID, "corpus was recorded against a different model"
    request = dict(case["request"])
    if "request_image_relpath" in case:
        request["image"] = {"path": str(CORPUS / case["request_image_relpath"])}
    resp = client.post("/v1/score", json=request)
    assert resp.status_code == 200
    got = resp.json()["scores"]
    want = case["response"]["scores"]
    assert len(got) == len(want) == len(request["candidates"])
    for g, w in zip(got, want):
        assert g == pytest.approx(w, abs=1e-6)
        assert -1.0 <= g <= 1.0
