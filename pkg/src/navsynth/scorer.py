"""Vision-language matching behind one small interface.

Every backend answers the same question: given a view and candidate phrases,
how similar is each phrase to the view? Candidates travel as raw phrases and
the prompt wrapper ("a photo of {}") is applied by the backend, which keeps
the wire format and the local stand-ins aligned.

Backends:
  MockBackend    seeded hash of (view id, phrase); reproducible anywhere.
  TableBackend   fixture lookup table, for exact-value tests.
  RemoteBackend  HTTP client for the scoring service.
  CachingBackend memoizes any of the above per (view id, phrase).
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import struct
import threading
from dataclasses import dataclass
from typing import IO, Protocol, Sequence

import numpy as np
import requests

from .errors import BackendError, DataError
from .navgraph import Pose

PROMPT_TEMPLATE = "a photo of {}"
VIEWS_PER_PANORAMA = 36
HEADING_SECTORS = 12  # 36 views = 12 headings x 3 elevation bands

CAPTION_FORMATS = ("{room}", "{object}", "{room} with {object}")


@dataclass(frozen=True, eq=False)
class ViewObservation:
    """One of the 36 discrete views at a viewpoint.

    view_id is "<viewpoint id>#<view index>"; at least one of image_ref and
    feature must be present.
    """

    view_id: str
    image_ref: str | None = None
    feature: np.ndarray | None = None

    def __post_init__(self):
        if self.image_ref is None and self.feature is None:
            raise ValueError(f"view {self.view_id!r} needs an image_ref or a feature")
        if self.view_index >= VIEWS_PER_PANORAMA:
            raise ValueError(f"view index out of range in {self.view_id!r}")

    @property
    def viewpoint_id(self) -> str:
        return self.view_id.rsplit("#", 1)[0]

    @property
    def view_index(self) -> int:
        _, _, idx = self.view_id.rpartition("#")
        try:
            value = int(idx)
        except ValueError:
            raise ValueError(f"view id {self.view_id!r} lacks a numeric view index") from None
        if value < 0:
            raise ValueError(f"negative view index in {self.view_id!r}")
        return value


class ScorerBackend(Protocol):
    backend_id: str

    def score(
        self, view: ViewObservation, candidates: Sequence[str], prompt_template: str
    ) -> list[float]: ...


def _hash_unit(parts: Sequence[str]) -> float:
    """Stable hash of the joined parts, mapped to [0, 1)."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    (value,) = struct.unpack(">Q", digest[:8])
    return value / 2.0**64


class MockBackend:
    """Pure function of (seed, view id, phrase), uniform on [0, 1)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.backend_id = f"mock:{self.seed}"

    def score(self, view, candidates, prompt_template=PROMPT_TEMPLATE):
        return [_hash_unit((str(self.seed), view.view_id, c)) for c in candidates]


class TableBackend:
    """Scores read from a fixture table keyed by (view id, phrase)."""

    def __init__(self, table: dict[tuple[str, str], float], backend_id: str = "fixture"):
        self.table = dict(table)
        self.backend_id = backend_id

    def score(self, view, candidates, prompt_template=PROMPT_TEMPLATE):
        out = []
        for c in candidates:
            key = (view.view_id, c)
            if key not in self.table:
                raise BackendError(f"fixture table has no score for {key!r}")
            out.append(float(self.table[key]))
        return out


def load_score_table(source: IO[str] | str) -> dict[tuple[str, str], float]:
    """Fixture table file: JSON array of [view_id, phrase, score] triples."""
    text = source if isinstance(source, str) else source.read()
    try:
        rows = json.loads(text)
        table = {(str(v), str(p)): float(s) for v, p, s in rows}
    except (ValueError, TypeError) as e:
        raise DataError(f"bad score table: {e}") from None
    return table


class RemoteBackend:
    """Client for the HTTP scoring service (POST /v1/score, GET /v1/health)."""

    def __init__(self, url: str, timeout: float = 30.0, max_inflight: int = 4):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.backend_id = f"remote:{self.url}"
        self._slots = threading.BoundedSemaphore(max_inflight)

    def health(self) -> dict:
        try:
            resp = requests.get(f"{self.url}/v1/health", timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendError(f"scoring service unreachable: {e}") from None
        if resp.status_code != 200:
            raise BackendError(f"scoring service unhealthy: HTTP {resp.status_code}")
        return resp.json()

    def score(self, view, candidates, prompt_template=PROMPT_TEMPLATE):
        if view.image_ref is None:
            raise BackendError(f"view {view.view_id!r} has no image to send")
        if os.path.exists(view.image_ref):
            with open(view.image_ref, "rb") as fh:
                image: object = base64.b64encode(fh.read()).decode("ascii")
        else:
            image = {"path": view.image_ref}
        body = {"image": image, "candidates": list(candidates), "prompt": prompt_template}
        with self._slots:
            try:
                resp = requests.post(f"{self.url}/v1/score", json=body, timeout=self.timeout)
            except requests.RequestException as e:
                raise BackendError(f"scoring service unreachable: {e}") from None
        if resp.status_code != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except ValueError:
                pass
            raise BackendError(f"scoring service error: HTTP {resp.status_code} {detail}".strip())
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError):
            raise BackendError("malformed response: no 'scores' field") from None
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise BackendError("malformed response: scores not aligned with candidates")
        return [float(s) for s in scores]


class CachingBackend:
    """Per-run memo of (view id, phrase) -> score around any backend."""

    def __init__(self, inner: ScorerBackend):
        self.inner = inner
        self.backend_id = inner.backend_id
        self._cache: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    def score(self, view, candidates, prompt_template=PROMPT_TEMPLATE):
        with self._lock:
            missing = [c for c in candidates if (view.view_id, c) not in self._cache]
        if missing:
            fresh = self.inner.score(view, missing, prompt_template)
            with self._lock:
                for c, s in zip(missing, fresh):
                    self._cache[(view.view_id, c)] = s
        with self._lock:
            return [self._cache[(view.view_id, c)] for c in candidates]


def score_candidates(
    view: ViewObservation,
    candidates: Sequence[str],
    backend: ScorerBackend,
    prompt_template: str = PROMPT_TEMPLATE,
) -> list[float]:
    """Score every candidate phrase against the view, order-aligned."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    scores = backend.score(view, candidates, prompt_template)
    for phrase, s in zip(candidates, scores):
        if not math.isfinite(s) or not -1.0 <= s <= 1.0:
            raise BackendError(f"score {s!r} for {phrase!r} outside [-1, 1]")
    return scores


def _argmax_phrase(view, phrases: Sequence[str], backend) -> str:
    ordered = sorted(phrases)
    scores = score_candidates(view, ordered, backend)
    # index() keeps the first hit, so ties resolve to the smallest phrase
    return ordered[scores.index(max(scores))]


def best_room_and_object(
    view: ViewObservation, lexicon, backend: ScorerBackend
) -> tuple[str, str]:
    """Highest-scoring room and object for the view, as two separate pools."""
    room = _argmax_phrase(view, lexicon.rooms, backend)
    obj = _argmax_phrase(view, lexicon.objects, backend)
    return room, obj


def render_caption(room: str, object_phrase: str, rng: np.random.Generator) -> str:
    """One of "{room}", "{object}", "{room} with {object}", uniformly."""
    if not room or not object_phrase:
        raise ValueError("room and object phrases must be non-empty")
    fmt = CAPTION_FORMATS[int(rng.integers(len(CAPTION_FORMATS)))]
    return fmt.format(room=room, object=object_phrase)


# -- synthetic observations -------------------------------------------------


def view_index_for_pose(pose: Pose) -> int:
    """Discrete view index (0..35) the pose falls into: 12 headings x 3 bands."""
    sector = int(pose.heading // (2.0 * math.pi / HEADING_SECTORS)) % HEADING_SECTORS
    if pose.elevation < -math.pi / 6:
        band = 0
    elif pose.elevation <= math.pi / 6:
        band = 1
    else:
        band = 2
    return band * HEADING_SECTORS + sector


def synthetic_feature(view_id: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-image feature in [-1, 1)^dim derived from the view id."""
    vals = np.empty(dim, dtype=np.float64)
    for k in range(dim):
        vals[k] = _hash_unit(("feat", view_id, str(k))) * 2.0 - 1.0
    return vals


def make_view(viewpoint_id: str, pose: Pose, feature_dim: int) -> ViewObservation:
    """Observation for the view the pose faces, with a synthetic feature."""
    view_id = f"{viewpoint_id}#{view_index_for_pose(pose)}"
    return ViewObservation(view_id=view_id, feature=synthetic_feature(view_id, feature_dim))
