"""Dataset persistence, hard-negative path mining, and corpus statistics.

File format (version header then one JSON record per line):

    #probes-dataset v1
    {"actions": [...], "instruction": "...", "negatives": [...],
     "poses": [...], "provenance": {...}, "viewpoints": [...]}

Records are serialized with sorted keys and repr-exact floats, so identical
inputs always produce identical bytes and emit/parse round-trips are
lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import DataError
from .navgraph import NavGraph, Pose
from .sampler import (
    MAX_HOPS,
    ActionStep,
    SamplingError,
    Trajectory,
    path_to_trajectory,
)
from .templates import A_MARK, O_MARK

DATASET_HEADER = "#probes-dataset v1"
DEFAULT_ENDPOINT_SEPARATION = 3.0
DEFAULT_NEGATIVE_ATTEMPTS = 200


@dataclass(frozen=True)
class InstructionPair:
    """One synthesized training example plus its provenance."""

    instruction: str
    trajectory: Trajectory
    negatives: tuple[Trajectory, ...]
    provenance: dict
    actions: tuple[ActionStep, ...] = ()

    def __post_init__(self):
        if not self.instruction.strip():
            raise ValueError("instruction is empty")
        for marker in (O_MARK, A_MARK):
            if marker in self.instruction:
                raise ValueError(f"instruction still contains mask marker {marker}")
        pos = self.trajectory.viewpoint_ids
        seen = {pos}
        for neg in self.negatives:
            ids = neg.viewpoint_ids
            if ids in seen:
                raise ValueError("negatives must be distinct from each other and the positive")
            seen.add(ids)


@dataclass(frozen=True)
class DatasetRecord:
    """Line-level mirror of one dataset record."""

    instruction: str
    viewpoints: tuple[str, ...]
    poses: tuple[tuple[float, float], ...]
    actions: tuple[tuple[str, ...], ...]
    negatives: tuple[tuple[str, ...], ...]
    provenance: dict

    def to_json(self) -> str:
        payload = {
            "actions": [list(a) for a in self.actions],
            "instruction": self.instruction,
            "negatives": [list(n) for n in self.negatives],
            "poses": [list(p) for p in self.poses],
            "provenance": self.provenance,
            "viewpoints": list(self.viewpoints),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        try:
            payload = json.loads(line)
            return cls(
                instruction=payload["instruction"],
                viewpoints=tuple(payload["viewpoints"]),
                poses=tuple((float(h), float(e)) for h, e in payload["poses"]),
                actions=tuple(tuple(a) for a in payload["actions"]),
                negatives=tuple(tuple(n) for n in payload["negatives"]),
                provenance=payload["provenance"],
            )
        except (ValueError, KeyError, TypeError) as e:
            raise DataError(f"malformed dataset record: {e}") from None


def record_from_pair(pair: InstructionPair) -> DatasetRecord:
    traj = pair.trajectory
    return DatasetRecord(
        instruction=pair.instruction,
        viewpoints=traj.viewpoint_ids,
        poses=tuple((p.heading, p.elevation) for p in traj.poses),
        actions=tuple(step.verbs for step in pair.actions),
        negatives=tuple(neg.viewpoint_ids for neg in pair.negatives),
        provenance=pair.provenance,
    )


def emit(pairs: Iterable[InstructionPair | DatasetRecord], sink: IO[str]) -> int:
    """Write the header and one line per record; returns the record count.

    An empty stream produces empty output (no header), so emit/parse is an
    exact round-trip in both directions.
    """
    count = 0
    for item in pairs:
        if count == 0:
            sink.write(DATASET_HEADER + "\n")
        record = item if isinstance(item, DatasetRecord) else record_from_pair(item)
        sink.write(record.to_json() + "\n")
        count += 1
    return count


def parse(source: IO[str] | str) -> Iterator[DatasetRecord]:
    """Stream records back out of a dataset file; empty input is an empty dataset."""
    if isinstance(source, str):
        lines = iter(source.splitlines())
    else:
        lines = (line.rstrip("\n") for line in source)
    header = next(lines, None)
    if header is None:
        return
    if header.strip() != DATASET_HEADER:
        raise DataError(f"missing dataset header {DATASET_HEADER!r}")
    for line in lines:
        if not line.strip():
            continue
        yield DatasetRecord.from_json(line)


# -- hard negatives -----------------------------------------------------------


def sample_hard_negatives(
    graph: NavGraph,
    positive: Trajectory,
    k: int,
    rng: np.random.Generator,
    eps: float = DEFAULT_ENDPOINT_SEPARATION,
    attempts: int = DEFAULT_NEGATIVE_ATTEMPTS,
) -> list[Trajectory]:
    """k wrong-answer paths from the positive's start, hardest (closest) first.

    Every candidate is a shortest path within the hop bound whose endpoint
    sits at least eps meters (geodesic) from the positive's endpoint. The k
    candidates with the smallest endpoint distance win.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    start = positive.start
    ids = graph.ids()
    pool: dict[tuple[str, ...], float] = {}
    for _ in range(attempts):
        end = ids[int(rng.integers(len(ids)))]
        if end == start:
            continue
        path = graph.shortest_path(start, end)
        if path is None or not 1 <= len(path) - 1 <= MAX_HOPS:
            continue
        key = tuple(path)
        if key in pool or key == positive.viewpoint_ids:
            continue
        dist = graph.geodesic_distance(end, positive.end)
        if dist is None or dist < eps:
            continue
        pool[key] = dist
    if len(pool) < k:
        raise SamplingError(
            f"only {len(pool)} hard-negative candidates found in {attempts} attempts, need {k}"
        )
    ranked = sorted(pool.items(), key=lambda item: (item[1], item[0]))
    return [path_to_trajectory(graph, list(path)) for path, _ in ranked[:k]]


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetStats:
    o_mask_histogram: dict[int, int]
    a_mask_histogram: dict[int, int]
    length_histogram: dict[int, int]
    total: int

    def __post_init__(self):
        for name, hist in (
            ("o_mask_histogram", self.o_mask_histogram),
            ("a_mask_histogram", self.a_mask_histogram),
            ("length_histogram", self.length_histogram),
        ):
            if sum(hist.values()) != self.total:
                raise ValueError(f"{name} frequencies do not sum to total")

    def to_json(self) -> str:
        payload = {
            "a_mask_histogram": {str(k): v for k, v in sorted(self.a_mask_histogram.items())},
            "length_histogram": {str(k): v for k, v in sorted(self.length_histogram.items())},
            "o_mask_histogram": {str(k): v for k, v in sorted(self.o_mask_histogram.items())},
            "total": self.total,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def compute_stats(records: Iterable[DatasetRecord]) -> DatasetStats:
    """Histogram the corpus; instruction length is the whitespace token count."""
    o_hist: dict[int, int] = {}
    a_hist: dict[int, int] = {}
    len_hist: dict[int, int] = {}
    total = 0
    for rec in records:
        try:
            o_masks = int(rec.provenance["o_masks"])
            a_masks = int(rec.provenance["a_masks"])
        except (KeyError, TypeError, ValueError):
            raise DataError("record provenance lacks o_masks/a_masks counts") from None
        length = len(rec.instruction.split())
        o_hist[o_masks] = o_hist.get(o_masks, 0) + 1
        a_hist[a_masks] = a_hist.get(a_masks, 0) + 1
        len_hist[length] = len_hist.get(length, 0) + 1
        total += 1
    return DatasetStats(
        o_mask_histogram=o_hist,
        a_mask_histogram=a_hist,
        length_histogram=len_hist,
        total=total,
    )
