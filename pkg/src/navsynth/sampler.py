"""Trajectory sampling and first-person action derivation.

A sampled trajectory is the shortest path between two random reachable
viewpoints, capped at 7 hops. The verbs for each move come from the signed
heading change relative to the agent's current facing:

    delta in (-45, +45] degrees  -> [forward]
    delta in (+45, +135]         -> [right, forward]
    delta in (-135, -45]         -> [left, forward]
    anything else                -> [around]

Positive delta is clockwise, i.e. a right turn. Elevation changes never
produce verbs; they are only carried in the poses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .navgraph import NavGraph, Pose, signed_heading_delta

MAX_HOPS = 7
DEFAULT_ATTEMPTS = 100

QUARTER = math.pi / 4.0  # 45 degrees


class SamplingError(DataError):
    """Graph cannot produce an admissible trajectory within the attempt budget."""


@dataclass(frozen=True)
class Trajectory:
    """Ordered viewpoints with the heading held on arrival at each one.

    poses[0] is the spawn pose; poses[i] for i >= 1 is the bearing of the
    move that reached viewpoint i.
    """

    viewpoint_ids: tuple[str, ...]
    poses: tuple[Pose, ...]

    @property
    def hops(self) -> int:
        return len(self.viewpoint_ids) - 1

    @property
    def start(self) -> str:
        return self.viewpoint_ids[0]

    @property
    def end(self) -> str:
        return self.viewpoint_ids[-1]


@dataclass(frozen=True)
class ActionStep:
    """Verbs for one move: at most two, and a second verb is always 'forward'."""

    verbs: tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.verbs) <= 2:
            raise ValueError(f"action step needs 1 or 2 verbs, got {self.verbs}")
        if len(self.verbs) == 2 and self.verbs[1] != "forward":
            raise ValueError(f"second verb must be 'forward', got {self.verbs}")

    @property
    def phrase_verb(self) -> str:
        """The single verb used when filling an action slot (the turn, if any)."""
        return self.verbs[0]


def validate_trajectory(graph: NavGraph, traj: Trajectory) -> None:
    """Check the structural invariants of a trajectory against its graph."""
    ids = traj.viewpoint_ids
    if len(ids) < 2:
        raise DataError("trajectory needs at least 2 viewpoints")
    if not 1 <= traj.hops <= MAX_HOPS:
        raise DataError(f"hop count {traj.hops} outside [1, {MAX_HOPS}]")
    if len(traj.poses) != len(ids):
        raise DataError("trajectory needs one pose per viewpoint")
    for a, b in zip(ids, ids[1:]):
        if graph.edge_weight(a, b) is None:
            raise DataError(f"viewpoints {a!r} and {b!r} are not adjacent")
    for i in range(len(ids) - 2):
        # An immediate backtrack is only legitimate at a dead end.
        if ids[i] == ids[i + 2] and len(graph.neighbors(ids[i + 1])) > 1:
            raise DataError(f"needless backtrack over {ids[i + 1]!r}")


def verbs_for_turn(delta: float) -> tuple[str, ...]:
    """Map a signed heading change in radians to the verb sequence for the move."""
    d = signed_heading_delta(delta, 0.0)
    if -QUARTER < d <= QUARTER:
        return ("forward",)
    if QUARTER < d <= 3.0 * QUARTER:
        return ("right", "forward")
    if -3.0 * QUARTER < d <= -QUARTER:
        return ("left", "forward")
    return ("around",)


def derive_actions(graph: NavGraph, traj: Trajectory) -> list[ActionStep]:
    """Verb sequence per hop, from the geometry alone.

    Deterministic: the facing starts at poses[0] and updates to each move's
    bearing after the move.
    """
    heading = traj.poses[0].heading
    steps = []
    for a, b in zip(traj.viewpoint_ids, traj.viewpoint_ids[1:]):
        move = graph.bearing(a, b)
        delta = signed_heading_delta(move.heading, heading)
        steps.append(ActionStep(verbs=verbs_for_turn(delta)))
        heading = move.heading
    return steps


def path_to_trajectory(graph: NavGraph, path: list[str]) -> Trajectory:
    """Attach arrival poses to a viewpoint path; spawn pose faces the first move."""
    if len(path) < 2:
        raise DataError("path needs at least 2 viewpoints")
    bearings = [graph.bearing(a, b) for a, b in zip(path, path[1:])]
    poses = (bearings[0],) + tuple(bearings)
    return Trajectory(viewpoint_ids=tuple(path), poses=poses)


def sample_trajectory(
    graph: NavGraph,
    rng: np.random.Generator,
    max_hops: int = MAX_HOPS,
    attempts: int = DEFAULT_ATTEMPTS,
) -> Trajectory:
    """Shortest path between a uniformly sampled reachable (start, end) pair.

    Pairs whose shortest path exceeds max_hops (or are unreachable) are
    resampled, up to the attempt budget.
    """
    if not 1 <= max_hops <= MAX_HOPS:
        raise ValueError(f"max_hops must be in [1, {MAX_HOPS}]")
    ids = graph.ids()
    if len(ids) < 2:
        raise SamplingError("graph too small: need at least 2 included viewpoints")
    for _ in range(attempts):
        i, j = rng.integers(0, len(ids), size=2)
        if i == j:
            continue
        start, end = ids[i], ids[j]
        path = graph.shortest_path(start, end)
        if path is None or not 1 <= len(path) - 1 <= max_hops:
            continue
        return path_to_trajectory(graph, path)
    raise SamplingError(f"no admissible (start, end) pair found in {attempts} attempts")
