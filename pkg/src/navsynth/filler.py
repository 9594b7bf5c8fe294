"""Template full-filling: captions into object slots, verbs into action slots.

Two regimes, depending on how the trajectory length n_v compares to the
number of object slots l:

  n_v >= l  a random l-subset of captions fills the slots in trajectory order
  n_v <  l  a random n_v-subset of slots takes all captions in order; the
            leftover slots reuse captions, constrained to the viewpoint
            interval bracketing them so the narration never runs backwards

Action slots then resolve to the move leaving the viewpoint of the nearest
filled object slot on their left (clamped to the trajectory for slots that
hang off either end).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .dataset import (
    DEFAULT_ENDPOINT_SEPARATION,
    InstructionPair,
    record_from_pair,
    sample_hard_negatives,
)
from .navgraph import NavGraph
from .sampler import ActionStep, Trajectory, derive_actions, sample_trajectory
from .scorer import ScorerBackend, best_room_and_object, make_view, render_caption
from .templates import A_MARK, O_MARK, Lexicon, Template, render_tokens, sample_template

DEFAULT_FEATURE_DIM = 16


@dataclass(frozen=True)
class FillAssignment:
    """Mask fills keyed by token position in the template.

    object_fills: position -> (viewpoint index, caption text)
    action_fills: position -> (step index, verb text)
    """

    object_fills: dict[int, tuple[int, str]]
    action_fills: dict[int, tuple[int, str]]

    def validate(self, template: Template, n_v: int, hops: int) -> None:
        o_positions = [i for i, t in enumerate(template.tokens) if t == O_MARK]
        if sorted(self.object_fills) != o_positions:
            raise ValueError("object fills do not cover the template's object slots")
        prev = -1
        for pos in o_positions:
            vp, _ = self.object_fills[pos]
            if not 0 <= vp < n_v:
                raise ValueError(f"viewpoint index {vp} out of range")
            if vp < prev:
                raise ValueError("viewpoint indices must be non-decreasing in template order")
            prev = vp
        for pos, (step, _) in self.action_fills.items():
            if template.tokens[pos] != A_MARK:
                raise ValueError(f"action fill at non-action position {pos}")
            if not 0 <= step < hops:
                raise ValueError(f"step index {step} out of range")


def fill_objects(template: Template, captions: list[str], rng: np.random.Generator) -> FillAssignment:
    """Assign captions to the template's object slots under the two rules."""
    if template.l < 1:
        raise ValueError("template has no object slots")
    n_v = len(captions)
    if n_v < 2:
        raise ValueError("need captions for at least 2 viewpoints")

    o_positions = [i for i, t in enumerate(template.tokens) if t == O_MARK]
    l = len(o_positions)
    fills: dict[int, tuple[int, str]] = {}

    if n_v >= l:
        subset = sorted(int(k) for k in rng.choice(n_v, size=l, replace=False))
        for pos, vp in zip(o_positions, subset):
            fills[pos] = (vp, captions[vp])
        return FillAssignment(object_fills=fills, action_fills={})

    chosen = sorted(int(k) for k in rng.choice(l, size=n_v, replace=False))
    core = {o_positions[slot]: vp for vp, slot in enumerate(chosen)}
    next_core_vp = {}
    upcoming = n_v - 1
    for pos in reversed(o_positions):
        if pos in core:
            upcoming = core[pos]
        next_core_vp[pos] = upcoming

    lo = 0
    for pos in o_positions:
        if pos in core:
            vp = core[pos]
        else:
            hi = next_core_vp[pos]
            vp = lo + int(rng.integers(hi - lo + 1))
        fills[pos] = (vp, captions[vp])
        lo = vp
    return FillAssignment(object_fills=fills, action_fills={})


def resolve_actions(
    template: Template, assignment: FillAssignment, actions: list[ActionStep]
) -> FillAssignment:
    """Complete the assignment by resolving every action slot to a step's verb."""
    a_positions = [i for i, t in enumerate(template.tokens) if t == A_MARK]
    hops = len(actions)
    if a_positions:
        assert hops >= 1, "trajectory with action slots must have at least one hop"
    o_positions = sorted(assignment.object_fills)

    action_fills: dict[int, tuple[int, str]] = {}
    for pos in a_positions:
        before = [p for p in o_positions if p < pos]
        after = [p for p in o_positions if p > pos]
        if before and after:
            j = assignment.object_fills[before[-1]][0]
            step = min(j, hops - 1)
        elif after:
            step = 0
        else:
            step = hops - 1
        action_fills[pos] = (step, actions[step].phrase_verb)
    return replace(assignment, action_fills=action_fills)


def render_filled(template: Template, assignment: FillAssignment) -> str:
    """Pure render of the template with its completed assignment."""
    out = []
    for pos, tok in enumerate(template.tokens):
        if tok == O_MARK:
            out.append(assignment.object_fills[pos][1])
        elif tok == A_MARK:
            out.append(assignment.action_fills[pos][1])
        else:
            out.append(tok)
    return render_tokens(out)


def caption_trajectory(
    trajectory: Trajectory,
    lexicon: Lexicon,
    backend: ScorerBackend,
    rng: np.random.Generator,
    feature_dim: int = DEFAULT_FEATURE_DIM,
) -> list[str]:
    """One caption per viewpoint, from the view each arrival pose faces."""
    captions = []
    for vp_id, pose in zip(trajectory.viewpoint_ids, trajectory.poses):
        view = make_view(vp_id, pose, feature_dim)
        room, obj = best_room_and_object(view, lexicon, backend)
        captions.append(render_caption(room, obj, rng))
    return captions


def synthesize_instruction(
    graph: NavGraph,
    trajectory: Trajectory,
    bank: list[Template],
    lexicon: Lexicon,
    backend: ScorerBackend,
    rng: np.random.Generator,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    seed: int | None = None,
) -> InstructionPair:
    """Caption, select, fill, and render one instruction for the trajectory."""
    captions = caption_trajectory(trajectory, lexicon, backend, rng, feature_dim)
    template = sample_template(bank, len(trajectory.viewpoint_ids), rng)
    assignment = fill_objects(template, captions, rng)
    actions = derive_actions(graph, trajectory)
    assignment = resolve_actions(template, assignment, actions)
    assignment.validate(template, len(captions), trajectory.hops)
    text = render_filled(template, assignment)
    return InstructionPair(
        instruction=text,
        trajectory=trajectory,
        negatives=(),
        actions=tuple(actions),
        provenance={
            "template_id": template.id,
            "o_masks": template.l,
            "a_masks": template.n,
            "captions": list(captions),
            "seed": seed,
            "scorer": backend.backend_id,
        },
    )


def synthesize_records(
    graph: NavGraph,
    bank: list[Template],
    lexicon: Lexicon,
    backend: ScorerBackend,
    seed: int,
    count: int,
    k_negatives: int = 3,
    eps: float = DEFAULT_ENDPOINT_SEPARATION,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    max_hops: int = 7,
    on_record: Callable[[int], None] | None = None,
):
    """Generate `count` dataset records, one independent seed stream each.

    Stream i derives from (seed, i), so records are reproducible and
    independent of how the work would be partitioned across workers.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    children = np.random.SeedSequence(seed).spawn(count)
    for i in range(count):
        rng = np.random.default_rng(children[i])
        trajectory = sample_trajectory(graph, rng, max_hops=max_hops)
        pair = synthesize_instruction(
            graph, trajectory, bank, lexicon, backend, rng, feature_dim=feature_dim, seed=seed
        )
        if k_negatives > 0:
            negatives = sample_hard_negatives(graph, trajectory, k_negatives, rng, eps=eps)
            pair = replace(pair, negatives=tuple(negatives))
        if on_record is not None:
            on_record(i)
        yield record_from_pair(pair)
