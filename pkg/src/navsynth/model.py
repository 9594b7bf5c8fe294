"""Toy two-stream ranking model with hand-written forward and backward passes.

The textual stream is a trainable prompt prefix (free seed vectors run
through a bidirectional LSTM and a ReLU MLP) concatenated with frozen word
embeddings. The visual stream projects per-view image features plus the
(sin/cos heading, sin/cos elevation) orientation tuple into the same space.
One single-head attention block per direction mixes the streams, mean
pooling and a linear head produce a scalar score per candidate path, and a
softmax cross-entropy ranking loss trains the model to prefer the positive.

Everything is float64 numpy. The word embedding table never receives
gradient, which is the point of the exercise: only the prompt side of the
language stream adapts.

All gradients are verified against central finite differences; see
gradient_check and the grad-check CLI command.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Sequence

import numpy as np

from .errors import CheckError, DataError
from .navgraph import NavGraph, Pose
from .sampler import Trajectory, path_to_trajectory
from .scorer import synthetic_feature, view_index_for_pose
from .templates import tokenize

UNK_TOKEN = "<unk>"
FROZEN_TENSORS = ("embed.table",)

GATES = 4  # i, f, g, o stacked along the first axis


@dataclass(frozen=True)
class ModelConfig:
    n_prompt: int = 4
    d_p: int = 8
    d_h: int = 8
    d_m: int = 8
    d_t: int = 8
    d_img: int = 16
    seed: int = 0

    def __post_init__(self):
        for name in ("n_prompt", "d_p", "d_h", "d_m", "d_t", "d_img"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class CandidateViews:
    """Visual observations of one candidate path: stacked features and orientations."""

    features: np.ndarray  # (views, d_img)
    locations: np.ndarray  # (views, 4)

    def __post_init__(self):
        if self.features.ndim != 2 or self.locations.ndim != 2:
            raise ValueError("features and locations must be 2-d")
        if len(self.features) != len(self.locations) or len(self.features) == 0:
            raise ValueError("need one location row per view, at least one view")


@dataclass(frozen=True)
class RankingExample:
    """One instruction with its candidate paths; exactly one is correct."""

    token_ids: np.ndarray  # (m,)
    candidates: tuple[CandidateViews, ...]
    positive_index: int

    def __post_init__(self):
        if len(self.token_ids) == 0:
            raise ValueError("instruction has no tokens")
        if not 0 <= self.positive_index < len(self.candidates):
            raise ValueError("positive_index out of range")


def _tensor_shapes(cfg: ModelConfig, vocab_size: int) -> list[tuple[str, tuple[int, ...]]]:
    h, p, m, t, img = cfg.d_h, cfg.d_p, cfg.d_m, cfg.d_t, cfg.d_img
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("prompt_seeds", (cfg.n_prompt, p)),
    ]
    for direction in ("fwd", "bwd"):
        shapes += [
            (f"lstm_{direction}.W", (GATES * h, p)),
            (f"lstm_{direction}.U", (GATES * h, h)),
            (f"lstm_{direction}.b", (GATES * h,)),
        ]
    shapes += [
        ("mlp.W1", (m, 2 * h)),
        ("mlp.b1", (m,)),
        ("mlp.W2", (t, m)),
        ("mlp.b2", (t,)),
        ("embed.table", (vocab_size, t)),
        ("vis.img_W", (t, img)),
        ("vis.img_b", (t,)),
        ("vis.loc_W", (t, 4)),
        ("vis.loc_b", (t,)),
    ]
    for block in ("attn_tv", "attn_vt"):
        for mat in ("Wq", "Wk", "Wv"):
            shapes.append((f"{block}.{mat}", (t, t)))
        for bias in ("bq", "bk", "bv"):
            shapes.append((f"{block}.{bias}", (t,)))
    shapes += [
        ("head.W", (2 * t,)),
        ("head.b", (1,)),
    ]
    return shapes


class PromptRankingModel:
    """Parameter bundle plus the forward/backward machinery."""

    def __init__(self, config: ModelConfig, vocab: Sequence[str]):
        if not vocab or vocab[0] != UNK_TOKEN:
            raise ValueError(f"vocab must start with {UNK_TOKEN!r}")
        self.config = config
        self.vocab = tuple(vocab)
        self.token_index = {tok: i for i, tok in enumerate(self.vocab)}
        rng = np.random.default_rng(config.seed)
        self.params: dict[str, np.ndarray] = {}
        for name, shape in _tensor_shapes(config, len(self.vocab)):
            self.params[name] = rng.uniform(-0.1, 0.1, size=shape)

    # -- vocabulary ------------------------------------------------------

    def encode_tokens(self, tokens: Iterable[str]) -> np.ndarray:
        """Token ids with unknown words mapped to the UNK row."""
        return np.array([self.token_index.get(t.lower(), 0) for t in tokens], dtype=np.int64)

    def trainable_names(self) -> list[str]:
        return [n for n in self.params if n not in FROZEN_TENSORS]

    def frozen_checksum(self) -> str:
        table = np.ascontiguousarray(self.params["embed.table"])
        return hashlib.sha256(table.tobytes()).hexdigest()

    # -- forward ---------------------------------------------------------

    def encode_prompts(self) -> np.ndarray:
        """The n prompt embeddings in model space, (n_prompt, d_t)."""
        e_p, _ = self._encode_prompts_cached()
        return e_p

    def _encode_prompts_cached(self):
        P = self.params["prompt_seeds"]
        hf, cache_f = _lstm_forward(
            P, self.params["lstm_fwd.W"], self.params["lstm_fwd.U"], self.params["lstm_fwd.b"]
        )
        hb_rev, cache_b = _lstm_forward(
            P[::-1], self.params["lstm_bwd.W"], self.params["lstm_bwd.U"], self.params["lstm_bwd.b"]
        )
        hb = hb_rev[::-1]
        Z = np.concatenate([hf, hb], axis=1)  # (n, 2h)
        H1 = Z @ self.params["mlp.W1"].T + self.params["mlp.b1"]
        R = np.maximum(H1, 0.0)
        E = R @ self.params["mlp.W2"].T + self.params["mlp.b2"]
        return E, {"cache_f": cache_f, "cache_b": cache_b, "Z": Z, "H1": H1, "R": R}

    def score_pair(self, token_ids: np.ndarray, views: CandidateViews) -> float:
        """Scalar compatibility score for one (instruction, path) pair."""
        score, _ = self._forward(token_ids, views)
        return float(score)

    def _forward(self, token_ids: np.ndarray, views: CandidateViews):
        cfg = self.config
        if views.features.shape[1] != cfg.d_img:
            raise DataError(
                f"view features have dim {views.features.shape[1]}, model expects {cfg.d_img}"
            )
        p = self.params
        e_p, pcache = self._encode_prompts_cached()
        e_x = p["embed.table"][token_ids]  # (m, d_t)
        T = np.concatenate([e_p, e_x], axis=0)
        F, L = views.features, views.locations
        V = F @ p["vis.img_W"].T + p["vis.img_b"] + L @ p["vis.loc_W"].T + p["vis.loc_b"]

        scale = 1.0 / np.sqrt(cfg.d_t)
        Qt = T @ p["attn_tv.Wq"].T + p["attn_tv.bq"]
        Kt = V @ p["attn_tv.Wk"].T + p["attn_tv.bk"]
        Vt = V @ p["attn_tv.Wv"].T + p["attn_tv.bv"]
        St = Qt @ Kt.T * scale
        At = _softmax_rows(St)
        Ot = At @ Vt

        Qv = V @ p["attn_vt.Wq"].T + p["attn_vt.bq"]
        Kv = T @ p["attn_vt.Wk"].T + p["attn_vt.bk"]
        Vv = T @ p["attn_vt.Wv"].T + p["attn_vt.bv"]
        Sv = Qv @ Kv.T * scale
        Av = _softmax_rows(Sv)
        Ov = Av @ Vv

        t_pool = Ot.mean(axis=0)
        v_pool = Ov.mean(axis=0)
        u = np.concatenate([t_pool, v_pool])
        score = float(p["head.W"] @ u + p["head.b"][0])
        cache = {
            "token_ids": token_ids,
            "pcache": pcache,
            "T": T,
            "F": F,
            "L": L,
            "V": V,
            "Qt": Qt,
            "Kt": Kt,
            "Vt": Vt,
            "At": At,
            "Qv": Qv,
            "Kv": Kv,
            "Vv": Vv,
            "Av": Av,
            "u": u,
            "scale": scale,
        }
        return score, cache

    # -- backward ----------------------------------------------------------

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.params.items()}

    def _backward(self, cache: dict, dscore: float, grads: dict[str, np.ndarray]) -> None:
        """Accumulate d(dscore * score)/d(params) into grads. Never touches embed.table."""
        cfg = self.config
        p = self.params
        n = cfg.n_prompt
        T, V = cache["T"], cache["V"]
        scale = cache["scale"]

        u = cache["u"]
        grads["head.W"] += u * dscore
        grads["head.b"] += np.array([dscore])
        du = p["head.W"] * dscore
        dt_pool, dv_pool = du[: cfg.d_t], du[cfg.d_t :]
        dOt = np.tile(dt_pool / T.shape[0], (T.shape[0], 1))
        dOv = np.tile(dv_pool / V.shape[0], (V.shape[0], 1))

        dT = np.zeros_like(T)
        dV = np.zeros_like(V)

        # vision-queries-text block
        dAv = dOv @ cache["Vv"].T
        dVv = cache["Av"].T @ dOv
        dSv = _softmax_rows_backward(cache["Av"], dAv)
        dQv = dSv @ cache["Kv"] * scale
        dKv = dSv.T @ cache["Qv"] * scale
        grads["attn_vt.Wq"] += dQv.T @ V
        grads["attn_vt.bq"] += dQv.sum(axis=0)
        dV += dQv @ p["attn_vt.Wq"]
        grads["attn_vt.Wk"] += dKv.T @ T
        grads["attn_vt.bk"] += dKv.sum(axis=0)
        dT += dKv @ p["attn_vt.Wk"]
        grads["attn_vt.Wv"] += dVv.T @ T
        grads["attn_vt.bv"] += dVv.sum(axis=0)
        dT += dVv @ p["attn_vt.Wv"]

        # text-queries-vision block
        dAt = dOt @ cache["Vt"].T
        dVt = cache["At"].T @ dOt
        dSt = _softmax_rows_backward(cache["At"], dAt)
        dQt = dSt @ cache["Kt"] * scale
        dKt = dSt.T @ cache["Qt"] * scale
        grads["attn_tv.Wq"] += dQt.T @ T
        grads["attn_tv.bq"] += dQt.sum(axis=0)
        dT += dQt @ p["attn_tv.Wq"]
        grads["attn_tv.Wk"] += dKt.T @ V
        grads["attn_tv.bk"] += dKt.sum(axis=0)
        dV += dKt @ p["attn_tv.Wk"]
        grads["attn_tv.Wv"] += dVt.T @ V
        grads["attn_tv.bv"] += dVt.sum(axis=0)
        dV += dVt @ p["attn_tv.Wv"]

        # visual embedder
        grads["vis.img_W"] += dV.T @ cache["F"]
        grads["vis.img_b"] += dV.sum(axis=0)
        grads["vis.loc_W"] += dV.T @ cache["L"]
        grads["vis.loc_b"] += dV.sum(axis=0)

        # text stream: prompt rows flow into the encoder, word rows are frozen
        dE_p = dT[:n]
        pc = cache["pcache"]
        grads["mlp.W2"] += dE_p.T @ pc["R"]
        grads["mlp.b2"] += dE_p.sum(axis=0)
        dR = dE_p @ p["mlp.W2"]
        dH1 = dR * (pc["H1"] > 0.0)
        grads["mlp.W1"] += dH1.T @ pc["Z"]
        grads["mlp.b1"] += dH1.sum(axis=0)
        dZ = dH1 @ p["mlp.W1"]
        h = cfg.d_h
        dhf = dZ[:, :h]
        dhb_rev = dZ[:, h:][::-1]
        dXf, dWf, dUf, dbf = _lstm_backward(dhf, pc["cache_f"], p["lstm_fwd.W"], p["lstm_fwd.U"])
        dXb, dWb, dUb, dbb = _lstm_backward(dhb_rev, pc["cache_b"], p["lstm_bwd.W"], p["lstm_bwd.U"])
        grads["lstm_fwd.W"] += dWf
        grads["lstm_fwd.U"] += dUf
        grads["lstm_fwd.b"] += dbf
        grads["lstm_bwd.W"] += dWb
        grads["lstm_bwd.U"] += dUb
        grads["lstm_bwd.b"] += dbb
        grads["prompt_seeds"] += dXf + dXb[::-1]


def _softmax_rows(S: np.ndarray) -> np.ndarray:
    shifted = S - S.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_rows_backward(A: np.ndarray, dA: np.ndarray) -> np.ndarray:
    return A * (dA - (A * dA).sum(axis=1, keepdims=True))


def _lstm_forward(X: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray):
    """Run the cell over X ((T, d_in)); returns hidden states (T, h) and a cache."""
    T_steps, _ = X.shape
    h = U.shape[1]
    H = np.zeros((T_steps, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    steps = []
    for t in range(T_steps):
        z = W @ X[t] + U @ h_prev + b
        i = _sigmoid(z[0 * h : 1 * h])
        f = _sigmoid(z[1 * h : 2 * h])
        g = np.tanh(z[2 * h : 3 * h])
        o = _sigmoid(z[3 * h : 4 * h])
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        H[t] = o * tanh_c
        steps.append(
            {"x": X[t], "h_prev": h_prev, "c_prev": c_prev, "i": i, "f": f, "g": g, "o": o, "tanh_c": tanh_c}
        )
        h_prev = H[t]
        c_prev = c
    return H, steps


def _lstm_backward(dH: np.ndarray, steps: list[dict], W: np.ndarray, U: np.ndarray):
    T_steps = len(steps)
    h = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(GATES * h)
    dX = np.zeros((T_steps, W.shape[1]))
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(T_steps - 1, -1, -1):
        s = steps[t]
        dh = dH[t] + dh_next
        do = dh * s["tanh_c"]
        dc = dh * s["o"] * (1.0 - s["tanh_c"] ** 2) + dc_next
        di = dc * s["g"]
        df = dc * s["c_prev"]
        dg = dc * s["i"]
        dz = np.concatenate(
            [
                di * s["i"] * (1.0 - s["i"]),
                df * s["f"] * (1.0 - s["f"]),
                dg * (1.0 - s["g"] ** 2),
                do * s["o"] * (1.0 - s["o"]),
            ]
        )
        dW += np.outer(dz, s["x"])
        dU += np.outer(dz, s["h_prev"])
        db += dz
        dX[t] = W.T @ dz
        dh_next = U.T @ dz
        dc_next = dc * s["f"]
    return dX, dW, dU, db


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


# -- loss and training ----------------------------------------------------------


def ranking_loss(scores: Sequence[float], positive_index: int) -> float:
    loss, _ = ranking_loss_with_grad(scores, positive_index)
    return loss


def ranking_loss_with_grad(scores: Sequence[float], positive_index: int):
    """Softmax cross-entropy over candidate scores, with d(loss)/d(scores)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or len(s) < 2:
        raise ValueError("need at least 2 candidate scores")
    if not 0 <= positive_index < len(s):
        raise ValueError("positive_index out of range")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite scores: {s}")
    m = s.max()
    z = np.exp(s - m)
    lse = m + np.log(z.sum())
    loss = float(lse - s[positive_index])
    dscores = z / z.sum()
    dscores[positive_index] -= 1.0
    return loss, dscores


def backward(model: PromptRankingModel, batch: Sequence[RankingExample]):
    """Mean ranking loss over the batch and its gradient bundle.

    The returned dict has an entry per parameter tensor; the frozen embedding
    table's entry is identically zero.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = model.zero_grads()
    total = 0.0
    weight = 1.0 / len(batch)
    for example in batch:
        scores = []
        caches = []
        for cand in example.candidates:
            score, cache = model._forward(example.token_ids, cand)
            scores.append(score)
            caches.append(cache)
        loss, dscores = ranking_loss_with_grad(scores, example.positive_index)
        total += loss * weight
        for cache, ds in zip(caches, dscores):
            if ds != 0.0:
                model._backward(cache, ds * weight, grads)
    return total, grads


def batch_loss(model: PromptRankingModel, batch: Sequence[RankingExample]) -> float:
    """Forward-only mean ranking loss (the quantity finite differences probe)."""
    total = 0.0
    for example in batch:
        scores = [model.score_pair(example.token_ids, c) for c in example.candidates]
        total += ranking_loss(scores, example.positive_index)
    return total / len(batch)


def select_path(
    model: PromptRankingModel, token_ids: np.ndarray, candidates: Sequence[CandidateViews]
) -> int:
    """Index of the best-scoring candidate; ties go to the lowest index."""
    if not candidates:
        raise ValueError("need at least one candidate")
    scores = np.array([model.score_pair(token_ids, c) for c in candidates])
    return int(np.argmax(scores))


@dataclass
class OptimizerState:
    """Plain gradient descent; step counts for checkpoint bookkeeping."""

    learning_rate: float
    step: int = 0


def train_step(
    model: PromptRankingModel, opt: OptimizerState, batch: Sequence[RankingExample]
) -> float:
    """One full-batch descent step; frozen tensors stay bit-identical."""
    loss, grads = backward(model, batch)
    if not np.isfinite(loss):
        raise CheckError(f"non-finite loss {loss!r}; aborting the step")
    for name in model.trainable_names():
        model.params[name] -= opt.learning_rate * grads[name]
    opt.step += 1
    return loss


def train(
    model: PromptRankingModel,
    opt: OptimizerState,
    batch: Sequence[RankingExample],
    steps: int,
    on_step: Callable[[int, float], None] | None = None,
) -> list[float]:
    losses = []
    for _ in range(steps):
        loss = train_step(model, opt, batch)
        losses.append(loss)
        if on_step is not None:
            on_step(opt.step, loss)
    return losses


# -- gradient verification --------------------------------------------------------


GRAD_CHECK_FLOOR = 1e-6


def gradient_check(
    model: PromptRankingModel,
    batch: Sequence[RankingExample],
    step_size: float = 1e-4,
    corrupt: str | None = None,
) -> dict[str, float]:
    """Max relative error per trainable tensor, analytic vs central differences.

    The denominator is floored at GRAD_CHECK_FLOOR so entries whose true
    gradient sits at the finite-difference noise level (~1e-12 for these loss
    magnitudes) are compared absolutely instead of blowing up the ratio.

    `corrupt` names a tensor whose analytic gradient is deliberately biased,
    as a negative control that the check can fail.
    """
    _, grads = backward(model, batch)
    if corrupt is not None:
        if corrupt not in grads:
            raise ValueError(f"unknown tensor {corrupt!r}")
        grads[corrupt] = grads[corrupt] + 0.05
    report: dict[str, float] = {}
    for name in model.trainable_names():
        tensor = model.params[name]
        worst = 0.0
        flat = tensor.reshape(-1)
        analytic = grads[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step_size
            up = batch_loss(model, batch)
            flat[idx] = original - step_size
            down = batch_loss(model, batch)
            flat[idx] = original
            numeric = (up - down) / (2.0 * step_size)
            denom = max(abs(analytic[idx]), abs(numeric), GRAD_CHECK_FLOOR)
            worst = max(worst, abs(analytic[idx] - numeric) / denom)
        report[name] = worst
    return report


# -- batches from synthesized data -------------------------------------------------


def views_for_trajectory(traj: Trajectory, d_img: int) -> CandidateViews:
    """Deterministic synthetic observations for every viewpoint of a path."""
    feats = []
    locs = []
    for vp_id, pose in zip(traj.viewpoint_ids, traj.poses):
        view_id = f"{vp_id}#{view_index_for_pose(pose)}"
        feats.append(synthetic_feature(view_id, d_img))
        locs.append(pose.orientation_tuple())
    return CandidateViews(features=np.array(feats), locations=np.array(locs, dtype=np.float64))


def build_vocab(instructions: Iterable[str]) -> tuple[str, ...]:
    """UNK plus the sorted lowercase token set of the corpus."""
    tokens: set[str] = set()
    for text in instructions:
        tokens.update(t.lower() for t in tokenize(text))
    return (UNK_TOKEN,) + tuple(sorted(tokens))


def batch_from_records(records: Sequence, graph: NavGraph, config: ModelConfig, model=None):
    """Ranking examples from dataset records; negatives' poses come from the graph.

    The positive's slot rotates with the record index so a constant-index
    guess can never look trained. Returns (model, batch); pass an existing
    model to reuse its vocabulary.
    """
    if model is None:
        vocab = build_vocab(rec.instruction for rec in records)
        model = PromptRankingModel(config, vocab)
    batch = []
    for i, rec in enumerate(records):
        token_ids = model.encode_tokens(tokenize(rec.instruction))
        poses = [Pose(heading=h, elevation=e) for h, e in rec.poses]
        positive = Trajectory(viewpoint_ids=rec.viewpoints, poses=tuple(poses))
        cands = [views_for_trajectory(positive, config.d_img)]
        for neg_ids in rec.negatives:
            neg = path_to_trajectory(graph, list(neg_ids))
            cands.append(views_for_trajectory(neg, config.d_img))
        if len(cands) < 2:
            raise DataError(f"record {i} has no negatives; ranking needs >= 2 candidates")
        pos_index = i % len(cands)
        cands[0], cands[pos_index] = cands[pos_index], cands[0]
        # after the swap the positive sits at pos_index
        batch.append(
            RankingExample(
                token_ids=token_ids,
                candidates=tuple(cands),
                positive_index=pos_index,
            )
        )
    return model, batch


# -- checkpointing ------------------------------------------------------------------


CHECKPOINT_HEADER = "#navsynth-checkpoint v1"


def save_checkpoint(model: PromptRankingModel, opt: OptimizerState, sink: IO[str]) -> None:
    """Deterministic text dump; float64 values are written as exact hex."""
    meta = {
        "config": {
            "n_prompt": model.config.n_prompt,
            "d_p": model.config.d_p,
            "d_h": model.config.d_h,
            "d_m": model.config.d_m,
            "d_t": model.config.d_t,
            "d_img": model.config.d_img,
            "seed": model.config.seed,
        },
        "frozen": list(FROZEN_TENSORS),
        "learning_rate": opt.learning_rate,
        "step": opt.step,
        "vocab": list(model.vocab),
    }
    sink.write(CHECKPOINT_HEADER + "\n")
    sink.write(json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    for name in sorted(model.params):
        arr = model.params[name]
        shape = ",".join(str(d) for d in arr.shape)
        sink.write(f"T {name} {shape}\n")
        sink.write(" ".join(v.hex() for v in arr.reshape(-1).tolist()) + "\n")


def load_checkpoint(source: IO[str] | str) -> tuple[PromptRankingModel, OptimizerState]:
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise DataError(f"missing checkpoint header {CHECKPOINT_HEADER!r}")
    try:
        meta = json.loads(lines[1])
        config = ModelConfig(**meta["config"])
        model = PromptRankingModel(config, meta["vocab"])
        opt = OptimizerState(learning_rate=float(meta["learning_rate"]), step=int(meta["step"]))
    except (IndexError, KeyError, ValueError, TypeError) as e:
        raise DataError(f"bad checkpoint metadata: {e}") from None
    idx = 2
    seen = set()
    while idx < len(lines):
        header = lines[idx]
        if not header.strip():
            idx += 1
            continue
        parts = header.split()
        if len(parts) != 3 or parts[0] != "T":
            raise DataError(f"bad tensor header at checkpoint line {idx + 1}")
        name, shape_s = parts[1], parts[2]
        if name not in model.params:
            raise DataError(f"unknown tensor {name!r} in checkpoint")
        shape = tuple(int(d) for d in shape_s.split(","))
        if shape != model.params[name].shape:
            raise DataError(f"tensor {name!r} has shape {shape}, expected {model.params[name].shape}")
        try:
            values = [float.fromhex(v) for v in lines[idx + 1].split()]
        except (IndexError, ValueError) as e:
            raise DataError(f"bad tensor data for {name!r}: {e}") from None
        if len(values) != model.params[name].size:
            raise DataError(f"tensor {name!r} has {len(values)} values, expected {model.params[name].size}")
        model.params[name] = np.array(values, dtype=np.float64).reshape(shape)
        seen.add(name)
        idx += 2
    missing = set(model.params) - seen
    if missing:
        raise DataError(f"checkpoint missing tensors: {sorted(missing)}")
    return model, opt
