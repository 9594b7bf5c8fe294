"""Command-line front door for the synthesis pipeline and the toy model.

Progress and diagnostics go to stderr; data artifacts go to files (stats,
grad-check, and score output also print to stdout for piping). Exit codes:

    0  success
    2  configuration or usage error
    3  input/output or data-format error
    4  scorer backend error
    5  a verification command failed its bound
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import filler, model as toy, navgraph, scorer, templates
from .config import RunConfig, load_config
from .errors import BackendError, CheckError, ConfigError, DataError

GRAD_CHECK_BOUND = 1e-4

EXIT_CODES = (
    (ConfigError, 2),
    (DataError, 3),
    (BackendError, 4),
    (CheckError, 5),
)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_graph(path: str) -> navgraph.NavGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return navgraph.load_graph(fh)


def _load_lexicon(path: str) -> templates.Lexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return templates.load_lexicon(fh)


def _load_bank(path: str) -> list[templates.Template]:
    with open(path, "r", encoding="utf-8") as fh:
        bank = templates.load_bank(fh)
    if not bank:
        raise DataError(f"template bank {path} is empty")
    return bank


def _build_backend(cfg: RunConfig) -> scorer.ScorerBackend:
    if cfg.backend == "mock":
        seed = cfg.backend_seed if cfg.backend_seed is not None else cfg.seed
        if seed is None:
            raise ConfigError("mock backend needs backend_seed or seed")
        return scorer.CachingBackend(scorer.MockBackend(seed))
    if cfg.backend == "fixture":
        cfg.require_paths("backend_table")
        with open(cfg.backend_table, "r", encoding="utf-8") as fh:
            table = scorer.load_score_table(fh)
        return scorer.CachingBackend(scorer.TableBackend(table))
    if cfg.backend == "remote":
        cfg.require("backend_url")
        remote = scorer.RemoteBackend(cfg.backend_url)
        health = remote.health()
        _info(f"scoring service ok: model {health.get('model', '?')}")
        return scorer.CachingBackend(remote)
    raise ConfigError(f"unknown backend {cfg.backend!r} (expected mock, fixture, or remote)")


# -- commands -----------------------------------------------------------------


def cmd_build_templates(args) -> int:
    try:
        seed_lines = Path(args.seeds).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read seed instructions: {e}") from None
    lexicon = _load_lexicon(args.lexicon)
    instructions = [line.strip() for line in seed_lines if line.strip()]
    bank, rejected = templates.build_bank(instructions, lexicon)
    if not bank:
        raise DataError(f"no usable templates in {args.seeds} ({rejected} rejected)")
    with open(args.out, "w", encoding="utf-8") as fh:
        templates.save_bank(bank, fh)
    _info(f"wrote {len(bank)} templates ({rejected} rejected) to {args.out}")
    return 0


def cmd_synthesize(args) -> int:
    cfg = load_config(
        args.config,
        {
            "graph": args.graph,
            "lexicon": args.lexicon,
            "templates": args.templates,
            "backend": args.backend,
            "backend_url": args.backend_url,
            "backend_table": args.backend_table,
            "backend_seed": args.backend_seed,
            "seed": args.seed,
            "count": args.count,
            "negatives_k": args.negatives_k,
            "eps": args.eps,
            "d_img": args.d_img,
            "out": args.out,
        },
    )
    cfg.require("seed", "out", "count")
    cfg.require_paths("graph", "lexicon", "templates")
    graph = _load_graph(cfg.graph)
    lexicon = _load_lexicon(cfg.lexicon)
    bank = _load_bank(cfg.templates)
    backend = _build_backend(cfg)

    every = max(1, cfg.count // 10)

    def progress(i: int) -> None:
        if (i + 1) % every == 0 or i + 1 == cfg.count:
            _info(f"synthesized {i + 1}/{cfg.count}")

    tmp = cfg.out + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            count = ds.emit(
                filler.synthesize_records(
                    graph,
                    bank,
                    lexicon,
                    backend,
                    seed=cfg.seed,
                    count=cfg.count,
                    k_negatives=cfg.negatives_k,
                    eps=cfg.eps,
                    feature_dim=cfg.d_img,
                    on_record=progress,
                ),
                fh,
            )
        os.replace(tmp, cfg.out)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    _info(f"wrote {count} records to {cfg.out}")
    return 0


def cmd_stats(args) -> int:
    with open(args.dataset, "r", encoding="utf-8") as fh:
        stats = ds.compute_stats(ds.parse(fh))
    text = stats.to_json()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        _info(f"wrote stats to {args.out}")
    return 0


def cmd_negatives(args) -> int:
    graph = _load_graph(args.graph)
    path = graph.shortest_path(args.start, args.end)
    if path is None or len(path) < 2:
        raise DataError(f"no path from {args.start!r} to {args.end!r}")
    from .sampler import path_to_trajectory

    positive = path_to_trajectory(graph, path)
    rng = np.random.default_rng(args.seed)
    negatives = ds.sample_hard_negatives(graph, positive, args.k, rng, eps=args.eps)
    lines = [json.dumps(list(neg.viewpoint_ids)) for neg in negatives]
    output = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
        _info(f"wrote {len(negatives)} negatives to {args.out}")
    else:
        sys.stdout.write(output)
    return 0


def cmd_train_toy(args) -> int:
    cfg = load_config(
        args.config,
        {
            "graph": args.graph,
            "seed": args.seed,
            "n_prompt": args.n_prompt,
            "d_p": args.d_p,
            "d_h": args.d_h,
            "d_m": args.d_m,
            "d_t": args.d_t,
            "d_img": args.d_img,
            "learning_rate": args.learning_rate,
            "steps": args.steps,
        },
    )
    cfg.require_paths("graph")
    with open(args.dataset, "r", encoding="utf-8") as fh:
        records = list(ds.parse(fh))
    if args.pairs is not None:
        records = records[: args.pairs]
    if not records:
        raise DataError(f"dataset {args.dataset} has no records")
    graph = _load_graph(cfg.graph)

    if args.resume:
        with open(args.resume, "r", encoding="utf-8") as fh:
            net, opt = toy.load_checkpoint(fh)
        _, batch = toy.batch_from_records(records, graph, net.config, model=net)
        _info(f"resumed from {args.resume} at step {opt.step}")
    else:
        cfg.require("seed")
        mcfg = toy.ModelConfig(
            n_prompt=cfg.n_prompt,
            d_p=cfg.d_p,
            d_h=cfg.d_h,
            d_m=cfg.d_m,
            d_t=cfg.d_t,
            d_img=cfg.d_img,
            seed=cfg.seed,
        )
        net, batch = toy.batch_from_records(records, graph, mcfg)
        opt = toy.OptimizerState(learning_rate=cfg.learning_rate)

    log_lines: list[str] = []

    def on_step(step: int, loss: float) -> None:
        log_lines.append(f"{step} {loss!r}")

    losses = toy.train(net, opt, batch, steps=cfg.steps, on_step=on_step)
    correct = sum(
        1
        for ex in batch
        if toy.select_path(net, ex.token_ids, ex.candidates) == ex.positive_index
    )
    _info(f"final loss {losses[-1]:.6f}; argmax correct on {correct}/{len(batch)} pairs")

    if args.metrics:
        Path(args.metrics).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
        _info(f"wrote metrics to {args.metrics}")
    if args.checkpoint:
        with open(args.checkpoint, "w", encoding="utf-8", newline="\n") as fh:
            toy.save_checkpoint(net, opt, fh)
        _info(f"wrote checkpoint to {args.checkpoint}")
    return 0


def _grad_check_batch(seed: int, cfg: toy.ModelConfig):
    """Small deterministic scenario exercising every tensor, for grad-check."""
    rng = np.random.default_rng(seed)
    vocab = (toy.UNK_TOKEN, "walk", "past", "kitchen", "turn", "left")
    net = toy.PromptRankingModel(cfg, vocab)
    batch = []
    for k in range(2):
        token_ids = rng.integers(0, len(vocab), size=4 + k)
        candidates = []
        for _ in range(2):
            views = 2 + k
            feats = rng.uniform(-1.0, 1.0, size=(views, cfg.d_img))
            headings = rng.uniform(0.0, 2 * np.pi, size=views)
            elevs = rng.uniform(-0.4, 0.4, size=views)
            locs = np.stack(
                [np.sin(headings), np.cos(headings), np.sin(elevs), np.cos(elevs)], axis=1
            )
            candidates.append(toy.CandidateViews(features=feats, locations=locs))
        batch.append(
            toy.RankingExample(
                token_ids=token_ids, candidates=tuple(candidates), positive_index=k % 2
            )
        )
    return net, batch


def cmd_grad_check(args) -> int:
    cfg = toy.ModelConfig(
        n_prompt=args.n_prompt,
        d_p=args.d_p,
        d_h=args.d_h,
        d_m=args.d_m,
        d_t=args.d_t,
        d_img=args.d_img,
        seed=args.seed,
    )
    net, batch = _grad_check_batch(args.seed, cfg)
    report = toy.gradient_check(net, batch, corrupt=args.corrupt_tensor)
    worst = max(report.values())
    for name in sorted(report):
        print(f"{name:20s} max_rel_err {report[name]:.3e}")
    print(f"{'WORST':20s} max_rel_err {worst:.3e} (bound {GRAD_CHECK_BOUND:.0e})")
    if worst >= GRAD_CHECK_BOUND:
        raise CheckError(f"gradient check failed: {worst:.3e} >= {GRAD_CHECK_BOUND:.0e}")
    return 0


def cmd_score(args) -> int:
    cfg = load_config(
        args.config,
        {
            "backend": args.backend,
            "backend_url": args.backend_url,
            "backend_table": args.backend_table,
            "backend_seed": args.backend_seed,
            "seed": args.seed,
        },
    )
    backend = _build_backend(cfg)
    candidates = [c.strip() for c in args.candidates.split(",") if c.strip()]
    if not candidates:
        raise ConfigError("no candidate phrases given")
    if args.image:
        view = scorer.ViewObservation(view_id=args.view, image_ref=args.image)
    else:
        view = scorer.ViewObservation(
            view_id=args.view, feature=scorer.synthetic_feature(args.view, cfg.d_img)
        )
    scores = scorer.score_candidates(view, candidates, backend)
    print(json.dumps({"scores": scores, "candidates": candidates}, sort_keys=True))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navsynth",
        description="Synthesize navigation instruction data and train the toy ranking model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-templates", help="extract a template bank from seed instructions")
    p.add_argument("--seeds", required=True, help="file of seed instructions, one per line")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_templates)

    p = sub.add_parser("synthesize", help="generate an instruction-trajectory dataset")
    p.add_argument("--config")
    p.add_argument("--graph")
    p.add_argument("--lexicon")
    p.add_argument("--templates")
    p.add_argument("--backend", choices=["mock", "fixture", "remote"])
    p.add_argument("--backend-url", dest="backend_url")
    p.add_argument("--backend-table", dest="backend_table")
    p.add_argument("--backend-seed", dest="backend_seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--negatives-k", dest="negatives_k", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--d-img", dest="d_img", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("stats", help="histogram an existing dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("negatives", help="sample hard negatives for one positive path")
    p.add_argument("--graph", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--eps", type=float, default=ds.DEFAULT_ENDPOINT_SEPARATION)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_negatives)

    p = sub.add_parser("train-toy", help="overfit the toy ranking model on a small dataset")
    p.add_argument("--config")
    p.add_argument("--dataset", required=True)
    p.add_argument("--graph")
    p.add_argument("--pairs", type=int, default=4)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--n-prompt", dest="n_prompt", type=int)
    p.add_argument("--d-p", dest="d_p", type=int)
    p.add_argument("--d-h", dest="d_h", type=int)
    p.add_argument("--d-m", dest="d_m", type=int)
    p.add_argument("--d-t", dest="d_t", type=int)
    p.add_argument("--d-img", dest="d_img", type=int)
    p.add_argument("--checkpoint", help="write the final model here")
    p.add_argument("--metrics", help="write per-step losses here")
    p.add_argument("--resume", help="continue training from this checkpoint")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("grad-check", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-prompt", dest="n_prompt", type=int, default=3)
    p.add_argument("--d-p", dest="d_p", type=int, default=4)
    p.add_argument("--d-h", dest="d_h", type=int, default=4)
    p.add_argument("--d-m", dest="d_m", type=int, default=4)
    p.add_argument("--d-t", dest="d_t", type=int, default=4)
    p.add_argument("--d-img", dest="d_img", type=int, default=6)
    p.add_argument("--corrupt-tensor", dest="corrupt_tensor", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("score", help="one-shot scorer query for debugging")
    p.add_argument("--config")
    p.add_argument("--backend", choices=["mock", "fixture", "remote"])
    p.add_argument("--backend-url", dest="backend_url")
    p.add_argument("--backend-table", dest="backend_table")
    p.add_argument("--backend-seed", dest="backend_seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--view", required=True, help="view id, e.g. vp_1#0")
    p.add_argument("--image", help="image path for remote scoring")
    p.add_argument("--candidates", required=True, help="comma-separated phrases")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except tuple(exc for exc, _ in EXIT_CODES) as e:
        for exc_type, code in EXIT_CODES:
            if isinstance(e, exc_type):
                print(f"error: {e}", file=sys.stderr)
                return code
        raise
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
