"""Command-line interface: one binary, one subcommand per workflow.

Structured results go to stdout (JSON for single-result commands, CSV for
tables); logs go to stderr.  Exit codes: 0 success, 2 input or validation
error, 3 resource-limit refusal.  Identical argv and seed reproduce
byte-identical output up to the time_used_ms field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from .errors import CrossCheckError, InputError, LimitError
from .gadgets import GadgetParams, adjacency, read_edge_list, realize_atkknn
from .geometry import NormSpec
from .greedy import GreedyConfig, git2achoppa
from .influence import AttackDelta, Insertion, construct_irs, score
from .knn import Dataset, read_dataset_csv, write_dataset_csv
from .oracle import OracleLimits, brute_attack, brute_mis, brute_single
from .experiments import run_defense, run_synth_grid
from .search import SearchBudget, choppa
from . import experiments


def _add_common(parser: argparse.ArgumentParser, norm=True, k=True) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomized steps")
    if norm:
        # the library accepts any finite p > 1; the CLI exposes the two
        # norms the experiment suite covers
        parser.add_argument("--norm", default="l2", choices=["l2", "linf"],
                            help="distance norm")
    if k:
        parser.add_argument("--k", type=int, default=1, help="neighbors consulted (odd)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logs")
    parser.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1,
        help="upper bound on internal parallelism (table runs only)",
    )


def _parse_norm(text: str) -> NormSpec:
    return NormSpec.from_string(text)


def _check_k(k: int) -> int:
    if k < 1 or k % 2 == 0:
        raise InputError(f"--k must be a positive odd integer, got {k}")
    return k


def _config_echo(args: argparse.Namespace) -> dict:
    skip = {"func"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or callable(value):
            continue
        out[key] = value
    return out


def _emit_json(payload: dict, args) -> None:
    payload["config"] = _config_echo(args)
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _vector(point) -> list[float]:
    return [float(v) for v in np.asarray(point, dtype=float)]


def _time_ms(value) -> float | None:
    if value is None or value <= 0:
        return None
    return value / 1000.0


def _log(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_irs(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    irs = construct_irs(train, targets, args.yplus, k, norm)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target_index", "center", "radius", "value", "cost"])
    for b in irs:
        writer.writerow(
            [
                b.target_index,
                ";".join(repr(float(v)) for v in b.ball.center),
                repr(float(b.ball.radius)),
                b.value,
                b.cost,
            ]
        )
    _write_text(buf.getvalue(), args.out)
    return 0


def _write_text(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_attack_one(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    mult = args.mult if args.mult is not None else math.ceil(k / 2)
    started = time.monotonic()
    irs = construct_irs(train, targets, args.yplus, k, norm)
    active = [b for b in irs if b.ball.radius > 0.0]
    outcome = choppa(
        active,
        SearchBudget(wall_time=_time_ms(args.time_ms), max_multiplicity=mult),
        norm,
        seed=args.seed,
    )
    elapsed_ms = (time.monotonic() - started) * 1000.0
    _emit_json(
        {
            "point": None if outcome.best_point is None else _vector(outcome.best_point),
            "multiplicity": outcome.best_multiplicity,
            "tsi": outcome.best_tsi,
            "completed": outcome.completed,
            "levels": outcome.levels_explored,
            "feasibility_calls": outcome.feasibility_calls,
            "time_used_ms": round(elapsed_ms, 3),
        },
        args,
    )
    return 0


def _cmd_attack(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    cfg = GreedyConfig(
        budget=args.budget,
        total_time=_time_ms(args.time_ms),
        k=k,
        norm=norm,
        y_plus=args.yplus,
        seed=args.seed,
    )
    started = time.monotonic()
    report = git2achoppa(train, targets, cfg)
    elapsed_ms = (time.monotonic() - started) * 1000.0
    if args.delta_out:
        if report.delta.insertions:
            delta_ds = Dataset(
                np.stack([ins.point for ins in report.delta.insertions]),
                tuple(ins.label for ins in report.delta.insertions),
                np.array([ins.multiplicity for ins in report.delta.insertions], dtype=np.int64),
            )
        else:
            delta_ds = None
        if delta_ds is None:
            _write_text(
                ",".join([f"f{i}" for i in range(train.dimension)] + ["label", "mult"]) + "\n",
                args.delta_out,
            )
        else:
            write_dataset_csv(delta_ds, args.delta_out)
    _emit_json(
        {
            "insertions": [
                {
                    "point": _vector(ins.point),
                    "label": ins.label,
                    "multiplicity": ins.multiplicity,
                }
                for ins in report.delta.insertions
            ],
            "score_before": report.score_before,
            "score_after": report.score_after,
            "tsi_total": report.tsi_total,
            "bound_factor": report.bound_factor,
            "calls": [
                {
                    "tsi": c.best_tsi,
                    "multiplicity": c.best_multiplicity,
                    "completed": c.completed,
                    "levels": c.levels_explored,
                    "feasibility_calls": c.feasibility_calls,
                }
                for c in report.calls
            ],
            "time_used_ms": round(elapsed_ms, 3),
        },
        args,
    )
    return 0


def _cmd_eval(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    delta = AttackDelta()
    if args.delta:
        delta_ds = read_dataset_csv(args.delta)
        delta = AttackDelta(
            tuple(
                Insertion(delta_ds.features[i], delta_ds.labels[i],
                          int(delta_ds.multiplicities[i]))
                for i in range(delta_ds.n)
            )
        )
    before = score(AttackDelta(), targets, train, k, norm)
    after = score(delta, targets, train, k, norm)
    _emit_json({"score_before": before, "score_after": after}, args)
    return 0


def _cmd_oracle(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    limits = OracleLimits()
    if args.mode == "mis":
        if not args.graph:
            raise InputError("--graph is required for --mode mis")
        params = read_edge_list(args.graph, args.n)
        _emit_json({"mis": brute_mis(adjacency(params), limits)}, args)
        return 0
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    if args.mode == "single":
        mult = args.mult if args.mult is not None else math.ceil(k / 2)
        irs = construct_irs(train, targets, args.yplus, k, norm)
        best, witness = brute_single(irs, mult, norm, limits, seed=args.seed)
        _emit_json(
            {"best_tsi": best, "witness": None if witness is None else _vector(witness)},
            args,
        )
        return 0
    best = brute_attack(train, targets, k, args.budget, norm, limits, seed=args.seed)
    _emit_json({"best_score": best}, args)
    return 0


def _cmd_gadget(args) -> int:
    params = read_edge_list(args.graph, args.n)
    params = GadgetParams(
        n=params.n, edges=params.edges, r=args.r,
        epsilon=args.eps, p=args.p,
    )
    train, targets = realize_atkknn(params)
    write_dataset_csv(train, args.train_out)
    write_dataset_csv(targets, args.targets_out)
    mis = None
    limits = OracleLimits()
    if params.n <= limits.max_vertices:
        mis = brute_mis(adjacency(params), limits)
    _emit_json(
        {
            "n": params.n,
            "m": len(params.edges),
            "r": params.r,
            "epsilon": params.eps,
            "p": params.p,
            "predicted_max_intersection": (
                None if mis is None else params.n * len(params.edges) + mis
            ),
            "mis": mis,
            "train_csv": args.train_out,
            "targets_csv": args.targets_out,
        },
        args,
    )
    return 0


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _figure_path(args) -> str | None:
    if args.figure_out:
        return args.figure_out
    if args.out:
        stem, _ = os.path.splitext(args.out)
        return stem + ".png"
    return None


def _cmd_synth(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    cells = run_synth_grid(
        families,
        _int_list(args.m_list),
        _int_list(args.d_list),
        k,
        norm,
        trials=args.trials,
        seed=args.seed,
        time_per_attack=_time_ms(args.time_ms),
        threads=args.threads,
    )
    text = _rows_to_csv(
        ["family", "norm", "m", "d", "trials", "mean_score", "sem", "max_score", "completed_all"],
        [
            [c.family, c.norm, c.m, c.d, c.trials, repr(c.mean_score), repr(c.sem),
             c.max_score, c.completed_all]
            for c in cells
        ],
    )
    _write_text(text, args.out)
    fig_path = _figure_path(args)
    if fig_path:
        from .figures import render_synth_figure

        render_synth_figure(cells, fig_path)
        _log(args, f"figure written to {fig_path}")
    return 0


def _cmd_pca(args) -> int:
    data = read_dataset_csv(args.infile)
    if args.model_in:
        with open(args.model_in, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        model = experiments.PcaModel(
            mean=np.asarray(raw["mean"], dtype=float),
            components=np.asarray(raw["components"], dtype=float),
            explained_variance_ratio=float(raw["explained_variance_ratio"]),
        )
    else:
        if args.d_prime is None:
            raise InputError("provide --d-prime to fit or --model-in to reuse a model")
        model = experiments.pca_fit(data, args.d_prime)
    if args.model_out:
        with open(args.model_out, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "mean": _vector(model.mean),
                    "components": [_vector(row) for row in model.components],
                    "explained_variance_ratio": float(model.explained_variance_ratio),
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    if args.out:
        write_dataset_csv(experiments.pca_transform(model, data), args.out)
    _emit_json(
        {
            "d": model.d,
            "d_prime": model.d_prime,
            "explained_variance_ratio": float(model.explained_variance_ratio),
            "transformed_csv": args.out,
            "model_json": args.model_out,
        },
        args,
    )
    return 0


def _cmd_defend(args) -> int:
    norm = _parse_norm(args.norm)
    k = _check_k(args.k)
    train = read_dataset_csv(args.train)
    targets = read_dataset_csv(args.targets)
    holdout = read_dataset_csv(args.holdout)
    rows = run_defense(
        train,
        targets,
        holdout,
        _int_list(args.d_primes),
        _int_list(args.budgets),
        k,
        norm,
        time_budget=_time_ms(args.time_ms),
        seed=args.seed,
        threads=args.threads,
    )
    text = _rows_to_csv(
        ["d_prime", "explained_variance", "loss", "budget", "score_fraction",
         "score_after", "targets_total", "completed_all"],
        [
            [r.d_prime, repr(r.explained_variance), repr(r.loss), r.budget,
             repr(r.score_fraction), r.score_after, r.targets_total, r.completed_all]
            for r in rows
        ],
    )
    _write_text(text, args.out)
    fig_path = _figure_path(args)
    if fig_path:
        from .figures import render_defense_figure

        render_defense_figure(rows, fig_path)
        _log(args, f"figure written to {fig_path}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnpoison",
        description="Training-set insertion attacks against k-nearest-neighbor "
                    "classification, plus the projection defense harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("irs", help="dump influencing regions as CSV")
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--yplus", default="pos", help="label the attacker inserts")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    _add_common(p)
    p.set_defaults(func=_cmd_irs)

    p = sub.add_parser("attack-one", help="best single-point insertion (anytime search)")
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--yplus", default="pos")
    p.add_argument("--time-ms", type=int, default=0, help="wall budget; 0 = run to completion")
    p.add_argument("--mult", type=int, default=None, help="max multiplicity (default ceil(k/2))")
    _add_common(p)
    p.set_defaults(func=_cmd_attack_one)

    p = sub.add_parser("attack", help="greedy budgeted attack")
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--yplus", default="pos")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--time-ms", type=int, default=0, help="total wall budget; 0 = unlimited")
    p.add_argument("--delta-out", default=None, help="write insertions as a dataset CSV")
    _add_common(p)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("eval", help="score a prepared attack by reclassification")
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--delta", default=None, help="insertions CSV (dataset format)")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("oracle", help="brute-force baselines (debugging; small instances)")
    p.add_argument("--mode", choices=["single", "attack", "mis"], default="single")
    p.add_argument("--train")
    p.add_argument("--targets")
    p.add_argument("--yplus", default="pos")
    p.add_argument("--mult", type=int, default=None)
    p.add_argument("--budget", type=int, default=1)
    p.add_argument("--graph", default=None, help="edge-list file for --mode mis")
    p.add_argument("--n", type=int, default=None, help="vertex count override")
    _add_common(p)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("gadget", help="emit a hardness-gadget attack instance")
    p.add_argument("--graph", required=True, help="edge-list file, one 'i j' per line")
    p.add_argument("--n", type=int, default=None, help="vertex count override")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--r", type=float, default=9.0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--train-out", default="gadget_train.csv")
    p.add_argument("--targets-out", default="gadget_targets.csv")
    _add_common(p, norm=False)
    p.set_defaults(func=_cmd_gadget)

    p = sub.add_parser(
        "synth",
        help="synthetic attack-vs-dimension table (CSV + figure)",
        epilog="CSV columns: family,norm,m,d,trials,mean_score,sem,max_score,"
               "completed_all -- one row per (family, m, d) cell; mean_score is the "
               "mean realized score of the best single insertion over the trials.",
    )
    p.add_argument("--families", default="uniform,normal")
    p.add_argument("--m-list", default="8,16,32,64,128")
    p.add_argument("--d-list", default="2,4,8,16,32")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--time-ms", type=int, default=0, help="per-attack budget; 0 = unlimited")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--figure-out", default=None,
                   help="figure path (default: alongside --out)")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pca", help="fit or apply a principal-component model")
    p.add_argument("--in", dest="infile", required=True, help="dataset CSV")
    p.add_argument("--d-prime", type=int, default=None)
    p.add_argument("--model-out", default=None, help="write fitted model JSON")
    p.add_argument("--model-in", default=None, help="reuse a fitted model JSON")
    p.add_argument("--out", default=None, help="write the transformed dataset CSV")
    _add_common(p, norm=False, k=False)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser(
        "defend",
        help="projection-defense table (CSV + figure)",
        epilog="CSV columns: d_prime,explained_variance,loss,budget,score_fraction,"
               "score_after,targets_total,completed_all -- one row per (d_prime, "
               "budget); loss is the holdout zero-one loss at that dimension.",
    )
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--d-primes", required=True, help="comma-separated dimensions")
    p.add_argument("--budgets", default="1,5")
    p.add_argument("--time-ms", type=int, default=0, help="per-attack budget; 0 = unlimited")
    p.add_argument("--out", default=None)
    p.add_argument("--figure-out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_defend)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LimitError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except CrossCheckError as exc:
        print(f"internal cross-check failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
