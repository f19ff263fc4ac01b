"""Command-line audit harness.

Subcommands score a generator against a dataset (remia, dcr, domias,
quality), sweep a risk-model parameter grid, or rank-correlate metrics
across saved reports. Reports are JSON, sweeps are CSV.

Exit codes: 0 success, 2 validation problem, 3 generator failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .baselines import dcr_score, domias_score
from .discriminator import MlpConfig
from .generators import (
    ANONYMIZER,
    DEFAULT_TIMEOUT_SECS,
    EXTERNAL,
    GeneratorError,
    GeneratorSpec,
    IDENTITY,
    INDEPENDENT_MARGINALS,
    LEAKY,
    generate,
)
from .quality import MODEL_ID, TASKS, detection, ml_efficacy
from .remia import SIGNIFICANCE_LEVEL, RemiaConfig, leaky_ceiling, remia_score
from .reports import (
    build_report,
    dataset_block,
    load_report,
    summary_line,
    write_report,
)
from .stats import binomial_test_upper, clip_scores, spearman
from .tabular import load_table

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GENERATOR = 3

GENERATOR_FORMS = (
    "builtin:identity", "builtin:independent_marginals",
    "risk:leaky:p=<v>", "risk:anonymizer:alpha=<v>", "exec:<command template>",
)


def parse_generator(text: str, control=None, timeout_secs=None) -> GeneratorSpec:
    """Parse the one-flag generator mini-language."""
    if text.startswith("exec:"):
        template = text[len("exec:"):]
        if not template.strip():
            raise ValueError("exec: needs a non-empty command template")
        return GeneratorSpec(
            kind=EXTERNAL, command=template,
            timeout_secs=DEFAULT_TIMEOUT_SECS if timeout_secs is None else timeout_secs)
    if text in (IDENTITY, INDEPENDENT_MARGINALS):
        return GeneratorSpec(kind=text)
    if text.startswith(LEAKY + ":"):
        if control is None:
            raise ValueError(
                "risk:leaky needs --control pointing at rows disjoint from the data")
        return GeneratorSpec(kind=LEAKY, control=control,
                             leak_p=_param(text[len(LEAKY) + 1:], "p"))
    if text.startswith(ANONYMIZER + ":"):
        return GeneratorSpec(kind=ANONYMIZER,
                             alpha=_param(text[len(ANONYMIZER) + 1:], "alpha"))
    raise ValueError(
        f"unrecognized generator {text!r}; expected one of: " + ", ".join(GENERATOR_FORMS))


def _param(text: str, name: str) -> float:
    key, sep, value = text.partition("=")
    if key != name or not sep:
        raise ValueError(f"expected {name}=<value> after the generator kind, got {text!r}")
    return float(value)


def _load_control(args, data):
    if getattr(args, "control", None) is None:
        return None
    control = load_table(args.control, args.schema)
    # keep control row ids out of the data's id space so leak accounting
    # can tell members from mixed-in outsiders
    return control.with_row_ids(np.arange(control.n_rows) + data.n_rows)


def _mlp_config(args) -> MlpConfig:
    cfg = MlpConfig()
    if getattr(args, "max_epochs", None) is not None:
        cfg = cfg.replace(max_epochs=args.max_epochs)
    return cfg


def _mlp_echo(cfg: MlpConfig) -> dict:
    return {
        "model": MODEL_ID,
        "hidden_sizes": list(cfg.hidden_sizes),
        "learning_rate": cfg.learning_rate,
        "max_epochs": cfg.max_epochs,
        "batch_size": cfg.batch_size,
        "patience": cfg.patience,
        "eval_every": cfg.eval_every,
    }


def _common_config(args, command: str) -> dict:
    return {
        "command": command,
        "data": args.data,
        "schema": args.schema,
        "generator": args.generator,
        "reps": args.reps,
        "seed": args.seed,
        "jobs": args.jobs,
    }


# per-metric runners, shared by the single commands and cmd_sweep


def _run_remia(data, spec, args):
    mlp = _mlp_config(args)
    cfg = RemiaConfig(target_fraction=args.target_fraction,
                      repetitions=args.reps, base_seed=args.seed, mlp=mlp)
    result = remia_score(data, spec, cfg, jobs=args.jobs)
    return {
        "scores": list(result.scores),
        "seeds": list(result.seeds),
        "p_value": result.p_value,
        "significant": result.significant,
        "records_used": result.records_used,
        "flags": {"threshold_not_reached": list(result.threshold_not_reached)},
        "details": {
            "selected_iterations": list(result.selected_iterations),
            "max_smoothed_target": [float(v) for v in result.max_smoothed_target],
            "accuracy_counts": [list(c) for c in result.accuracy_counts],
        },
        "config": {
            "target_fraction": cfg.target_fraction,
            "train_auroc_threshold": cfg.train_auroc_threshold,
            "mlp": _mlp_echo(mlp),
        },
    }


def _run_dcr(data, holdout, spec, args):
    scores, counts, seeds = [], [], []
    for r in range(args.reps):
        seed = args.seed + r
        synth = generate(spec, data, data.n_rows, seed)
        res = dcr_score(data, synth, holdout)
        scores.append(res.fraction)
        counts.append(res.count)
        seeds.append(seed)
    pooled_p = binomial_test_upper(sum(counts), data.n_rows * args.reps)
    return {
        "scores": scores,
        "seeds": seeds,
        "p_value": pooled_p,
        "significant": pooled_p < SIGNIFICANCE_LEVEL,
        "records_used": None,
        "flags": {},
        "details": {"counts": counts, "holdout_rows": holdout.n_rows},
        "config": {"holdout": args.holdout},
    }


def _domias_parts(data, reference, control, seed):
    """Carve train/reference/control out of the data when files are not
    given: 1x train, 1x control, 5x reference, disjoint by construction."""
    if reference is not None and control is not None:
        return data, reference, control
    n = data.n_rows
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    if reference is not None:
        s = n // 2
        if s < 2:
            raise ValueError("need at least 4 data rows to carve train and control")
        return data.take(perm[:s]), reference, data.take(perm[s:2 * s])
    if control is not None:
        s = n // 6
        if s < 2:
            raise ValueError("need at least 12 data rows to carve train and reference")
        return data.take(perm[:s]), data.take(perm[s:6 * s]), control
    s = n // 7
    if s < 2:
        raise ValueError("need at least 14 data rows to carve train, control and reference")
    return data.take(perm[:s]), data.take(perm[2 * s:7 * s]), data.take(perm[s:2 * s])


def _run_domias(data, reference, control, spec, args):
    scores, seeds = [], []
    for r in range(args.reps):
        seed = args.seed + r
        train, ref_part, ctrl_part = _domias_parts(data, reference, control, seed)
        synth = generate(spec, train, train.n_rows, seed)
        scores.append(domias_score(train, synth, ref_part, ctrl_part).auroc)
        seeds.append(seed)
    return {
        "scores": scores,
        "seeds": seeds,
        "p_value": None,
        "significant": None,
        "records_used": None,
        "flags": {},
        "details": {},
        "config": {"reference": args.reference, "control": args.control},
    }


def _run_detection(data, spec, args):
    mlp = _mlp_config(args)
    scores, seeds, folds = [], [], []
    for r in range(args.reps):
        seed = args.seed + r
        synth = generate(spec, data, data.n_rows, seed)
        res = detection(data, synth, folds=args.folds, seed=seed, mlp=mlp)
        scores.append(res.mean_auroc)
        folds.append([float(a) for a in res.fold_aurocs])
        seeds.append(seed)
    return {
        "scores": scores,
        "seeds": seeds,
        "p_value": None,
        "significant": None,
        "records_used": None,
        "flags": {},
        "details": {"fold_aurocs": folds},
        "config": {"folds": args.folds, "mlp": _mlp_echo(mlp)},
    }


def _run_efficacy(data, spec, args):
    mlp = _mlp_config(args)
    scores, seeds, detail = [], [], []
    for r in range(args.reps):
        seed = args.seed + r
        perm = np.random.Generator(np.random.PCG64(seed)).permutation(data.n_rows)
        n_train = int(0.8 * data.n_rows)
        if n_train == 0 or n_train == data.n_rows:
            raise ValueError(f"{data.n_rows} rows cannot be split 80/20")
        real_train = data.take(perm[:n_train])
        real_test = data.take(perm[n_train:])
        synth = generate(spec, real_train, real_train.n_rows, seed)
        res = ml_efficacy(real_train, synth, real_test, args.target_column,
                          args.task, seed=seed, mlp=mlp)
        scores.append(res.difference)
        detail.append({"synth_score": res.synth_score, "real_score": res.real_score})
        seeds.append(seed)
    return {
        "scores": scores,
        "seeds": seeds,
        "p_value": None,
        "significant": None,
        "records_used": None,
        "flags": {},
        "details": {"per_repetition": detail},
        "config": {"target_column": args.target_column, "task": args.task,
                   "mlp": _mlp_echo(mlp)},
    }


def _emit(args, command, metric, data, spec, run, wall_seconds):
    config = _common_config(args, command)
    config.update(run["config"])
    if getattr(args, "timeout_secs", None) is not None:
        config["timeout_secs"] = args.timeout_secs
    report = build_report(
        metric=metric,
        generator=spec.describe(),
        dataset=dataset_block(args.data, data),
        config=config,
        scores=run["scores"],
        p_value=run["p_value"],
        significant=run["significant"],
        records_used=run["records_used"],
        seeds=run["seeds"],
        flags=run["flags"],
        wall_seconds=wall_seconds,
        details=run["details"],
    )
    write_report(report, args.out)
    print(f"{summary_line(report)} -> {args.out}")
    return EXIT_OK


def cmd_remia(args) -> int:
    t0 = time.perf_counter()
    data = load_table(args.data, args.schema)
    control = _load_control(args, data)
    spec = parse_generator(args.generator, control, args.timeout_secs)
    run = _run_remia(data, spec, args)
    run["config"]["control"] = args.control
    return _emit(args, "remia", "remia", data, spec, run, time.perf_counter() - t0)


def cmd_dcr(args) -> int:
    t0 = time.perf_counter()
    data = load_table(args.data, args.schema)
    holdout = load_table(args.holdout, args.schema)
    control = _load_control(args, data)
    spec = parse_generator(args.generator, control, args.timeout_secs)
    run = _run_dcr(data, holdout, spec, args)
    run["config"]["control"] = args.control
    return _emit(args, "dcr", "dcr", data, spec, run, time.perf_counter() - t0)


def cmd_domias(args) -> int:
    t0 = time.perf_counter()
    data = load_table(args.data, args.schema)
    control = _load_control(args, data)
    reference = None
    if args.reference is not None:
        reference = load_table(args.reference, args.schema)
        offset = data.n_rows + (0 if control is None else control.n_rows)
        reference = reference.with_row_ids(np.arange(reference.n_rows) + offset)
    spec = parse_generator(args.generator, control, args.timeout_secs)
    run = _run_domias(data, reference, control, spec, args)
    return _emit(args, "domias", "domias", data, spec, run, time.perf_counter() - t0)


def cmd_quality(args) -> int:
    t0 = time.perf_counter()
    if (args.target_column is None) != (args.task is None):
        raise ValueError("--target-column and --task must be given together")
    data = load_table(args.data, args.schema)
    control = _load_control(args, data)
    spec = parse_generator(args.generator, control, args.timeout_secs)
    if args.target_column is not None:
        metric, run = "ml_efficacy", _run_efficacy(data, spec, args)
    else:
        metric, run = "detection", _run_detection(data, spec, args)
    run["config"]["control"] = args.control
    return _emit(args, "quality", metric, data, spec, run, time.perf_counter() - t0)


def cmd_sweep(args) -> int:
    data = load_table(args.data, args.schema)
    control = _load_control(args, data)
    holdout = load_table(args.holdout, args.schema) if args.holdout else None
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"bad --grid value: {exc}")
    if not grid:
        raise ValueError("--grid is empty")
    if args.generator == LEAKY:
        texts = [f"{LEAKY}:p={v!r}" for v in grid]
    elif args.generator == ANONYMIZER:
        texts = [f"{ANONYMIZER}:alpha={v!r}" for v in grid]
    else:
        raise ValueError(
            f"sweep needs a parameterizable family ({LEAKY} or {ANONYMIZER}), "
            f"got {args.generator!r}")
    for v in grid:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"grid value {v!r} outside the parameter domain [0, 1]")
    if args.metric == "dcr" and holdout is None:
        raise ValueError("sweeping dcr needs --holdout")
    rows = []
    for v, text in zip(grid, texts):
        ceiling = repr(leaky_ceiling(v)) if args.generator == LEAKY else ""
        try:
            spec = parse_generator(text, control, args.timeout_secs)
            if args.metric == "remia":
                run = _run_remia(data, spec, args)
            elif args.metric == "dcr":
                run = _run_dcr(data, holdout, spec, args)
            elif args.metric == "domias":
                run = _run_domias(data, None, None, spec, args)
            else:
                run = _run_detection(data, spec, args)
            scores = np.asarray(run["scores"], dtype=np.float64)
            rows.append([repr(v), args.metric, repr(float(scores.mean())),
                         repr(float(scores.std())), ceiling, "ok"])
        except (GeneratorError, ValueError) as exc:
            print(f"point {v!r} failed: {exc}", file=sys.stderr)
            rows.append([repr(v), args.metric, "", "", ceiling, "failed"])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["format_version", "param", "metric", "mean", "std",
                         "ceiling", "status"])
        for row in rows:
            writer.writerow(["1"] + row)
    ok = sum(1 for r in rows if r[-1] == "ok")
    print(f"sweep {args.metric} over {args.generator}: {ok}/{len(rows)} points ok -> {args.out}")
    return EXIT_OK


def _report_key(report: dict) -> tuple:
    return (report["dataset"]["content_hash"],
            json.dumps(report["generator"], sort_keys=True))


def cmd_compare(args) -> int:
    by_metric: dict = {}
    for path in args.reports:
        report = load_report(path)
        key = _report_key(report)
        slot = by_metric.setdefault(report["metric"], {})
        if key in slot:
            raise ValueError(
                f"duplicate report for metric {report['metric']!r} and key {key}")
        slot[key] = report["mean"]
    if len(by_metric) < 2:
        raise ValueError("compare needs reports from at least 2 metrics")
    key_sets = {m: frozenset(v) for m, v in by_metric.items()}
    baseline = next(iter(key_sets.values()))
    if any(ks != baseline for ks in key_sets.values()):
        raise ValueError(
            "key-set mismatch: every metric must cover the same "
            "(dataset, generator) pairs")
    if len(baseline) < 3:
        raise ValueError(
            f"compare needs at least 3 shared (dataset, generator) pairs, "
            f"got {len(baseline)}")
    order = sorted(baseline)
    metrics = sorted(by_metric)
    vectors = {}
    for m in metrics:
        vec = np.array([by_metric[m][k] for k in order])
        vectors[m] = vec if args.no_clip else clip_scores(vec)
    matrix = [[None] * len(metrics) for _ in metrics]
    pairs = []
    for i, a in enumerate(metrics):
        matrix[i][i] = 1.0
        for j in range(i + 1, len(metrics)):
            b = metrics[j]
            entry = {"a": a, "b": b, "n": len(order)}
            try:
                rho = spearman(vectors[a], vectors[b])
                matrix[i][j] = matrix[j][i] = rho
                entry.update(spearman=rho, status="ok")
            except ValueError as exc:
                entry.update(spearman=None, status=f"degenerate: {exc}")
            pairs.append(entry)
    out = {
        "format_version": 1,
        "metrics": metrics,
        "n_keys": len(order),
        "clipped": not args.no_clip,
        "matrix": matrix,
        "pairs": pairs,
    }
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"compared {len(metrics)} metrics over {len(order)} runs -> {args.out}")
    else:
        print(text)
    return EXIT_OK


def _add_common(sub, generator=True):
    sub.add_argument("--data", required=True, help="dataset CSV")
    sub.add_argument("--schema", required=True, help="schema JSON")
    sub.add_argument("--out", required=True, help="output path")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--reps", type=int, default=4)
    sub.add_argument("--jobs", type=int, default=1)
    if generator:
        sub.add_argument("--generator", required=True,
                         help="one of: " + ", ".join(GENERATOR_FORMS))
        sub.add_argument("--control", default=None,
                         help="CSV of rows disjoint from the data (risk:leaky, domias)")
        sub.add_argument("--timeout-secs", type=float, default=None,
                         help="exec generator timeout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="audit",
        description="Privacy and quality audits for synthetic tabular data generators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("remia", help="relative membership-inference score")
    _add_common(p)
    p.add_argument("--target-fraction", type=float, default=1.0)
    p.add_argument("--max-epochs", type=int, default=None,
                   help="cap discriminator epochs (default 1000)")
    p.set_defaults(func=cmd_remia)

    p = sub.add_parser("dcr", help="distance-to-closest-record baseline")
    _add_common(p)
    p.add_argument("--holdout", required=True,
                   help="held-out CSV, same size as the data")
    p.set_defaults(func=cmd_dcr)

    p = sub.add_parser("domias", help="density-ratio membership baseline")
    _add_common(p)
    p.add_argument("--reference", default=None,
                   help="reference CSV; carved from the data (5x train) when absent")
    p.set_defaults(func=cmd_domias)

    p = sub.add_parser("quality", help="detection AUROC or ML efficacy")
    _add_common(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--target-column", default=None)
    p.add_argument("--task", default=None, choices=TASKS)
    p.add_argument("--max-epochs", type=int, default=None)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("sweep", help="score a parameter grid of one risk family")
    _add_common(p)
    p.add_argument("--metric", required=True,
                   choices=("remia", "dcr", "domias", "detection"))
    p.add_argument("--grid", required=True, help="comma-separated parameter values")
    p.add_argument("--holdout", default=None, help="held-out CSV (dcr only)")
    p.add_argument("--target-fraction", type=float, default=1.0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--max-epochs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="rank-correlate metrics across saved reports")
    p.add_argument("reports", nargs="+", help="audit report JSON paths")
    p.add_argument("--out", default=None)
    p.add_argument("--no-clip", action="store_true",
                   help="skip clipping mean scores at 0.5 before correlating")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except GeneratorError as exc:
        print(f"generator failure: {exc}", file=sys.stderr)
        return EXIT_GENERATOR
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
