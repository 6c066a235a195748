"""Command-line front end: classify, benchmark, sweep, compact, selftest.

Options can also come from a TOML config file (``--config``); explicit
flags win over config values, which win over built-in defaults. All
randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import report
from .dataset import (
    load_csv,
    load_idx,
    normalize_columns,
    normalize_matrix,
    save_csv,
    SplitSpec,
)
from .dictlearn import compact_dataset
from .errors import ConfigError, DataError, LdsrError, NonNumericFeature, RaggedRows
from .evaluate import METHODS, make_classifier, run_protocol, sweep_locality, _decide_all
from .selftest import run_selftest
from .solver import HyperParams

DEFAULTS = {
    "label_col": "label",
    "method": "ldsr",
    "methods": "ldsr,crc",
    "lam": 0.01,
    "eta": 1e-4,
    "gamma": 1e-4,
    "fraction": 0.3,
    "sigma": "median",
    "kernel": "rbf",
    "no_normalize": False,
    "compact_tau": 0.01,
    "compact_iters": 30,
    "per_class": "50",
    "trials": 1,
    "seed": 0,
    "max_test": None,
    "threads": os.cpu_count() or 1,
    "fractions": "0.1..0.8",
    "outdir": ".",
    "output": "-",
}


def _add_data_options(p, queries=False, test=False):
    g = p.add_argument_group("data")
    g.add_argument("--csv", help="training CSV (one sample per row)")
    g.add_argument("--label-col", dest="label_col", help="label column name")
    g.add_argument("--train-images", dest="train_images", help="IDX image file")
    g.add_argument("--train-labels", dest="train_labels", help="IDX label file")
    g.add_argument("--no-normalize", dest="no_normalize", action="store_true",
                   default=None, help="skip unit-norm column scaling")
    if queries:
        g.add_argument("--queries", help="query CSV (label column ignored)")
        g.add_argument("--test-images", dest="test_images",
                       help="IDX image file of queries")
    if test:
        g.add_argument("--test-csv", dest="test_csv",
                       help="designated test CSV")
        g.add_argument("--test-images", dest="test_images",
                       help="designated test IDX image file")
        g.add_argument("--test-labels", dest="test_labels",
                       help="designated test IDX label file")


def _add_hyper_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--lam", type=float, help="ridge weight")
    g.add_argument("--eta", type=float, help="within-class weight")
    g.add_argument("--gamma", type=float, help="between-class weight")
    g.add_argument("--fraction", type=float, help="locality fraction in (0,1]")
    g.add_argument("--sigma", help="RBF bandwidth or 'median'")
    g.add_argument("--kernel", choices=["rbf", "linear"], help="kernel kind")


def _add_compact_options(p):
    g = p.add_argument_group("compaction")
    g.add_argument("--compact-atoms", dest="compact_atoms", type=int,
                   help="atoms per class (enables compaction)")
    g.add_argument("--compact-tau", dest="compact_tau", type=float,
                   help="code ridge weight")
    g.add_argument("--compact-iters", dest="compact_iters", type=int,
                   help="ALS iterations")


def _add_common(p):
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--config", help="TOML config file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldsr",
        description="Locality-based discriminant sparse representation "
        "classifiers and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify query samples")
    _add_data_options(p, queries=True)
    _add_hyper_options(p)
    _add_compact_options(p)
    _add_common(p)
    p.add_argument("--method", choices=list(METHODS), help="classifier")
    p.add_argument("--output", help="JSONL output path ('-' for stdout)")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("benchmark", help="run the split/accuracy protocol")
    _add_data_options(p, test=True)
    _add_hyper_options(p)
    _add_compact_options(p)
    _add_common(p)
    p.add_argument("--methods", help="comma list from: " + ",".join(METHODS))
    p.add_argument("--per-class", dest="per_class",
                   help="training samples per class (comma list)")
    p.add_argument("--trials", type=int, help="repetitions per setting")
    p.add_argument("--max-test", dest="max_test", type=int,
                   help="cap on evaluated test samples (seeded subsample)")
    p.add_argument("--sweep-locality", dest="sweep_locality",
                   help="also sweep locality fractions (e.g. 0.1..0.8)")
    p.add_argument("--outdir", help="directory for result files")
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("sweep", help="accuracy vs locality fraction")
    _add_data_options(p, test=True)
    _add_hyper_options(p)
    _add_compact_options(p)
    _add_common(p)
    p.add_argument("--methods", help="comma list (default ldsr,kldsr)")
    p.add_argument("--fractions", help="fractions, e.g. 0.1..0.8 or 0.2,0.4")
    p.add_argument("--per-class", dest="per_class", help="samples per class")
    p.add_argument("--trials", type=int, help="repetitions per fraction")
    p.add_argument("--max-test", dest="max_test", type=int,
                   help="cap on evaluated test samples")
    p.add_argument("--outdir", help="directory for result files")
    p.set_defaults(handler=cmd_sweep, methods_default="ldsr,kldsr")

    p = sub.add_parser("compact", help="learn per-class dictionaries")
    _add_data_options(p)
    _add_compact_options(p)
    _add_common(p)
    p.add_argument("--output", help="compacted dataset CSV path")
    p.set_defaults(handler=cmd_compact)

    p = sub.add_parser("selftest", help="run the built-in oracle suite")
    p.add_argument("--corrupt", choices=["gradient"],
                   help="negative-control hook: corrupt the named oracle input")
    p.set_defaults(handler=cmd_selftest)

    return parser


def load_config_file(path) -> dict:
    with open(path, "rb") as f:
        return tomllib.load(f)


def dump_config(cfg: dict) -> str:
    """Flat deterministic TOML for the config round trip."""
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if value is None:
            continue
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, (int, float)):
            rendered = repr(value)
        else:
            rendered = json.dumps(str(value))
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def resolve_options(args: argparse.Namespace) -> argparse.Namespace:
    """Overlay config-file values and defaults onto unset flags."""
    known = set(vars(args)) - {"handler", "config", "command", "methods_default"}
    if getattr(args, "config", None):
        cfg = load_config_file(args.config)
        for key in cfg:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        for key, value in cfg.items():
            if getattr(args, key) is None:
                setattr(args, key, value)
    for key in known:
        if getattr(args, key) is None:
            if key == "methods" and hasattr(args, "methods_default"):
                setattr(args, key, args.methods_default)
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    return args


def hyperparams(ns) -> HyperParams:
    sigma = ns.sigma
    if isinstance(sigma, str):
        if sigma == "median":
            sigma = None
        else:
            try:
                sigma = float(sigma)
            except ValueError:
                raise ConfigError(
                    f"sigma must be a number or 'median', got {sigma!r}"
                ) from None
    try:
        return HyperParams(
            lam=float(ns.lam),
            eta=float(ns.eta),
            gamma=float(ns.gamma),
            locality_fraction=float(ns.fraction),
            sigma=sigma,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def parse_int_list(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    try:
        return [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def parse_fractions(text) -> list[float]:
    """Parse '0.1..0.8' (0.1 steps), 'a..b:step', or a comma list."""
    if isinstance(text, (int, float)):
        return [float(text)]
    text = str(text)
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (float(v) for v in span.split(".."))
            step = float(step) if step else 0.1
            count = int(round((hi - lo) / step)) + 1
            values = [round(lo + i * step, 10) for i in range(count)]
        else:
            values = [round(float(v), 10) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse fractions from {text!r}") from None
    if not values or any(not 0.0 < v <= 1.0 for v in values):
        raise ConfigError(f"fractions must lie in (0, 1]: {text!r}")
    return values


def parse_methods(text) -> list[str]:
    methods = [m.strip() for m in str(text).split(",") if m.strip()]
    if not methods:
        raise ConfigError("no methods given")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    return methods


def _load_train(ns):
    if ns.csv and ns.train_images:
        raise ConfigError("give either --csv or --train-images, not both")
    if ns.csv:
        ds = load_csv(ns.csv, ns.label_col)
    elif ns.train_images:
        if not ns.train_labels:
            raise ConfigError("--train-images requires --train-labels")
        ds = load_idx(ns.train_images, ns.train_labels)
    else:
        raise ConfigError("no training data: give --csv or --train-images")
    if not ns.no_normalize:
        ds = normalize_columns(ds)
    return ds


def _load_designated_test(ns):
    if getattr(ns, "test_csv", None):
        ds = load_csv(ns.test_csv, ns.label_col)
    elif getattr(ns, "test_images", None) and getattr(ns, "test_labels", None):
        ds = load_idx(ns.test_images, ns.test_labels)
    else:
        return None
    if not ns.no_normalize:
        ds = normalize_columns(ds)
    return ds


def _load_query_matrix(ns) -> np.ndarray:
    if getattr(ns, "queries", None):
        path = ns.queries
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file")
            drop = header.index(ns.label_col) if ns.label_col in header else None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise RaggedRows(
                        f"{path}:{lineno}: {len(row)} fields, "
                        f"header has {len(header)}"
                    )
                if drop is not None:
                    row = row[:drop] + row[drop + 1 :]
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise NonNumericFeature(
                        f"{path}:{lineno}: non-numeric feature value"
                    ) from None
        if not rows:
            raise DataError(f"{path}: no data rows")
        queries = np.asarray(rows, dtype=np.float64).T
    elif getattr(ns, "test_images", None):
        from .dataset import _read_idx, IDX_IMAGE_MAGIC

        images = _read_idx(ns.test_images, IDX_IMAGE_MAGIC)
        n, rows_, cols = images.shape
        queries = (
            images.transpose(0, 2, 1).reshape(n, rows_ * cols).T.astype(np.float64)
            / 255.0
        )
    else:
        raise ConfigError("no queries: give --queries or --test-images")
    if not ns.no_normalize:
        queries = normalize_matrix(queries)
    return queries


def _maybe_compact(ns, ds, seed):
    if getattr(ns, "compact_atoms", None):
        return compact_dataset(
            ds, ns.compact_atoms, ns.compact_tau, ns.compact_iters, seed
        )
    return ds


def _to_native(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.str_):
        return str(value)
    return value


def cmd_classify(ns) -> int:
    train = _maybe_compact(ns, _load_train(ns), ns.seed)
    queries = _load_query_matrix(ns)
    hp = hyperparams(ns)
    classifier = make_classifier(ns.method, train, hp, ns.kernel)
    decisions = _decide_all(classifier, queries, ns.threads)
    lines = []
    for j, decision in enumerate(decisions):
        scores = {
            str(label): (None if np.isinf(s) else float(s))
            for label, s in zip(decision.labels, decision.scores)
        }
        lines.append(
            json.dumps(
                {
                    "index": j,
                    "predicted": _to_native(decision.predicted),
                    "scores": scores,
                }
            )
        )
    payload = "\n".join(lines) + "\n"
    if ns.output == "-":
        sys.stdout.write(payload)
    else:
        Path(ns.output).write_text(payload, encoding="utf-8")
    return 0


def _config_echo(ns, hp, methods, extra=None) -> dict:
    echo = {
        "seed": ns.seed,
        "trials": ns.trials,
        "methods": methods,
        "normalize": not ns.no_normalize,
        "lam": hp.lam,
        "eta": hp.eta,
        "gamma": hp.gamma,
        "fraction": hp.locality_fraction,
        "sigma": "median" if hp.sigma is None else hp.sigma,
        "kernel": ns.kernel,
    }
    if getattr(ns, "max_test", None):
        echo["max_test"] = ns.max_test
    if extra:
        echo.update(extra)
    return echo


def _run_sweep(ns, pool, designated, hp, methods, fractions, outdir) -> None:
    spec = SplitSpec(
        per_class_train=parse_int_list(ns.per_class)[0],
        seed=ns.seed,
        trials=ns.trials,
    )
    rows = sweep_locality(
        pool,
        spec,
        fractions,
        hp,
        methods=methods,
        designated_test=designated,
        max_test=ns.max_test,
        threads=ns.threads,
        kernel_kind=ns.kernel,
    )
    report.write_csv(
        outdir / "sweep.csv", rows, ["fraction", "method", "mean_top1"]
    )
    report.write_json(
        outdir / "sweep.json",
        {
            "config": _config_echo(ns, hp, methods,
                                   {"fractions": fractions,
                                    "per_class": spec.per_class_train}),
            "curve": rows,
        },
    )
    report.save_sweep_figure(rows, outdir / "sweep.png")
    sys.stdout.write(report.sweep_table(rows))


def cmd_benchmark(ns) -> int:
    pool = _load_train(ns)
    designated = _load_designated_test(ns)
    hp = hyperparams(ns)
    methods = parse_methods(ns.methods)
    sizes = parse_int_list(ns.per_class)
    outdir = Path(ns.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    transform = None
    if ns.compact_atoms:
        transform = lambda ds, seed: compact_dataset(  # noqa: E731
            ds, ns.compact_atoms, ns.compact_tau, ns.compact_iters, seed
        )
    summaries = []
    for n in sizes:
        spec = SplitSpec(per_class_train=n, seed=ns.seed, trials=ns.trials)
        part, _ = run_protocol(
            pool,
            spec,
            methods,
            hp,
            designated_test=designated,
            max_test=ns.max_test,
            threads=ns.threads,
            kernel_kind=ns.kernel,
            transform=transform,
        )
        summaries.extend(part)

    rows = report.summary_rows(summaries)
    report.write_json(
        outdir / "benchmark.json",
        {
            "config": _config_echo(ns, hp, methods, {"per_class": sizes}),
            "results": rows,
        },
    )
    report.write_csv(
        outdir / "benchmark.csv",
        rows,
        ["method", "n_per_class", "trials", "mean_top1", "std_top1", "mean_top5"],
    )
    table = report.benchmark_table(summaries)
    (outdir / "benchmark.txt").write_text(table, encoding="utf-8")
    report.save_benchmark_figure(summaries, outdir / "benchmark.png")
    sys.stdout.write(table)

    if ns.sweep_locality:
        _run_sweep(ns, pool, designated, hp, methods,
                   parse_fractions(ns.sweep_locality), outdir)
    return 0


def cmd_sweep(ns) -> int:
    pool = _load_train(ns)
    designated = _load_designated_test(ns)
    hp = hyperparams(ns)
    methods = parse_methods(ns.methods)
    outdir = Path(ns.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _run_sweep(ns, pool, designated, hp, methods,
               parse_fractions(ns.fractions), outdir)
    return 0


def cmd_compact(ns) -> int:
    if not ns.compact_atoms:
        raise ConfigError("compact requires --compact-atoms")
    if ns.output == "-":
        raise ConfigError("compact requires --output FILE")
    train = _load_train(ns)
    compacted = compact_dataset(
        train, ns.compact_atoms, ns.compact_tau, ns.compact_iters, ns.seed
    )
    save_csv(compacted, ns.output, ns.label_col)
    return 0


def cmd_selftest(ns) -> int:
    results = run_selftest(getattr(ns, "corrupt", None))
    failed = False
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        sys.stdout.write(
            f"{r.name:<24} residual={r.residual:.3e}  tol={r.tol:.0e}  {status}\n"
        )
        failed = failed or not r.passed
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ns = resolve_options(args)
        return ns.handler(ns)
    except ConfigError as e:
        print(f"ldsr: config error: {e}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"ldsr: data error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"ldsr: config error: {e}", file=sys.stderr)
        return 2
    except LdsrError as e:
        print(f"ldsr: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
