"""Command-line front end.

Every subcommand writes its bulk numbers as CSV and a JSON report that
echoes the fully resolved run configuration, so a run can be repeated from
its report alone. Exit status: 0 on success, 1 for usage or validation
errors, 2 for anything unexpected.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import InvalidArgument
from .eval import build_report
from .iforest import fit_forest, load_forest, save_forest
from .ingest import Dataset, LabelIntervals, SchemaConfig, load_csv, split_train_test, write_csv
from .matrix_profile import (
    MatrixProfileResult,
    compute_matrix_profile,
    count_similar_many,
    default_exclusion,
    detect_anomalies,
    resolve_epsilon,
    resolve_threads,
    windows_to_steps,
)
from .ocsvm import KernelDescriptor, default_gamma, load_svm, save_svm, train_ocsvm
from .preprocess import BOOL_MODES, VARIANTS, Preprocessor
from .synthgen import PRESETS, build_preset, load_config, synthesize

PLOT_HEADER = "step,value,mp_distance,similar_count,attack"
DEFAULT_COUNT_THRESHOLD = 20


class UsageError(InvalidArgument):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for internal errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers

def _num(v):
    """JSON-safe number: non-finite floats become strings."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return _num(obj)


def write_json(obj, path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _fmt(v) -> str:
    return repr(float(v))


def _schema(args) -> SchemaConfig:
    return SchemaConfig.from_file(args.schema) if getattr(args, "schema", None) else SchemaConfig()


def _load(args) -> Dataset:
    return load_csv(args.input, _schema(args))


def _default_path(args, suffix: str) -> Path:
    stem = Path(args.input)
    tag = f".{args.channel}" if getattr(args, "channel", None) else ""
    return stem.with_name(stem.stem + tag + suffix)


def resolve_distance_threshold(spec: str, distances: np.ndarray, m: int) -> float:
    """Number, ``auto:pNN`` / ``auto:mF`` (see ``resolve_epsilon``), ``inf``, or
    ``auto:prefix=N``: the largest distance among windows inside the first N steps."""
    text = str(spec).strip().lower()
    if text.startswith("auto:prefix="):
        try:
            steps = int(text[len("auto:prefix="):])
        except ValueError:
            raise InvalidArgument(f"bad distance threshold {spec!r}") from None
        last = steps - m + 1
        if last < 1 or last > distances.shape[0]:
            raise InvalidArgument(f"prefix of {steps} steps holds no complete window of length {m}")
        return float(np.max(distances[:last]))
    return resolve_epsilon(spec, distances)


def _profile(args, x: np.ndarray, epsilons: Sequence[str]):
    """Profile ``x`` and count neighbours for each epsilon setting.

    Auto settings need the profile first, so those cost a second pass.
    """
    threads = resolve_threads(args.threads)
    excl = default_exclusion(args.m) if args.exclusion is None else args.exclusion
    needs_profile = any(str(e).strip().lower().startswith("auto:") for e in epsilons)
    base = None
    if needs_profile or not epsilons:
        base = compute_matrix_profile(x, args.m, excl, None, threads)
    resolved = [resolve_epsilon(e, base.distances if base is not None else np.empty(0))
                for e in epsilons]
    if not resolved:
        return base, None, resolved, excl
    res, counts = count_similar_many(x, args.m, resolved, excl, threads)
    return res, counts, resolved, excl


def _channel_values(ds: Dataset, name: str) -> np.ndarray:
    if name not in ds.features.names:
        raise InvalidArgument(f"channel {name!r} not found; available: {list(ds.features.names)}")
    return ds.features.column(name)


def emit_plotdata(result: MatrixProfileResult, values, labels, out, counts=None) -> None:
    """One row per step with the sensor value, profile distance, count and label.

    The last ``m - 1`` steps start no window, so their distance and count
    cells are empty.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    per_step = labels.per_step if isinstance(labels, LabelIntervals) else np.asarray(labels)
    n = values.shape[0]
    if per_step.shape[0] != n:
        raise InvalidArgument(f"{per_step.shape[0]} labels for {n} values")
    w = result.distances.shape[0]
    if w != n - result.window_length + 1:
        raise InvalidArgument(f"profile of {w} windows does not fit a series of {n} steps")
    if counts is None:
        counts = result.similar_counts
    lines = [PLOT_HEADER]
    for i in range(n):
        if i < w:
            d = _fmt(result.distances[i])
            c = "" if counts is None else str(int(counts[i]))
        else:
            d = c = ""
        lines.append(f"{i},{_fmt(values[i])},{d},{c},{int(per_step[i])}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_rows(path, header: str, columns) -> None:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _mp_config(args, resolved, excl) -> dict:
    return {"input": args.input, "channel": args.channel, "m": args.m,
            "exclusion_radius": excl, "epsilon": list(args.epsilon), "epsilon_resolved": resolved,
            "schema": args.schema}


# ---------------------------------------------------------------- subcommands

def cmd_synth(args) -> int:
    if args.config:
        cfg, attacks = load_config(args.config)
        source = {"config": args.config}
    else:
        cfg, attacks = build_preset(args.preset, args.seed, args.length)
        source = {"preset": args.preset, "seed": args.seed, "length": cfg.length}
    ds = synthesize(cfg, attacks)
    write_csv(ds, args.out, _schema(args))
    report = {
        "command": "synth",
        "config": {**source, "out": args.out, "schema": args.schema,
                   "channels": [vars_of(c) for c in cfg.channels], "length": cfg.length,
                   "seed": cfg.seed},
        "attacks": [vars_of(a) for a in attacks],
    }
    write_json(report, args.report or Path(args.out).with_suffix(".json"))
    return 0


def vars_of(obj) -> dict:
    return {k: getattr(obj, k) for k in obj.__dataclass_fields__}


def cmd_profile(args) -> int:
    ds = _load(args)
    x = _channel_values(ds, args.channel)
    res, counts, resolved, excl = _profile(args, x, args.epsilon)
    out = args.out or _default_path(args, ".mp.csv")
    cols = [[str(i) for i in range(len(res))], [_fmt(d) for d in res.distances],
            [str(int(j)) for j in res.neighbor_index]]
    header = "window,mp_distance,neighbor"
    if counts is not None:
        for k in range(counts.shape[1]):
            cols.append([str(int(c)) for c in counts[:, k]])
        header += "," + ",".join(_count_names(counts.shape[1]))
    _write_rows(out, header, cols)
    write_json({"command": args.command, "config": {**_mp_config(args, resolved, excl), "out": out},
                "windows": len(res),
                "distance_summary": _summary(res.distances)},
               args.report or Path(out).with_suffix(".json"))
    return 0


def _count_names(k: int) -> list[str]:
    return ["similar_count"] if k == 1 else [f"similar_count_{i}" for i in range(k)]


def _summary(d: np.ndarray) -> dict:
    return {"min": float(d.min()), "median": float(np.median(d)), "max": float(d.max())}


def cmd_count(args) -> int:
    if not args.epsilon:
        args.epsilon = ["auto:p5"]
    return cmd_profile(args)


def cmd_detect(args) -> int:
    ds = _load(args)
    x = _channel_values(ds, args.channel)
    eps_spec = args.epsilon[0] if args.epsilon else "auto:p5"
    if len(args.epsilon) > 1:
        raise InvalidArgument("detect takes a single --epsilon")
    # without a count threshold the counts are never read, so skip that pass
    args.epsilon = [eps_spec] if args.count_threshold > 0 else []
    res, counts, resolved, excl = _profile(args, x, args.epsilon)
    if counts is not None:
        res = MatrixProfileResult(res.distances, res.neighbor_index, res.window_length,
                                  res.exclusion_radius, counts[:, 0], resolved[0])
    thr = resolve_distance_threshold(args.distance_threshold, res.distances, args.m)
    windows = detect_anomalies(res, thr, args.count_threshold, args.min_gap)
    steps = windows_to_steps(windows, args.m, x.shape[0])
    pred = np.zeros(x.shape[0], dtype=np.int64)
    for s, e in steps:
        pred[s:e + 1] = 1
    report = build_report(pred, ds.labels, steps)
    out = args.out or _default_path(args, ".pred.csv")
    _write_rows(out, "step,prediction", [[str(i) for i in range(pred.shape[0])],
                                         [str(int(p)) for p in pred]])
    cfg = {**_mp_config(args, resolved, excl), "out": out,
           "distance_threshold": args.distance_threshold, "distance_threshold_resolved": thr,
           "count_threshold": args.count_threshold, "min_gap": args.min_gap}
    write_json({"command": "detect", "config": cfg,
                "window_intervals": [list(w) for w in windows],
                "step_intervals": [list(s) for s in steps],
                "report": report.to_json()},
               args.report or Path(out).with_suffix(".json"))
    return 0


def cmd_plotdata(args) -> int:
    ds = _load(args)
    x = _channel_values(ds, args.channel)
    eps_spec = args.epsilon[0] if args.epsilon else "auto:p5"
    args.epsilon = [eps_spec]
    res, counts, resolved, excl = _profile(args, x, [eps_spec])
    out = args.out or _default_path(args, ".plot.csv")
    emit_plotdata(res, x, ds.labels, out, counts[:, 0])
    write_json({"command": "plotdata", "config": {**_mp_config(args, resolved, excl), "out": out}},
               args.report or Path(out).with_suffix(".json"))
    return 0


def _training_rows(args, ds: Dataset) -> Dataset:
    boundary = len(ds) if args.train_end is None else args.train_end
    train, _ = split_train_test(ds, boundary, normal_only=args.normal_only)
    if len(train) == 0:
        raise InvalidArgument("no training rows left after the split")
    return train


def _pre_config(args) -> dict:
    return {"input": args.input, "schema": args.schema, "train_end": args.train_end,
            "normal_only": args.normal_only, "preprocess": args.preprocess,
            "bool_mode": args.bool_mode, "pca_k": args.pca_k}


def _pca_k(text):
    if text is None:
        return None
    value = float(text)
    return int(value) if value >= 1 and value == int(value) else value


def cmd_train_iforest(args) -> int:
    ds = _load(args)
    train = _training_rows(args, ds)
    pre = Preprocessor(args.preprocess, args.bool_mode, _pca_k(args.pca_k)).fit(train.features)
    X = pre.transform(train.features).values
    model = fit_forest(X, n_trees=args.n_trees, subsample=args.subsample, seed=args.seed,
                       contamination=args.contamination, threads=resolve_threads(args.threads))
    buf = io.StringIO()
    pre.save(buf)
    save_forest(model, buf)
    Path(args.model).write_text(buf.getvalue(), encoding="utf-8")
    cfg = {**_pre_config(args), "model": args.model, "n_trees": args.n_trees,
           "subsample": args.subsample, "subsample_used": model.subsample_size,
           "height_limit": model.height_limit, "seed": args.seed,
           "contamination": args.contamination, "threshold": model.threshold}
    write_json({"command": "train-iforest", "config": cfg, "training_rows": len(train),
                "features": pre.describe()},
               args.report or Path(args.model).with_suffix(".json"))
    return 0


def cmd_train_ocsvm(args) -> int:
    ds = _load(args)
    train = _training_rows(args, ds)
    pre = Preprocessor(args.preprocess, args.bool_mode, _pca_k(args.pca_k)).fit(train.features)
    X = pre.transform(train.features).values
    rows_used = X.shape[0]
    if args.max_train_rows and X.shape[0] > args.max_train_rows:
        pick = np.random.default_rng(args.seed).choice(X.shape[0], args.max_train_rows, replace=False)
        X = X[np.sort(pick)]
        rows_used = X.shape[0]
    gamma = default_gamma(X) if args.gamma is None else args.gamma
    model = train_ocsvm(X, nu=args.nu, kernel=KernelDescriptor(args.kernel, gamma), tol=args.tol)
    buf = io.StringIO()
    pre.save(buf)
    save_svm(model, buf)
    Path(args.model).write_text(buf.getvalue(), encoding="utf-8")
    cfg = {**_pre_config(args), "model": args.model, "nu": args.nu, "kernel": args.kernel,
           "gamma": args.gamma, "gamma_resolved": gamma, "tol": args.tol,
           "max_train_rows": args.max_train_rows, "seed": args.seed}
    write_json({"command": "train-ocsvm", "config": cfg, "training_rows": rows_used,
                "support_vectors": int(model.alphas.shape[0]), "iterations": model.iterations,
                "rho": model.rho, "features": pre.describe()},
               args.report or Path(args.model).with_suffix(".json"))
    return 0


def load_model(path):
    """Read a model file written by ``train-iforest`` or ``train-ocsvm``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pre, used = Preprocessor.load(lines)
    rest = io.StringIO("\n".join(lines[used:]))
    head = lines[used].strip() if used < len(lines) else ""
    if head.startswith("mpguard-iforest"):
        return pre, "iforest", load_forest(rest)
    if head.startswith("mpguard-ocsvm"):
        return pre, "ocsvm", load_svm(rest)
    raise InvalidArgument(f"{path}: unrecognised model body {head!r}")


def cmd_score(args) -> int:
    ds = _load(args)
    pre, kind, model = load_model(args.model)
    start = args.test_start or 0
    _, test = split_train_test(ds, start)
    X = pre.transform(test.features).values
    if kind == "iforest":
        score = model.scores(X)
        pred = model.predict(X)
    else:
        score = model.decision_function(X)
        # the SVM accepts normal points (+1); an attack prediction is a rejection
        pred = (score < 0.0).astype(np.int64)
    report = build_report(pred, test.labels)
    out = args.out or _default_path(args, f".{kind}.csv")
    steps = np.arange(start, len(ds))
    _write_rows(out, "step,score,prediction", [[str(s) for s in steps], [_fmt(v) for v in score],
                                               [str(int(p)) for p in pred]])
    cfg = {"input": args.input, "schema": args.schema, "model": args.model, "model_kind": kind,
           "test_start": start, "out": out, "features": pre.describe()}
    write_json({"command": "score", "config": cfg, "report": report.to_json()},
               args.report or Path(out).with_suffix(".json"))
    return 0


def read_predictions(path, n: int, offset: int = 0) -> np.ndarray:
    """Per-step 0/1 predictions from a ``step,...,prediction`` CSV; missing steps count as 0."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise InvalidArgument(f"{path}: empty prediction file")
    header = [h.strip() for h in text[0].split(",")]
    if "step" not in header or "prediction" not in header:
        raise InvalidArgument(f"{path}: header needs 'step' and 'prediction' columns")
    si, pi = header.index("step"), header.index("prediction")
    pred = np.zeros(n, dtype=np.int64)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            step, p = int(parts[si]) - offset, int(parts[pi])
        except (ValueError, IndexError):
            raise InvalidArgument(f"{path}: line {lineno}: cannot parse {line!r}") from None
        if not 0 <= step < n or p not in (0, 1):
            raise InvalidArgument(f"{path}: line {lineno}: step or prediction out of range")
        pred[step] = p
    return pred


def cmd_eval(args) -> int:
    ds = _load(args)
    start = args.test_start or 0
    _, test = split_train_test(ds, start)
    pred = read_predictions(args.predictions, len(test), offset=start)
    report = build_report(pred, test.labels)
    cfg = {"input": args.input, "schema": args.schema, "predictions": args.predictions,
           "test_start": start}
    payload = {"command": "eval", "config": cfg, "report": report.to_json()}
    if args.report:
        write_json(payload, args.report)
    else:
        sys.stdout.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------- parser

def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _non_negative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpguard", description="Matrix-profile attack detection for process data.")
    parser.add_argument("--version", action="version", version=f"mpguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="labelled CSV process log")
        p.add_argument("--schema", help="key=value file naming the timestamp/label columns")
        p.add_argument("--report", help="JSON report path (default: next to the output)")
        p.add_argument("--threads", type=_positive,
                       help="worker threads (default: $MPGUARD_THREADS, else 1)")

    def mp_args(p, multi_eps=False):
        p.add_argument("--channel", required=True, help="column to profile")
        p.add_argument("--m", type=_positive, required=True, help="window length in steps")
        p.add_argument("--exclusion", type=_non_negative,
                       help="exclusion radius (default: ceil(m/2))")
        p.add_argument("--epsilon", action="append", default=[],
                       help="similarity radius: number, auto:pNN (percentile of distances) or "
                            "auto:mF (F times the median); repeatable for profile/count"
                            if multi_eps else
                            "similarity radius: number, auto:pNN or auto:mF (default auto:p5)")
        p.add_argument("--out", help="CSV output path")

    s = sub.add_parser("synth", help="generate a labelled synthetic process log")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESETS)
    src.add_argument("--config", help="key=value generator config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--length", type=_non_negative, default=0, help="steps (0: preset default)")
    s.add_argument("--out", required=True)
    common(s, needs_input=False)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("profile", cmd_profile, "matrix profile of one channel"),
                                 ("count", cmd_count, "similar-instance counts of one channel")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        mp_args(p, multi_eps=True)
        p.set_defaults(func=func)

    d = sub.add_parser("detect", help="flag anomalous intervals and score them against labels")
    common(d)
    mp_args(d)
    d.add_argument("--distance-threshold", default="auto:p99",
                   help="number, inf, auto:pNN, auto:mF or auto:prefix=N (max distance of "
                        "windows within the first N steps); default auto:p99")
    d.add_argument("--count-threshold", type=_non_negative, default=DEFAULT_COUNT_THRESHOLD,
                   help="flag windows with fewer similar instances (0 disables)")
    d.add_argument("--min-gap", type=_non_negative, default=0,
                   help="merge flagged runs separated by at most this many windows")
    d.set_defaults(func=cmd_detect)

    pl = sub.add_parser("plotdata", help="per-step CSV of value, distance, count and label")
    common(pl)
    mp_args(pl)
    pl.set_defaults(func=cmd_plotdata)

    def train_args(p):
        common(p)
        p.add_argument("--model", required=True, help="model output path")
        p.add_argument("--train-end", type=_non_negative,
                       help="train on rows before this index (default: all rows)")
        p.add_argument("--normal-only", action="store_true", help="drop attack rows from training")
        p.add_argument("--preprocess", choices=VARIANTS, default="none")
        p.add_argument("--bool-mode", choices=BOOL_MODES, default="bool")
        p.add_argument("--pca-k", help="PCA components (integer) or variance fraction")
        p.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("train-iforest", help="fit an Isolation Forest")
    train_args(f)
    f.add_argument("--n-trees", type=_positive, default=100)
    f.add_argument("--subsample", type=_positive, default=256)
    f.add_argument("--contamination", type=float, default=0.05)
    f.set_defaults(func=cmd_train_iforest)

    o = sub.add_parser("train-ocsvm", help="fit a nu-one-class SVM")
    train_args(o)
    o.add_argument("--nu", type=float, default=0.1)
    o.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    o.add_argument("--gamma", type=float, help="rbf width (default 1/(features * variance))")
    o.add_argument("--tol", type=float, default=1e-3)
    o.add_argument("--max-train-rows", type=_non_negative, default=5000,
                   help="random subsample of training rows (0: use all)")
    o.set_defaults(func=cmd_train_ocsvm)

    sc = sub.add_parser("score", help="apply a trained model to a log")
    common(sc)
    sc.add_argument("--model", required=True)
    sc.add_argument("--test-start", type=_non_negative, help="score rows from this index on")
    sc.add_argument("--out", help="CSV output path")
    sc.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="score a prediction CSV against the labels")
    common(e)
    e.add_argument("--predictions", required=True, help="CSV with step and prediction columns")
    e.add_argument("--test-start", type=_non_negative,
                   help="first labelled row the predictions refer to")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return int(args.func(args) or 0)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except (InvalidArgument, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort handler maps to exit 2
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
