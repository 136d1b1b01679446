"""Command-line interface.

Five subcommands: ``fit`` learns a model and writes it to a binary model
file, ``encode`` turns samples into sparse feature CSVs, ``eval`` scores
feature files with a k-NN classifier, ``bench`` times fits, and ``synth``
writes a synthetic dataset.  Metrics are printed as one tab-separated
record per line; ``--csv`` adds a table, ``--figures DIR`` renders PNG
charts next to that output.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import datasets
from .datasets import Dataset, PreprocessConfig, load_csv, load_idx_file, preprocess
from .errors import KtlearnError
from .evaluate import (METHODS, bench_fit, eval_records, evaluate_features,
                       timing_records)
from .ektl import fit_ektl
from .kernels import KernelSpec, parse_kernel_spec
from .ktl import KtlModel, fit_ktl, ktl_encode
from .model_io import load_model, save_model
from .transform import TlConfig, TransformModel, fit_transform, tl_encode

_FLOAT_FMT = "%.17g"

_STEP_ALIASES = {
    "luma": datasets.RGB_TO_LUMA,
    "rgb_to_luma": datasets.RGB_TO_LUMA,
    "mean": datasets.MEAN_SUBTRACT,
    "mean_subtract": datasets.MEAN_SUBTRACT,
    "gcn": datasets.GCN,
}


def _parse_steps(text: str) -> tuple[str, ...]:
    steps = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token not in _STEP_ALIASES:
            raise ValueError(f"unknown preprocessing step {token!r} "
                             f"(known: {', '.join(sorted(set(_STEP_ALIASES)))})")
        steps.append(_STEP_ALIASES[token])
    return tuple(steps)


def _sniff_format(path: str) -> str:
    """Guess idx vs csv from the leading magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    return "idx" if head == b"\x00\x00" else "csv"


def _load_samples(path: str, fmt: str | None, steps: tuple[str, ...],
                  csv_has_labels: bool, csv_header: bool) -> Dataset:
    fmt = fmt or _sniff_format(path)
    if fmt == "idx":
        loaded = load_idx_file(path)
        if not isinstance(loaded, Dataset):
            raise KtlearnError(f"{path} is an IDX label file, expected images")
        ds = loaded
    else:
        ds = load_csv(path, has_labels=csv_has_labels, skip_header=csv_header)
    if steps:
        ds = Dataset(samples=preprocess(ds.samples, PreprocessConfig(steps=steps)),
                     labels=ds.labels, source=ds.source)
    return ds


def _load_labels(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"\x00\x00\x08\x01":
        return load_idx_file(path)
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=1)


def _load_feats(path: str) -> np.ndarray:
    """Feature CSVs store one sample per row; flip to column-major."""
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2).T


def _write_feats(path: str, codes: np.ndarray) -> None:
    np.savetxt(path, codes.T, fmt=_FLOAT_FMT, delimiter=",")


def _pca_projection(samples: np.ndarray, dim: int) -> np.ndarray:
    """Top-``dim`` left singular directions of the (uncentered) samples.

    Returns the dim x n projection matrix.  Singular-vector signs are
    fixed so the projection is a pure function of the data.
    """
    if not 1 <= dim <= samples.shape[0]:
        raise KtlearnError(
            f"--pca-dim must lie in [1, {samples.shape[0]}], got {dim}")
    u, _, _ = np.linalg.svd(samples, full_matrices=False)
    u = u[:, :dim]
    anchor = np.abs(u).argmax(axis=0)
    flips = np.sign(u[anchor, np.arange(dim)])
    u = u * np.where(flips == 0, 1.0, flips)
    return u.T


def _config_from_args(args) -> TlConfig:
    return TlConfig(threshold=args.threshold, lam=args.lam,
                    max_iters=args.iters, rel_tol=args.rel_tol,
                    init=args.init, seed=args.seed)


def _cmd_fit(args) -> int:
    ds = _load_samples(args.data, args.format, args.preprocess,
                       args.csv_has_labels, args.csv_header)
    config = _config_from_args(args)
    x = ds.samples
    if args.method == "tl":
        projection = None
        if args.pca_dim is not None:
            projection = _pca_projection(x, args.pca_dim)
            x = projection @ x
        model, _, report = fit_transform(x, config)
        if projection is not None:
            # fold the projection in so the saved model encodes raw samples
            model = TransformModel(matrix=model.matrix @ projection,
                                   threshold=model.threshold, lam=model.lam)
    elif args.method == "ktl":
        model, _, report = fit_ktl(x, args.kernel, config)
    else:
        rank = args.rank if args.rank is not None else min(x.shape)
        model, _, report = fit_ektl(x, args.kernel, rank, config,
                                    epsilon=args.epsilon)
    save_model(model, args.out)
    if args.verbose:
        for value in report.objective_trace:
            print(value)
    print(f"method\t{args.method}")
    print(f"iterations\t{report.iterations_run}")
    print(f"converged\t{str(report.converged).lower()}")
    print(f"code_density\t{report.code_density:.6f}")
    print(f"fit_seconds\t{report.wall_time_seconds:.6f}")
    print(f"model\t{args.out}")
    if args.figures:
        from .figures import save_trace_figure
        os.makedirs(args.figures, exist_ok=True)
        out = save_trace_figure(report.objective_trace,
                                os.path.join(args.figures, "fit_trace.png"),
                                title=f"{args.method} objective per sweep")
        print(f"figure\t{out}")
    return 0


def _cmd_encode(args) -> int:
    model = load_model(args.model)
    ds = _load_samples(args.data, args.format, args.preprocess,
                       args.csv_has_labels, args.csv_header)
    if isinstance(model, KtlModel):
        codes = ktl_encode(model, ds.samples)
    else:
        codes = tl_encode(model, ds.samples)
    _write_feats(args.out, codes)
    print(f"samples\t{codes.shape[1]}")
    print(f"code_dim\t{codes.shape[0]}")
    print(f"features\t{args.out}")
    return 0


def _cmd_eval(args) -> int:
    train_feats = _load_feats(args.train_feats)
    test_feats = _load_feats(args.test_feats)
    train_labels = _load_labels(args.train_labels)
    test_labels = _load_labels(args.test_labels)
    result = evaluate_features(train_feats, train_labels, test_feats,
                               test_labels, k=args.k)
    for line in eval_records(result, args.k):
        print(line)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("classifier,k,n_test,accuracy_percent\n")
            fh.write(f"NN,{args.k},{result.n_test},{100.0 * result.accuracy:.2f}\n")
        print(f"table\t{args.csv}")
    if args.figures:
        from .figures import save_confusion_figure
        os.makedirs(args.figures, exist_ok=True)
        out = save_confusion_figure(result.confusion,
                                    os.path.join(args.figures, "eval_confusion.png"))
        print(f"figure\t{out}")
    return 0


def _cmd_bench(args) -> int:
    methods = [m.strip().lower() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise KtlearnError(f"unknown method {m!r} in --methods")
    ds = _load_samples(args.data, args.format, args.preprocess,
                       args.csv_has_labels, args.csv_header)
    x = ds.samples
    if args.subset is not None:
        if args.subset < 1:
            raise KtlearnError(f"--subset must be positive, got {args.subset}")
        x = x[:, :args.subset]
    config = _config_from_args(args)
    reports = []
    for m in methods:
        rank = args.rank if args.rank is not None else min(x.shape)
        report = bench_fit(m, x, config, kernel=args.kernel, rank=rank,
                           epsilon=args.epsilon)
        reports.append(report)
        for line in timing_records(report):
            print(line)
    if args.csv:
        name = os.path.basename(args.data)
        with open(args.csv, "w") as fh:
            fh.write("dataset," + ",".join(f"{r.method}_fit_seconds" for r in reports)
                     + "\n")
            fh.write(name + "," + ",".join(f"{r.fit_seconds:.6f}" for r in reports)
                     + "\n")
        print(f"table\t{args.csv}")
    if args.figures:
        from .figures import save_timing_figure
        os.makedirs(args.figures, exist_ok=True)
        out = save_timing_figure(reports,
                                 os.path.join(args.figures, "bench_timings.png"))
        print(f"figure\t{out}")
    return 0


def _cmd_synth(args) -> int:
    truth = datasets.synth_dataset(args.n, args.count, args.density,
                                   noise_sigma=args.noise, seed=args.seed)
    _write_feats(args.out, truth.dataset.samples)
    print(f"samples\t{args.count}")
    print(f"dimension\t{args.n}")
    print(f"source\t{truth.dataset.source}")
    print(f"data\t{args.out}")
    return 0


def _add_data_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input sample file")
    p.add_argument("--format", choices=("idx", "csv"), default=None,
                   help="input format (default: sniff the magic bytes)")
    p.add_argument("--preprocess", type=_parse_steps, default=(),
                   help="comma list of steps: luma, mean, gcn (applied in order)")
    p.add_argument("--csv-has-labels", action="store_true",
                   help="last CSV column is a label and is dropped for fitting")
    p.add_argument("--csv-header", action="store_true",
                   help="skip the first CSV line")


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, required=True,
                   help="hard-threshold level t (l0 weight is t^2)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="transform regularization weight (default 1.0)")
    p.add_argument("--iters", type=int, default=50,
                   help="maximum alternation sweeps (default 50)")
    p.add_argument("--rel-tol", type=float, default=1e-6,
                   help="relative objective change that counts as converged")
    p.add_argument("--init", choices=("identity", "random_orthogonal"),
                   default="identity", help="transform initialization")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--kernel", type=parse_kernel_spec, default=KernelSpec(),
                   help="kernel spec: linear | poly[:degree[:gain[:coef0]]] "
                        "| rbf[:gamma] (default poly:4)")
    p.add_argument("--rank", type=int, default=None,
                   help="reduced rank for ektl (default min(n, N))")
    p.add_argument("--epsilon", type=float, default=1.0,
                   help="ADMM coupling weight for ektl (default 1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ktlearn",
        description="Sparse feature extraction via transform learning, plain "
                    "or kernelized.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="learn a model and save it")
    p_fit.add_argument("--method", choices=METHODS, required=True)
    _add_data_options(p_fit)
    _add_fit_options(p_fit)
    p_fit.add_argument("--pca-dim", type=int, default=None,
                       help="project data to this many principal directions "
                            "before a tl fit")
    p_fit.add_argument("--out", required=True, help="model file to write")
    p_fit.add_argument("--verbose", action="store_true",
                       help="print the objective trace, one value per line")
    p_fit.add_argument("--figures", default=None,
                       help="directory for rendered charts")
    p_fit.set_defaults(func=_cmd_fit)

    p_enc = sub.add_parser("encode", help="sparse-code samples with a saved model")
    p_enc.add_argument("--model", required=True, help="model file from fit")
    _add_data_options(p_enc)
    p_enc.add_argument("--out", required=True, help="feature CSV to write")
    p_enc.set_defaults(func=_cmd_encode)

    p_eval = sub.add_parser("eval", help="k-NN accuracy of encoded features")
    p_eval.add_argument("--train-feats", required=True)
    p_eval.add_argument("--train-labels", required=True)
    p_eval.add_argument("--test-feats", required=True)
    p_eval.add_argument("--test-labels", required=True)
    p_eval.add_argument("--k", type=int, default=1, help="neighbourhood size")
    p_eval.add_argument("--csv", default=None, help="write an accuracy table here")
    p_eval.add_argument("--figures", default=None,
                        help="directory for rendered charts")
    p_eval.set_defaults(func=_cmd_eval)

    p_bench = sub.add_parser("bench", help="time fits on one dataset")
    p_bench.add_argument("--methods", required=True,
                         help="comma list from: tl, ktl, ektl")
    _add_data_options(p_bench)
    _add_fit_options(p_bench)
    p_bench.add_argument("--subset", type=int, default=None,
                         help="use only the first N samples")
    p_bench.add_argument("--csv", default=None, help="write a timing table here")
    p_bench.add_argument("--figures", default=None,
                         help="directory for rendered charts")
    p_bench.set_defaults(func=_cmd_bench)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset")
    p_synth.add_argument("--n", type=int, required=True, help="sample dimension")
    p_synth.add_argument("--N", dest="count", type=int, required=True,
                         help="number of samples")
    p_synth.add_argument("--density", type=float, required=True,
                         help="fraction of nonzero ground-truth code entries")
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="additive noise sigma (default 0)")
    p_synth.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_synth.add_argument("--out", required=True, help="sample CSV to write")
    p_synth.set_defaults(func=_cmd_synth)

    return parser


def run_command(argv: list[str]) -> int:
    """Parse and execute one command line; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (KtlearnError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
