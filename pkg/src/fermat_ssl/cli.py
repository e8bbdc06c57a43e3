"""Command line entry point: ``fermat-ssl <subcommand> ...``.

Exit codes: 0 success, 2 bad usage or flag, 3 missing/unreadable file,
4 invalid data or numeric argument.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .classifiers import default_k, naive_knn_batch, wknn_transductive
from .datagen import (
    TWO_MOON_VARIANTS,
    DatasetFormatError,
    TwoMoonModel,
    VmfClusterModel,
    estimate_intrinsic_dim,
    generate_two_moon,
    generate_vmf_clusters,
    load_csv_dataset,
    read_labels_csv,
    read_points_csv,
    sample_labeled_indices,
    write_labels_csv,
    write_points_csv,
)
from .embedding import DEFAULT_COST_GRID, classical_mds, resolve_target_dim, svm_transductive
from .fermat_metric import FermatMatrix, FermatParams, fermat_matrix
from .point_graph import COMPLETE, KNN_MST

EXIT_USAGE, EXIT_FILE, EXIT_DATA = 2, 3, 4

GRAPH_CHOICES = {"complete": COMPLETE, "knn-mst": KNN_MST, "knn_mst": KNN_MST}


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage error: {message}", EXIT_USAGE)


def _positive_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {s!r}") from None
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _target_dim(s):
    if s in ("auto", "intrinsic"):
        return s
    return _positive_int(s)


def _add_fermat_flags(p):
    p.add_argument("--alpha", type=_positive_float, default=4.0, help="power parameter (>= 1)")
    p.add_argument("--graph", choices=sorted(GRAPH_CHOICES), default="knn-mst")
    p.add_argument("--knn-k", type=_positive_int, default=None, help="k of the k-NN part (default [sqrt(n)/2])")
    p.add_argument("--dim", type=_positive_int, default=None, help="intrinsic dimension (default: TWO-NN estimate)")


def _fermat_params(args) -> FermatParams:
    if args.alpha < 1:
        raise CliError(f"invalid numeric: alpha must be >= 1, got {args.alpha}", EXIT_DATA)
    return FermatParams(args.alpha, args.dim, GRAPH_CHOICES[args.graph], args.knn_k)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fermat-ssl", description="Semi-supervised classification with the sample Fermat distance.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--model", choices=TWO_MOON_VARIANTS + (bench.VMF,), required=True)
    p.add_argument("--n", type=_positive_int, default=200, help="total points, split evenly between the two classes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--concentration", type=float, default=5.0, help="vMF concentration")
    p.add_argument("--out", default="points.csv")
    p.add_argument("--labels-out", default="labels.csv")

    p = sub.add_parser("dim", help="TWO-NN intrinsic-dimension estimate")
    p.add_argument("--points", required=True)

    p = sub.add_parser("fermat", help="estimated Fermat distance matrix")
    p.add_argument("--points", required=True)
    _add_fermat_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")

    p = sub.add_parser("mds", help="classical MDS embedding of a Fermat matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="distance matrix file (see --format)")
    src.add_argument("--points", help="compute the Fermat matrix from these points first")
    _add_fermat_flags(p)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--p", type=_target_dim, default="auto", help="target dimension, 'auto' or 'intrinsic'")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-predict", help="one transductive run; predictions for unlabeled points")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", required=True, help="labels for every point (one integer per row)")
    lab = p.add_mutually_exclusive_group(required=True)
    lab.add_argument("--labeled-idx", help="file of labeled row indices (one per row)")
    lab.add_argument("--per-class", type=_positive_int, help="draw this many labeled points per class")
    p.add_argument("--method", choices=bench.METHODS, default=bench.FD_WKNN)
    _add_fermat_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="repeated seeded trials -> result CSV")
    p.add_argument("--model", choices=bench.MODELS, default="sphere_i")
    p.add_argument("--points")
    p.add_argument("--labels")
    p.add_argument("--methods", nargs="+", choices=bench.METHODS, default=[bench.FD_WKNN, bench.FD_SVM, bench.NAIVE_KNN])
    p.add_argument("--alpha", type=_positive_float, nargs="+", default=[4.0])
    p.add_argument("--graph", choices=sorted(GRAPH_CHOICES), default="knn-mst")
    p.add_argument("--knn-k", type=_positive_int, default=None)
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--n-labeled", type=_positive_int, nargs="+", default=[50])
    p.add_argument("--per-class", type=_positive_int, nargs="+", default=None,
                   help="labeled points per class (overrides --n-labeled)")
    p.add_argument("--n-unlabeled", type=int, default=300)
    p.add_argument("--reps", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true", help="leave time columns empty for byte-stable output")
    p.add_argument("--out", required=True)
    return parser


def _need_file(path):
    if not Path(path).is_file():
        raise CliError(f"missing file: {path}", EXIT_FILE)
    return path


def _cmd_gen(args):
    if args.model == bench.VMF:
        data = generate_vmf_clusters(VmfClusterModel(concentration=args.concentration,
                                                     n_per_class=max(1, args.n // 2), seed=args.seed))
    else:
        data = generate_two_moon(TwoMoonModel(args.model, args.n - args.n // 2, args.n // 2, args.seed))
    write_points_csv(args.out, data.points)
    write_labels_csv(args.labels_out, data.full_labels())


def _cmd_dim(args):
    print(f"{estimate_intrinsic_dim(read_points_csv(_need_file(args.points))):.6f}")


def _write_matrix(fm: FermatMatrix, path, fmt):
    if fmt == "binary":
        fm.to_binary(path)
    else:
        fm.to_csv(path)


def _cmd_fermat(args):
    cloud = read_points_csv(_need_file(args.points))
    fm = fermat_matrix(cloud, _fermat_params(args))
    _write_matrix(fm, args.out, args.format)


def _cmd_mds(args):
    if args.matrix:
        _need_file(args.matrix)
        fm = FermatMatrix.from_binary(args.matrix) if args.format == "binary" else FermatMatrix.from_csv(args.matrix)
        if args.dim:
            fm.intrinsic_dim = args.dim
    else:
        fm = fermat_matrix(read_points_csv(_need_file(args.points)), _fermat_params(args))
    emb = classical_mds(fm, resolve_target_dim(fm, args.p))
    np.savetxt(args.out, emb.coords, delimiter=",", fmt="%.17g",
               header=",".join(f"x{j}" for j in range(emb.p)), comments="")
    print(f"p={emb.p} distortion={emb.distortion:.6g}")


def _cmd_fit_predict(args):
    full = load_csv_dataset(_need_file(args.points), _need_file(args.labels))
    truth = full.full_labels()
    if args.labeled_idx:
        idx = np.unique(read_labels_csv(_need_file(args.labeled_idx)))
    else:
        idx = sample_labeled_indices(truth, args.per_class, args.seed)
    data = full.with_labeled(idx)
    unl = data.unlabeled_idx
    k = default_k(len(idx), data.n_classes)
    if args.method == bench.NAIVE_KNN:
        pred = naive_knn_batch(data.points[unl], data.points[idx], data.labels, k)
    else:
        fm = fermat_matrix(data.cloud, _fermat_params(args))
        if args.method == bench.FD_WKNN:
            pred = wknn_transductive(fm.dist, idx, data.labels, data.n_classes, k=k, seed=args.seed)
        else:
            p = "auto" if args.method == bench.FD_SVM else "intrinsic"
            pred = svm_transductive(fm, idx, data.labels, data.n_classes, p=p, cost_grid=DEFAULT_COST_GRID,
                                    seed=args.seed)
    rows = np.column_stack([unl, pred, truth[unl]]) if len(unl) else np.empty((0, 3), dtype=np.int64)
    np.savetxt(args.out, rows, delimiter=",", fmt="%d", header="index,prediction,label", comments="")
    if len(unl):
        print(f"accuracy={np.mean(pred == truth[unl]):.6f} n_unlabeled={len(unl)}")
    else:
        print(f"accuracy={bench.NO_EVAL} n_unlabeled=0")


def _cmd_bench(args):
    if args.model == bench.CSV_MODEL:
        _need_file(args.points or "")
        _need_file(args.labels or "")
        k_classes = load_csv_dataset(args.points, args.labels).n_classes
    else:
        k_classes = 2
    n_labeled = [c * k_classes for c in args.per_class] if args.per_class else args.n_labeled
    config = bench.ExperimentConfig(
        model=args.model, points_path=args.points, labels_path=args.labels,
        methods=tuple(args.methods), alphas=tuple(args.alpha), graph_kind=GRAPH_CHOICES[args.graph],
        knn_k=args.knn_k, intrinsic_dim=args.dim, n_labeled=tuple(n_labeled),
        n_unlabeled=args.n_unlabeled, repetitions=args.reps, seed=args.seed,
        record_time=not args.no_timing, output=args.out)
    table = bench.run_experiment(config)
    for r in table.rows:
        acc = bench.NO_EVAL if r.mean_accuracy is None else f"{r.mean_accuracy:.4f} ({r.std_accuracy:.4f})"
        print(f"{r.method:9s} n_l={r.n_labeled:<4d} alpha={r.alpha:<4g} acc={acc}")


COMMANDS = {"gen": _cmd_gen, "dim": _cmd_dim, "fermat": _cmd_fermat, "mds": _cmd_mds,
            "fit-predict": _cmd_fit_predict, "bench": _cmd_bench}


def cli_dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"fermat-ssl: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except bench.TrialError as exc:
        print(f"fermat-ssl: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DatasetFormatError as exc:
        print(f"fermat-ssl: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"fermat-ssl: file error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except OSError as exc:
        print(f"fermat-ssl: I/O error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except ValueError as exc:
        print(f"fermat-ssl: invalid numeric or data: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
