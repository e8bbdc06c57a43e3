"""Wall time of the sparse-graph Fermat matrix as n doubles (noisy variant, D = 500)."""
import argparse
import time

from fermat_ssl.datagen import NOISY_III, TwoMoonModel, generate_two_moon
from fermat_ssl.fermat_metric import FermatParams, fermat_matrix
from fermat_ssl.point_graph import COMPLETE, KNN_MST


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[375, 750, 1500, 3000])
    ap.add_argument("--alpha", type=float, default=4.0)
    ap.add_argument("--knn-k", type=int, default=None, help="hold k fixed instead of [sqrt(n)/2]")
    ap.add_argument("--complete", action="store_true", help="also time the complete graph")
    ap.add_argument("--tries", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    kinds = [KNN_MST] + ([COMPLETE] if args.complete else [])
    prev = {}
    for n in args.sizes:
        cloud = generate_two_moon(TwoMoonModel(NOISY_III, n - n // 2, n // 2, seed=n)).cloud
        for kind in kinds:
            params = FermatParams(args.alpha, 2, kind, args.knn_k if kind == KNN_MST else None)
            best = float("inf")
            for _ in range(args.tries):
                t0 = time.perf_counter()
                fm = fermat_matrix(cloud, params, workers=args.workers)
                best = min(best, time.perf_counter() - t0)
            growth = f"{best / prev[kind]:.2f}x" if kind in prev else "-"
            prev[kind] = best
            print(f"n={n:6d}  {kind:9s} k={fm.knn_k or "-":>4}  {best:8.3f} s  growth {growth}")


if __name__ == "__main__":
    main()
