"""Accuracy against labeled-set size on the three two-moon variants.

    python scripts/labeled_sweep.py --reps 100 --out results/sweep
"""
import argparse
from pathlib import Path

from fermat_ssl.bench import FD_SVM, FD_WKNN, NAIVE_KNN, ExperimentConfig, run_experiment
from fermat_ssl.datagen import TWO_MOON_VARIANTS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--n-labeled", type=int, nargs="+", default=[10, 20, 30, 50, 70, 100])
    ap.add_argument("--n-unlabeled", type=int, default=300)
    ap.add_argument("--alpha", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--models", nargs="+", default=list(TWO_MOON_VARIANTS), choices=TWO_MOON_VARIANTS)
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for model in args.models:
        config = ExperimentConfig(model=model, methods=(FD_WKNN, FD_SVM, NAIVE_KNN), alphas=(args.alpha,),
                                  n_labeled=tuple(args.n_labeled), n_unlabeled=args.n_unlabeled,
                                  repetitions=args.reps, seed=args.seed, output=str(out / f"{model}.csv"))
        table = run_experiment(config, progress=lambda n_l, rep: print(f"\r{model} n_l={n_l} rep={rep + 1}",
                                                                          end="", flush=True))
        print()
        for r in table.rows:
            print(f"  {r.method:9s} n_l={r.n_labeled:4d}  acc {r.mean_accuracy:.4f} +- {r.std_accuracy:.4f}")


if __name__ == "__main__":
    main()
