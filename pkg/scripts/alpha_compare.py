"""FD-wkNN accuracy for several alpha values on paired samples."""
import argparse

from fermat_ssl.bench import FD_WKNN, ExperimentConfig, paired_accuracies
from fermat_ssl.datagen import TWO_MOON_VARIANTS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="sphere_i", choices=TWO_MOON_VARIANTS)
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--n-labeled", type=int, default=50)
    ap.add_argument("--n-unlabeled", type=int, default=300)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    config = ExperimentConfig(model=args.model, methods=(FD_WKNN,), alphas=tuple(args.alphas),
                              n_labeled=(args.n_labeled,), n_unlabeled=args.n_unlabeled,
                              repetitions=args.reps, seed=args.seed)
    acc = paired_accuracies(config)
    base = acc[(FD_WKNN, args.alphas[0])]
    print(f"{'alpha':>6}  {'mean':>7}  {'std':>7}  paired diff vs alpha={args.alphas[0]:g}")
    for a in args.alphas:
        v = acc[(FD_WKNN, a)]
        print(f"{a:6g}  {v.mean():7.4f}  {v.std(ddof=1) if len(v) > 1 else 0.0:7.4f}  {(v - base).mean():+.4f}")


if __name__ == "__main__":
    main()
