"""Write a labeled multi-domain synthetic suite as graph directories."""

import argparse

from owleye.synthetic import write_suite


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="data/synthetic", help="root directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=300, help="nodes per graph")
    p.add_argument("--n-aux", type=int, default=3, help="extra graphs for dictionary growth")
    args = p.parse_args()
    train, test, aux = write_suite(args.out, args.seed, n=args.n, n_aux=args.n_aux)
    for label, paths in (("train", train), ("test", test), ("aux", aux)):
        print(f"{label}: {' '.join(paths)}")


if __name__ == "__main__":
    main()
