"""Zero-shot smoke run over several seeds; prints per-seed and median AUROC."""

import argparse
import logging

from threadpoolctl import threadpool_limits

from owleye.smoke import run_smoke


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--n", type=int, default=300, help="nodes per graph")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    with threadpool_limits(limits=args.threads):
        res = run_smoke(range(args.seeds), n=args.n)
    print("seed  auroc   oracle  auprc")
    for row in zip(res.seeds, res.auroc, res.auroc_oracle, res.auprc):
        print("{:>4}  {:.4f}  {:.4f}  {:.4f}".format(*row))
    print(f"median auroc {res.median:.4f}  oracle {res.median_oracle:.4f}  ({res.seconds:.1f}s)")


if __name__ == "__main__":
    main()
