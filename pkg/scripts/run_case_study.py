"""Full report on the synthetic suite: main table, dictionary growth and n_sup sweep."""

import argparse
import logging
from pathlib import Path

from owleye.config import load_config
from owleye.experiment import run_experiment
from owleye.synthetic import write_suite

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=str(ROOT / "configs" / "synthetic.toml"))
    p.add_argument("--out", default="report")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    data = ROOT / "data" / "synthetic"
    if not (data / "test0").is_dir():
        write_suite(data, args.seed, n_aux=3)
    cfg = load_config(args.config).replace(seed=args.seed)
    run_experiment(cfg, args.out)
    print((Path(args.out) / "summary.md").read_text())


if __name__ == "__main__":
    main()
