#!/usr/bin/env python3
"""Train on small blocksworld tasks, then compare GBFS with the learned and blind heuristics."""

import argparse
import json
import logging
from pathlib import Path

from wlheur.experiment import ExperimentConfig, run_desk_experiment


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kind", default="gpr", choices=["gpr", "svr", "svr-rbf"])
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--train-blocks", type=int, nargs="+", default=[3, 4, 5, 6])
    p.add_argument("--train-per-size", type=int, default=6)
    p.add_argument("--test-blocks", type=int, nargs="+", default=[7])
    p.add_argument("--test-per-size", type=int, default=10)
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", type=Path, help="write the full result here")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    cfg = ExperimentConfig(train_blocks=tuple(args.train_blocks), train_per_size=args.train_per_size,
                           test_blocks=tuple(args.test_blocks), test_per_size=args.test_per_size,
                           kind=args.kind, iterations=args.iterations, time_limit=args.time_limit,
                           seed=args.seed)
    res = run_desk_experiment(cfg)
    n_test = len(cfg.test_blocks) * cfg.test_per_size
    print(f"training: {res.n_train_tasks} tasks, {res.dataset_size} states, |C|={res.n_colours}, "
          f"mse={res.train_mse:.4g}, {res.train_seconds:.2f}s")
    for h in res.runs:
        print(f"{h:>8}: coverage {res.coverage(h)}/{n_test}")
    learned, blind = res.common_median_expansions("learned", "blind")
    print(f"median expansions on commonly solved tasks: learned {learned:g}, blind {blind:g}")
    if args.json:
        args.json.write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
