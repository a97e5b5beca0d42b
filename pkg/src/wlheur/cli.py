"""Command-line entry points: train, solve, featurize, fixtures, bench, generate.

Exit codes: 0 success, 1 usage, 2 input error, 3 resource limit,
4 internal invariant violation. Every run writes its resolved configuration
to ``config.json`` in the output directory. Wall-clock times only go to log
lines so that output files are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import blocksworld
from .errors import (FactorizationError, InapplicableActionError, InputError, InvalidPlanError,
                     ResourceLimitError, WLHeurError)
from .features import FeatureConfig
from .fixtures import check_fixtures
from .ilg import build_state_ilg
from .lwl import DEFAULT_MEM_CAP
from .models import KINDS, Bundle, GPModel, Hyperparameters, fit, load_model, save_model
from .pddl import Domain, LiftedTask, ground_actions, load_domain, load_problem
from .plans import (DEFAULT_TIME_LIMIT, build_dataset, format_dataset, format_plan, optimal_plan,
                    parse_plan, validate_plan)
from .search import BASELINES, BYTES_PER_NODE, SearchLimits, gbfs, make_heuristic
from .wl import colour_dag, write_dag

log = logging.getLogger("wlheur")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RESOURCE, EXIT_INTERNAL = 0, 1, 2, 3, 4
OUT_ENV = "WLHEUR_OUT"
DEFAULT_OUT = "wlheur-out"
LEARNED = "learned"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    domain: str | None = None
    problems: list[str] = field(default_factory=list)
    plans: list[str] = field(default_factory=list)
    model: str | None = None
    out: str = DEFAULT_OUT
    kind: str = "gpr"
    iterations: int = 4
    C: float = 1.0
    epsilon: float = 0.1
    noise: float = 0.1
    gamma: float | None = None
    timeout: float = DEFAULT_TIME_LIMIT
    mem_cap: int = DEFAULT_MEM_CAP
    max_expansions: int | None = None
    seed: int = 0
    workers: int = 1
    heuristics: list[str] = field(default_factory=list)
    oracle: bool = False
    dag: bool = False

    @property
    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters(C=self.C, epsilon=self.epsilon, noise=self.noise,
                               gamma=self.gamma, seed=self.seed)

    @property
    def limits(self) -> SearchLimits:
        return SearchLimits(time_limit=self.timeout, max_nodes=max(1, self.mem_cap // BYTES_PER_NODE),
                            max_expansions=self.max_expansions)

    def write(self, outdir: Path) -> None:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "config.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_tasks(cfg: RunConfig) -> tuple[Domain, list[LiftedTask]]:
    if not cfg.domain:
        raise UsageError("--domain is required")
    if not cfg.problems:
        raise UsageError("at least one problem file is required (--problems)")
    domain = load_domain(cfg.domain)
    return domain, [load_problem(p, domain) for p in cfg.problems]


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.plans and not cfg.oracle:
        raise UsageError("training needs plan files (--plans) or --oracle to label with the exact solver")
    if cfg.plans and len(cfg.plans) != len(cfg.problems):
        raise UsageError(f"got {len(cfg.problems)} problems but {len(cfg.plans)} plans")
    if cfg.kind not in KINDS:
        raise UsageError(f"unknown model kind {cfg.kind!r}")
    hp = cfg.hyperparameters
    features = FeatureConfig(iterations=cfg.iterations,
                             algorithm="2lwl" if cfg.kind == "2lwl-svr" else "wl",
                             mem_cap=cfg.mem_cap)
    domain, tasks = _load_tasks(cfg)
    outdir = Path(cfg.out)
    cfg.write(outdir)

    pairs = []
    for i, task in enumerate(tasks):
        if cfg.oracle:
            plan = optimal_plan(task, time_limit=cfg.timeout)
            if plan is None:
                log.warning("%s is unsolvable; skipped", cfg.problems[i])
                continue
        else:
            plan = parse_plan(Path(cfg.plans[i]).read_text(), task)
            validate_plan(task, plan)
        pairs.append((task, plan))
    dataset = build_dataset(pairs)
    if not len(dataset):
        raise InputError("the training set is empty")
    (outdir / "dataset.tsv").write_text(format_dataset(dataset))

    start = time.perf_counter()
    graphs = [build_state_ilg(ls.task, ls.state) for ls in dataset.states]
    table = features.collect(graphs)
    X = features.featurize_many(graphs, table).astype(np.float64)
    y = np.asarray(dataset.labels, dtype=np.float64)
    model = fit(cfg.kind, X, y, hp)
    pred = model.predict(X)
    wall = time.perf_counter() - start

    bundle = Bundle(cfg.kind, model, table, features, hp,
                    extra={"domain": domain.name, "dataset_size": len(dataset)})
    model_path = Path(cfg.model) if cfg.model else outdir / "model.wlh"
    save_model(bundle, model_path)
    report = {
        "kind": cfg.kind,
        "iterations": cfg.iterations,
        "n_colours": len(table),
        "n_tasks": len(pairs),
        "dataset_size": len(dataset),
        "mse": float(np.mean((pred - y) ** 2)),
        "max_abs_error": float(np.max(np.abs(pred - y))),
        "n_parameters": int(model.n_parameters),
        "model": str(model_path),
    }
    _write_json(outdir / "train_report.json", report)
    log.info("trained %s: |C|=%d, %d states, mse=%.4g, wall time %.2fs",
             cfg.kind, len(table), len(dataset), report["mse"], wall)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _heuristic(name: str, task: LiftedTask, actions, model_path: str | None):
    if name == LEARNED:
        if not model_path:
            raise UsageError("the learned heuristic needs --model")
        return make_heuristic(name, task, actions, load_model(model_path))
    if name not in BASELINES:
        raise UsageError(f"unknown heuristic {name!r}; choose from {', '.join([*BASELINES, LEARNED])}")
    return make_heuristic(name, task, actions)


def _solve_one(domain_path: str, problem_path: str, heuristic: str, model_path: str | None,
               limits: SearchLimits) -> tuple[dict, str | None]:
    domain = load_domain(domain_path)
    task = load_problem(problem_path, domain)
    actions = ground_actions(task)
    h = _heuristic(heuristic, task, actions, model_path)
    result = gbfs(task, h, limits, actions)
    record = {"problem": Path(problem_path).stem, "domain": domain.name, "heuristic": heuristic,
              "status": result.status}
    stats = dict(result.stats)
    wall = stats.pop("wall_time", None)
    record.update({k: v for k, v in stats.items()})
    plan_text = None
    if result.solved:
        record["cost"] = validate_plan(task, result.plan)
        record["length"] = len(result.plan)
        plan_text = format_plan(result.plan)
    record["_wall_time"] = wall
    return record, plan_text


def _stats_text(record: dict) -> str:
    return "".join(f"{k}={record[k]}\n" for k in sorted(record) if not k.startswith("_"))


def cmd_solve(cfg: RunConfig) -> int:
    if not cfg.domain or not cfg.problems:
        raise UsageError("solve needs --domain and --problems")
    heuristic = LEARNED if cfg.model else (cfg.heuristics[0] if cfg.heuristics else "ff")
    outdir = Path(cfg.out)
    cfg.write(outdir)
    summary, code = [], EXIT_OK
    for path in cfg.problems:
        record, plan_text = _solve_one(cfg.domain, path, heuristic, cfg.model, cfg.limits)
        wall = record.pop("_wall_time")
        stem = Path(path).stem
        if plan_text is not None:
            (outdir / f"{stem}.plan").write_text(plan_text)
        (outdir / f"{stem}.stats").write_text(_stats_text(record))
        log.info("%s: %s with %s, %d expansions, %.2fs", stem, record["status"], heuristic,
                 record["expansions"], wall)
        print(f"{stem}: {record['status']}" + (f" cost={record['cost']:g}" if "cost" in record else ""))
        if record["status"] not in ("SOLVED", "EXHAUSTED"):
            code = EXIT_RESOURCE
        summary.append(record)
    _write_json(outdir / "solve.json", summary)
    return code


# ---------------------------------------------------------------------------
# featurize


def cmd_featurize(cfg: RunConfig) -> int:
    if not cfg.model:
        raise UsageError("featurize needs --model")
    bundle = load_model(cfg.model)
    outdir = Path(cfg.out)
    cfg.write(outdir)
    rows, names = [], []
    if cfg.problems:
        if cfg.plans and len(cfg.plans) != len(cfg.problems):
            raise UsageError(f"got {len(cfg.problems)} problems but {len(cfg.plans)} plans")
        _, tasks = _load_tasks(cfg)
        L = bundle.features.iterations
        for i, task in enumerate(tasks):
            states = [task.init]
            if cfg.plans:
                plan = parse_plan(Path(cfg.plans[i]).read_text(), task)
                states = [ls.state for ls in build_dataset([(task, plan)]).states]
            for j, s in enumerate(states):
                g = build_state_ilg(task, s)
                x = bundle.featurize(g)
                n = g.n_nodes if bundle.features.algorithm == "wl" else g.n_nodes * (g.n_nodes - 1) // 2
                if int(x.sum()) < n * (L + 1):
                    log.warning("%s state %d: %d of %d colour occurrences are unseen in training",
                                Path(cfg.problems[i]).stem, j, n * (L + 1) - int(x.sum()), n * (L + 1))
                rows.append(x)
                names.append(f"{Path(cfg.problems[i]).stem}\t{j}")
        with open(outdir / "features.txt", "w") as fh:
            fh.write(f"# {len(rows)} rows x {len(bundle.table)} colours\n")
            for x in rows:
                fh.write(" ".join(str(int(v)) for v in x) + "\n")
        (outdir / "rows.tsv").write_text("".join(n + "\n" for n in names))
    if cfg.dag:
        dag = colour_dag(bundle.table)
        write_dag(dag, outdir / "colour_dag.graphml")
        lines = [f"c{n}: {dag.nodes[n]['definition']}" for n in sorted(dag.nodes)]
        lines += [f"c{u} -> c{v}" for u, v in sorted(dag.edges)]
        (outdir / "colour_dag.txt").write_text("\n".join(lines) + "\n")
    if not cfg.problems and not cfg.dag:
        raise UsageError("nothing to do: give --problems and/or --dag")
    print(f"wrote {len(rows)} feature rows to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fixtures


def cmd_fixtures(cfg: RunConfig) -> int:
    checks = check_fixtures()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.detail})")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} fixture checks passed")
    return EXIT_OK if not failed else EXIT_INTERNAL


# ---------------------------------------------------------------------------
# bench


def _bench_cell(args):
    domain, problem, heuristic, model, limits = args
    try:
        record, _ = _solve_one(domain, problem, heuristic, model, limits)
    except ResourceLimitError as exc:
        record = {"problem": Path(problem).stem, "heuristic": heuristic,
                  "status": "RESOURCE_LIMIT", "error": str(exc), "_wall_time": None}
    record["_key"] = f"{problem}|{heuristic}"
    return record


def bench_table(cells: list[dict]) -> list[dict]:
    """Per (domain, heuristic) coverage, expansions and best-cost ratio quality."""
    best: dict[str, float] = {}
    for c in cells:
        if c["status"] == "SOLVED":
            best[c["problem"]] = min(best.get(c["problem"], math.inf), c["cost"])
    groups: dict[tuple, list[dict]] = {}
    for c in cells:
        groups.setdefault((c.get("domain", "?"), c["heuristic"]), []).append(c)
    table = []
    for (dom, h), group in sorted(groups.items()):
        solved = [c for c in group if c["status"] == "SOLVED"]
        quality = sum(best[c["problem"]] / c["cost"] if c["cost"] > 0 else 1.0 for c in solved)
        table.append({
            "domain": dom, "heuristic": h, "tasks": len(group), "coverage": len(solved),
            "median_expansions": statistics.median(c["expansions"] for c in solved) if solved else None,
            "total_cost": sum(c["cost"] for c in solved), "quality": round(quality, 6),
        })
    return table


def format_table(table: list[dict]) -> str:
    cols = ["domain", "heuristic", "tasks", "coverage", "median_expansions", "total_cost", "quality"]
    lines = ["\t".join(cols)]
    for row in table:
        lines.append("\t".join("-" if row[c] is None else f"{row[c]:g}" if isinstance(row[c], float)
                               else str(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def cmd_bench(cfg: RunConfig) -> int:
    if not cfg.domain or not cfg.problems:
        raise UsageError("bench needs --domain and --problems")
    heuristics = list(cfg.heuristics) or ["blind", "ff"]
    if cfg.model and LEARNED not in heuristics:
        heuristics.append(LEARNED)
    for h in heuristics:
        if h not in BASELINES and h != LEARNED:
            raise UsageError(f"unknown heuristic {h!r}")
    if LEARNED in heuristics and not cfg.model:
        raise UsageError("the learned heuristic needs --model")
    load_domain(cfg.domain)
    outdir = Path(cfg.out)
    cfg.write(outdir)
    cells_path = outdir / "cells.jsonl"
    done: dict[str, dict] = {}
    if cells_path.exists():
        for line in cells_path.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[rec["_key"]] = rec
    jobs = [(cfg.domain, p, h, cfg.model, cfg.limits) for p in cfg.problems for h in heuristics
            if f"{p}|{h}" not in done]
    log.info("bench: %d cells, %d already complete", len(cfg.problems) * len(heuristics),
             len(cfg.problems) * len(heuristics) - len(jobs))

    def record(rec):
        wall = rec.pop("_wall_time", None)
        done[rec["_key"]] = rec
        with open(cells_path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        log.info("%s/%s: %s%s", rec["problem"], rec["heuristic"], rec["status"],
                 f" in {wall:.2f}s" if wall is not None else "")

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for rec in pool.map(_bench_cell, jobs):
                record(rec)
    else:
        for job in jobs:
            record(_bench_cell(job))

    cells = [done[f"{p}|{h}"] for p in cfg.problems for h in heuristics]
    table = bench_table(cells)
    text = format_table(table)
    (outdir / "table.tsv").write_text(text)
    _write_json(outdir / "table.json", table)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate


def cmd_generate(cfg: RunConfig, blocks: list[int], count: int) -> int:
    outdir = Path(cfg.out)
    cfg.write(outdir)
    (outdir / "domain.pddl").write_text(blocksworld.DOMAIN)
    n = 0
    for b in blocks:
        for k in range(count):
            seed = cfg.seed * 100003 + b * 1009 + k
            name = f"bw-{b}-{k}"
            (outdir / f"{name}.pddl").write_text(blocksworld.generate_problem(b, seed, name))
            n += 1
    print(f"wrote domain.pddl and {n} problems to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wlheur", description="Learned planning heuristics from WL graph features.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, tasks=True):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=int, default=0)
        if tasks:
            p.add_argument("--domain")
            p.add_argument("--problems", nargs="+", default=[])
            p.add_argument("--timeout", type=float, default=DEFAULT_TIME_LIMIT, help="seconds")
            p.add_argument("--mem-cap", type=int, default=DEFAULT_MEM_CAP, help="bytes")

    p = sub.add_parser("train", help="build a dataset from plans and fit a model bundle")
    common(p)
    p.add_argument("--plans", nargs="+", default=[])
    p.add_argument("--oracle", action="store_true", help="label with exact optimal plans instead of --plans")
    p.add_argument("--model", help="bundle path (default OUT/model.wlh)")
    p.add_argument("--kind", choices=KINDS, default="gpr")
    p.add_argument("--iterations", "-L", type=int, default=4)
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=None)

    p = sub.add_parser("solve", help="run GBFS with a learned or baseline heuristic")
    common(p)
    p.add_argument("--model")
    p.add_argument("--heuristic", dest="heuristics", action="append", choices=list(BASELINES))
    p.add_argument("--max-expansions", type=int, default=None)

    p = sub.add_parser("featurize", help="dump feature vectors and the colour DAG of a bundle")
    common(p)
    p.add_argument("--model")
    p.add_argument("--plans", nargs="+", default=[])
    p.add_argument("--dag", action="store_true")

    p = sub.add_parser("fixtures", help="check the counterexample fixtures")
    common(p, tasks=False)

    p = sub.add_parser("bench", help="tasks x heuristics grid with coverage and quality")
    common(p)
    p.add_argument("--model")
    p.add_argument("--heuristics", nargs="+", default=[])
    p.add_argument("--max-expansions", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("generate", help="write random blocksworld problems")
    common(p, tasks=False)
    p.add_argument("--blocks", type=int, nargs="+", required=True)
    p.add_argument("--count", type=int, default=10)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    names = {f for f in RunConfig.__dataclass_fields__}
    values = {k: v for k, v in vars(args).items() if k in names and v is not None}
    values["out"] = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    return RunConfig(**values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        if args.subcommand == "generate":
            return cmd_generate(cfg, args.blocks, args.count)
        commands = {"train": cmd_train, "solve": cmd_solve, "featurize": cmd_featurize,
                    "fixtures": cmd_fixtures, "bench": cmd_bench}
        return commands[args.subcommand](cfg)
    except UsageError as exc:
        print(f"wlheur: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as exc:
        print(f"wlheur: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InputError, InvalidPlanError, InapplicableActionError, FactorizationError, OSError) as exc:
        print(f"wlheur: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except WLHeurError as exc:
        print(f"wlheur: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"wlheur: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
