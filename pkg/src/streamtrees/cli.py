"""Experiment orchestration: declarative specs, parameter grids, seeded
batch execution, and result emission.

A spec file (JSON) plus flag overrides (flags win) expands into a list of
independent cells; each cell is one protocol run.  Re-running an identical
spec reproduces byte-identical curve tables.  Every emitted file is listed
in ``index.json``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import datasets, evaluation, synth
from .active import STRATEGY_NAMES, make_strategy
from .criteria import CriterionKind
from .tree import (
    CTreeExact,
    CTreeHeuristic,
    HoeffdingBound,
    LearnerConfig,
    McDiarmidBound,
    TreeLearner,
    default_hoeffding_range,
)

MODES = ("full", "active", "synth-full", "synth-active", "coverage")

CRITERION_NAMES = {
    "gini": CriterionKind.GINI,
    "entropy": CriterionKind.SCALED_ENTROPY,
    "scaled-entropy": CriterionKind.SCALED_ENTROPY,
    "km": CriterionKind.KEARNS_MANSOUR,
    "kearns-mansour": CriterionKind.KEARNS_MANSOUR,
    "error": CriterionKind.CLASSIFICATION_ERROR,
    "classification-error": CriterionKind.CLASSIFICATION_ERROR,
}

BOUND_NAMES = ("heuristic", "exact", "hoeffding", "mcdiarmid")


@dataclass
class ExperimentSpec:
    mode: str = "synth-full"
    out_dir: str = "results"
    manifest: Optional[str] = None
    dataset: Optional[str] = None
    criterion: str = "gini"
    bound: str = "heuristic"
    c: float = 1.0
    delta: str = "1/t"  # a float literal or "1/t"
    grace: int = 100
    tau: float = 0.0
    seeds: list = field(default_factory=lambda: [1])
    grid: Optional[str] = None  # "c:geom:0.02:2.0:20" or "delta:lin:..."
    strategies: list = field(default_factory=lambda: ["consistency"])
    budgets: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    step: float = 0.01
    nu: float = 0.2
    strategy_delta: Optional[float] = None  # None = 1/t
    synth_leaves: int = 10
    synth_dim: int = 5
    synth_q: float = 0.7
    synth_examples_per_leaf: int = 2000
    synth_trees: int = 1
    coverage_trials: int = 10000
    workers: int = 1
    instance_log: bool = True

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode: {self.mode!r} not in {MODES}")
        if self.criterion not in CRITERION_NAMES:
            raise ValueError(f"criterion: {self.criterion!r} not in {sorted(CRITERION_NAMES)}")
        if self.bound not in BOUND_NAMES:
            raise ValueError(f"bound: {self.bound!r} not in {BOUND_NAMES}")
        if self.mode in ("full", "active"):
            if not self.dataset:
                raise ValueError("dataset: required for dataset modes")
            if not self.manifest:
                raise ValueError("manifest: required for dataset modes")
        for b in self.budgets:
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"budgets: {b} outside [0, 1]")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ValueError(f"strategies: {s!r} not in {STRATEGY_NAMES}")
        if self.delta != "1/t":
            value = float(self.delta)
            if not 0.0 < value < 1.0:
                raise ValueError(f"delta: {value} outside (0, 1)")
        if self.grace < 1:
            raise ValueError("grace: must be >= 1")
        if self.synth_leaves < 1 or self.synth_dim < 1:
            raise ValueError("synth_leaves and synth_dim must be >= 1")
        if not 0.0 < self.synth_q < 1.0:
            raise ValueError("synth_q: must be in (0, 1)")
        if self.grid is not None:
            parse_grid(self.grid)


def parse_grid(text: str) -> tuple[str, list[float]]:
    """Parse "param:kind:lo:hi:count" into (param, values); kind is
    ``geom`` or ``lin``."""
    parts = text.split(":")
    if len(parts) != 5:
        raise ValueError(f"grid: expected param:kind:lo:hi:count, got {text!r}")
    param, kind, lo_s, hi_s, count_s = parts
    if param not in ("c", "delta"):
        raise ValueError(f"grid: param must be c or delta, got {param!r}")
    lo, hi, count = float(lo_s), float(hi_s), int(count_s)
    if count < 1 or lo <= 0 or hi < lo:
        raise ValueError(f"grid: bad range in {text!r}")
    if kind == "geom":
        values = list(np.geomspace(lo, hi, count))
    elif kind == "lin":
        values = list(np.linspace(lo, hi, count))
    else:
        raise ValueError(f"grid: kind must be geom or lin, got {kind!r}")
    return param, [float(v) for v in values]


def build_learner_config(spec: ExperimentSpec, c: Optional[float] = None,
                         delta: Optional[float] = None) -> LearnerConfig:
    criterion = CRITERION_NAMES[spec.criterion]
    delta_mode = "fixed"
    if delta is None:
        if spec.delta == "1/t":
            delta_mode = "one_over_t"
            delta_value = 0.05  # unused in one_over_t mode
        else:
            delta_value = float(spec.delta)
    else:
        delta_value = delta
    c_value = spec.c if c is None else c
    if spec.bound == "heuristic":
        bound = CTreeHeuristic(c=c_value)
    elif spec.bound == "exact":
        bound = CTreeExact(delta=delta_value)
    elif spec.bound == "hoeffding":
        bound = HoeffdingBound(delta=delta_value, value_range=default_hoeffding_range(criterion))
    else:
        bound = McDiarmidBound(delta=delta_value)
    return LearnerConfig(
        criterion=criterion,
        bound=bound,
        grace_period=spec.grace,
        tau=spec.tau,
        delta_mode=delta_mode,
    )


# -- cell execution -----------------------------------------------------------

_dataset_cache: dict = {}


def _load_dataset(manifest_path: str, name: str):
    key = (manifest_path, name)
    if key not in _dataset_cache:
        manifest = datasets.load_manifest(manifest_path)
        if name not in manifest:
            raise ValueError(f"dataset: {name!r} not in manifest {manifest_path}")
        _dataset_cache[key] = datasets.load_entry(manifest[name])
    return _dataset_cache[key]


def _synth_stream(spec: ExperimentSpec, seed: int, tree_index: int):
    tree_rng = np.random.default_rng([seed, tree_index, 0])
    tree = synth.rand_cbt(spec.synth_leaves, spec.synth_dim, spec.synth_q, tree_rng)
    stream_rng = np.random.default_rng([seed, tree_index, 1])
    stream = synth.sample_stream(tree, spec.synth_examples_per_leaf, stream_rng)
    return tree, stream


def run_cell(spec: ExperimentSpec, cell: dict) -> dict:
    """Execute one (parameter, seed) cell and return its summary row."""
    seed = cell["seed"]
    param, value = cell.get("param"), cell.get("value")
    grid_kwargs = {}
    if param == "c":
        grid_kwargs["c"] = value
    elif param == "delta":
        grid_kwargs["delta"] = value
    config = build_learner_config(spec, **grid_kwargs)

    if spec.mode in ("synth-full", "synth-active"):
        _, stream = _synth_stream(spec, seed, cell.get("tree", 0))
        dimension = spec.synth_dim
    else:
        examples, meta = _load_dataset(spec.manifest, spec.dataset)
        if spec.mode == "full":
            stream = datasets.permute(examples, seed)
        else:
            stream = examples  # keep native order for drift analysis
        dimension = meta.dimension

    learner = TreeLearner(config, dimension)
    if spec.mode in ("full", "synth-full"):
        record = evaluation.run_full(learner, stream, seed=seed)
    else:
        budget = cell["budget"]
        rng = np.random.default_rng([seed, cell.get("tree", 0), 2, cell["strategy_index"]])
        strategy = make_strategy(
            cell["strategy"], budget, rng,
            step=spec.step, nu=spec.nu, delta=spec.strategy_delta,
        )
        record = evaluation.run_active(learner, strategy, budget, stream, seed=seed)

    if spec.mode in ("full", "active"):
        _, meta = _load_dataset(spec.manifest, spec.dataset)
        metric_value = record.metric_value(meta.metric.value)
    else:
        metric_value = record.final_metric

    row = {
        "cell": cell["cell"],
        "mode": spec.mode,
        "dataset": spec.dataset or "synthetic",
        "criterion": spec.criterion,
        "bound": spec.bound,
        "param": param or "",
        "value": value if value is not None else "",
        "strategy": cell.get("strategy", ""),
        "budget": cell.get("budget", ""),
        "seed": seed,
        "tree": cell.get("tree", ""),
        "final_metric": metric_value,
        "online_accuracy": record.final_metric,
        "final_leaves": record.final_leaf_count,
        "query_rate": record.query_rate if record.budget is not None else 1.0,
        "drift_resets": record.drift_resets,
    }
    lines = list(record.instance_lines()) if spec.instance_log else None
    return {"row": row, "instance_lines": lines}


def _expand_cells(spec: ExperimentSpec) -> list[dict]:
    cells = []
    if spec.grid is not None:
        param, values = parse_grid(spec.grid)
        grid_points = [(param, v) for v in values]
    else:
        grid_points = [(None, None)]
    trees = range(spec.synth_trees) if spec.mode.startswith("synth") else [0]
    index = 0
    if spec.mode in ("full", "synth-full"):
        for param, value in grid_points:
            for tree in trees:
                for seed in spec.seeds:
                    cells.append(
                        {"cell": index, "param": param, "value": value, "tree": tree, "seed": seed}
                    )
                    index += 1
    else:
        for param, value in grid_points:
            for si, strategy in enumerate(spec.strategies):
                for budget in spec.budgets:
                    for tree in trees:
                        for seed in spec.seeds:
                            cells.append(
                                {
                                    "cell": index,
                                    "param": param,
                                    "value": value,
                                    "strategy": strategy,
                                    "strategy_index": si,
                                    "budget": budget,
                                    "tree": tree,
                                    "seed": seed,
                                }
                            )
                            index += 1
    return cells


def _format_cell_name(cell: dict) -> str:
    bits = [f"cell{cell['cell']:04d}"]
    if cell.get("param"):
        bits.append(f"{cell['param']}={cell['value']:.6g}")
    if cell.get("strategy"):
        bits.append(f"{cell['strategy']}")
        bits.append(f"B={cell['budget']:.2f}")
    bits.append(f"seed={cell['seed']}")
    return "_".join(bits)


def _tsv(rows: list[dict], columns: list[str]) -> str:
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_fmt(row.get(col, "")) for col in columns))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write(path: Path, text: str, emitted: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    emitted.append(str(path))


def run(spec: ExperimentSpec) -> int:
    """Execute every cell of the spec; returns the process exit status."""
    try:
        spec.validate()
    except ValueError as err:
        print(f"spec validation error: {err}", file=sys.stderr)
        return 2
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emitted: list[str] = []
    failures: list[dict] = []

    if spec.mode == "coverage":
        rows = evaluation.coverage_table(trials=spec.coverage_trials, seed=spec.seeds[0])
        for row in rows:
            row["joint"] = ",".join(repr(v) for v in row["joint"])
        columns = ["family", "joint", "m", "delta", "trials", "violation_rate", "ok"]
        _write(out_dir / "coverage.tsv", _tsv(rows, columns), emitted)
        index = {"spec": asdict(spec), "files": sorted(emitted), "failures": []}
        (out_dir / "index.json").write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
        print(f"coverage: {sum(r['ok'] for r in rows)}/{len(rows)} cells within delta")
        return 0

    cells = _expand_cells(spec)
    results: list[Optional[dict]] = [None] * len(cells)
    workers = spec.workers if spec.workers > 0 else (os.cpu_count() or 1)
    workers = min(workers, len(cells))
    if workers <= 1:
        for i, cell in enumerate(cells):
            try:
                results[i] = run_cell(spec, cell)
            except Exception as err:  # noqa: BLE001 - cell isolation is the point
                failures.append({"cell": cell["cell"], "error": f"{type(err).__name__}: {err}"})
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, spec, cell) for cell in cells]
            for i, future in enumerate(futures):
                try:
                    results[i] = future.result()
                except Exception as err:  # noqa: BLE001
                    failures.append({"cell": cells[i]["cell"], "error": f"{type(err).__name__}: {err}"})

    rows = []
    for cell, result in zip(cells, results):
        if result is None:
            continue
        rows.append(result["row"])
        if result["instance_lines"] is not None:
            name = _format_cell_name(cell)
            _write(out_dir / "runs" / f"{name}.tsv", "\n".join(result["instance_lines"]) + "\n", emitted)

    summary_columns = [
        "cell", "mode", "dataset", "criterion", "bound", "param", "value",
        "strategy", "budget", "seed", "tree", "final_metric", "online_accuracy",
        "final_leaves", "query_rate", "drift_resets",
    ]
    _write(out_dir / "summary.tsv", _tsv(rows, summary_columns), emitted)

    if spec.mode in ("full", "synth-full"):
        curve = _leaf_curve(rows)
        _write(out_dir / "curve_leaves.tsv", curve, emitted)
    else:
        curve = _budget_curve(rows)
        _write(out_dir / "curve_budget.tsv", curve, emitted)

    index = {"spec": asdict(spec), "files": sorted(emitted), "failures": failures}
    (out_dir / "index.json").write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
    if failures:
        for failure in failures:
            print(f"cell {failure['cell']} failed: {failure['error']}", file=sys.stderr)
        return 1
    print(f"wrote {len(emitted) + 1} files to {out_dir}")
    return 0


def _leaf_curve(rows: list[dict]) -> str:
    """Aggregate runs sharing a grid value into one (leaves, metric) row."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(row["value"], []).append(row)
    points = []
    for value, group in groups.items():
        leaves = float(np.mean([g["final_leaves"] for g in group]))
        metric = float(np.mean([g["final_metric"] for g in group]))
        points.append({"value": value, "mean_leaves": leaves, "mean_metric": metric,
                       "runs": len(group)})
    points.sort(key=lambda p: (p["mean_leaves"], p["value"] if p["value"] != "" else 0.0))
    return _tsv(points, ["value", "mean_leaves", "mean_metric", "runs"])


def _budget_curve(rows: list[dict]) -> str:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["strategy"], row["budget"]), []).append(row)
    points = []
    for (strategy, budget), group in sorted(groups.items()):
        metric = float(np.mean([g["final_metric"] for g in group]))
        rate = float(np.mean([g["query_rate"] for g in group]))
        points.append({"strategy": strategy, "budget": budget, "mean_metric": metric,
                       "mean_query_rate": rate, "runs": len(group)})
    return _tsv(points, ["strategy", "budget", "mean_metric", "mean_query_rate", "runs"])


# -- argument parsing ----------------------------------------------------------


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _str_list(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamtrees",
        description="Streaming confidence-gated decision tree experiments",
    )
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--spec", help="JSON spec file; flags override its fields")
    parser.add_argument("--manifest", help="dataset manifest JSON")
    parser.add_argument("--dataset", help="dataset name from the manifest")
    parser.add_argument("--criterion", choices=sorted(CRITERION_NAMES))
    parser.add_argument("--bound", choices=BOUND_NAMES)
    parser.add_argument("--c", type=float, help="heuristic bound scale")
    parser.add_argument("--delta", help="failure probability, a float or '1/t'")
    parser.add_argument("--grace", type=int, help="labels between split evaluations")
    parser.add_argument("--tau", type=float, help="tie-break threshold (0 disables)")
    parser.add_argument("--seed", type=_int_list, dest="seeds", help="comma list of seeds")
    parser.add_argument("--grid", help="param:kind:lo:hi:count, e.g. c:geom:0.02:2:20")
    parser.add_argument("--strategy", type=_str_list, dest="strategies",
                        help=f"comma list from {STRATEGY_NAMES}")
    parser.add_argument("--budget", type=_float_list, dest="budgets", help="comma list in [0,1]")
    parser.add_argument("--step", type=float, help="uncertainty threshold adjustment step")
    parser.add_argument("--nu", type=float, help="random-branch fraction of split strategies")
    parser.add_argument("--strategy-delta", type=float, dest="strategy_delta",
                        help="fixed consistency delta (default 1/t)")
    parser.add_argument("--synth-leaves", type=int, dest="synth_leaves")
    parser.add_argument("--synth-dim", type=int, dest="synth_dim")
    parser.add_argument("--synth-q", type=float, dest="synth_q")
    parser.add_argument("--synth-epl", type=int, dest="synth_examples_per_leaf")
    parser.add_argument("--synth-trees", type=int, dest="synth_trees")
    parser.add_argument("--coverage-trials", type=int, dest="coverage_trials")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--no-instance-log", action="store_true",
                        help="skip per-instance run files")
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    spec = ExperimentSpec()
    if args.spec:
        with open(args.spec) as handle:
            raw = json.load(handle)
        known = set(spec.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"spec file: unknown fields {sorted(unknown)}")
        spec = replace(spec, **raw)
    overrides = {}
    for name in spec.__dataclass_fields__:
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.no_instance_log:
        overrides["instance_log"] = False
    return replace(spec, **overrides)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"spec error: {err}", file=sys.stderr)
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
