"""Command-line front end.

Four commands: ``run`` executes a regret experiment (ad-hoc or one of
the numbered figure presets), ``lab`` runs the statistics experiments,
``replay`` re-executes a prior run from its manifest and byte-compares
the outputs, ``validate`` checks generated instances against their
generation bounds.  Exit codes: 0 success, 1 replay mismatch, 2 usage
error, 3 solver failure under --strict.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import __version__ as _pkg_version
from .core import generation_bounds, validate_instance
from .dual_solver import SolverConfig
from .harness import (ExperimentPlan, plan_from_dict, run_experiment,
                      write_outputs)
from .inputs import gen_bounded_walk, gen_instance, input_preset, BoundedWalkSpec
from .policies import POLICY_NAMES, make_policy
from .stats_lab import (default_concentration_configs,
                        dual_convergence_experiment, empirical_tail,
                        lln_experiment, optimize_delta)

__all__ = ["main", "figure_preset", "FigurePreset"]

_DEFAULT_GRID = (1000, 3000, 10000)
_DEFAULT_SEED_COUNT = 20
_WALK_FIGURE = 19
_LAB_REGEN_SPEC_INDEX = 2  # three-length mixed table from the default configs


@dataclass(frozen=True)
class FigurePreset:
    """One numbered figure: either a set of experiment plans (one per
    input family shown) or the random-walk path demo."""

    figure: int
    plans: tuple[ExperimentPlan, ...]
    walk_demo: bool = False


def _plan_for(figure: int, kind: int, policies, bound: float | None,
              emit_consumption: bool) -> ExperimentPlan:
    name = f"fig{figure}-input{kind}"
    return ExperimentPlan(
        name=name,
        input=input_preset(kind, max(_DEFAULT_GRID)),
        policies=tuple(make_policy(p) for p in policies),
        horizon_grid=_DEFAULT_GRID,
        seeds=tuple(range(_DEFAULT_SEED_COUNT)),
        bound_coefficient=bound,
        emit_consumption=emit_consumption,
    )


# figure id -> (input kinds, policies, bound coefficient)
# regret/consumption siblings share one table; both output files are
# always emitted, so the shared preset serves either figure id
_FIGURE_TABLE = {
    1: ((1,), ("alg2",), 25.0), 2: ((1,), ("alg2",), 25.0),
    3: ((2,), ("alg2",), 4.0), 4: ((2,), ("alg2",), 4.0),
    5: ((3,), ("alg2",), 4.0), 6: ((3,), ("alg2",), 4.0),
    7: ((1,), ("alg2", "alg3"), None), 8: ((1,), ("alg2", "alg3"), None),
    9: ((2,), ("alg2", "alg3"), None), 10: ((2,), ("alg2", "alg3"), None),
    11: ((3,), ("alg2", "alg3"), None), 12: ((3,), ("alg2", "alg3"), None),
    13: ((1,), ("alg2", "alg4"), None), 14: ((1,), ("alg2", "alg4"), None),
    15: ((2,), ("alg2", "alg4"), None), 16: ((2,), ("alg2", "alg4"), None),
    17: ((3,), ("alg2", "alg4"), None), 18: ((3,), ("alg2", "alg4"), None),
    20: ((4, 5), ("alg4",), None),
    21: ((4, 5), ("alg4", "alg5"), None),
    22: ((4, 5), ("alg5",), None), 23: ((4, 5), ("alg5",), None),
}


def figure_preset(figure: int) -> FigurePreset:
    """Stock experiment for a numbered figure; 20 seeds, horizons to 1e4.

    Figure 19 is the random-walk path demo (the unnumbered walk figure;
    the number is otherwise unused).  Unknown ids raise ValueError.
    """
    if figure == _WALK_FIGURE:
        return FigurePreset(figure=figure, plans=(), walk_demo=True)
    if figure not in _FIGURE_TABLE:
        raise ValueError(f"unknown figure preset {figure}")
    kinds, policies, bound = _FIGURE_TABLE[figure]
    plans = tuple(_plan_for(figure, k, policies, bound, True) for k in kinds)
    return FigurePreset(figure=figure, plans=plans)


# ---------------------------------------------------------------------------
# argument and config-file handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    top = _Parser(prog="olpsim", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value file; flags take precedence")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), dest="out_format")
        p.add_argument("--parallelism", type=int)
        p.add_argument("--strict", action="store_true", default=None,
                       help="exit 3 if any dual solve fails to converge")
        p.add_argument("--tolerance", type=float,
                       help="dual solver objective tolerance")
        p.add_argument("--seeds", type=int,
                       help="number of seeds (0..seeds-1); trial count for lab")
        p.add_argument("--n", type=int, help="single horizon")
        p.add_argument("--n-grid", help="comma-separated horizons")

    run_p = sub.add_parser("run", description="execute a regret experiment")
    common(run_p)
    run_p.add_argument("--input", type=int, help="input family 1-5")
    run_p.add_argument("--policy", action="append",
                       help="policy name (repeatable)")
    run_p.add_argument("--figure", type=int, help="figure preset 1-23")
    run_p.add_argument("--alg3-epsilon", type=float)
    run_p.add_argument("--alg1-train-mult", type=int)

    lab_p = sub.add_parser("lab", description="run a statistics experiment")
    common(lab_p)
    lab_p.add_argument("--lab", choices=("concentration", "convergence", "lln"),
                       required=False)
    lab_p.add_argument("--input", type=int, help="input family 1-3 (convergence)")

    rep_p = sub.add_parser("replay", description="re-run a manifest and compare")
    rep_p.add_argument("manifest", help="path to manifest.json")

    val_p = sub.add_parser("validate", description="check generated instances")
    common(val_p)
    val_p.add_argument("--input", type=int)
    return top


_CONFIG_KEYS = {
    "out": str, "format": str, "parallelism": int, "strict": bool,
    "tolerance": float, "seeds": int, "n": int, "n-grid": str,
    "input": int, "policy": str, "figure": int,
    "alg3-epsilon": float, "alg1-train-mult": int, "lab": str,
}
_KEY_TO_DEST = {"format": "out_format"}


def _apply_config_file(args: argparse.Namespace, path: str):
    """Fill values the command line left unset; unknown keys are fatal."""
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise _UsageError(f"config line not key=value: {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise _UsageError(f"unknown config key: {key}")
            dest = _KEY_TO_DEST.get(key, key.replace("-", "_"))
            if not hasattr(args, dest):
                continue  # key not applicable to this command
            if getattr(args, dest) is not None:
                continue  # flag wins
            kind = _CONFIG_KEYS[key]
            try:
                if kind is bool:
                    parsed = value.lower() in ("1", "true", "yes", "on")
                elif key == "policy":
                    parsed = [v.strip() for v in value.split(",") if v.strip()]
                else:
                    parsed = kind(value)
            except ValueError:
                raise _UsageError(f"bad value for config key {key}: {value!r}")
            setattr(args, dest, parsed)


def _parse_grid(args) -> tuple[int, ...]:
    if args.n is not None and args.n_grid is not None:
        raise _UsageError("--n and --n-grid are mutually exclusive")
    if args.n is not None:
        return (args.n,)
    if args.n_grid is not None:
        try:
            grid = tuple(int(v) for v in args.n_grid.split(",") if v.strip())
        except ValueError:
            raise _UsageError(f"bad --n-grid: {args.n_grid!r}")
        if not grid:
            raise _UsageError("empty --n-grid")
        return grid
    return _DEFAULT_GRID


def _solver_config(args) -> SolverConfig:
    if getattr(args, "tolerance", None) is not None:
        return SolverConfig(objective_tolerance=args.tolerance)
    return SolverConfig()


def _seed_tuple(args, default_count: int) -> tuple[int, ...]:
    count = args.seeds if args.seeds is not None else default_count
    if count < 1:
        raise _UsageError("need at least one seed")
    return tuple(range(count))


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: str, payload: dict):
    import datetime
    payload = dict(payload)
    payload.setdefault("version", _pkg_version)
    payload["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit_experiment(plan: ExperimentPlan, out_dir: str, out_format: str,
                     parallelism: int) -> int:
    """Run one plan and write its outputs; returns nonconverged count."""
    result = run_experiment(plan, out_dir=None, parallelism=parallelism)
    os.makedirs(out_dir, exist_ok=True)
    if out_format == "csv":
        write_outputs(plan, list(result.records), result.reports,
                      result.consumption, out_dir,
                      extra_manifest={"command": "run", "format": "csv"})
    else:
        payload = {
            "records": [
                {"policy": r.policy, "n": r.n, "seed": r.seed,
                 "offline": r.offline, "online": r.online, "regret": r.regret,
                 "depletion_time": r.depletion_time,
                 "leftover": list(r.leftover), "solver_flags": r.solver_flags}
                for r in result.records
            ],
            "summary": {
                name: {"n": rep.horizon_grid.tolist(),
                       "mean_regret": rep.mean_regret.tolist(),
                       "std_regret": rep.regret_std.tolist(),
                       "mean_exit_gap": rep.mean_exit_gap.tolist(),
                       "mean_binding_leftover": rep.mean_binding_leftover.tolist()}
                for name, rep in result.reports.items()
            },
        }
        with open(os.path.join(out_dir, "results.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        from .harness import plan_to_dict
        _write_manifest(out_dir, {"command": "run", "format": "json",
                                  "plan": plan_to_dict(plan)})
    return sum(r.solver_flags for r in result.records)


def _emit_walk_demo(out_dir: str, steps: int, seed: int):
    os.makedirs(out_dir, exist_ok=True)
    fair = gen_bounded_walk(BoundedWalkSpec(), steps, seed)
    down_spec = BoundedWalkSpec(start=5.0, increment="uniform",
                                increment_range=(-1.2, 0.8))
    down = gen_bounded_walk(down_spec, steps, seed + 1)
    rows = [[t + 1, fair[t], down[t]] for t in range(steps)]
    _write_csv(os.path.join(out_dir, "walks.csv"),
               ["t", "fair", "weighted_down"], rows)
    _write_manifest(out_dir, {"command": "run", "format": "csv",
                              "walk": {"steps": steps, "seed": seed}})


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    out_dir = args.out or "olpsim-out"
    out_format = args.out_format or "csv"
    parallelism = args.parallelism or os.cpu_count() or 1
    if parallelism < 1:
        raise _UsageError("parallelism must be >= 1")
    solver = _solver_config(args)

    if args.figure is not None:
        if args.input is not None or args.policy:
            raise _UsageError("--figure conflicts with --input/--policy")
        try:
            preset = figure_preset(args.figure)
        except ValueError as exc:
            raise _UsageError(str(exc))
        if preset.walk_demo:
            _emit_walk_demo(out_dir, args.n or 500, 0)
            return 0
        nonconv = 0
        multi = len(preset.plans) > 1
        for plan in preset.plans:
            plan = replace(plan, solver=solver)
            if args.seeds is not None:
                plan = replace(plan, seeds=_seed_tuple(args, _DEFAULT_SEED_COUNT))
            if args.n is not None or args.n_grid is not None:
                grid = _parse_grid(args)
                plan = replace(plan, horizon_grid=grid,
                               input=replace(plan.input, horizon=max(grid)))
            target = os.path.join(out_dir, plan.name) if multi else out_dir
            nonconv += _emit_experiment(plan, target, out_format, parallelism)
        if args.strict and nonconv:
            print(f"solver failed to converge in {nonconv} runs", file=sys.stderr)
            return 3
        return 0

    kind = args.input if args.input is not None else 3
    if kind not in (1, 2, 3, 4, 5):
        raise _UsageError(f"unknown input preset {kind}")
    policy_names = args.policy or ["alg2"]
    for name in policy_names:
        if name not in POLICY_NAMES:
            raise _UsageError(f"unknown policy {name}")
    kwargs = {}
    if args.alg3_epsilon is not None:
        kwargs["alg3_epsilon"] = args.alg3_epsilon
    if args.alg1_train_mult is not None:
        kwargs["alg1_train_mult"] = args.alg1_train_mult
    policies = tuple(make_policy(name, **kwargs) for name in policy_names)
    grid = _parse_grid(args)
    plan = ExperimentPlan(
        name=f"run-input{kind}",
        input=input_preset(kind, max(grid)),
        policies=policies,
        horizon_grid=grid,
        seeds=_seed_tuple(args, _DEFAULT_SEED_COUNT),
        solver=solver,
    )
    nonconv = _emit_experiment(plan, out_dir, out_format, parallelism)
    if args.strict and nonconv:
        print(f"solver failed to converge in {nonconv} runs", file=sys.stderr)
        return 3
    return 0


def _lab_concentration(out_dir: str, trials: int, seed: int = 0) -> tuple[int, list[str]]:
    rows = []
    for idx, (spec, eps, t, strength) in enumerate(default_concentration_configs()):
        rate = 1.0 / sum(p * (i + 1) for i, p in enumerate(spec.length_probs))
        cycle_bound = float(len(spec.length_probs))
        est = empirical_tail(spec, eps, t, trials, seed)
        search = optimize_delta(eps, t, spec.value_bound, cycle_bound, rate,
                                strength)
        holds = est.p_hat - est.ci_halfwidth <= search.bound
        rows.append([idx, eps, t, strength, rate, spec.value_bound, cycle_bound,
                     est.p_hat, est.ci_halfwidth, search.delta, search.bound,
                     search.convex, holds])
    header = ["config", "epsilon", "t", "strength", "rate", "value_bound",
              "cycle_bound", "p_hat", "ci_halfwidth", "delta", "bound",
              "convex", "holds"]
    _write_csv(os.path.join(out_dir, "concentration.csv"), header, rows)
    failures = [f"config {r[0]}" for r in rows if not r[-1]]
    return len(failures), ["concentration.csv"]


def _lab_convergence(out_dir: str, kind: int, grid, seeds, solver) -> tuple[int, list[str]]:
    spec = input_preset(kind, max(grid))
    report = dual_convergence_experiment(spec, grid, seeds, solver)
    rows = [[int(n), float(m)] for n, m in zip(report.n_grid, report.mean_sq_distance)]
    _write_csv(os.path.join(out_dir, "convergence.csv"),
               ["n", "mean_sq_distance"], rows)
    _write_csv(os.path.join(out_dir, "convergence_summary.csv"),
               ["slope", "slope_defined", "nonconverged"],
               [[report.slope if report.slope_defined else math.nan,
                 report.slope_defined, report.nonconverged]])
    return report.nonconverged, ["convergence.csv", "convergence_summary.csv"]


def _lab_lln(out_dir: str, grid, trials: int) -> tuple[int, list[str]]:
    spec = default_concentration_configs()[_LAB_REGEN_SPEC_INDEX][0]
    report = lln_experiment(spec, grid, trials=trials, seed=0)
    rows = [[int(t), float(v)] for t, v in zip(report.t_grid, report.median_abs_dev)]
    _write_csv(os.path.join(out_dir, "lln.csv"), ["t", "median_abs_dev"], rows)
    return 0, ["lln.csv"]


def _cmd_lab(args) -> int:
    lab = args.lab or "concentration"
    out_dir = args.out or "olpsim-out"
    os.makedirs(out_dir, exist_ok=True)
    solver = _solver_config(args)
    if lab == "concentration":
        trials = args.seeds if args.seeds is not None else 10000
        if trials < 100:
            raise _UsageError("concentration lab needs at least 100 trials")
        failures, _ = _lab_concentration(out_dir, trials)
        manifest = {"command": "lab", "lab": lab, "trials": trials}
    elif lab == "convergence":
        kind = args.input if args.input is not None else 3
        if kind not in (1, 2, 3):
            raise _UsageError("convergence lab needs a stationary input (1-3)")
        grid = _parse_grid(args) if (args.n or args.n_grid) else (1000, 10000, 100000)
        seeds = _seed_tuple(args, 30)
        failures, _ = _lab_convergence(out_dir, kind, grid, seeds, solver)
        manifest = {"command": "lab", "lab": lab, "input": kind,
                    "n_grid": list(grid), "seeds": list(seeds),
                    "tolerance": solver.objective_tolerance}
    else:
        grid = _parse_grid(args) if (args.n or args.n_grid) else (125, 250, 500, 1000, 2000)
        trials = args.seeds if args.seeds is not None else 100
        failures, _ = _lab_lln(out_dir, grid, trials)
        manifest = {"command": "lab", "lab": lab, "n_grid": list(grid),
                    "trials": trials}
    _write_manifest(out_dir, manifest)
    if args.strict and failures:
        print(f"lab reported {failures} solver failures", file=sys.stderr)
        return 3
    return 0


def _rerun_manifest(manifest: dict, out_dir: str):
    """Re-execute whatever produced this manifest, into ``out_dir``."""
    command = manifest.get("command", "run" if "plan" in manifest else None)
    if command == "run" and "walk" in manifest:
        walk = manifest["walk"]
        _emit_walk_demo(out_dir, int(walk["steps"]), int(walk["seed"]))
        return
    if command == "run":
        plan = plan_from_dict(manifest["plan"])
        _emit_experiment(plan, out_dir, manifest.get("format", "csv"),
                         parallelism=1)
        return
    if command == "lab":
        lab = manifest["lab"]
        if lab == "concentration":
            _lab_concentration(out_dir, int(manifest["trials"]))
        elif lab == "convergence":
            solver = SolverConfig(objective_tolerance=manifest.get("tolerance", 1e-8))
            _lab_convergence(out_dir, int(manifest["input"]),
                             [int(n) for n in manifest["n_grid"]],
                             [int(s) for s in manifest["seeds"]], solver)
        elif lab == "lln":
            _lab_lln(out_dir, [int(n) for n in manifest["n_grid"]],
                     int(manifest["trials"]))
        else:
            raise _UsageError(f"manifest names unknown lab {lab!r}")
        return
    raise _UsageError("manifest does not describe a rerunnable command")


def _first_difference(old_path: str, new_path: str) -> str:
    old_lines = open(old_path).read().splitlines()
    new_lines = open(new_path).read().splitlines()
    for li in range(max(len(old_lines), len(new_lines))):
        a = old_lines[li] if li < len(old_lines) else "<missing>"
        b = new_lines[li] if li < len(new_lines) else "<missing>"
        if a == b:
            continue
        acells, bcells = a.split(","), b.split(",")
        for ci in range(max(len(acells), len(bcells))):
            av = acells[ci] if ci < len(acells) else "<missing>"
            bv = bcells[ci] if ci < len(bcells) else "<missing>"
            if av != bv:
                return (f"line {li + 1}, column {ci + 1}: "
                        f"{av!r} became {bv!r}")
        return f"line {li + 1} differs"
    return "files differ"


def _cmd_replay(args) -> int:
    manifest_path = args.manifest
    if not os.path.isfile(manifest_path):
        print(f"error: no manifest at {manifest_path}", file=sys.stderr)
        return 2
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"error: unreadable manifest: {exc}", file=sys.stderr)
        return 2
    src_dir = os.path.dirname(os.path.abspath(manifest_path))
    with tempfile.TemporaryDirectory() as tmp:
        try:
            _rerun_manifest(manifest, tmp)
        except (_UsageError, KeyError, TypeError, ValueError) as exc:
            print(f"error: cannot rerun manifest: {exc}", file=sys.stderr)
            return 2
        originals = sorted(
            f for f in os.listdir(src_dir)
            if f != "manifest.json" and os.path.isfile(os.path.join(src_dir, f)))
        for name in originals:
            fresh = os.path.join(tmp, name)
            if not os.path.isfile(fresh):
                print(f"mismatch: {name} not regenerated", file=sys.stderr)
                return 1
            old_bytes = open(os.path.join(src_dir, name), "rb").read()
            new_bytes = open(fresh, "rb").read()
            if old_bytes != new_bytes:
                where = _first_difference(os.path.join(src_dir, name), fresh)
                print(f"mismatch in {name}: {where}", file=sys.stderr)
                return 1
    print(f"replay ok: {len(originals)} files identical")
    return 0


def _cmd_validate(args) -> int:
    kind = args.input if args.input is not None else 3
    if kind not in (1, 2, 3, 4, 5):
        raise _UsageError(f"unknown input preset {kind}")
    grid = _parse_grid(args) if (args.n or args.n_grid) else (1000,)
    seeds = _seed_tuple(args, 5)
    bad = 0
    for n in grid:
        spec = input_preset(kind, n)
        for seed in seeds:
            inst = gen_instance(spec, seed)
            violations = validate_instance(inst, generation_bounds(inst))
            status = "ok" if not violations else "; ".join(violations)
            print(f"input {kind} n={n} seed={seed}: {status}")
            bad += len(violations)
    return 0 if bad == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "config", None):
            if not os.path.isfile(args.config):
                raise _UsageError(f"config file not found: {args.config}")
            _apply_config_file(args, args.config)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "lab":
            return _cmd_lab(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_validate(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
