"""Seeded regret experiments over horizon grids.

One experiment = one input family, a set of policies, a horizon grid,
and a seed list.  Every (horizon, seed) cell draws one instance, prices
its hindsight optimum once, runs each policy on it (paired comparison),
and the results aggregate into per-policy regret curves.  Output is
plain CSV plus a JSON manifest that captures everything needed to rerun
the experiment byte-identically.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__ as _pkg_version
from .core import DualPrice, Instance, RegretReport, RunResult
from .dual_solver import SolverConfig, offline_dual
from .inputs import BoundedWalkSpec, InputKind, InputSpec, gen_instance
from .policies import PolicyKind, make_policy, run_policy

__all__ = [
    "BINDING_THRESHOLD",
    "ExperimentPlan",
    "RunRecord",
    "ExperimentResult",
    "DecompositionReport",
    "run_experiment",
    "decompose_regret",
    "decomposition_ratio",
    "consumption_trace",
    "write_outputs",
    "plan_to_dict",
    "plan_from_dict",
]

# a hindsight dual coordinate above this marks the resource as binding
BINDING_THRESHOLD = 1e-4


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything one experiment needs, immutable and serializable."""

    name: str
    input: InputSpec
    policies: tuple[PolicyKind, ...]
    horizon_grid: tuple[int, ...]
    seeds: tuple[int, ...]
    solver: SolverConfig = SolverConfig()
    bound_coefficient: float | None = None
    emit_consumption: bool = False

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "horizon_grid", tuple(int(n) for n in self.horizon_grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.policies:
            raise ValueError("need at least one policy")
        if not self.horizon_grid:
            raise ValueError("need at least one horizon")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(n <= self.input.m for n in self.horizon_grid):
            raise ValueError("horizons must exceed the resource count")


@dataclass(frozen=True)
class RunRecord:
    """One (policy, horizon, seed) cell of an experiment."""

    policy: str
    n: int
    seed: int
    offline: float
    online: float
    regret: float
    depletion_time: int
    leftover: tuple[float, ...]
    binding_leftover: float
    solver_flags: int


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    plan: ExperimentPlan
    records: tuple[RunRecord, ...]
    reports: dict[str, RegretReport]
    consumption: dict[str, np.ndarray]
    files: tuple[str, ...] = ()


@dataclass(frozen=True)
class DecompositionReport:
    """Additive pieces that upper-bound regret up to a constant factor:
    summed squared price error before depletion, steps lost after
    depletion, and leftover on binding resources."""

    dual_error_sum: float
    exit_gap: int
    binding_leftover: float
    reference: DualPrice


def decompose_regret(result: RunResult, reference: DualPrice,
                     threshold: float = BINDING_THRESHOLD) -> DecompositionReport:
    """Split a run against a reference price.

    The price error sums ||p_t - p*||^2 over steps up to the depletion
    time, treating the trajectory as piecewise constant; steps before
    the first recorded price (unconditional-reject burn-in) contribute
    nothing.  Binding resources are those the reference prices above
    ``threshold``."""
    tau = result.depletion_time
    steps = result.dual_steps
    err = 0.0
    for k in range(steps.shape[0]):
        start = int(steps[k])
        if start > tau:
            break
        end = int(steps[k + 1]) - 1 if k + 1 < steps.shape[0] else result.n
        end = min(end, tau)
        if end >= start:
            diff = result.dual_prices[k] - reference.values
            err += float(diff @ diff) * (end - start + 1)
    binding = reference.values > threshold
    return DecompositionReport(
        dual_error_sum=err,
        exit_gap=int(result.n - tau),
        binding_leftover=float(result.leftover[binding].sum()),
        reference=reference,
    )


def decomposition_ratio(regret: float, report: DecompositionReport) -> float:
    """Empirical constant regret / (sum of the three pieces); infinite
    when the pieces vanish but regret does not."""
    denom = report.dual_error_sum + report.exit_gap + report.binding_leftover
    if denom <= 0.0:
        return 0.0 if regret <= 0.0 else math.inf
    return regret / denom


def consumption_trace(inst: Instance, result: RunResult) -> np.ndarray:
    """(n, m) matrix: fraction of each capacity left after every step."""
    x = result.decisions.astype(float)
    used = np.cumsum(inst.consumption * x[:, None], axis=0)
    return (inst.b[None, :] - used) / inst.b[None, :]


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _run_cell(plan: ExperimentPlan, n: int, seed: int):
    """All policies on one (horizon, seed) instance; offline solved once."""
    spec = replace(plan.input, horizon=n)
    inst = gen_instance(spec, seed)
    offline, off_res = offline_dual(inst, plan.solver)
    binding = off_res.price.values > BINDING_THRESHOLD
    records = []
    traces = {}
    largest = n == max(plan.horizon_grid)
    first_seed = seed == plan.seeds[0]
    for policy in plan.policies:
        run = run_policy(policy, inst, spec, plan.solver, seed)
        records.append(RunRecord(
            policy=run.policy,
            n=n,
            seed=seed,
            offline=float(offline),
            online=float(run.revenue),
            regret=float(offline - run.revenue),
            depletion_time=run.depletion_time,
            leftover=tuple(float(v) for v in run.leftover),
            binding_leftover=float(run.leftover[binding].sum()),
            solver_flags=run.solver_nonconverged,
        ))
        if plan.emit_consumption and largest and first_seed:
            traces[run.policy] = consumption_trace(inst, run)
    return records, traces


def _cell_worker(args):
    return _run_cell(*args)


def run_experiment(plan: ExperimentPlan, out_dir: str | None = None,
                   parallelism: int = 1) -> ExperimentResult:
    """Execute the plan; optionally write CSV/manifest into ``out_dir``.

    Cells run in deterministic order (results are collected by cell
    index even when a process pool is used), so outputs are
    byte-reproducible for a fixed plan."""
    cells = [(plan, n, seed) for n in plan.horizon_grid for seed in plan.seeds]
    if parallelism > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outs = list(pool.map(_cell_worker, cells, chunksize=1))
    else:
        outs = [_run_cell(*c) for c in cells]

    records: list[RunRecord] = []
    consumption: dict[str, np.ndarray] = {}
    for recs, traces in outs:
        records.extend(recs)
        consumption.update(traces)

    reports = _aggregate(plan, records)
    files: tuple[str, ...] = ()
    if out_dir is not None:
        files = write_outputs(plan, records, reports, consumption, out_dir)
    return ExperimentResult(plan=plan, records=tuple(records), reports=reports,
                            consumption=consumption, files=files)


def _aggregate(plan: ExperimentPlan, records: list[RunRecord]) -> dict[str, RegretReport]:
    reports = {}
    grid = np.asarray(plan.horizon_grid, dtype=np.int64)
    for policy in plan.policies:
        name = policy.name
        mean_r = np.empty(grid.size)
        std_r = np.empty(grid.size)
        exit_gap = np.empty(grid.size)
        binding = np.empty(grid.size)
        for gi, n in enumerate(plan.horizon_grid):
            cell = [r for r in records if r.policy == name and r.n == n]
            regrets = np.array([r.regret for r in cell])
            mean_r[gi] = regrets.mean()
            std_r[gi] = regrets.std(ddof=1) if regrets.size > 1 else 0.0
            exit_gap[gi] = float(np.mean([r.n - r.depletion_time for r in cell]))
            binding[gi] = float(np.mean([r.binding_leftover for r in cell]))
        reports[name] = RegretReport(
            policy=name, horizon_grid=grid, mean_regret=mean_r, regret_std=std_r,
            mean_exit_gap=exit_gap, mean_binding_leftover=binding, seeds=plan.seeds,
        )
    return reports


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_outputs(plan: ExperimentPlan, records: list[RunRecord],
                  reports: dict[str, RegretReport],
                  consumption: dict[str, np.ndarray], out_dir: str,
                  extra_manifest: dict | None = None) -> tuple[str, ...]:
    """Write runs.csv, summary.csv, optional consumption.csv, and
    manifest.json; returns the paths written.  ``extra_manifest``
    entries are merged into the manifest top level."""
    os.makedirs(out_dir, exist_ok=True)
    m = plan.input.m
    files = []

    runs_path = os.path.join(out_dir, "runs.csv")
    with open(runs_path, "w") as fh:
        left_cols = ",".join(f"leftover_{i + 1}" for i in range(m))
        fh.write(f"policy,n,seed,offline,online,regret,depletion_time,{left_cols},solver_flags\n")
        for r in records:
            left = ",".join(_fmt(v) for v in r.leftover)
            fh.write(
                f"{r.policy},{r.n},{r.seed},{_fmt(r.offline)},{_fmt(r.online)},"
                f"{_fmt(r.regret)},{r.depletion_time},{left},{r.solver_flags}\n"
            )
    files.append(runs_path)

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w") as fh:
        head = "policy,n,mean_regret,std_regret,mean_exit_gap,mean_binding_leftover"
        if plan.bound_coefficient is not None:
            head += ",bound_sqrt_n"
        fh.write(head + "\n")
        for policy in plan.policies:
            rep = reports[policy.name]
            for gi, n in enumerate(plan.horizon_grid):
                row = (
                    f"{rep.policy},{n},{_fmt(rep.mean_regret[gi])},{_fmt(rep.regret_std[gi])},"
                    f"{_fmt(rep.mean_exit_gap[gi])},{_fmt(rep.mean_binding_leftover[gi])}"
                )
                if plan.bound_coefficient is not None:
                    row += f",{_fmt(plan.bound_coefficient * math.sqrt(n))}"
                fh.write(row + "\n")
    files.append(summary_path)

    if plan.emit_consumption and consumption:
        cons_path = os.path.join(out_dir, "consumption.csv")
        with open(cons_path, "w") as fh:
            frac_cols = ",".join(f"frac_{i + 1}" for i in range(m))
            fh.write(f"policy,n,t,{frac_cols}\n")
            n_big = max(plan.horizon_grid)
            for policy in plan.policies:
                trace = consumption.get(policy.name)
                if trace is None:
                    continue
                for t in range(trace.shape[0]):
                    vals = ",".join(_fmt(v) for v in trace[t])
                    fh.write(f"{policy.name},{n_big},{t + 1},{vals}\n")
        files.append(cons_path)

    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest = {
        "version": _pkg_version,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "plan": plan_to_dict(plan),
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append(manifest_path)
    return tuple(files)


def plan_to_dict(plan: ExperimentPlan) -> dict:
    spec = plan.input
    input_dict = {
        "kind": int(spec.kind),
        "horizon": spec.horizon,
        "m": spec.m,
        "capacity_fraction": spec.capacity_fraction,
        "consumption": spec.consumption,
        "trend_noise": spec.trend_noise,
        "trend_slope": spec.trend_slope,
        "trend_base": spec.trend_base,
        "walk": dataclasses.asdict(spec.walk) if spec.walk is not None else None,
    }
    policies = []
    for policy in plan.policies:
        entry = {"name": policy.name}
        entry.update(dataclasses.asdict(policy))
        policies.append(entry)
    return {
        "name": plan.name,
        "input": input_dict,
        "policies": policies,
        "horizon_grid": list(plan.horizon_grid),
        "seeds": list(plan.seeds),
        "solver": dataclasses.asdict(plan.solver),
        "bound_coefficient": plan.bound_coefficient,
        "emit_consumption": plan.emit_consumption,
    }


def plan_from_dict(data: dict) -> ExperimentPlan:
    inp = dict(data["input"])
    walk = inp.pop("walk", None)
    if walk is not None:
        if walk.get("increment_range") is not None:
            walk["increment_range"] = tuple(walk["increment_range"])
        walk = BoundedWalkSpec(**walk)
    spec = InputSpec(kind=InputKind(inp.pop("kind")), walk=walk, **inp)
    policies = []
    for entry in data["policies"]:
        entry = dict(entry)
        name = entry.pop("name")
        kwargs = {}
        if name == "alg1":
            kwargs["alg1_train_mult"] = entry.get("train_multiplier", 10)
        elif name == "alg3":
            kwargs["alg3_epsilon"] = entry.get("epsilon", 0.1)
        elif name == "alg4":
            kwargs["alg4_step_iterations"] = entry.get("step_iterations", 50)
        policies.append(make_policy(name, **kwargs))
    solver = SolverConfig(**data["solver"])
    return ExperimentPlan(
        name=data["name"],
        input=spec,
        policies=tuple(policies),
        horizon_grid=tuple(data["horizon_grid"]),
        seeds=tuple(data["seeds"]),
        solver=solver,
        bound_coefficient=data.get("bound_coefficient"),
        emit_consumption=bool(data.get("emit_consumption", False)),
    )
