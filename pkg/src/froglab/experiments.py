"""Estimators and experiment orchestration.

Survival probability with Wilson intervals, bisection bracketing of the
critical survival parameter under common random numbers, recurrence curves
from root-visit counts, dimension sweeps, and the bound-comparison report.
Trials are the unit of parallelism: trial t draws its randomness from
(master seed, t), so results are byte-identical for any worker count, and
all merging is by trial index.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

from ._version import __version__
from .branching import (dominating_law_any_graph, dominating_law_max_degree,
                        gw_simulate, pc_lower_bounds)
from .distributions import Law
from .engine import FrogConfig, GeometricDeath, SimOutcome, Status, simulate
from .graphs import GraphTopology, Lattice, Tree
from .percolation import survival_indicator_coupled
from .stats import MeanCI, binom_sigma, mean_ci, wilson_interval

CSV_FORMAT_VERSION = 1

GROWTH_FACTOR = 1.2  # pairwise growth demanded of a "growing unbounded" tail


def _trial_outcomes(args) -> list[SimOutcome]:
    config, trial, checkpoints = args
    outcomes, _ = simulate(config, trial, checkpoints=checkpoints)
    return outcomes


def collect_outcomes(
    config: FrogConfig,
    trials: int,
    workers: int = 1,
    checkpoints: Optional[list[int]] = None,
) -> list[list[SimOutcome]]:
    """Per-trial outcome snapshots, ordered by trial index regardless of
    worker count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(config, t, checkpoints) for t in range(trials)]
    if workers <= 1:
        return [_trial_outcomes(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, trials // (workers * 8))
        return list(pool.map(_trial_outcomes, jobs, chunksize=chunk))


@dataclass
class SurvivalEstimate:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    horizon: int
    cap_exceeded_count: int

    @classmethod
    def from_outcomes(cls, outcomes: list[SimOutcome], horizon: int) -> "SurvivalEstimate":
        survived = sum(1 for o in outcomes if o.status is not Status.DIED_OUT)
        capped = sum(1 for o in outcomes if o.status is Status.CAP_EXCEEDED)
        lo, hi = wilson_interval(survived, len(outcomes))
        return cls(survived / len(outcomes), lo, hi, len(outcomes), horizon, capped)


def estimate_survival(config: FrogConfig, trials: int, workers: int = 1) -> SurvivalEstimate:
    """Fraction of trials not dead by the horizon; an explosion past a cap
    counts as survival (it is reported separately)."""
    outcomes = [o[-1] for o in collect_outcomes(config, trials, workers)]
    return SurvivalEstimate.from_outcomes(outcomes, config.horizon)


def survival_curve(
    config: FrogConfig, horizons: list[int], trials: int, workers: int = 1
) -> list[SurvivalEstimate]:
    """Survival estimates at several horizons from one pass per trial."""
    if horizons != sorted(horizons) or len(set(horizons)) != len(horizons):
        raise ValueError("horizons must be strictly increasing")
    cfg = config if config.horizon >= horizons[-1] else _with_horizon(config, horizons[-1])
    per_trial = collect_outcomes(cfg, trials, workers, checkpoints=horizons)
    return [
        SurvivalEstimate.from_outcomes([snap[i] for snap in per_trial], h)
        for i, h in enumerate(horizons)
    ]


def _with_horizon(config: FrogConfig, horizon: int) -> FrogConfig:
    from dataclasses import replace

    return replace(config, horizon=horizon)


@dataclass
class ProfilePoint:
    p: float
    fraction: float
    ci_low: float
    ci_high: float


@dataclass
class PcEstimate:
    bracket_low: float
    bracket_high: float
    threshold: float
    trials: int
    budget: int
    horizon: int
    profile: list[ProfilePoint]
    degenerate: Optional[str] = None  # "all_dead" | "all_alive" | None

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.bracket_low + self.bracket_high)


def _coupled_fraction(config: FrogConfig, p: float, trials: int, budget: int,
                      workers: int = 1) -> ProfilePoint:
    jobs = [(config, p, t, budget) for t in range(trials)]
    if workers <= 1:
        flags = [_coupled_flag(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, trials // (workers * 8))
            flags = list(pool.map(_coupled_flag, jobs, chunksize=chunk))
    k = sum(flags)
    lo, hi = wilson_interval(k, trials)
    return ProfilePoint(p, k / trials, lo, hi)


def _coupled_flag(args) -> bool:
    config, p, trial, budget = args
    return survival_indicator_coupled(config, [p], trial, budget=budget)[0]


def estimate_pc(
    topology: GraphTopology,
    eta: Law,
    trials: int,
    horizon: int,
    eps: float = 0.02,
    tol_p: float = 0.02,
    master_seed: int = 0,
    budget: Optional[int] = None,
    workers: int = 1,
) -> PcEstimate:
    """Bisection bracket for the survival threshold.

    The per-trial survival flag is the coupled cluster-budget indicator
    (exactly monotone in p under common random numbers), so the probed
    profile is nondecreasing by construction.  The flag is a finite proxy
    biased toward survival, which biases the crossing downward: the
    bracket's lower edge is the conservative probe.  Budget defaults to the
    horizon's scale.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if tol_p <= 0.0:
        raise ValueError("tol_p must be > 0")
    cap = budget if budget is not None else max(horizon, 256)
    config = FrogConfig(topology, GeometricDeath(0.5, eta), horizon=horizon,
                        master_seed=master_seed)
    profile: dict[float, ProfilePoint] = {}

    def frac(p: float) -> float:
        if p not in profile:
            profile[p] = _coupled_fraction(config, p, trials, cap, workers)
        return profile[p].fraction

    lo, hi = 0.0, 1.0
    while hi - lo > tol_p:
        mid = 0.5 * (lo + hi)
        if frac(mid) > eps:
            hi = mid
        else:
            lo = mid
    # a bracket edge still pinned to an endpoint means no crossing was seen
    degenerate = "all_dead" if hi == 1.0 else ("all_alive" if lo == 0.0 else None)
    points = [profile[p] for p in sorted(profile)]
    return PcEstimate(lo, hi, eps, trials, cap, horizon, points, degenerate)


@dataclass
class RecurrenceReport:
    horizons: list[int]
    visits: list[MeanCI]
    verdict: str
    trials: int

    VERDICTS = ("growing_unbounded", "saturating", "inconclusive")


def recurrence_curve(
    config: FrogConfig, horizons: list[int], trials: int, workers: int = 1
) -> RecurrenceReport:
    """Mean root visits at each horizon and a growth verdict: growing
    (last three means up >= 20% pairwise with non-overlapping CIs),
    saturating (last two CIs overlap and the growth test fails), else
    inconclusive."""
    if horizons != sorted(horizons) or len(set(horizons)) != len(horizons):
        raise ValueError("horizons must be strictly increasing")
    cfg = config if config.horizon >= horizons[-1] else _with_horizon(config, horizons[-1])
    per_trial = collect_outcomes(cfg, trials, workers, checkpoints=horizons)
    visits = [
        mean_ci([snap[i].root_visits for snap in per_trial])
        for i in range(len(horizons))
    ]
    return RecurrenceReport(horizons, visits, _recurrence_verdict(visits), trials)


def _recurrence_verdict(visits: list[MeanCI]) -> str:
    if len(visits) >= 3:
        a, b, c = visits[-3], visits[-2], visits[-1]
        growing = (
            b.point >= GROWTH_FACTOR * a.point
            and c.point >= GROWTH_FACTOR * b.point
            and not a.overlaps(b)
            and not b.overlaps(c)
        )
        if growing:
            return "growing_unbounded"
    if len(visits) >= 2:
        b, c = visits[-2], visits[-1]
        if b.overlaps(c) and not c.point >= GROWTH_FACTOR * b.point:
            return "saturating"
    return "inconclusive"


@dataclass
class SweepRow:
    d: int
    estimate: PcEstimate


@dataclass
class SweepResult:
    family: str
    rows: list[SweepRow]
    target: float
    midpoints_non_increasing: bool
    final_gap: float


def sweep_pc_vs_dimension(
    family: str,
    eta: Law,
    dims: list[int],
    trials: int,
    horizon: int,
    eps: float = 0.02,
    tol_p: float = 0.02,
    master_seed: int = 0,
    budget: Optional[int] = None,
    workers: int = 1,
) -> SweepResult:
    """Per-dimension brackets plus the limiting target 1/(1 + E eta)
    (0 for infinite-mean counts)."""
    if dims != sorted(dims):
        raise ValueError("dimension list must be ascending")
    if family not in ("tree", "zd"):
        raise ValueError("family must be 'tree' or 'zd'")
    rows = []
    for d in dims:
        topology = Tree(d) if family == "tree" else Lattice(d)
        est = estimate_pc(topology, eta, trials, horizon, eps, tol_p,
                          master_seed, budget, workers)
        rows.append(SweepRow(d, est))
    mean = eta.mean()
    target = 0.0 if math.isinf(mean) else 1.0 / (1.0 + mean)
    mids = [r.estimate.midpoint for r in rows]
    non_inc = all(mids[i + 1] <= mids[i] + 1e-12 for i in range(len(mids) - 1))
    return SweepResult(family, rows, target, non_inc, abs(mids[-1] - target))


@dataclass
class BoundsRow:
    p: float
    prop_g_bound: float
    prop_md_bound: float
    below_both: bool
    range_sum: float
    range_sum_subcritical: bool
    range_sum_divergent: bool
    survival: SurvivalEstimate
    consistent: bool


@dataclass
class BoundsReport:
    rows: list[BoundsRow]
    consistent: bool
    eps: float


class InconsistencyError(RuntimeError):
    """An estimator contradicted a proven bound; carries the offending row."""

    def __init__(self, message: str, row):
        super().__init__(message)
        self.row = row


def bounds_report(
    topology: GraphTopology,
    eta: Law,
    p_grid: list[float],
    trials: int,
    horizon: int,
    master_seed: int = 0,
    eps: float = 0.02,
    workers: int = 1,
    strict: bool = True,
) -> BoundsReport:
    """Compare both branching lower bounds and the expected-range
    classification against measured survival on a p grid.  Below both
    bounds with a subcritical range sum, measured survival must not exceed
    eps; a violation is an inconsistency (raised when strict)."""
    from .analytics import expected_range_sum

    bounds = pc_lower_bounds(eta, topology)
    rows = []
    all_ok = True
    for p in p_grid:
        config = FrogConfig(topology, GeometricDeath(p, eta), horizon=horizon,
                            master_seed=master_seed)
        est = estimate_survival(config, trials, workers)
        rs = expected_range_sum(eta, p, topology)
        below = p < bounds.prop_g and p < bounds.prop_md
        ok = True
        if below and rs.subcritical and est.point > eps:
            ok = False
            all_ok = False
        row = BoundsRow(p, bounds.prop_g, bounds.prop_md, below,
                        rs.value, rs.subcritical, rs.divergent, est, ok)
        if strict and not ok:
            raise InconsistencyError(
                f"survival {est.point:.4f} > {eps} at p={p} despite proven-subcritical regime", row
            )
        rows.append(row)
    return BoundsReport(rows, all_ok, eps)


@dataclass
class DominationReport:
    p: float
    frog: SurvivalEstimate
    prop_g_freq: float
    prop_md_freq: float
    gw_trials: int
    ok_prop_g: bool
    ok_prop_md: bool

    @property
    def ok(self) -> bool:
        return self.ok_prop_g and self.ok_prop_md


def gw_domination_check(
    topology: GraphTopology,
    eta: Law,
    p: float,
    trials: int,
    horizon: int,
    master_seed: int = 0,
    gw_pop_cap: int = 2_000,
    workers: int = 1,
    max_active: int = 2_000,
) -> DominationReport:
    """Frog survival-to-horizon frequency must not exceed the survival
    frequency of either dominating branching process by more than three
    joint standard deviations."""
    config = FrogConfig(topology, GeometricDeath(p, eta), horizon=horizon,
                        master_seed=master_seed, max_active=max_active)
    frog = estimate_survival(config, trials, workers)
    k = topology.degree(topology.root)
    freqs = {}
    for law in (dominating_law_any_graph(eta, p), dominating_law_max_degree(eta, p, k)):
        alive = 0
        for t in range(trials):
            run = gw_simulate(law, horizon, master_seed, trial=t, pop_cap=gw_pop_cap)
            alive += 0 if run.extinct else 1
        freqs[law.label] = alive / trials
    sig = lambda f: binom_sigma(f, trials)
    joint_g = 3.0 * math.hypot(sig(frog.point), sig(freqs["prop_g"]))
    joint_md = 3.0 * math.hypot(sig(frog.point), sig(freqs["prop_md"]))
    return DominationReport(
        p, frog, freqs["prop_g"], freqs["prop_md"], trials,
        frog.point <= freqs["prop_g"] + joint_g,
        frog.point <= freqs["prop_md"] + joint_md,
    )


# ---------------------------------------------------------------------------
# output formats

CSV_COLUMNS = [
    "format_version", "trial", "graph", "mode", "p", "eta", "lifetime",
    "horizon", "master_seed", "status", "extinction_time", "root_visits",
    "activated_sites", "max_radius",
]


def _mode_fields(config: FrogConfig) -> dict:
    if isinstance(config.mode, GeometricDeath):
        return {"mode": "geometric_death", "p": repr(config.mode.p),
                "eta": config.mode.eta.spec(), "lifetime": ""}
    return {"mode": "general_lifetime", "p": "", "eta": "det:1",
            "lifetime": config.mode.lifetime.spec()}


def trial_rows(config: FrogConfig, outcomes: list[SimOutcome]) -> list[dict]:
    base = {"format_version": CSV_FORMAT_VERSION, "graph": config.topology.spec(),
            "horizon": config.horizon, "master_seed": config.master_seed}
    base.update(_mode_fields(config))
    rows = []
    for trial, o in enumerate(outcomes):
        row = dict(base)
        row.update(
            trial=trial,
            status=o.status.value,
            extinction_time="" if o.extinction_time is None else o.extinction_time,
            root_visits=o.root_visits,
            activated_sites=o.activated_sites,
            max_radius=o.max_radius,
        )
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict], columns: Optional[list[str]] = None) -> str:
    if not rows:
        return ""
    cols = columns or list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def summary_document(kind: str, params: dict, results: dict, master_seed: int) -> dict:
    """JSON-shaped experiment summary with provenance."""
    return {
        "experiment": kind,
        "params": params,
        "results": results,
        "provenance": {"master_seed": master_seed, "version": __version__,
                       "csv_format_version": CSV_FORMAT_VERSION},
    }


def to_jsonable(obj):
    """Dataclasses/enums/sets to plain JSON-serializable values."""
    if isinstance(obj, Status):
        return obj.value
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(to_jsonable(v) for v in obj)
    if hasattr(obj, "__dataclass_fields__"):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
