"""The frog-model dynamics.

Sleeping particles live on a rooted graph; the root's particles start
active.  Each step, every active particle first settles survival (its
pre-sampled lifetime runs out, or equivalently a per-step coin fails), and a
particle that dies is removed before jumping, so it cannot wake anyone on
the way out.  Survivors jump to a uniformly chosen neighbor.  After all
movements, any site holding an active particle wakes all of its sleepers;
the newly woken first move on the next step.

Two modes: geometric death with parameter p and a count law for the initial
configuration, or one particle per site with a general lifetime law.

All randomness is keyed by (master seed, trial, site, particle index, step),
so identical configurations replay bit-identically, distinct trials are
independent of worker scheduling, and the range-percolation construction in
``percolation`` sees the same trajectories.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

from .distributions import Law, geometric_lifetime
from .graphs import GraphTopology
from .rng import TrialRandomness


class Status(str, enum.Enum):
    DIED_OUT = "died_out"
    ALIVE_AT_HORIZON = "alive_at_horizon"
    CAP_EXCEEDED = "cap_exceeded"


@dataclass(frozen=True)
class GeometricDeath:
    """Survival parameter p with initial counts drawn from ``eta``."""

    p: float
    eta: Law

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0,1]")
        if self.eta.prob_nonzero() <= 0.0:
            raise ValueError("eta must put positive mass on {1,2,...}")


@dataclass(frozen=True)
class GeneralLifetime:
    """One particle per site; lifetimes drawn from the given law."""

    lifetime: Law


@dataclass(frozen=True)
class FrogConfig:
    topology: GraphTopology
    mode: GeometricDeath | GeneralLifetime
    horizon: int
    master_seed: int
    max_active: int = 100_000
    max_radius: int = 1_000_000
    # per-particle trajectory cap for range sampling; must exceed any horizon
    range_step_cap: int = 2_000_000

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.max_active < 1 or self.max_radius < 1:
            raise ValueError("caps must be >= 1")

    def with_p(self, p: float) -> "FrogConfig":
        if not isinstance(self.mode, GeometricDeath):
            raise ValueError("with_p requires geometric-death mode")
        return replace(self, mode=replace(self.mode, p=p))


@dataclass
class SimOutcome:
    status: Status
    extinction_time: Optional[int]
    root_visits: int
    activated_sites: int
    max_radius: int
    horizon: int

    @property
    def survived(self) -> bool:
        """Alive at the horizon or exploded past a cap; extinction is the
        only definitive death."""
        return self.status is not Status.DIED_OUT


@dataclass
class Trace:
    activation_time: dict
    visited: set
    trajectories: Optional[dict] = None


@dataclass
class _World:
    """Mutable per-run state shared by run/run_with_trace/checkpoints."""

    config: FrogConfig
    rnd: TrialRandomness
    activated: set = field(default_factory=set)
    activation_time: dict = field(default_factory=dict)
    active: list = field(default_factory=list)
    root_visits: int = 0
    max_radius_seen: int = 0
    clock: int = 0


def _count_from(config: FrogConfig, rnd: TrialRandomness, base: int, site, overrides) -> int:
    if overrides is not None and site in overrides:
        return overrides[site]
    if isinstance(config.mode, GeneralLifetime):
        return 1
    return config.mode.eta.sample_from_uniform(rnd.eta_uniform_from(base))


def _lifetime_from(config: FrogConfig, rnd: TrialRandomness, base: int, index: int) -> int:
    u = rnd.lifetime_uniform_from(base, index)
    if isinstance(config.mode, GeneralLifetime):
        return config.mode.lifetime.sample_from_uniform(u)
    return geometric_lifetime(u, config.mode.p)


def simulate(
    config: FrogConfig,
    trial: int = 0,
    checkpoints: Optional[list[int]] = None,
    eta_overrides: Optional[dict] = None,
    record_trajectories: bool = False,
    per_step_death: bool = False,
) -> tuple[list[SimOutcome], Trace]:
    """Run one trial, reporting an outcome snapshot at every checkpoint.

    ``checkpoints`` defaults to ``[config.horizon]``.  ``eta_overrides``
    pins initial counts at chosen sites (used by non-interaction replay
    tests).  ``per_step_death`` settles geometric survival with one coin per
    step instead of a pre-sampled lifetime; both read the same uniform, so
    trajectories are identical by construction.
    """
    g = config.topology
    root = g.root
    degree = g.degree(root)
    horizons = sorted(set(checkpoints if checkpoints is not None else [config.horizon]))
    if horizons and horizons[-1] > config.horizon:
        raise ValueError("checkpoints must not exceed the horizon")
    rnd = TrialRandomness(config.master_seed, trial)
    w = _World(config, rnd)
    trace = Trace({}, set(), {} if record_trajectories else None)
    p = config.mode.p if isinstance(config.mode, GeometricDeath) else None

    outcomes: list[SimOutcome] = []
    status = None

    def snapshot(h: int, st: Status, ext: Optional[int]) -> SimOutcome:
        return SimOutcome(
            status=st,
            extinction_time=ext,
            root_visits=w.root_visits,
            activated_sites=len(w.activated),
            max_radius=w.max_radius_seen,
            horizon=h,
        )

    def wake(site, step: int) -> Optional[Status]:
        """Activate a site; returns CAP_EXCEEDED on a particle-cap breach."""
        w.activated.add(site)
        trace.activation_time[site] = step
        sb = rnd.site_base(site)
        count = _count_from(config, rnd, sb, site, eta_overrides)
        if count <= 0:
            return None
        if count > config.max_active or len(w.active) + count > config.max_active:
            return Status.CAP_EXCEEDED
        for i in range(1, count + 1):
            life = _lifetime_from(config, rnd, sb, i)
            u = rnd.lifetime_uniform_from(sb, i) if per_step_death else 0.0
            base = rnd.jump_base_from(sb, i)
            w.active.append([site, i, base, site, life, 0, u])
            if record_trajectories:
                trace.trajectories[(site, i)] = [site]
        return None

    status = wake(root, 0)
    trace.visited.add(root)

    extinction: Optional[int] = None
    if status is None and not w.active:
        status, extinction = Status.DIED_OUT, 0

    neighbor = g.neighbor
    radius = g.radius
    max_radius = config.max_radius
    m64 = (1 << 64) - 1
    golden = 0x9E3779B97F4A7C15

    step = 0
    while status is None and step < config.horizon:
        step += 1
        w.clock = step
        survivors = []
        arrivals = []
        for part in w.active:
            origin, index, base, pos, remaining, age, u0 = part
            if per_step_death:
                # survive jump age+1 iff u0 <= p^(age+1); same cut as the
                # pre-sampled lifetime, hence identical trajectories
                if u0 > p ** (age + 1):
                    continue
            else:
                remaining -= 1
                if remaining == 0:
                    continue
            # inlined keyed uniform: fold(jump_base, age)
            z = (base + golden + age) & m64
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & m64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & m64
            z ^= z >> 31
            pos = neighbor(pos, int((z >> 11) * 1.1102230246251565e-16 * degree))
            age += 1
            r = radius(pos)
            if r > max_radius:
                status = Status.CAP_EXCEEDED
                break
            if r > w.max_radius_seen:
                w.max_radius_seen = r
            if pos == root:
                w.root_visits += 1
            if record_trajectories:
                trace.trajectories[(origin, index)].append(pos)
            survivors.append([origin, index, base, pos, remaining, age, u0])
            arrivals.append(pos)
        if status is not None:
            break
        w.active = survivors
        for pos in arrivals:
            if pos not in w.activated:
                trace.visited.add(pos)
                status = wake(pos, step)
                if status is not None:
                    break
        if status is not None:
            break
        if not w.active:
            status, extinction = Status.DIED_OUT, step
            break
        while horizons and horizons[0] <= step:
            outcomes.append(snapshot(horizons.pop(0), Status.ALIVE_AT_HORIZON, None))

    final = status if status is not None else Status.ALIVE_AT_HORIZON
    for h in horizons:
        if final is Status.DIED_OUT and extinction is not None and extinction <= h:
            outcomes.append(snapshot(h, Status.DIED_OUT, extinction))
        else:
            outcomes.append(snapshot(h, final, extinction if final is Status.DIED_OUT else None))
    outcomes.sort(key=lambda o: o.horizon)
    return outcomes, trace


def run(config: FrogConfig, trial: int = 0, **kwargs) -> SimOutcome:
    """One trial, one outcome at the configured horizon."""
    outcomes, _ = simulate(config, trial, **kwargs)
    return outcomes[-1]


def run_with_trace(
    config: FrogConfig, trial: int = 0, record_trajectories: bool = False, **kwargs
) -> tuple[SimOutcome, Trace]:
    """As run, plus first-activation times and the visited-site set."""
    outcomes, trace = simulate(
        config, trial, record_trajectories=record_trajectories, **kwargs
    )
    return outcomes[-1], trace
