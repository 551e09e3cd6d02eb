"""Range sets, oriented-percolation cluster growth, and coupled survival
flags.

The range of a site x is every site the particles initially at x would
visit during their lifetimes, ignoring all other particles ({x} itself when
no particle sits there).  Survival of the walk dynamics is equivalent to
the root's cluster being infinite in the oriented model that draws edges
from x to each member of its range.

Ranges are sampled from the same keyed uniforms the engine consumes, so on
a shared (master seed, trial) the cluster grown here equals the engine's
activated-site set whenever neither side hits a cap.  Under the quantile
coupling of lifetimes, ranges are nested in p path by path, hence so are
clusters; the budget-hit flag is therefore *exactly* nondecreasing in p,
which is what the coupled survival indicator returns.  (The engine's
alive-at-horizon status is not exactly monotone: a higher p can wake the
same sites earlier and let the whole population finish dying sooner.)
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .distributions import geometric_lifetime
from .engine import FrogConfig, GeneralLifetime, GeometricDeath
from .rng import TrialRandomness, uniform_from_base

# per-site cap on enumerated particles; heavy-tailed count laws can draw
# astronomically many, and beyond this the extra ranges cannot matter at
# desk-scale budgets (the truncation is still flagged, never silent)
PARTICLE_ENUM_CAP = 100_000


class RangeCapError(RuntimeError):
    """A sampled lifetime exceeded the per-particle trajectory cap."""


@dataclass(frozen=True)
class RangeSample:
    site: object
    eta_value: int
    sites: frozenset


@dataclass
class ClusterResult:
    activated: set
    frontier_exhausted: bool
    budget_hit: bool
    generations: int
    eta_truncated: bool = False


class RangeOracle:
    """Lazily samples and memoizes per-site ranges for one trial."""

    def __init__(self, config: FrogConfig, trial: int = 0):
        self.config = config
        self.g = config.topology
        self.rnd = TrialRandomness(config.master_seed, trial)
        self._cache: dict = {}

    def eta_value(self, site, base: int | None = None) -> int:
        if isinstance(self.config.mode, GeneralLifetime):
            return 1
        if base is None:
            base = self.rnd.site_base(site)
        return self.config.mode.eta.sample_from_uniform(self.rnd.eta_uniform_from(base))

    def lifetime(self, site, index: int, base: int | None = None) -> int:
        if base is None:
            base = self.rnd.site_base(site)
        u = self.rnd.lifetime_uniform_from(base, index)
        if isinstance(self.config.mode, GeneralLifetime):
            return self.config.mode.lifetime.sample_from_uniform(u)
        return geometric_lifetime(u, self.config.mode.p)

    def walk(self, site, index: int, base: int | None = None):
        """Yield the positions S_1..S_(L-1) of one particle's trajectory."""
        if base is None:
            base = self.rnd.site_base(site)
        life = self.lifetime(site, index, base)
        if life - 1 > self.config.range_step_cap:
            raise RangeCapError(
                f"lifetime {life} at {site!r} exceeds the trajectory cap "
                f"{self.config.range_step_cap}"
            )
        g = self.g
        degree = g.degree(site)
        jb = self.rnd.jump_base_from(base, index)
        pos = site
        for age in range(life - 1):
            pos = g.neighbor(pos, int(uniform_from_base(jb, age) * degree))
            yield pos

    def particle_range(self, site, index: int) -> frozenset:
        """Sites covered by one particle's full trajectory S_0..S_(L-1)."""
        out = {site}
        out.update(self.walk(site, index))
        return frozenset(out)

    def range_of(self, site) -> RangeSample:
        hit = self._cache.get(site)
        if hit is not None:
            return hit
        count = self.eta_value(site)
        if count > PARTICLE_ENUM_CAP:
            raise RangeCapError(
                f"count {count} at {site!r} exceeds the particle enumeration cap"
            )
        sites = {site}
        for i in range(1, count + 1):
            sites |= self.particle_range(site, i)
        sample = RangeSample(site, count, frozenset(sites))
        self._cache[site] = sample
        return sample


def sample_range(config: FrogConfig, site, trial: int = 0) -> RangeSample:
    """The virtual range of one site under the trial's shared randomness."""
    config.topology.validate(site)
    return RangeOracle(config, trial).range_of(site)


def grow_cluster(config: FrogConfig, budget: int, trial: int = 0) -> ClusterResult:
    """Breadth-first growth of the root's oriented cluster, up to ``budget``
    activated sites.  Never truncates silently: a budget stop is flagged,
    and so is any site whose particle count outran the enumeration cap."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    oracle = RangeOracle(config, trial)
    g = config.topology
    root = g.root
    degree = g.degree(root)
    neighbor = g.neighbor
    step_cap = config.range_step_cap
    activated = {root}
    queue = deque([(root, 0)])
    generations = 0
    budget_hit = False
    eta_truncated = False
    m64 = (1 << 64) - 1
    while queue and not budget_hit:
        site, depth = queue.popleft()
        generations = max(generations, depth)
        sb = oracle.rnd.site_base(site)
        count = oracle.eta_value(site, sb)
        if count > PARTICLE_ENUM_CAP:
            eta_truncated = True
            count = PARTICLE_ENUM_CAP
        for i in range(1, count + 1):
            life = oracle.lifetime(site, i, sb)
            if life - 1 > step_cap:
                raise RangeCapError(
                    f"lifetime {life} at {site!r} exceeds the trajectory cap {step_cap}"
                )
            base = (oracle.rnd.jump_base_from(sb, i) + 0x9E3779B97F4A7C15) & m64
            pos = site
            for age in range(life - 1):
                # inlined keyed uniform (hot loop): fold(base_prefix, age)
                z = (base + age) & m64
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & m64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & m64
                z ^= z >> 31
                pos = neighbor(pos, int((z >> 11) * 1.1102230246251565e-16 * degree))
                if pos in activated:
                    continue
                if len(activated) >= budget:
                    budget_hit = True
                    break
                activated.add(pos)
                queue.append((pos, depth + 1))
            if budget_hit:
                break
    return ClusterResult(
        activated=activated,
        frontier_exhausted=not budget_hit,
        budget_hit=budget_hit,
        generations=generations,
        eta_truncated=eta_truncated,
    )


def survival_indicator_coupled(
    config: FrogConfig,
    p_list: list[float],
    trial: int = 0,
    budget: int | None = None,
) -> list[bool]:
    """Per-p survival flags from one shared randomness ledger.

    Each flag reports whether the trial's activation cluster reached the
    site budget before dying out -- the finite proxy for an infinite
    cluster, biased toward survival.  All p values replay identical jump
    uniforms, and each lifetime takes its quantile-coupled value
    1 + max{k : u <= p^k} from one uniform per particle slot, so the flags
    are nondecreasing in p on every single trial, not just on average.
    """
    if not isinstance(config.mode, GeometricDeath):
        raise ValueError("coupled survival requires geometric-death mode")
    if sorted(p_list) != list(p_list):
        raise ValueError("p_list must be sorted ascending")
    cap = budget if budget is not None else config.max_active
    flags = []
    for p in p_list:
        if p <= 0.0:
            flags.append(False)  # lifetime 1: the cluster is just the root
        elif p >= 1.0:
            flags.append(True)  # immortal walkers cover sites without bound
        else:
            flags.append(grow_cluster(config.with_p(p), cap, trial).budget_hit)
    return flags


@dataclass
class RangeBoundReport:
    empirical: float
    sigma: float
    upper: float
    lower: float
    trials: int
    distance: int
    ok: bool


def range_bound_check(config: FrogConfig, x, y, trials: int) -> RangeBoundReport:
    """Monte Carlo P[y in R_x^1] (first particle only, counts conditioned to
    be >= 1) against the geometric-death envelope p^dist above and
    (p/degree)^dist below, with 3-sigma slack."""
    if not isinstance(config.mode, GeometricDeath):
        raise ValueError("range bounds concern geometric-death mode")
    if x == y:
        raise ValueError("need two distinct sites")
    g = config.topology
    g.validate(x)
    g.validate(y)
    hits = 0
    for t in range(trials):
        oracle = RangeOracle(config, t)
        if any(pos == y for pos in oracle.walk(x, 1)):
            hits += 1
    est = hits / trials
    sigma = (est * (1.0 - est) / trials) ** 0.5
    dist = g.distance(x, y)
    p = config.mode.p
    upper = p**dist
    lower = (p / g.degree(x)) ** dist
    ok = (lower - 3.0 * sigma) <= est <= (upper + 3.0 * sigma)
    return RangeBoundReport(est, sigma, upper, lower, trials, dist, ok)
