"""Galton-Watson oracles.

The walk dynamics are dominated by simple branching processes whose
offspring laws are assembled here from the initial-count law and the
survival parameter: a graph-free dominating law, a sharper one for graphs
of bounded degree, and the two-offspring law that bounds the Bernoulli
thinning experiment.  Survival probabilities come from the smallest fixed
point of the generating function; forward simulation provides the
frequency cross-check.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Optional

from .distributions import Law
from .graphs import GraphTopology
from .rng import GW, trial_seed, uniform

TAIL_CUT = 1e-12  # lazily evaluated pmfs stop once this much mass remains


class ConvergenceError(RuntimeError):
    pass


class OffspringLaw:
    """Offspring pmf with finite support or a lazily evaluable tail."""

    def __init__(self, pmf: Callable[[int], float], mean: float,
                 max_support: Optional[int] = None, label: str = ""):
        self.pmf = pmf
        self.mean = mean
        self.max_support = max_support
        self.label = label
        self._cdf: list[float] = []
        if max_support is not None:
            total = math.fsum(pmf(j) for j in range(max_support + 1))
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"offspring pmf sums to {total!r}, not 1")

    @classmethod
    def from_dict(cls, atoms: dict[int, float], label: str = "") -> "OffspringLaw":
        support = max(atoms)
        mean = math.fsum(k * v for k, v in atoms.items())
        return cls(lambda j: atoms.get(j, 0.0), mean, support, label)

    def atoms(self) -> dict[int, float]:
        """Explicit pmf dict; truncated at TAIL_CUT for infinite support."""
        out, cum, j = {}, 0.0, 0
        while cum < 1.0 - TAIL_CUT:
            if self.max_support is not None and j > self.max_support:
                break
            v = self.pmf(j)
            if v > 0.0:
                out[j] = v
                cum += v
            j += 1
            if j > 10**7:
                raise ConvergenceError("offspring support enumeration ran away")
        return out

    def pgf(self, s: float, tol: float = TAIL_CUT) -> float:
        """Generating function E[s^X]; partial sums with a remaining-mass
        geometric bound for infinite support."""
        if not 0.0 <= s <= 1.0:
            raise ValueError("pgf argument must lie in [0,1]")
        total, cum, j = 0.0, 0.0, 0
        power = 1.0
        while True:
            v = self.pmf(j)
            total += v * power
            cum += v
            if self.max_support is not None and j >= self.max_support:
                break
            remaining = max(1.0 - cum, 0.0)
            if remaining * (power * s) < tol or remaining == 0.0:
                break
            j += 1
            power *= s
            if j > 10**7:
                raise ConvergenceError("pgf truncation did not settle")
        return min(total, 1.0)

    def sample(self, u: float) -> int:
        """Inverse CDF; the cumulative table extends lazily."""
        cdf = self._cdf
        if not cdf:
            cdf.append(self.pmf(0))
        while cdf[-1] < u:
            j = len(cdf)
            if self.max_support is not None and j > self.max_support:
                break
            cdf.append(cdf[-1] + self.pmf(j))
            if j > 10**7:
                raise ConvergenceError("offspring sampling table ran away")
        return bisect_left(cdf, u)


def dominating_law_any_graph(eta: Law, p: float) -> OffspringLaw:
    """Offspring (eta+1) with probability p, else 0: the graph-free
    dominator.  Mean (1 + E eta) p; requires E eta < inf."""
    mean_eta = eta.mean()
    if math.isinf(mean_eta):
        raise ValueError("dominating law needs a finite-mean count law")

    def pmf(j: int) -> float:
        if j == 0:
            return 1.0 - p
        return p * eta.pmf(j - 1)

    return OffspringLaw(pmf, (1.0 + mean_eta) * p, _support_plus(eta, 1), "prop_g")


def dominating_law_max_degree(eta: Law, p: float, k: int) -> OffspringLaw:
    """Sharper dominator on graphs of maximum degree k: no offspring with
    probability 1-p, one with p/k, eta+1 with p(k-1)/k."""
    if k < 2:
        raise ValueError("degree must be >= 2")
    mean_eta = eta.mean()
    if math.isinf(mean_eta):
        raise ValueError("dominating law needs a finite-mean count law")
    w = p * (k - 1) / k

    def pmf(j: int) -> float:
        if j == 0:
            return 1.0 - p
        base = w * eta.pmf(j - 1)
        return base + p / k if j == 1 else base

    mean = p / k + w * (mean_eta + 1.0)
    return OffspringLaw(pmf, mean, _support_plus(eta, 1), "prop_md")


def bernoulli_site_law(p: float, q: float) -> OffspringLaw:
    """Upper law for 0-1 initial configurations: mean p(1+q)."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("p and q must lie in [0,1]")
    atoms = {0: 1.0 - p, 1: p * (1.0 - q), 2: p * q}
    return OffspringLaw.from_dict({k: v for k, v in atoms.items() if v > 0.0} or {0: 1.0},
                                  label="pt_q")


def _support_plus(eta: Law, shift: int) -> Optional[int]:
    from .distributions import Bernoulli, Deterministic, Empirical, Truncated

    if isinstance(eta, Deterministic):
        return eta.m + shift
    if isinstance(eta, Bernoulli):
        return 1 + shift
    if isinstance(eta, Empirical):
        return len(eta.probs) - 1 + shift
    if isinstance(eta, Truncated):
        return eta.s + shift
    return None


def gw_survival_prob(law: OffspringLaw, tol: float = 1e-10) -> float:
    """1 minus the smallest fixed point of the pgf in [0,1], by monotone
    iteration from 0.  Subcritical and critical laws short-circuit to 0."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    p1 = law.pmf(1)
    if p1 >= 1.0 - TAIL_CUT:
        return 1.0  # deterministic line never dies
    if not math.isinf(law.mean) and law.mean <= 1.0:
        return 0.0
    s = 0.0
    for _ in range(10**6):
        nxt = law.pgf(s)
        if abs(nxt - s) < tol:
            return max(0.0, min(1.0, 1.0 - nxt))
        s = nxt
    raise ConvergenceError("fixed-point iteration did not converge")


@dataclass
class GwRun:
    sizes: list[int]
    capped: bool

    @property
    def extinct(self) -> bool:
        return not self.capped and self.sizes[-1] == 0


def gw_simulate(
    law: OffspringLaw,
    generations: int,
    master_seed: int,
    trial: int = 0,
    pop_cap: int = 100_000,
) -> GwRun:
    """Forward simulation of generation sizes from one ancestor.  A
    population-cap stop is reported, never silent."""
    seed = trial_seed(master_seed, trial)
    sizes = [1]
    pop = 1
    for gen in range(1, generations + 1):
        nxt = 0
        for i in range(pop):
            nxt += law.sample(uniform(seed, GW, gen, i))
            if nxt > pop_cap:
                sizes.append(nxt)
                return GwRun(sizes, capped=True)
        sizes.append(nxt)
        pop = nxt
        if pop == 0:
            break
    return GwRun(sizes, capped=False)


@dataclass
class PcBounds:
    prop_g: float
    prop_md: float
    degree: int
    infinite_mean: bool

    @property
    def better(self) -> str:
        return "prop_md" if self.prop_md >= self.prop_g else "prop_g"


def pc_lower_bounds(eta: Law, topology: GraphTopology) -> PcBounds:
    """Both analytic lower bounds for the survival threshold: 1/(1+E eta)
    on any graph and k/(1+(k-1)(E eta+1)) for degree k, which dominates on
    bounded-degree graphs.  An infinite-mean law pushes both to 0."""
    k = topology.degree(topology.root)
    m = eta.mean()
    if math.isinf(m):
        return PcBounds(0.0, 0.0, k, True)
    return PcBounds(1.0 / (1.0 + m), k / (1.0 + (k - 1) * (m + 1.0)), k, False)
