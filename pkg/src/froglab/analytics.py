"""Closed-form calculus and simple-random-walk numerics.

Covers the survival envelope of a group of i geometric walkers
(``any_survivor_prob``), the binomial large-deviation rate, exact lattice
walk occupation/Green/first-passage tables by dense dynamic programming,
Monte Carlo hitting and range-size estimators, and the expected-range
series whose value below 1 certifies subcritical behaviour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import Law, LogTail, PowerTail
from .graphs import GraphTopology, Lattice, Line, Tree
from .rng import SRW, trial_seed, uniform, uniform_array
from .stats import MeanCI, mean_ci, wilson_interval


def any_survivor_prob(i: int, k: int, p: float) -> float:
    """Probability that at least one of i independent particles survives k
    consecutive steps: 1 - (1 - p^k)^i, evaluated stably for small p^k."""
    if i < 1 or k < 1:
        raise ValueError("i and k must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0,1]")
    if p == 1.0:
        return 1.0
    pk = p**k
    if pk == 1.0:
        return 1.0
    return -math.expm1(i * math.log1p(-pk))


def collective_depth(i: int, p: float) -> int:
    """Largest k with i * p^k >= 1 (0 when i = 1): the depth to which a
    group of i walkers keeps a bounded-away-from-zero survivor chance."""
    if i < 1:
        raise ValueError("i must be >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0,1)")
    k = max(int(math.floor(math.log(i) / math.log(1.0 / p))), 0)
    while i * p ** (k + 1) >= 1.0:
        k += 1
    while k > 0 and i * p**k < 1.0:
        k -= 1
    return k


class ScanFailure(RuntimeError):
    def __init__(self, message: str, i: int, k: int, p: float):
        super().__init__(f"{message} at (i={i}, k={k}, p={p})")
        self.witness = (i, k, p)


@dataclass
class EnvelopeConstants:
    """Empirical extrema of the survival-envelope ratios over a declared
    grid: below the collective depth the probability stays above beta1; a
    depth-offset geometric envelope holds with constants beta2, beta3."""

    beta1_hat: float
    beta2_hat: float
    beta3_hat: float
    grid: str
    beta1_witness: tuple
    beta2_witness: tuple
    beta3_witness: tuple


def default_i_grid(limit: int = 10**6) -> list[int]:
    vals = {int(round(10 ** (e / 8))) for e in range(0, 8 * 6 + 1)}
    return sorted(v for v in vals if 1 <= v <= limit)


def scan_envelopes(
    i_values: Optional[list[int]] = None,
    p_values: Optional[list[float]] = None,
    extra_k: int = 50,
) -> EnvelopeConstants:
    """Scan the envelope ratios and report their extrema; any non-positive
    lower ratio or non-finite upper ratio is a structured failure."""
    i_values = i_values or default_i_grid()
    p_values = p_values or [round(0.1 * j, 1) for j in range(1, 10)]
    beta1, w1 = math.inf, None
    beta2, w2 = math.inf, None
    beta3, w3 = 0.0, None
    for p in p_values:
        for i in i_values:
            kh = collective_depth(i, p)
            for k in range(1, kh + 1):
                val = any_survivor_prob(i, k, p)
                if not val > 0.0:
                    raise ScanFailure("vanishing survivor probability", i, k, p)
                if val < beta1:
                    beta1, w1 = val, (i, k, p)
            for k in range(kh + 1, kh + extra_k + 1):
                val = any_survivor_prob(i, k, p)
                x = p ** (k - kh)
                lo = val / x
                hi = val / (x / p)
                if not (lo > 0.0 and math.isfinite(hi)):
                    raise ScanFailure("envelope ratio out of range", i, k, p)
                if lo < beta2:
                    beta2, w2 = lo, (i, k, p)
                if hi > beta3:
                    beta3, w3 = hi, (i, k, p)
    grid = f"i in {i_values[0]}..{i_values[-1]} ({len(i_values)} pts), p in {p_values}, k to depth+{extra_k}"
    return EnvelopeConstants(beta1, beta2, beta3, grid, w1, w2, w3)


def bernoulli_ld_rate(a: float, p: float) -> float:
    """Relative entropy H(a,p) between Bernoulli(a) and Bernoulli(p); the
    exponential rate for a sample mean of N coins to reach a."""
    if not (0.0 < a < 1.0 and 0.0 < p < 1.0):
        raise ValueError("a and p must lie strictly inside (0,1)")
    return a * math.log(a / p) + (1.0 - a) * math.log((1.0 - a) / (1.0 - p))


def exceedance_bound(n: int, a: float, p: float) -> float:
    """exp(-n H(a,p)): bound on P[mean of n coins(p) >= a] for a > p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(-n * bernoulli_ld_rate(a, p))


@dataclass
class HitEstimate:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    n: int


def srw_hit_prob_mc(g: GraphTopology, x, n: int, trials: int, master_seed: int) -> HitEstimate:
    """Fraction of no-death walks from the root that hit x within n steps."""
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    g.validate(x)
    seed = trial_seed(master_seed, SRW)
    if isinstance(g, Lattice):
        hits = _lattice_hits(g.d, np.array(x, dtype=np.int64), n, trials, seed)
    else:
        hits = 0
        root = g.root
        degree = g.degree(root)
        for t in range(trials):
            pos = root
            for step in range(1, n + 1):
                u = uniform(seed, SRW, step, t)
                pos = g.neighbor(pos, int(u * degree))
                if pos == x:
                    hits += 1
                    break
    lo, hi = wilson_interval(hits, trials)
    return HitEstimate(hits / trials, lo, hi, trials, n)


def _lattice_hits(d: int, target: np.ndarray, n: int, trials: int, seed: int) -> int:
    """Vectorized walker batch; draw keys match the scalar path exactly."""
    pos = np.zeros((trials, d), dtype=np.int64)
    hit = np.zeros(trials, dtype=bool)
    rows = np.arange(trials)
    for step in range(1, n + 1):
        u = uniform_array(seed, (SRW, step), rows)
        idx = (u * (2 * d)).astype(np.int64)
        axis = idx >> 1
        delta = np.where(idx & 1 == 0, 1, -1).astype(np.int64)
        alive = ~hit
        pos[rows[alive], axis[alive]] += delta[alive]
        hit |= alive & (pos == target).all(axis=1)
        if hit.all():
            break
    return int(hit.sum())


class BoxLeakageError(RuntimeError):
    """The DP box was too small for the requested step count."""


class WalkTable:
    """Dense occupation/Green/first-passage tables for a lattice walk.

    One-step convolution on a zero-padded box: mass exiting the box is
    absorbed and monitored; leakage beyond ``leak_tol`` is an error, so
    every reported probability is exact up to float rounding.
    """

    def __init__(self, d: int, box_radius: int, n: int,
                 keep_history: bool = False, leak_tol: float = 1e-9):
        if d < 1 or d > 3:
            raise ValueError("dense tables support d in {1,2,3}")
        if box_radius < 1 or n < 0:
            raise ValueError("need box_radius >= 1 and n >= 0")
        self.d = d
        self.radius = box_radius
        self.n = n
        self.leak_tol = leak_tol
        shape = (2 * box_radius + 1,) * d
        occ = np.zeros(shape)
        occ[(box_radius,) * d] = 1.0
        self.history = [occ.copy()] if keep_history else None
        green = occ.copy()
        for _ in range(n):
            occ = _disperse(occ, d)
            green += occ
            if self.history is not None:
                self.history.append(occ.copy())
        leak = 1.0 - float(occ.sum())
        if leak > leak_tol:
            raise BoxLeakageError(
                f"box radius {box_radius} leaks {leak:.3e} of the mass over {n} steps"
            )
        self.final = occ
        self._green = green
        self._fp_cache: dict = {}

    def _index(self, site) -> tuple:
        if len(site) != self.d:
            raise ValueError(f"site {site!r} has wrong dimension")
        idx = tuple(c + self.radius for c in site)
        if any(not 0 <= c < 2 * self.radius + 1 for c in idx):
            raise ValueError(f"site {site!r} outside the box")
        return idx

    def occupation(self, k: int, site) -> float:
        """P[walk at site after k steps]; requires keep_history."""
        if self.history is None:
            raise ValueError("constructed without keep_history")
        if not 0 <= k <= self.n:
            raise ValueError("k out of range")
        return float(self.history[k][self._index(site)])

    def green(self, site) -> float:
        """Expected visits to the site within n steps (step 0 included)."""
        return float(self._green[self._index(site)])

    def hit_prob_series(self, site) -> np.ndarray:
        """Cumulative first-passage probability by step m, m = 0..n."""
        idx = self._index(site)
        if idx in self._fp_cache:
            return self._fp_cache[idx]
        if all(c == self.radius for c in idx):
            raise ValueError("first passage to the start is not defined here")
        arr = np.zeros_like(self.final)
        arr[(self.radius,) * self.d] = 1.0
        series = np.zeros(self.n + 1)
        absorbed = 0.0
        for m in range(1, self.n + 1):
            arr = _disperse(arr, self.d)
            absorbed += float(arr[idx])
            arr[idx] = 0.0
            series[m] = absorbed
        self._fp_cache[idx] = series
        return series

    def hit_prob(self, site, m: Optional[int] = None) -> float:
        """P[walk hits the site within m steps] (defaults to n)."""
        series = self.hit_prob_series(site)
        return float(series[self.n if m is None else m])


def _disperse(arr: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros_like(arr)
    w = 1.0 / (2 * d)
    for axis in range(d):
        to_hi = [slice(None)] * d
        from_lo = [slice(None)] * d
        to_hi[axis] = slice(1, None)
        from_lo[axis] = slice(0, -1)
        out[tuple(to_hi)] += w * arr[tuple(from_lo)]
        out[tuple(from_lo)] += w * arr[tuple(to_hi)]
    return out


def srw_dp(g: Lattice, box_radius: int, n: int, keep_history: bool = False) -> WalkTable:
    """Exact occupation, Green, and hitting tables for the given lattice."""
    if not isinstance(g, Lattice):
        raise ValueError("dense walk tables are defined on lattices")
    return WalkTable(g.d, box_radius, n, keep_history=keep_history)


@dataclass
class ScalingPoint:
    radius: int
    n: int
    hit_prob: float
    scaled: float
    method: str
    ci_low: float = 0.0
    ci_high: float = 1.0


@dataclass
class ScalingReport:
    d: int
    points: list[ScalingPoint]
    fitted_constant: float
    positive: bool
    stable: bool

    @property
    def ok(self) -> bool:
        return self.positive and self.stable


def _scale_factor(d: int, r: int) -> float:
    if d == 1:
        return 1.0
    if d == 2:
        return math.log(r)
    return float(r ** (d - 2))


def hit_prob_scaling_check(
    d: int,
    radii: list[int],
    master_seed: int = 0,
    mc_trials: int = 20_000,
    dp_limit: int = 12,
) -> ScalingReport:
    """For axis targets at each radius r, estimate the chance a walk hits
    within r^2 steps, rescale by (1, log r, r^(d-2)), and check the minimum
    stays positive and does not collapse across the range (second-half
    minimum at least half the first-half minimum)."""
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2, or 3")
    if any(r < 2 for r in radii):
        raise ValueError("radii must be >= 2 so every scale factor is positive")
    g = Lattice(d)
    points = []
    for r in radii:
        n = r * r
        target = (r,) + (0,) * (d - 1)
        use_dp = d == 1 or (d == 2 and r <= dp_limit) or (d == 3 and r <= 6)
        if use_dp:
            table = WalkTable(d, n, n)
            q = table.hit_prob(target)
            points.append(ScalingPoint(r, n, q, q * _scale_factor(d, r), "dp"))
        else:
            est = srw_hit_prob_mc(g, target, n, mc_trials, master_seed)
            points.append(
                ScalingPoint(r, n, est.point, est.point * _scale_factor(d, r), "mc",
                             est.ci_low, est.ci_high)
            )
    scaled = [pt.scaled for pt in points]
    half = max(len(scaled) // 2, 1)
    positive = all(v > 0.0 for v in scaled)
    stable = positive and min(scaled[half:]) >= 0.5 * min(scaled[:half])
    return ScalingReport(d, points, min(scaled), positive, stable)


@dataclass
class RangeSumReport:
    """Value and classification of the expected-range series
    sum_k (sphere size at k) * E[1 - (1 - p^k)^eta]."""

    value: float
    truncation_error: float
    divergent: bool
    terms_used: int
    reason: str = ""

    @property
    def subcritical(self) -> bool:
        return not self.divergent and self.value + self.truncation_error < 1.0


def _excess_hit_mass(eta: Law, x: float, imax: int = 300_000) -> tuple[float, float]:
    """E[1 - (1-x)^eta] with a truncation-error bound."""
    if x <= 0.0:
        return 0.0, 0.0
    if x >= 1.0:
        return 1.0 - eta.pmf(0), 0.0
    total = 0.0
    cum = eta.pmf(0)
    i = 0
    log1m = math.log1p(-x)
    while cum < 1.0 - 1e-15 and i < imax:
        i += 1
        v = eta.pmf(i)
        if v > 0.0:
            total += v * (-math.expm1(i * log1m))
            cum += v
        if i % 1024 == 0:
            bound = min(1.0 - cum, x * eta.mean_tail(i))
            if bound < 1e-16:
                return total, bound
    remaining = max(1.0 - cum, 0.0)
    if remaining <= 0.0:
        return total, 0.0
    return total, min(remaining, x * eta.mean_tail(i))


def expected_range_sum(
    eta: Law,
    p: float,
    topology: GraphTopology,
    term_tol: float = 1e-9,
    max_k: int = 100_000,
) -> RangeSumReport:
    """Expected number of distinct sites (besides the origin) that the
    particles of one site would cover; < 1 certifies domination by a
    subcritical branching process.  Divergence is settled analytically from
    the law's moment structure where possible and by a 50-term ratio test
    otherwise."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0,1]")
    if p == 0.0:
        return RangeSumReport(0.0, 0.0, False, 0, "no jumps at p=0")
    if isinstance(topology, Tree):
        growth = (topology.d - 1) * p
        if growth >= 1.0:
            return RangeSumReport(math.inf, 0.0, True, 0,
                                  f"sphere growth (d-1)p = {growth:.4g} >= 1")
        delta = math.log(topology.d - 1) / math.log(1.0 / p) if p < 1 else math.inf
        if not eta.power_moment_finite(delta):
            return RangeSumReport(math.inf, 0.0, True, 0,
                                  f"E eta^{delta:.4g} diverges")
    else:
        dims = 1 if isinstance(topology, Line) else topology.d
        if p == 1.0:
            return RangeSumReport(math.inf, 0.0, True, 0, "immortal particles cover the graph")
        if not eta.log_moment_order_finite(dims):
            return RangeSumReport(math.inf, 0.0, True, 0,
                                  f"E (log eta)^{dims} diverges")

    mean_eta = eta.mean()
    total = 0.0
    err = 0.0
    growth_streak = 0
    ratios: list[float] = []
    prev = None
    for k in range(1, max_k + 1):
        sk = topology.sphere_size(k)
        val, val_err = _excess_hit_mass(eta, p**k)
        term = sk * val
        total += term
        err += sk * val_err
        if prev is not None and prev > 0.0:
            ratios.append(term / prev)
            growth_streak = growth_streak + 1 if term >= prev else 0
            if growth_streak >= 50:
                return RangeSumReport(math.inf, err, True, k,
                                      "terms failed the ratio test for 50 consecutive k")
        prev = term
        if math.isfinite(mean_eta):
            rem = _series_tail_bound(topology, p, k, mean_eta)
            if rem < term_tol:
                return RangeSumReport(total, err + rem, False, k)
        elif term < term_tol and len(ratios) >= 10:
            r = max(ratios[-10:])
            if r < 1.0:
                rem = term * r / (1.0 - r)
                return RangeSumReport(total, err + rem, False, k)
    return RangeSumReport(total, math.inf, False, max_k,
                          "term budget exhausted before the tail bound settled")


def _series_tail_bound(topology: GraphTopology, p: float, k: int, mean_eta: float) -> float:
    """Upper bound on sum_{j>k} s_j * p^j * mean_eta."""
    if isinstance(topology, Tree):
        r = (topology.d - 1) * p
        lead = topology.d * (topology.d - 1) ** k * p ** (k + 1)
        return mean_eta * lead / (1.0 - r)
    dims = 1 if isinstance(topology, Line) else topology.d
    ratio = p * ((k + 2) / (k + 1)) ** (dims - 1)
    if ratio >= 1.0:
        return math.inf
    lead = topology.sphere_size(k + 1) * p ** (k + 1)
    return mean_eta * lead / (1.0 - ratio)


def srw_range_mc(g: GraphTopology, k: int, trials: int, master_seed: int) -> MeanCI:
    """Mean number of distinct sites a no-death walk covers in k steps."""
    if k < 1 or trials < 1:
        raise ValueError("k and trials must be >= 1")
    seed = trial_seed(master_seed, SRW)
    root = g.root
    degree = g.degree(root)
    counts = []
    for t in range(trials):
        pos = root
        seen = {pos}
        for step in range(1, k + 1):
            u = uniform(seed, SRW, step, t)
            pos = g.neighbor(pos, int(u * degree))
            seen.add(pos)
        counts.append(len(seen))
    return mean_ci(counts)
