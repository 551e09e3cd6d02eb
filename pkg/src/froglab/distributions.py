"""Sampleable laws for initial particle counts and particle lifetimes.

Counts (eta): Deterministic, Bernoulli, Empirical, PowerTail, LogTail,
Truncated.  Lifetimes: Geometric, Deterministic, SquareTail (heavy tails
specified at square arguments, piecewise-constant in between).

Every law samples by inverse-tail lookup, so one uniform in [0,1) yields one
value and a replayed uniform replays the value.  ``tail(n)`` is the exact
P[value >= n]; pmf and mean are derived from it analytically.

Heavy-tailed count laws can produce values beyond any usable magnitude; the
sampler clamps at ``SAMPLE_CLAMP`` (the tail beyond it is astronomically far
outside any experiment's caps, but a finite integer keeps runs total).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import isqrt

import numpy as np
from scipy.special import zeta

INF = math.inf
SAMPLE_CLAMP = 10**300
_LOG_CLAMP = 300 * math.log(10.0)


@dataclass(frozen=True)
class MomentFlags:
    """Analytic moment classification used by bound checks and estimators."""

    log_moment_finite: bool          # E log(value v 1) < inf
    some_power_moment_finite: bool   # exists delta > 0 with E value^delta < inf
    all_log_moments_finite: bool     # E (log(value v 1))^d < inf for every d

ALL_FINITE = MomentFlags(True, True, True)


def _floor_exp(x: float) -> int:
    """floor(e^x) for x >= 0, clamped at SAMPLE_CLAMP."""
    if x >= _LOG_CLAMP:
        return SAMPLE_CLAMP
    return int(math.floor(math.exp(x)))


class Law:
    """Shared derived quantities; subclasses provide tail() and sampling."""

    def tail(self, n: int) -> float:
        raise NotImplementedError

    def pmf(self, j: int) -> float:
        if j < 0:
            return 0.0
        return self.tail(j) - self.tail(j + 1)

    def prob_nonzero(self) -> float:
        return self.tail(1)

    def mean(self) -> float:
        raise NotImplementedError

    def mean_tail(self, cap: int) -> float:
        """E[value * 1{value > cap}]; INF is always a valid fallback."""
        return INF

    def moment_flags(self) -> MomentFlags:
        return ALL_FINITE

    def log_moment_order_finite(self, d: int) -> bool:
        return self.moment_flags().all_log_moments_finite or d <= 0

    def power_moment_finite(self, delta: float) -> bool:
        """Whether E value^delta is finite (delta > 0)."""
        return self.moment_flags().some_power_moment_finite

    def sample_from_uniform(self, u: float) -> int:
        """Largest k with tail(k) >= 1 - u (inverse-tail convention)."""
        raise NotImplementedError

    def sample_array(self, us: np.ndarray) -> np.ndarray:
        return np.array([self.sample_from_uniform(float(u)) for u in us], dtype=object)


def _adjust(value: int, v: float, tail, lo: int) -> int:
    # settle float boundary cases so sampling agrees exactly with tail()
    while tail(value + 1) >= v:
        value += 1
    while value > lo and tail(value) < v:
        value -= 1
    return value


@dataclass(frozen=True)
class Deterministic(Law):
    m: int

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("deterministic value must be >= 0")

    def tail(self, n):
        return 1.0 if n <= self.m else 0.0

    def mean(self):
        return float(self.m)

    def mean_tail(self, cap):
        return float(self.m) if self.m > cap else 0.0

    def sample_from_uniform(self, u):
        return self.m

    def sample_array(self, us):
        return np.full(len(us), self.m, dtype=np.int64)

    def spec(self):
        return f"det:{self.m}"


@dataclass(frozen=True)
class Bernoulli(Law):
    q: float

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("Bernoulli parameter must lie in [0,1]")

    def tail(self, n):
        if n <= 0:
            return 1.0
        return self.q if n == 1 else 0.0

    def mean(self):
        return self.q

    def mean_tail(self, cap):
        return self.q if cap < 1 else 0.0

    def sample_from_uniform(self, u):
        return 1 if 1.0 - u <= self.q else 0

    def sample_array(self, us):
        return (1.0 - np.asarray(us) <= self.q).astype(np.int64)

    def spec(self):
        return f"bern:{self.q:g}"


@dataclass(frozen=True)
class Empirical(Law):
    """Finite-support pmf gamma_0, gamma_1, ..."""

    probs: tuple[float, ...]
    _tails: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = self.probs
        if not p or any(x < 0 for x in p):
            raise ValueError("pmf entries must be nonnegative and nonempty")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"pmf sums to {sum(p)!r}, not 1 within 1e-12")
        tails = [1.0]
        acc = 1.0
        for x in p:
            acc -= x
            tails.append(max(acc, 0.0))
        object.__setattr__(self, "_tails", tuple(tails))

    def tail(self, n):
        if n <= 0:
            return 1.0
        if n >= len(self._tails):
            return 0.0
        return self._tails[n]

    def mean(self):
        return float(sum(j * x for j, x in enumerate(self.probs)))

    def mean_tail(self, cap):
        return float(sum(j * x for j, x in enumerate(self.probs) if j > cap))

    def sample_from_uniform(self, u):
        v = 1.0 - u
        k = len(self.probs) - 1
        while k > 0 and self._tails[k] < v:
            k -= 1
        return k

    def sample_array(self, us):
        # tails are decreasing; searchsorted over the reversed array
        v = 1.0 - np.asarray(us)
        t = np.asarray(self._tails[1:])  # t[k-1] = tail(k)
        return (t[None, :] >= v[:, None]).sum(axis=1).astype(np.int64)

    def spec(self):
        return "pmf:" + ",".join(f"{x:g}" for x in self.probs)


@dataclass(frozen=True)
class PowerTail(Law):
    """P[value >= n] = n^-beta for n >= cutoff, 1 below it."""

    beta: float
    cutoff: int = 1

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")

    def tail(self, n):
        if n < self.cutoff:
            return 1.0
        return float(n) ** -self.beta

    def mean(self):
        if self.beta <= 1.0:
            return INF
        return (self.cutoff - 1) + float(zeta(self.beta, self.cutoff))

    def mean_tail(self, cap):
        if self.beta <= 1.0:
            return INF
        lo = max(cap + 1, self.cutoff)
        clamp_part = max(lo - (cap + 1), 0) * 1.0  # region where tail = 1
        return cap * self.tail(cap + 1) + clamp_part + float(zeta(self.beta, lo))

    def moment_flags(self):
        return ALL_FINITE

    def power_moment_finite(self, delta: float) -> bool:
        return delta < self.beta

    def sample_from_uniform(self, u):
        v = 1.0 - u
        if v > self.tail(self.cutoff):
            return self.cutoff - 1
        x = -math.log(v) / self.beta  # value = floor(e^x)
        raw = _floor_exp(x)
        if raw >= SAMPLE_CLAMP:
            return SAMPLE_CLAMP
        return _adjust(max(raw, self.cutoff), v, self.tail, self.cutoff - 1)

    def sample_array(self, us):
        v = 1.0 - np.asarray(us)
        with np.errstate(over="ignore"):
            raw = np.floor(v ** (-1.0 / self.beta))
        raw = np.where(np.isfinite(raw), raw, float(SAMPLE_CLAMP))
        raw = np.minimum(np.maximum(raw, self.cutoff), float(SAMPLE_CLAMP))
        out = np.where(v > self.tail(self.cutoff), self.cutoff - 1, raw)
        return out.astype(np.float64)

    def spec(self):
        return f"powertail:{self.beta:g}:{self.cutoff}"


@dataclass(frozen=True)
class LogTail(Law):
    """P[value >= n] = (log n)^-beta for n >= cutoff: no positive power
    moment exists, and E(log value)^d is finite exactly for d < beta."""

    beta: float
    cutoff: int = 3

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")

    def tail(self, n):
        if n < self.cutoff:
            return 1.0
        return min(1.0, math.log(n) ** -self.beta)

    def mean(self):
        return INF

    def moment_flags(self):
        return MomentFlags(self.beta > 1.0, False, False)

    def log_moment_order_finite(self, d):
        return d < self.beta

    def sample_from_uniform(self, u):
        v = 1.0 - u
        if v > self.tail(self.cutoff):
            return self.cutoff - 1
        x = v ** (-1.0 / self.beta)  # value = floor(e^x)
        raw = _floor_exp(x)
        if raw >= SAMPLE_CLAMP:
            return SAMPLE_CLAMP
        return _adjust(max(raw, self.cutoff), v, self.tail, self.cutoff - 1)

    def spec(self):
        return f"logtail:{self.beta:g}:{self.cutoff}"


@dataclass(frozen=True)
class Truncated(Law):
    """Value of the inner law when <= s, else 0."""

    inner: Law
    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("truncation level must be >= 1")

    def tail(self, n):
        if n <= 0:
            return 1.0
        if n > self.s:
            return 0.0
        return max(self.inner.tail(n) - self.inner.tail(self.s + 1), 0.0)

    def mean(self):
        drop = self.inner.tail(self.s + 1)
        return float(sum(self.inner.tail(n) for n in range(1, self.s + 1)) - self.s * drop)

    def mean_tail(self, cap):
        if cap >= self.s:
            return 0.0
        return float(cap * self.tail(cap + 1) + sum(self.tail(n) for n in range(cap + 1, self.s + 1)))

    def sample_from_uniform(self, u):
        v = self.inner.sample_from_uniform(u)
        return v if v <= self.s else 0

    def sample_array(self, us):
        v = self.inner.sample_array(us)
        return np.where(v <= self.s, v, 0)

    def spec(self):
        return f"trunc:{self.inner.spec()}:{self.s}"


@dataclass(frozen=True)
class Geometric(Law):
    """Lifetime law P[value = k] = (1-p) p^(k-1), k >= 1."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("geometric parameter must lie in [0,1)")

    def tail(self, n):
        if n <= 1:
            return 1.0
        return self.p ** (n - 1)

    def mean(self):
        return 1.0 / (1.0 - self.p)

    def mean_tail(self, cap):
        if cap < 1:
            return self.mean()
        # cap * P[X > cap] + sum_{n > cap} p^(n-1)
        return cap * self.p**cap + self.p**cap / (1.0 - self.p)

    def sample_from_uniform(self, u):
        return geometric_lifetime(u, self.p)

    def sample_array(self, us):
        if self.p == 0.0:
            return np.ones(len(us), dtype=np.int64)
        u = np.maximum(np.asarray(us), 2.0**-64)
        return (1 + np.floor(np.log(u) / math.log(self.p))).astype(np.int64)

    def spec(self):
        return f"geom:{self.p:g}"


# engine lifetime with an immortal sentinel at p = 1; quantile-coupled so the
# value is nondecreasing in p for a fixed uniform
IMMORTAL = 2**62


def geometric_lifetime(u: float, p: float) -> int:
    """1 + max{k >= 0 : u <= p^k}; monotone in p pointwise in u."""
    if p <= 0.0:
        return 1
    if p >= 1.0:
        return IMMORTAL
    u = max(u, 2.0**-64)
    k = int(math.floor(math.log(u) / math.log(p)))
    k = max(k, 0)
    while u <= p ** (k + 1):
        k += 1
    while k > 0 and u > p**k:
        k -= 1
    return 1 + k


_SQUARE_SHAPES = {
    "loglog": lambda n: math.log(math.log(n)) / n,
    "logsq": lambda n: math.log(n) ** 2 / n**2,
    "log": lambda n: math.log(n) / n**2,
}


@dataclass(frozen=True)
class SquareTail(Law):
    """Lifetime tails pinned at square arguments:

    P[value >= n^2] = min(1, beta * sup_{m>=n} f(m)) for n >= cutoff, with f
    per shape; constant between consecutive squares.  The sup over the
    remaining range (the shapes are unimodal) keeps the tail non-increasing
    while meeting the shape's value wherever f is already decreasing.
    """

    shape: str
    beta: float
    cutoff: int = 2
    _peak: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.shape not in _SQUARE_SHAPES:
            raise ValueError(f"shape must be one of {sorted(_SQUARE_SHAPES)}")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        f = _SQUARE_SHAPES[self.shape]
        m = 2
        while f(m + 1) > f(m):
            m += 1
        object.__setattr__(self, "_peak", m)

    def _envelope(self, n: int) -> float:
        f = _SQUARE_SHAPES[self.shape]
        return min(1.0, self.beta * f(max(n, self._peak)))

    def tail(self, n):
        if n < self.cutoff**2:
            return 1.0
        return self._envelope(isqrt(n))

    def mean(self):
        return INF

    def moment_flags(self):
        return MomentFlags(True, True, True)

    def power_moment_finite(self, delta):
        # tail at m decays like f(sqrt(m)): 1/sqrt(m) up to logs (loglog
        # shape) or 1/m up to logs (the others)
        return delta < (0.5 if self.shape == "loglog" else 1.0)

    def sample_from_uniform(self, u):
        v = 1.0 - u
        if v > self._envelope(self.cutoff):
            return self.cutoff**2 - 1
        lo, hi = self.cutoff, self.cutoff + 1
        while self._envelope(hi) >= v:
            lo, hi = hi, hi * 2
        while hi - lo > 1:  # envelope(lo) >= v > envelope(hi)
            mid = (lo + hi) // 2
            if self._envelope(mid) >= v:
                lo = mid
            else:
                hi = mid
        return (lo + 1) ** 2 - 1

    def spec(self):
        return f"sqtail:{self.shape}:{self.beta:g}:{self.cutoff}"


def parse_count_law(text: str) -> Law:
    """Parse det:<m>, bern:<q>, pmf:<g0,g1,...>, powertail:<b>:<n0>,
    logtail:<b>:<n0>, trunc:<inner>:<s>."""
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "det":
            return Deterministic(int(rest))
        if kind == "bern":
            return Bernoulli(float(rest))
        if kind == "pmf":
            return Empirical(tuple(float(x) for x in rest.split(",")))
        if kind == "powertail":
            beta, n0 = rest.split(":")
            return PowerTail(float(beta), int(n0))
        if kind == "logtail":
            beta, n0 = rest.split(":")
            return LogTail(float(beta), int(n0))
        if kind == "trunc":
            inner, s = rest.rsplit(":", 1)
            return Truncated(parse_count_law(inner), int(s))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad count law {text!r}: {exc}") from exc
    raise ValueError(f"unknown count law {text!r}")


def parse_lifetime_law(text: str) -> Law:
    """Parse geom:<p>, det:<k>, sqtail:<loglog|logsq|log>:<b>:<n0>."""
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "geom":
            return Geometric(float(rest))
        if kind == "det":
            law = Deterministic(int(rest))
            if law.m < 1:
                raise ValueError("deterministic lifetime must be >= 1")
            return law
        if kind == "sqtail":
            shape, beta, n0 = rest.split(":")
            return SquareTail(shape.lower(), float(beta), int(n0))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad lifetime law {text!r}: {exc}") from exc
    raise ValueError(f"unknown lifetime law {text!r}")
