"""Keyed (counter-based) uniform randomness.

Every random decision in a trial is a pure function of
``(master_seed, trial, purpose, site, index, step)``.  This makes runs
replayable, lets the walk engine and the range-percolation construction
consume *identical* draws for the same particle, and makes results
independent of worker count and scheduling.

The hash is a splitmix64-style chain: each key component is folded into a
64-bit state through a strong finalizer.  A vectorized numpy variant is
provided for bulk Monte Carlo; it is bit-identical to the scalar path.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# purpose namespaces; disjoint constants keep key streams from colliding
ETA = 0xE7A
LIFETIME = 0x11FE
JUMP = 0x10B
TRIAL = 0x7514
GW = 0x6A11
SRW = 0x5123
META = 0xAE7A

# tags distinguishing site encodings inside a key
_TAG_INT = 0x51
_TAG_TUPLE = 0x52

# smallest uniform returned; keeps log(u) finite
U_MIN = 2.0**-64


def mix64(z: int) -> int:
    """Finalizer with full avalanche (splitmix64)."""
    z &= _M64
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


def fold(state: int, part: int) -> int:
    """Fold one integer key component into the running state."""
    return mix64((state + _GOLDEN + (part & _M64)) & _M64)


def key_hash(seed: int, *parts: int) -> int:
    """Hash a key tuple to 64 bits."""
    h = mix64(seed & _M64)
    for p in parts:
        h = fold(h, p)
    return h


def uniform(seed: int, *parts: int) -> float:
    """One uniform in [U_MIN, 1) keyed by the given tuple."""
    u = (key_hash(seed, *parts) >> 11) * 2.0**-53
    return u if u > 0.0 else U_MIN


def site_parts(site) -> tuple[int, ...]:
    """Canonical integer encoding of a site for keying.

    Line sites are ints; lattice sites and tree addresses are int tuples.
    Tuples fold component by component (no length prefix), so the hash of a
    tree address extends its parent's by exactly one fold -- which is what
    lets tree runs intern nodes and key children incrementally.
    """
    if isinstance(site, tuple):
        return (_TAG_TUPLE, *site)
    return (_TAG_INT, site)


def trial_seed(master_seed: int, trial: int) -> int:
    return key_hash(master_seed, TRIAL, trial)


def uniform_array(seed: int, parts: tuple[int, ...], counters: np.ndarray) -> np.ndarray:
    """Vectorized uniforms: one draw per counter value.

    Equals ``uniform(seed, *parts, c)`` elementwise; used by bulk random-walk
    and branching Monte Carlo.
    """
    base = key_hash(seed, *parts)
    with np.errstate(over="ignore"):
        z = (np.asarray(counters, dtype=np.uint64) + np.uint64((base + _GOLDEN) & _M64))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.maximum(u, U_MIN)


def uniform_from_base(base: int, part: int) -> float:
    """One more component folded in, mapped to a uniform; equals
    ``uniform(...)`` on the full key when ``base`` hashes the prefix."""
    u = (fold(base, part) >> 11) * 2.0**-53
    return u if u > 0.0 else U_MIN


class TrialRandomness:
    """All keyed draws for one trial of one configuration.

    The engine and the range sampler both read from this object, so a
    particle ``(origin, i)`` sees the same lifetime uniform and the same
    jump uniforms in either construction.  Each site's identifier is hashed
    once (``site_base``); per-purpose and per-particle keys are constant
    extra folds on top, which keeps deep tree addresses cheap.
    """

    __slots__ = ("seed",)

    def __init__(self, master_seed: int, trial: int):
        self.seed = trial_seed(master_seed, trial)

    def site_base(self, site) -> int:
        """Hash of (trial seed, site); the prefix for all of a site's keys."""
        h = mix64(self.seed)
        if isinstance(site, tuple):
            h = fold(h, _TAG_TUPLE)
            for c in site:
                h = (h + _GOLDEN + (c & _M64)) & _M64
                h = ((h ^ (h >> 30)) * _MIX1) & _M64
                h = ((h ^ (h >> 27)) * _MIX2) & _M64
                h ^= h >> 31
            return h
        return fold(fold(h, _TAG_INT), site)

    def eta_uniform(self, site) -> float:
        return uniform_from_base(self.site_base(site), ETA)

    def eta_uniform_from(self, base: int) -> float:
        return uniform_from_base(base, ETA)

    def lifetime_uniform(self, site, index: int) -> float:
        return self.lifetime_uniform_from(self.site_base(site), index)

    def lifetime_uniform_from(self, base: int, index: int) -> float:
        return uniform_from_base(fold(base, LIFETIME), index)

    def jump_uniform(self, site, index: int, step: int) -> float:
        return uniform_from_base(self.jump_base(site, index), step)

    def jump_base(self, site, index: int) -> int:
        """Prefix hash for a particle's jump stream; one fold per jump after."""
        return self.jump_base_from(self.site_base(site), index)

    def jump_base_from(self, base: int, index: int) -> int:
        return fold(fold(base, JUMP), index)
