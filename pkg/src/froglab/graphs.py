"""Rooted graph topologies: the integer line, d-dimensional lattices, and
homogeneous trees.

Site encodings:

* ``Line``: plain ints, root ``0``.
* ``Lattice(d)``: d-tuples of ints, root ``(0, ..., 0)``.
* ``Tree(d)``: root-based addresses, i.e. tuples of edge choices.  The root
  is the empty tuple; its children are ``(0,)`` ... ``(d-1,)``; every other
  vertex has ``d-1`` children, appended as choices ``0..d-2``.

Neighbor order is canonical and documented because the simulation engine
maps a seeded uniform to a neighbor index: lattices list ``+e1, -e1, ...,
+ed, -ed``; trees list the parent first, then children in index order (the
root has no parent entry).  All functions are pure; values are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

# Lattice coordinates and line sites must stay inside this width; the
# engine's radius caps keep experiments far below it.
COORD_LIMIT = 2**62


class SiteError(ValueError):
    """Raised for a site that is malformed for the given topology."""


@dataclass(frozen=True)
class Line:
    """The two-sided integer line; isomorphic to Lattice(1)."""

    root = 0

    def validate(self, x) -> None:
        if not isinstance(x, int) or isinstance(x, bool):
            raise SiteError(f"line site must be an int, got {x!r}")
        if abs(x) >= COORD_LIMIT:
            raise SiteError(f"line site {x} exceeds the coordinate limit")

    def degree(self, x=None) -> int:
        return 2

    def neighbors(self, x):
        return [x + 1, x - 1]

    def neighbor(self, x, i: int):
        return x + 1 if i == 0 else x - 1

    def distance(self, x, y) -> int:
        return abs(x - y)

    def radius(self, x) -> int:
        return abs(x)

    def sphere_size(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be >= 0")
        return 1 if k == 0 else 2

    def spec(self) -> str:
        return "line"


@dataclass(frozen=True)
class Lattice:
    """The d-dimensional integer lattice with nearest-neighbor edges."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("lattice dimension must be >= 1")

    @property
    def root(self):
        return (0,) * self.d

    def validate(self, x) -> None:
        if not isinstance(x, tuple) or len(x) != self.d:
            raise SiteError(f"lattice({self.d}) site must be a {self.d}-tuple, got {x!r}")
        for c in x:
            if not isinstance(c, int) or isinstance(c, bool):
                raise SiteError(f"lattice coordinates must be ints, got {x!r}")
            if abs(c) >= COORD_LIMIT:
                raise SiteError(f"lattice site {x} exceeds the coordinate limit")

    def degree(self, x=None) -> int:
        return 2 * self.d

    def neighbors(self, x):
        out = []
        for axis in range(self.d):
            for delta in (1, -1):
                y = list(x)
                y[axis] += delta
                out.append(tuple(y))
        return out

    def neighbor(self, x, i: int):
        axis, sign = divmod(i, 2)
        delta = 1 if sign == 0 else -1
        y = list(x)
        y[axis] += delta
        return tuple(y)

    def distance(self, x, y) -> int:
        return sum(abs(a - b) for a, b in zip(x, y))

    def radius(self, x) -> int:
        return sum(abs(c) for c in x)

    def sphere_size(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return 1
        # count by number i of nonzero coordinates: choose them, sign them,
        # and compose k as i positive parts
        return sum(2**i * comb(self.d, i) * comb(k - 1, i - 1) for i in range(1, min(self.d, k) + 1))

    def spec(self) -> str:
        return f"zd:{self.d}"


@dataclass(frozen=True)
class Tree:
    """The homogeneous tree in which every vertex has degree d."""

    d: int

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("tree degree must be >= 3")

    @property
    def root(self):
        return ()

    def validate(self, x) -> None:
        if not isinstance(x, tuple):
            raise SiteError(f"tree site must be an address tuple, got {x!r}")
        for pos, c in enumerate(x):
            hi = self.d if pos == 0 else self.d - 1
            if not isinstance(c, int) or isinstance(c, bool) or not 0 <= c < hi:
                raise SiteError(f"bad tree address {x!r} at position {pos}")

    def degree(self, x=None) -> int:
        return self.d

    def neighbors(self, x):
        if x == ():
            return [(c,) for c in range(self.d)]
        return [x[:-1]] + [x + (c,) for c in range(self.d - 1)]

    def neighbor(self, x, i: int):
        if x == ():
            return (i,)
        return x[:-1] if i == 0 else x + (i - 1,)

    def distance(self, x, y) -> int:
        common = 0
        for a, b in zip(x, y):
            if a != b:
                break
            common += 1
        return len(x) + len(y) - 2 * common

    def radius(self, x) -> int:
        return len(x)

    def sphere_size(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return 1
        return self.d * (self.d - 1) ** (k - 1)

    def spec(self) -> str:
        return f"tree:{self.d}"


class IdentityRun:
    """Runtime view for topologies whose site encoding is already cheap
    (ints on the line, short tuples on lattices): node ids are the sites
    themselves, and key bases are hashed per site on first activation."""

    __slots__ = ("g", "rnd", "root")

    def __init__(self, g, rnd):
        self.g = g
        self.rnd = rnd
        self.root = g.root

    def neighbor(self, v, i):
        return self.g.neighbor(v, i)

    def radius(self, v):
        return self.g.radius(v)

    def base(self, v):
        return self.rnd.site_base(v)

    def site_of(self, v):
        return v

    def id_of(self, site):
        return site


class TreeRun:
    """Interned runtime view of a homogeneous tree for one trial.

    Visited vertices get dense integer ids (root = 0), making membership,
    comparison, and radius O(1) instead of O(depth).  A child's key base is
    one fold of its parent's, which matches hashing the full address
    because any site reached by the dynamics has its whole root path
    already interned (activation spreads along edges, and tree paths are
    unique).
    """

    __slots__ = ("d", "rnd", "root", "parents", "choices", "depths", "bases", "kids")

    def __init__(self, g: "Tree", rnd):
        self.d = g.d
        self.rnd = rnd
        self.root = 0
        self.parents = [0]
        self.choices = [-1]
        self.depths = [0]
        self.bases = [rnd.site_base(())]
        self.kids: dict = {}

    def _child(self, v: int, c: int) -> int:
        from .rng import fold

        key = v * self.d + c
        w = self.kids.get(key)
        if w is None:
            w = len(self.parents)
            self.parents.append(v)
            self.choices.append(c)
            self.depths.append(self.depths[v] + 1)
            self.bases.append(fold(self.bases[v], c))
            self.kids[key] = w
        return w

    def neighbor(self, v: int, i: int) -> int:
        if v == 0:
            return self._child(0, i)
        return self.parents[v] if i == 0 else self._child(v, i - 1)

    def radius(self, v: int) -> int:
        return self.depths[v]

    def base(self, v: int) -> int:
        return self.bases[v]

    def site_of(self, v: int):
        addr = []
        while v != 0:
            addr.append(self.choices[v])
            v = self.parents[v]
        return tuple(reversed(addr))

    def id_of(self, site) -> int:
        v = 0
        for c in site:
            v = self._child(v, c)
        return v


def runtime_view(g, rnd):
    """Per-trial runtime adapter used by the engine and the range sampler."""
    if isinstance(g, Tree):
        return TreeRun(g, rnd)
    return IdentityRun(g, rnd)


GraphTopology = Line | Lattice | Tree


def parse_topology(text: str) -> GraphTopology:
    """Parse the CLI/config syntax ``line``, ``zd:<d>``, ``tree:<d>``."""
    text = text.strip().lower()
    if text == "line":
        return Line()
    kind, _, arg = text.partition(":")
    if kind == "zd" and arg:
        return Lattice(int(arg))
    if kind == "tree" and arg:
        return Tree(int(arg))
    raise ValueError(f"unknown topology {text!r} (expected line, zd:<d>, or tree:<d>)")


def ball_sites(g: GraphTopology, radius: int):
    """All sites within the given distance of the root, by BFS."""
    seen = {g.root}
    frontier = [g.root]
    for _ in range(radius):
        nxt = []
        for x in frontier:
            for y in g.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen
