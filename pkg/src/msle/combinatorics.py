"""Link patterns, Dyck paths, the nesting order, the KW relation and Dyck tilings.

Indices are 1-based throughout, matching the usual labelling x_1 < ... < x_{2N}.
Patterns of a given size are listed in decreasing lexicographic order of their
Dyck heights, so the rainbow comes first and the unnested pattern last. With
that order the incidence matrix M is unit lower-triangular.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import CapacityError, InvalidPatternError

DEFAULT_MAX_N = 10
TILING_MAX_AREA = 40

Link = tuple[int, int]


@dataclass(frozen=True)
class LinkPattern:
    links: tuple[Link, ...]

    def __post_init__(self):
        links = tuple(sorted((min(a, b), max(a, b)) for a, b in self.links))
        object.__setattr__(self, "links", links)
        n = len(links)
        ends = sorted(i for link in links for i in link)
        if ends != list(range(1, 2 * n + 1)):
            raise InvalidPatternError(f"links {links} do not cover 1..{2 * n} exactly once")
        for a, b in links:
            for c, d in links:
                if a < c < b < d:
                    raise InvalidPatternError(f"links {a}-{b} and {c}-{d} cross")

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def openers(self) -> frozenset[int]:
        return frozenset(a for a, _ in self.links)

    @property
    def closers(self) -> frozenset[int]:
        return frozenset(b for _, b in self.links)

    def partner(self, i: int) -> int:
        for a, b in self.links:
            if a == i:
                return b
            if b == i:
                return a
        raise InvalidPatternError(f"index {i} not in pattern {self}")

    def __contains__(self, link) -> bool:
        a, b = link
        return (min(a, b), max(a, b)) in self.links

    def __str__(self) -> str:
        return ",".join(f"{a}-{b}" for a, b in self.links)

    def to_json(self) -> dict:
        return {"n": self.n, "links": [[a, b] for a, b in self.links]}

    @classmethod
    def from_json(cls, obj) -> "LinkPattern":
        if isinstance(obj, str):
            obj = json.loads(obj)
        p = cls(tuple((int(a), int(b)) for a, b in obj["links"]))
        if p.n != obj.get("n", p.n):
            raise InvalidPatternError("'n' disagrees with the number of links")
        return p

    @classmethod
    def parse(cls, text: str) -> "LinkPattern":
        """Accept "1-4,2-3" pair lists or balanced parentheses such as "(())"."""
        s = "".join(text.split())
        if s in ("", "∅", "{}"):
            return cls(())
        if set(s) <= {"(", ")"}:
            return from_parentheses(s)
        s = s.strip("{}[]")
        links = []
        for item in s.split(","):
            try:
                a, b = item.split("-")
                links.append((int(a), int(b)))
            except ValueError:
                raise InvalidPatternError(f"cannot parse link {item!r}") from None
        return cls(tuple(links))


@dataclass(frozen=True)
class DyckPath:
    heights: tuple[int, ...]

    def __post_init__(self):
        h = tuple(int(v) for v in self.heights)
        object.__setattr__(self, "heights", h)
        if len(h) % 2 != 1 or h[0] != 0 or h[-1] != 0:
            raise InvalidPatternError(f"not a Dyck path: {h}")
        if any(v < 0 for v in h) or any(abs(h[k] - h[k - 1]) != 1 for k in range(1, len(h))):
            raise InvalidPatternError(f"not a Dyck path: {h}")

    @property
    def n(self) -> int:
        return (len(self.heights) - 1) // 2

    def __getitem__(self, k: int) -> int:
        return self.heights[k]


def parse_pattern(text: str) -> LinkPattern:
    return LinkPattern.parse(text)


def from_parentheses(s: str) -> LinkPattern:
    stack, links = [], []
    for i, ch in enumerate(s, start=1):
        if ch == "(":
            stack.append(i)
        elif ch == ")":
            if not stack:
                raise InvalidPatternError(f"unbalanced parentheses: {s!r}")
            links.append((stack.pop(), i))
        else:
            raise InvalidPatternError(f"unexpected character {ch!r}")
    if stack:
        raise InvalidPatternError(f"unbalanced parentheses: {s!r}")
    return LinkPattern(tuple(links))


def to_parentheses(p: LinkPattern) -> str:
    op = p.openers
    return "".join("(" if i in op else ")" for i in range(1, 2 * p.n + 1))


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def rainbow(n: int) -> LinkPattern:
    return LinkPattern(tuple((i, 2 * n + 1 - i) for i in range(1, n + 1)))


def unnested(n: int) -> LinkPattern:
    return LinkPattern(tuple((2 * i - 1, 2 * i) for i in range(1, n + 1)))


# -- bijection ------------------------------------------------------------

def to_dyck(p: LinkPattern) -> DyckPath:
    op = p.openers
    h = [0]
    for i in range(1, 2 * p.n + 1):
        h.append(h[-1] + (1 if i in op else -1))
    return DyckPath(tuple(h))


def from_dyck(d: DyckPath) -> LinkPattern:
    h = d.heights
    stack, links = [], []
    for i in range(1, len(h)):
        if h[i] > h[i - 1]:
            stack.append(i)
        else:
            links.append((stack.pop(), i))
    return LinkPattern(tuple(links))


def _as_dyck(x) -> DyckPath:
    return to_dyck(x) if isinstance(x, LinkPattern) else x


# -- enumeration ----------------------------------------------------------

def _dyck_heights(n: int) -> Iterator[tuple[int, ...]]:
    # up-steps tried first, so the output is in decreasing lexicographic order
    path = [0]

    def rec(ups: int, downs: int):
        if ups == n and downs == n:
            yield tuple(path)
            return
        h = path[-1]
        if ups < n:
            path.append(h + 1)
            yield from rec(ups + 1, downs)
            path.pop()
        if downs < ups:
            path.append(h - 1)
            yield from rec(ups, downs + 1)
            path.pop()

    yield from rec(0, 0)


@lru_cache(maxsize=None)
def _patterns(n: int) -> tuple[LinkPattern, ...]:
    return tuple(from_dyck(DyckPath(h)) for h in _dyck_heights(n))


def enumerate_link_patterns(n: int, max_n: int = DEFAULT_MAX_N) -> list[LinkPattern]:
    """All C_n link patterns of size n in canonical order.

    Raises CapacityError when n > max_n; pass a larger max_n to override.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > max_n:
        raise CapacityError(f"n={n} exceeds enumeration cap {max_n} (C_n = {catalan(n)})")
    return list(_patterns(n))


@lru_cache(maxsize=None)
def pattern_index(n: int) -> dict[LinkPattern, int]:
    return {p: i for i, p in enumerate(_patterns(n))}


# -- link and wedge removal -----------------------------------------------

def remove_link(p: LinkPattern, j: int) -> LinkPattern:
    """Drop the link {j, j+1} and shift the labels above j+1 down by two."""
    if (j, j + 1) not in p.links:
        raise InvalidPatternError(f"{{{j},{j + 1}}} is not a link of {p}")

    def shift(i):
        return i - 2 if i > j + 1 else i

    return LinkPattern(tuple((shift(a), shift(b)) for a, b in p.links if a != j))


def has_up_wedge(d: DyckPath, j: int) -> bool:
    h = d.heights
    return 1 <= j < len(h) - 1 and h[j - 1] < h[j] > h[j + 1]


def has_down_wedge(d: DyckPath, j: int) -> bool:
    h = d.heights
    return 1 <= j < len(h) - 1 and h[j - 1] > h[j] < h[j + 1]


def has_wedge(d: DyckPath, j: int) -> bool:
    return has_up_wedge(d, j) or has_down_wedge(d, j)


def lift(d: DyckPath, j: int) -> DyckPath:
    """Turn the down-wedge at j into an up-wedge."""
    if not has_down_wedge(d, j):
        raise InvalidPatternError(f"no down-wedge at {j}")
    h = list(d.heights)
    h[j] += 2
    return DyckPath(tuple(h))


def remove_wedge(d: DyckPath, j: int, kind: str = "any") -> DyckPath:
    """Delete the two steps meeting at the wedge at j."""
    ok = {"up": has_up_wedge, "down": has_down_wedge, "any": has_wedge}[kind](d, j)
    if not ok:
        raise InvalidPatternError(f"no {kind} wedge at {j}")
    h = d.heights
    return DyckPath(h[:j] + h[j + 2:])


def remove_up_wedge(d: DyckPath, j: int) -> DyckPath:
    return remove_wedge(d, j, "up")


def remove_down_wedge(d: DyckPath, j: int) -> DyckPath:
    return remove_wedge(d, j, "down")


# -- order and KW relation ------------------------------------------------

def leq(a, b) -> bool:
    """Nesting order: pointwise comparison of Dyck heights."""
    ha, hb = _as_dyck(a).heights, _as_dyck(b).heights
    if len(ha) != len(hb):
        raise ValueError("paths of different length")
    return all(x <= y for x, y in zip(ha, hb))


def kw_related(a: LinkPattern, b: LinkPattern) -> bool:
    """True iff every link of b joins an opener of a with a closer of a."""
    if a.n != b.n:
        raise ValueError("patterns of different size")
    op = a.openers
    return all((c in op) != (d in op) for c, d in b.links)


# -- matrices -------------------------------------------------------------

@dataclass(frozen=True)
class SignedIntMatrix:
    n: int
    order: tuple[LinkPattern, ...]
    entries: tuple[tuple[int, ...], ...]

    def __getitem__(self, key) -> int:
        a, b = key
        idx = pattern_index(self.n)
        return self.entries[idx[a]][idx[b]]

    def row(self, p: LinkPattern) -> tuple[int, ...]:
        return self.entries[pattern_index(self.n)[p]]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "order": [str(p) for p in self.order],
            "entries": [list(r) for r in self.entries],
        }

    @classmethod
    def from_json(cls, obj) -> "SignedIntMatrix":
        if isinstance(obj, str):
            obj = json.loads(obj)
        order = tuple(
            LinkPattern.from_json(p) if isinstance(p, dict) else LinkPattern.parse(p)
            for p in obj["order"]
        )
        entries = tuple(tuple(int(v) for v in r) for r in obj["entries"])
        return cls(int(obj["n"]), order, entries)


@lru_cache(maxsize=None)
def _incidence(n: int) -> SignedIntMatrix:
    ps = _patterns(n)
    rows = tuple(tuple(int(kw_related(a, b)) for b in ps) for a in ps)
    return SignedIntMatrix(n, ps, rows)


@lru_cache(maxsize=None)
def _inverse(n: int) -> SignedIntMatrix:
    m = _incidence(n).entries
    size = len(m)
    # M is unit lower-triangular in the canonical order; solve M X = I row by row
    inv = [[0] * size for _ in range(size)]
    for i in range(size):
        for k in range(size):
            s = int(i == k)
            for j in range(k, i):
                if m[i][j]:
                    s -= m[i][j] * inv[j][k]
            inv[i][k] = s
    return SignedIntMatrix(n, _patterns(n), tuple(tuple(r) for r in inv))


def incidence_matrix(n: int, max_n: int = DEFAULT_MAX_N) -> SignedIntMatrix:
    enumerate_link_patterns(n, max_n)
    return _incidence(n)


def inverse_matrix(n: int, max_n: int = DEFAULT_MAX_N) -> SignedIntMatrix:
    enumerate_link_patterns(n, max_n)
    return _inverse(n)


# -- skew shapes and Dyck tilings -----------------------------------------

@dataclass(frozen=True)
class SkewShape:
    lower: DyckPath
    upper: DyckPath

    def __post_init__(self):
        if not leq(self.lower, self.upper):
            raise InvalidPatternError("lower path is not below upper path")

    @property
    def area(self) -> int:
        return len(self.cells())

    def cells(self) -> list[tuple[int, int]]:
        """Centres (column, row) of the atomic squares, column-major, bottom-up."""
        lo, up = self.lower.heights, self.upper.heights
        return [(x, y) for x in range(1, len(lo) - 1) for y in range(lo[x] + 1, up[x], 2)]


def skew_shape(a, b) -> SkewShape:
    return SkewShape(_as_dyck(a), _as_dyck(b))


@dataclass(frozen=True)
class DyckTile:
    x: int
    h: int
    shape: DyckPath  # ridge heights relative to h, one entry per column

    @property
    def extent(self) -> tuple[int, int]:
        return self.x, self.x + len(self.shape.heights) - 1

    def cells(self) -> list[tuple[int, int]]:
        return [(self.x + k, self.h + r) for k, r in enumerate(self.shape.heights)]


@dataclass(frozen=True)
class DyckTiling:
    tiles: tuple[DyckTile, ...]


def _covers_ok(t: DyckTile, u: DyckTile) -> bool:
    (x0, x1), (y0, y1) = t.extent, u.extent
    if x1 < y0 or y1 < x0:
        return True
    col = max(x0, y0)
    rt = t.h + t.shape.heights[col - x0]
    ru = u.h + u.shape.heights[col - y0]
    top, bottom = ((t.extent, u.extent) if rt > ru else (u.extent, t.extent))
    return bottom[0] <= top[0] and top[1] <= bottom[1]


def iter_cover_inclusive_tilings(s: SkewShape, max_area: int = TILING_MAX_AREA) -> Iterator[DyckTiling]:
    cells = s.cells()
    if len(cells) > max_area:
        raise CapacityError(f"skew shape of area {len(cells)} exceeds cap {max_area}")
    free = set(cells)
    placed: list[DyckTile] = []

    def tiles_from(x0, y0):
        # grow shifted Dyck paths of free cells starting at (x0, y0)
        ridge = [(x0, y0)]

        def grow():
            cx, cy = ridge[-1]
            if cy == y0:
                yield list(ridge)
            for dy in (1, -1):
                nxt = (cx + 1, cy + dy)
                if cy + dy >= y0 and nxt in free:
                    ridge.append(nxt)
                    yield from grow()
                    ridge.pop()

        yield from grow()

    def rec():
        if not free:
            yield DyckTiling(tuple(placed))
            return
        x0, y0 = min(free)
        for ridge in tiles_from(x0, y0):
            t = DyckTile(x0, y0, DyckPath(tuple(y - y0 for _, y in ridge)))
            if not all(_covers_ok(t, u) for u in placed):
                continue
            free.difference_update(ridge)
            placed.append(t)
            yield from rec()
            placed.pop()
            free.update(ridge)

    yield from rec()


def count_cover_inclusive_tilings(s: SkewShape, max_area: int = TILING_MAX_AREA) -> int:
    return sum(1 for _ in iter_cover_inclusive_tilings(s, max_area))


def tiling_inverse_entry(a: LinkPattern, b: LinkPattern) -> int:
    """(-1)^{|a/b|} times the number of cover-inclusive tilings, or 0 if a is not below b."""
    if not leq(a, b):
        return 0
    s = skew_shape(a, b)
    return (-1) ** s.area * count_cover_inclusive_tilings(s)


# -- allowable orderings --------------------------------------------------

def allowable_ordering(p: LinkPattern) -> list[Link]:
    """Links in an order where each one joins neighbours once the earlier ones are gone.

    Innermost links go first; ties are broken by the left endpoint.
    """
    depth = {}
    for a, b in p.links:
        depth[(a, b)] = sum(1 for c, d in p.links if c < a and b < d)
    return sorted(p.links, key=lambda l: (-depth[l], l[0]))


def removal_indices(p: LinkPattern, ordering: Sequence[Link]) -> list[int]:
    """Current label j of each link at the time it is removed.

    Raises InvalidPatternError when the ordering is not allowable.
    """
    if sorted(tuple(sorted(l)) for l in ordering) != list(p.links):
        raise InvalidPatternError("ordering is not a permutation of the links")
    remaining = sorted(i for link in p.links for i in link)
    out = []
    for a, b in ordering:
        a, b = min(a, b), max(a, b)
        ia = remaining.index(a)
        if remaining[ia + 1] != b:
            raise InvalidPatternError(f"link {a}-{b} is not consecutive when removed")
        out.append(ia + 1)
        del remaining[ia:ia + 2]
    return out


def is_allowable(p: LinkPattern, ordering: Sequence[Link]) -> bool:
    try:
        removal_indices(p, ordering)
    except InvalidPatternError:
        return False
    return True
