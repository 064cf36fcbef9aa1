"""Unions of polytopes in the nonnegative orthant.

Every constraint has the form ``sum_{k in T} R_k <= rhs`` (0/1 coefficients),
and every polytope is implicitly intersected with ``R >= 0``.  Regions are
stored closed; strict membership is the caller's business (use a margin).
User indices are 0-based in the API and 1-based in the text formats.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

FEAS_TOL = 1e-9
VERTEX_DEDUP = 1e-9
EXACT_VERTEX_MAX_K = 4


@dataclass(frozen=True, order=True)
class HalfSpace:
    tset: tuple[int, ...]
    rhs: float

    def __post_init__(self):
        t = tuple(sorted(set(int(k) for k in self.tset)))
        if not t:
            raise ValueError("half-space needs a nonempty index set")
        object.__setattr__(self, "tset", t)
        object.__setattr__(self, "rhs", float(self.rhs))

    def lhs(self, rates) -> float:
        return float(sum(rates[k] for k in self.tset))

    def label(self) -> str:
        return "T={" + ",".join(str(k + 1) for k in self.tset) + "}"


@dataclass(frozen=True)
class Polytope:
    k: int
    halfspaces: tuple[HalfSpace, ...] = ()

    def __post_init__(self):
        best: dict[tuple[int, ...], float] = {}
        for h in self.halfspaces:
            if not isinstance(h, HalfSpace):
                h = HalfSpace(*h)
            if h.tset[-1] >= self.k or h.tset[0] < 0:
                raise ValueError(f"index set {h.tset} out of range for K={self.k}")
            # same-tset dominance: keep the tightest rhs
            if h.tset not in best or h.rhs < best[h.tset]:
                best[h.tset] = h.rhs
        hs = tuple(HalfSpace(t, best[t]) for t in sorted(best, key=lambda t: (len(t), t)))
        object.__setattr__(self, "halfspaces", hs)

    @classmethod
    def from_bounds(cls, k: int, bounds: dict) -> Polytope:
        return cls(k, tuple(HalfSpace(t, c) for t, c in bounds.items()))

    def bounds(self) -> dict[tuple[int, ...], float]:
        return {h.tset: h.rhs for h in self.halfspaces}

    def key(self) -> tuple:
        return tuple((h.tset, round(h.rhs, 12)) for h in self.halfspaces)

    @cached_property
    def _matrix(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.zeros((len(self.halfspaces), self.k))
        for i, h in enumerate(self.halfspaces):
            a[i, list(h.tset)] = 1.0
        b = np.array([h.rhs for h in self.halfspaces])
        return a, b

    @property
    def is_empty(self) -> bool:
        return polytope_is_empty(self)

    @cached_property
    def free_axes(self) -> tuple[int, ...]:
        """Axes along which the polytope is unbounded."""
        covered = set()
        for h in self.halfspaces:
            covered.update(h.tset)
        return tuple(k for k in range(self.k) if k not in covered)

    def satisfied(self, points: np.ndarray, tol: float = FEAS_TOL) -> np.ndarray:
        """Boolean mask over an ``(N, K)`` array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.all(pts >= -tol, axis=1)
        if self.halfspaces:
            a, b = self._matrix
            ok &= np.all(pts @ a.T <= b + tol, axis=1)
        return ok

    def bounding_box(self) -> np.ndarray:
        """Per-axis maximum (``inf`` on free axes)."""
        hi = np.full(self.k, np.inf)
        for h in self.halfspaces:
            for k in h.tset:
                hi[k] = min(hi[k], h.rhs)
        return hi

    def vertices(self, cap: float | None = None) -> np.ndarray:
        """Vertices, with free axes capped at ``cap`` when given."""
        return _vertices(self, cap)

    @cached_property
    def _bounded_vertices(self) -> np.ndarray:
        return _vertices(self, None)

    def max_sum(self, tset: Sequence[int]) -> float:
        """Maximum of ``sum_{k in tset} R_k`` over the polytope."""
        if self.is_empty:
            return -np.inf
        if any(k in self.free_axes for k in tset):
            return np.inf
        if self.k <= EXACT_VERTEX_MAX_K:
            v = self._bounded_vertices
            return float(v[:, list(tset)].sum(axis=1).max())
        return implied_bound(self, tset)

    def __str__(self) -> str:
        return " & ".join(f"{h.label()} <= {h.rhs:.6g}" for h in self.halfspaces) or "orthant"


def _vertices(p: Polytope, cap: float | None) -> np.ndarray:
    k = p.k
    if p.is_empty:
        return np.zeros((0, k))
    a, b = p._matrix
    planes_a = [a, np.eye(k)]
    planes_b = [b, np.zeros(k)]
    if cap is not None and p.free_axes:
        caps = np.zeros((len(p.free_axes), k))
        for i, ax in enumerate(p.free_axes):
            caps[i, ax] = 1.0
        planes_a.append(caps)
        planes_b.append(np.full(len(p.free_axes), cap))
    pa = np.vstack(planes_a)
    pb = np.concatenate(planes_b)
    combos = np.array(list(itertools.combinations(range(len(pb)), k)), dtype=np.int64)
    mats = pa[combos]
    rhs = pb[combos]
    det = np.linalg.det(mats)
    good = np.abs(det) > 1e-12
    sols = np.linalg.solve(mats[good], rhs[good][..., None])[..., 0] if good.any() else np.zeros((0, k))
    if cap is not None and p.free_axes:
        capped = Polytope(k, p.halfspaces + tuple(HalfSpace((ax,), cap) for ax in p.free_axes))
        mask = capped.satisfied(sols)
    else:
        mask = p.satisfied(sols)
    pts = sols[mask]
    pts = np.where(np.abs(pts) < VERTEX_DEDUP, 0.0, pts)
    return _dedup_points(pts)


def _dedup_points(pts: np.ndarray, tol: float = VERTEX_DEDUP) -> np.ndarray:
    if len(pts) == 0:
        return pts
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    keep = [pts[0]]
    for x in pts[1:]:
        if not any(np.all(np.abs(x - y) <= tol) for y in keep):
            keep.append(x)
    return np.array(keep)


def implied_bound(p: Polytope, tset: Sequence[int]) -> float:
    """A valid upper bound on ``sum_{tset} R`` from superset and split rules."""
    bounds = [(sum(1 << k for k in h.tset), h.rhs) for h in p.halfspaces]
    target = sum(1 << k for k in tset)
    memo: dict[int, float] = {}

    def bound(mask: int) -> float:
        if mask in memo:
            return memo[mask]
        best = min((c for m, c in bounds if m & mask == mask), default=np.inf)
        sub = (mask - 1) & mask
        while sub:
            rest = mask ^ sub
            if sub < rest:
                best = min(best, bound(sub) + bound(rest))
            sub = (sub - 1) & mask
        memo[mask] = best
        return best

    return bound(target)


def polytope_is_empty(p: Polytope, tol: float = FEAS_TOL) -> bool:
    """With 0/1 coefficients the origin is feasible unless some rhs is negative."""
    return any(h.rhs < -tol for h in p.halfspaces)


def polytope_subset(inner: Polytope, outer: Polytope, tol: float = FEAS_TOL) -> bool:
    """True iff ``inner`` is contained in ``outer``."""
    if inner.k != outer.k:
        raise ValueError(f"dimension mismatch: {inner.k} vs {outer.k}")
    if inner.is_empty:
        return True
    if outer.is_empty:
        return False
    return all(inner.max_sum(h.tset) <= h.rhs + tol for h in outer.halfspaces)


@dataclass(frozen=True)
class RateRegion:
    """Union of polytopes; the empty tuple is the empty region."""

    k: int
    polytopes: tuple[Polytope, ...] = ()

    def __post_init__(self):
        for p in self.polytopes:
            if p.k != self.k:
                raise ValueError(f"polytope of dimension {p.k} in region of dimension {self.k}")
        object.__setattr__(self, "polytopes", tuple(self.polytopes))

    @classmethod
    def orthant(cls, k: int) -> RateRegion:
        return cls(k, (Polytope(k),))

    @classmethod
    def empty(cls, k: int) -> RateRegion:
        return cls(k, ())

    @classmethod
    def single(cls, p: Polytope) -> RateRegion:
        return cls(p.k, (p,))

    @classmethod
    def from_constraints(cls, k: int, constraints: Iterable) -> RateRegion:
        return cls.single(Polytope(k, tuple(HalfSpace(*c) if not isinstance(c, HalfSpace) else c for c in constraints)))

    @property
    def is_empty(self) -> bool:
        return all(p.is_empty for p in self.polytopes)

    def __contains__(self, rates) -> bool:
        return contains_point(self, rates)

    def __len__(self) -> int:
        return len(self.polytopes)

    def canonical(self) -> RateRegion:
        return RateRegion(self.k, tuple(sorted(self.polytopes, key=Polytope.key)))


def _check_dims(a: RateRegion, b: RateRegion) -> None:
    if a.k != b.k:
        raise ValueError(f"dimension mismatch: K={a.k} vs K={b.k}")


def absorb(polys: Iterable[Polytope], k: int, tol: float = FEAS_TOL) -> tuple[Polytope, ...]:
    """Drop empty polytopes and polytopes contained in another member."""
    unique: dict[tuple, Polytope] = {}
    for p in polys:
        if not p.is_empty:
            unique.setdefault(p.key(), p)
    ordered = sorted(unique.values(), key=lambda p: (len(p.halfspaces), p.key()))
    kept: list[Polytope] = []
    for p in ordered:
        if any(polytope_subset(p, other, tol) for other in kept):
            continue
        kept = [other for other in kept if not polytope_subset(other, p, tol)]
        kept.append(p)
    return tuple(sorted(kept, key=Polytope.key))


def intersect(a: RateRegion, b: RateRegion) -> RateRegion:
    _check_dims(a, b)
    merged = (Polytope(a.k, pa.halfspaces + pb.halfspaces) for pa in a.polytopes for pb in b.polytopes)
    return RateRegion(a.k, absorb(merged, a.k))


def intersect_all(regions: Sequence[RateRegion]) -> RateRegion:
    if not regions:
        raise ValueError("intersect_all needs at least one region")
    out = regions[0]
    for r in regions[1:]:
        out = intersect(out, r)
    return out


def union(a: RateRegion, b: RateRegion) -> RateRegion:
    _check_dims(a, b)
    return RateRegion(a.k, absorb(a.polytopes + b.polytopes, a.k))


def union_all(regions: Sequence[RateRegion], k: int | None = None) -> RateRegion:
    if not regions:
        if k is None:
            raise ValueError("union of no regions needs k")
        return RateRegion.empty(k)
    polys = []
    for r in regions:
        _check_dims(regions[0], r)
        polys.extend(r.polytopes)
    return RateRegion(regions[0].k, absorb(polys, regions[0].k))


def _as_point(r: RateRegion, rates) -> np.ndarray:
    x = np.asarray(rates, dtype=float).reshape(-1)
    if x.shape[0] != r.k:
        raise ValueError(f"expected {r.k} rates, got {x.shape[0]}")
    return x


def contains_point(r: RateRegion, rates, tol: float = FEAS_TOL) -> bool:
    x = _as_point(r, rates)
    return any(bool(p.satisfied(x, tol)[0]) for p in r.polytopes)


def witness_polytope(r: RateRegion, rates, tol: float = FEAS_TOL) -> int | None:
    """Index of the first polytope containing ``rates``, or None."""
    x = _as_point(r, rates)
    for i, p in enumerate(r.polytopes):
        if p.satisfied(x, tol)[0]:
            return i
    return None


def tightest_violation(r: RateRegion, rates) -> tuple[int, HalfSpace, float] | None:
    """For a point outside ``r``: the polytope closest to admitting it.

    Returns ``(polytope index, its worst violated half-space, violation)``.
    """
    x = _as_point(r, rates)
    best = None
    for i, p in enumerate(r.polytopes):
        worst = None
        for h in p.halfspaces:
            v = h.lhs(x) - h.rhs
            if worst is None or v > worst[1]:
                worst = (h, v)
        if worst is None:
            continue
        if best is None or worst[1] < best[2]:
            best = (i, worst[0], worst[1])
    return best


class Containment(NamedTuple):
    ok: bool
    witness: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.ok


def _region_scale(*regions: RateRegion) -> float:
    vals = [abs(h.rhs) for r in regions for p in r.polytopes for h in p.halfspaces]
    return 1.0 + 2.0 * max(vals, default=1.0)


def contains_region(outer: RateRegion, inner: RateRegion, resolution: int = 25, tol: float = FEAS_TOL) -> Containment:
    """Check ``inner`` is a subset of ``outer``.

    Exact when ``outer`` is a single polytope.  Otherwise every vertex of each
    inner polytope and every point of a ``resolution``-per-axis grid over its
    bounding box is tested; the first failing point is returned as witness.
    """
    _check_dims(outer, inner)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    scale = _region_scale(outer, inner)
    outs = [p for p in outer.polytopes if not p.is_empty]
    for p in inner.polytopes:
        if p.is_empty:
            continue
        if not outs:
            return Containment(False, np.zeros(inner.k))
        if len(outs) == 1:
            o = outs[0]
            if polytope_subset(p, o, tol):
                continue
            return Containment(False, _subset_witness(p, o, scale, tol))
        pts = _sample_points(p, resolution, scale)
        ok = np.zeros(len(pts), dtype=bool)
        for o in outs:
            ok |= o.satisfied(pts, tol)
            if ok.all():
                break
        if not ok.all():
            return Containment(False, pts[np.argmin(ok)])
    return Containment(True, None)


def _sample_points(p: Polytope, resolution: int, scale: float) -> np.ndarray:
    hi = p.bounding_box()
    hi = np.where(np.isfinite(hi), np.maximum(hi, 0.0), scale)
    axes = [np.linspace(0.0, h, resolution) for h in hi]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p.k)
    grid = grid[p.satisfied(grid)]
    verts = p.vertices(cap=scale) if p.k <= EXACT_VERTEX_MAX_K else np.zeros((0, p.k))
    return np.vstack([verts, grid])


def _subset_witness(p: Polytope, o: Polytope, scale: float, tol: float) -> np.ndarray:
    if p.k <= EXACT_VERTEX_MAX_K:
        verts = p.vertices(cap=scale)
        bad = ~o.satisfied(verts, tol)
        if bad.any():
            return verts[np.argmax(bad)]
    pts = _sample_points(p, 9, scale)
    bad = ~o.satisfied(pts, tol)
    if bad.any():
        return pts[np.argmax(bad)]
    # the sound bound refused but no sampled point fails; report the origin
    return np.zeros(p.k)


def regions_equivalent(a: RateRegion, b: RateRegion, resolution: int = 17, tol: float = FEAS_TOL) -> bool:
    return bool(contains_region(a, b, resolution, tol)) and bool(contains_region(b, a, resolution, tol))


def vertices_2d3d(r: RateRegion, cap: float | None = None) -> list[tuple[float, ...]]:
    """Vertices of every member polytope (free axes capped), deduplicated."""
    if r.k not in (2, 3):
        raise ValueError(f"vertex export supports K in {{2, 3}}, got K={r.k}")
    cap = _region_scale(r) if cap is None else cap
    pts = [p.vertices(cap=cap) for p in r.polytopes if not p.is_empty]
    if not pts:
        return []
    allpts = _dedup_points(np.vstack(pts))
    return [tuple(float(v) for v in x) for x in allpts]


# -- text formats -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def format_region(r: RateRegion) -> str:
    lines = [f"K={r.k}"]
    for i, p in enumerate(r.canonical().polytopes):
        lines.append("")
        lines.append(f"polytope {i + 1}")
        lines.extend(f"{h.label()} rhs={_fmt(h.rhs)}" for h in p.halfspaces)
    return "\n".join(lines) + "\n"


_CONSTRAINT_RE = re.compile(r"^T=\{([0-9,\s]+)\}\s+rhs=(\S+)$")


class RegionFormatError(ValueError):
    pass


def parse_region(text: str) -> RateRegion:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if not ln.startswith("#")]
    try:
        first = next(i for i, ln in enumerate(lines) if ln)
    except StopIteration:
        raise RegionFormatError("empty region file") from None
    m = re.fullmatch(r"K=(\d+)", lines[first])
    if not m:
        raise RegionFormatError(f"line {first + 1}: expected 'K=<int>' header")
    k = int(m.group(1))
    polys: list[list[HalfSpace]] = []
    for lineno, ln in enumerate(lines[first + 1 :], start=first + 2):
        if not ln:
            continue
        if ln.startswith("polytope"):
            polys.append([])
            continue
        cm = _CONSTRAINT_RE.match(ln)
        if not cm or not polys:
            raise RegionFormatError(f"line {lineno}: cannot parse {ln!r}")
        tset = tuple(int(v) - 1 for v in cm.group(1).split(",") if v.strip())
        polys[-1].append(HalfSpace(tset, float(cm.group(2))))
    return RateRegion(k, tuple(Polytope(k, tuple(hs)) for hs in polys))


def format_vertices_csv(r: RateRegion) -> str:
    header = ",".join(f"R_{k + 1}" for k in range(r.k))
    rows = [",".join(_fmt(v) for v in pt) for pt in vertices_2d3d(r)]
    return "\n".join([header] + rows) + "\n"
