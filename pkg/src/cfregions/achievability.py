"""Compute-forward rate regions for nested linear codes.

The joint-decoding region is the union over B of the intersection over C of
the union over S of the intersection over T of half-spaces
``sum_{k in T} R_k <= H(U(T)) - H(W_{B(S)} | Y, W_{CB})``.
The inner "intersection over C of unions" is expanded choice by choice,
absorbing dominated polytopes after every step.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .channel import NOTHING, ChannelSpec, JointDist, U, W, X, Y, cond_entropy_w
from .gflin import (
    GfMatrix,
    check_budget,
    enum_fullrank_rref,
    enum_superspan_rref,
    is_full_rank,
    matmul,
    rank,
    select_rows,
    span_contains,
    stack,
    unit_rows,
)
from .regions import HalfSpace, Polytope, RateRegion, absorb, intersect_all, union_all

log = logging.getLogger(__name__)


class TaskError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ComputeTask:
    """A channel spec plus the full-rank coefficient matrix A (L x K)."""

    spec: ChannelSpec
    coeff: GfMatrix

    def __post_init__(self):
        if self.coeff.q != self.spec.q:
            raise TaskError(f"coefficient matrix is over F_{self.coeff.q}, channel uses F_{self.spec.q}")
        if self.coeff.cols != self.spec.K:
            raise TaskError(f"coefficient matrix needs {self.spec.K} columns, has {self.coeff.cols}")
        if self.coeff.rows == 0 or not is_full_rank(self.coeff):
            raise TaskError("coefficient matrix must be nonempty and full rank")

    @property
    def K(self) -> int:
        return self.spec.K

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def L(self) -> int:
        return self.coeff.rows

    @cached_property
    def dist(self) -> JointDist:
        return self.spec.joint


@dataclass(frozen=True)
class BcstTuple:
    """One admissible (B, C, S, T) combination of the joint region."""

    b: GfMatrix
    c: GfMatrix
    s: tuple[int, ...]
    t: tuple[int, ...]


def _subset_entropies(d: JointDist) -> dict[tuple[int, ...], float]:
    return {t: d.entropy(U(*t)) for r in range(1, d.K + 1) for t in itertools.combinations(range(d.K), r)}


def valid_s_sets(c: GfMatrix, lb: int) -> list[tuple[int, ...]]:
    """S in [0, lb) with |S| = lb - rows(c) and rank([C; I(S)]) = lb."""
    size = lb - c.rows
    return [s for s in itertools.combinations(range(lb), size) if rank(stack(c, unit_rows(s, lb, c.q))) == lb]


def valid_t_sets(b_s: GfMatrix, k: int) -> list[tuple[int, ...]]:
    """T in [0, K) with |T| = rows(b_s) and rank([B(S); I(K minus T)]) = K."""
    out = []
    for t in itertools.combinations(range(k), b_s.rows):
        rest = [i for i in range(k) if i not in t]
        if rank(stack(b_s, unit_rows(rest, k, b_s.q))) == k:
            out.append(t)
    return out


def admissible_tuples(task: ComputeTask, b: GfMatrix) -> Iterable[BcstTuple]:
    _check_b(task, b)
    lb = b.rows
    for lc in range(lb):
        for c in enum_fullrank_rref(lc, lb, task.q):
            for s in valid_s_sets(c, lb):
                for t in valid_t_sets(select_rows(b, s), task.K):
                    yield BcstTuple(b, c, s, t)


def _check_b(task: ComputeTask, b: GfMatrix) -> None:
    if b.q != task.q or b.cols != task.K:
        raise TaskError(f"B must be over F_{task.q} with {task.K} columns, got {b!r}")
    if b.rows == 0 or not is_full_rank(b):
        raise TaskError(f"B must be nonempty and full rank, got {b!r}")
    if not span_contains(b, task.coeff):
        raise TaskError(f"Span(B) does not contain Span(A) for B={b.tolist()}")


def c_options(task: ComputeTask, b: GfMatrix, c: GfMatrix, hu=None) -> list[Polytope]:
    """The union over S (for one C) as a list of polytopes."""
    d = task.dist
    hu = _subset_entropies(d) if hu is None else hu
    cb = matmul(c, b)
    opts = []
    for s in valid_s_sets(c, b.rows):
        b_s = select_rows(b, s)
        h = cond_entropy_w(d, b_s, cb)
        ts = valid_t_sets(b_s, task.K)
        opts.append(Polytope(task.K, tuple(HalfSpace(t, hu[t] - h) for t in ts)))
    return opts


def joint_region_fixed_b(task: ComputeTask, b: GfMatrix) -> RateRegion:
    """The region for one B: intersection over C of the union over S."""
    _check_b(task, b)
    hu = _subset_entropies(task.dist)
    k = task.K
    per_c = []
    for lc in range(b.rows):
        for c in enum_fullrank_rref(lc, b.rows, task.q):
            opts = absorb(c_options(task, b, c, hu), k)
            if not opts:
                # every choice of S is empty: the whole intersection is empty
                return RateRegion.empty(k)
            per_c.append(opts)
    # branch-free constraints first, then by number of alternatives
    per_c.sort(key=len)
    current: tuple[Polytope, ...] = (Polytope(k),)
    for step, opts in enumerate(per_c):
        merged = (Polytope(k, p.halfspaces + o.halfspaces) for p in current for o in opts)
        current = absorb(merged, k)
        if not current:
            break
    log.debug("B=%s: %d C matrices, %d polytopes", b.tolist(), len(per_c), len(current))
    return RateRegion(k, current)


def _monomial_canonical(rows: np.ndarray, q: int) -> bytes:
    # scale each row to a leading 1, then sort rows
    out = []
    for r in rows:
        lead = r[np.flatnonzero(r)[0]]
        out.append(tuple((r * pow(int(lead), -1, q)) % q))
    return np.array(sorted(out), dtype=np.int64).tobytes()


def span_bases(b: GfMatrix, budget: int | None = None) -> list[GfMatrix]:
    """Every basis of Span(b), up to row scaling and row order.

    Scaling or reordering rows leaves the fixed-B region unchanged, but a
    general change of basis can change it.
    """
    q, lb = b.q, b.rows
    check_budget(f"bases of a {lb}-dimensional span over F_{q}", q ** (lb * lb), budget)
    seen: dict[bytes, GfMatrix] = {}
    for flat in itertools.product(range(q), repeat=lb * lb):
        qm = np.array(flat, dtype=np.int64).reshape(lb, lb)
        if rank(GfMatrix(qm, q)) != lb:
            continue
        rows = (qm @ b.data) % q
        key = _monomial_canonical(rows, q)
        if key not in seen:
            seen[key] = GfMatrix(np.frombuffer(key, dtype=np.int64).reshape(lb, b.cols), q)
    return sorted(seen.values(), key=lambda m: m.tolist())


def candidate_bs(task: ComputeTask, max_lb: int | None = None, bases: str = "rref") -> list[GfMatrix]:
    """B matrices whose span contains Span(A), for ``L <= L_B <= max_lb``.

    ``bases="rref"`` gives one RREF matrix per span; ``bases="all"`` gives
    every basis of each span up to row scaling and order.
    """
    if bases not in ("rref", "all"):
        raise ValueError(f"bases must be 'rref' or 'all', got {bases!r}")
    top = task.K if max_lb is None else min(max_lb, task.K)
    out = []
    for lb in range(rank(task.coeff), top + 1):
        for b in enum_superspan_rref(task.coeff, lb):
            out.extend([b] if bases == "rref" else span_bases(b))
    return out


def joint_region(
    task: ComputeTask,
    b_list: Sequence[GfMatrix] | None = None,
    max_lb: int | None = None,
    bases: str = "rref",
) -> RateRegion:
    """Union over B of :func:`joint_region_fixed_b`.

    ``b_list`` restricts the union (an inner bound); otherwise B runs over
    :func:`candidate_bs`.
    """
    bs = candidate_bs(task, max_lb, bases) if b_list is None else list(b_list)
    return union_all([joint_region_fixed_b(task, b) for b in bs], task.K)


def seq_region(task: ComputeTask, b: GfMatrix) -> RateRegion:
    """Successive decoding of the rows of B in order.

    ``R_k <= H(U_k) - H(W_{B_j} | Y, W_{B^{j-1}})`` for each row j and each k
    with ``B[j, k] != 0``.
    """
    _check_b(task, b)
    d = task.dist
    cons = []
    for j in range(b.rows):
        h = cond_entropy_w(d, select_rows(b, [j]), select_rows(b, range(j)))
        for k in np.flatnonzero(b.data[j]):
            cons.append(HalfSpace((int(k),), d.entropy(U(int(k))) - h))
    return RateRegion.single(Polytope(task.K, tuple(cons)))


def seq_corner(task: ComputeTask, b: GfMatrix) -> np.ndarray:
    """Corner point of the sequential region (bounds on unconstrained users are 0)."""
    p = seq_region(task, b).polytopes[0]
    return np.nan_to_num(p.bounding_box(), posinf=0.0)


def algorithm1_sstar(c: GfMatrix, lb: int) -> tuple[int, ...]:
    """Greedy S*: add i whenever e_i is not in Span([I(S*); C])."""
    if c.cols != lb:
        raise ValueError(f"C must have {lb} columns, has {c.cols}")
    s: list[int] = []
    for i in range(lb):
        span = stack(unit_rows(s, lb, c.q), c)
        if not span_contains(span, unit_rows([i], lb, c.q)):
            s.append(i)
    return tuple(s)


# -- two-user closed form and the MAC region ----------------------------------------


def mac_region(spec: ChannelSpec) -> RateRegion:
    """``sum_{k in T} R_k <= I(X(T); Y | X(K minus T))`` for every nonempty T."""
    d = spec.joint
    k = spec.K
    cons = []
    for r in range(1, k + 1):
        for t in itertools.combinations(range(k), r):
            rest = tuple(i for i in range(k) if i not in t)
            cons.append(HalfSpace(t, d.mutual_info(X(*t), Y, X(*rest) if rest else NOTHING)))
    return RateRegion.single(Polytope(k, tuple(cons)))


@dataclass(frozen=True)
class TwoUserRegions:
    cf: RateRegion
    lmac: RateRegion
    total: RateRegion

    def __iter__(self):
        return iter((self.cf, self.lmac, self.total))


def corollary_two_user(spec: ChannelSpec, a: GfMatrix) -> TwoUserRegions:
    """(R_CF, R_LMAC, R_CF union R_LMAC) for one combination of two users.

    The linear-MAC part uses the classical MAC bounds plus
    ``R_k <= min_C I(U_k; Y, W_C)`` over C with both entries nonzero.
    """
    if spec.K != 2:
        raise TaskError(f"two-user corollary needs K=2, got K={spec.K}")
    if a.shape != (1, 2) or a.q != spec.q:
        raise TaskError(f"a must be a 1x2 vector over F_{spec.q}")
    if a.data[0, 0] == 0 or a.data[0, 1] == 0:
        raise TaskError(f"both coefficients must be nonzero, got {a.tolist()}")
    d = spec.joint
    h_a = d.cond_entropy(W(a), Y)
    cf = RateRegion.single(Polytope(2, (HalfSpace((0,), d.entropy(U(0)) - h_a), HalfSpace((1,), d.entropy(U(1)) - h_a))))
    mac = mac_region(spec).polytopes[0]
    reps = [GfMatrix([[1, c]], spec.q) for c in range(1, spec.q)]
    lmac_parts = []
    for k in (0, 1):
        bound = min(d.mutual_info(U(k), Y | W(c)) for c in reps)
        lmac_parts.append(RateRegion.single(Polytope(2, mac.halfspaces + (HalfSpace((k,), bound),))))
    lmac = union_all(lmac_parts)
    return TwoUserRegions(cf, lmac, union_all([cf, lmac]))


# -- Gaussian closed form -------------------------------------------------------------


def gaussian_cf_rates(h: Sequence[float], p1: float, p2: float, a: Sequence[int]) -> tuple[float, float]:
    """Compute-forward rate bounds for the two-user Gaussian MAC (bits)."""
    if p1 <= 0 or p2 <= 0:
        raise ValueError(f"powers must be positive, got P1={p1}, P2={p2}")
    av = np.asarray(a)
    if av.shape != (2,) or not np.all(av == np.round(av)):
        raise ValueError(f"a must be an integer 2-vector, got {a!r}")
    if av[0] == 0 or av[1] == 0:
        raise ValueError(f"both integer coefficients must be nonzero, got {a!r}")
    hv = np.asarray(h, dtype=float).reshape(1, 2)
    av = av.astype(float).reshape(1, 2)
    sigma_inv = np.diag([1.0 / p1, 1.0 / p2])
    quad = float((av @ np.linalg.inv(sigma_inv + hv.T @ hv) @ av.T)[0, 0])
    g = math.log2(math.gcd(int(abs(av[0, 0])), int(abs(av[0, 1]))))
    return 0.5 * math.log2(p1 / quad) + g, 0.5 * math.log2(p2 / quad) + g


def gaussian_cf_region(h: Sequence[float], p1: float, p2: float, a: Sequence[int]) -> RateRegion:
    r1, r2 = gaussian_cf_rates(h, p1, p2, a)
    return RateRegion.single(Polytope(2, (HalfSpace((0,), r1), HalfSpace((1,), r2))))


# -- multiple receivers -----------------------------------------------------------------


def multi_receiver_region(tasks: Sequence[ComputeTask], **kwargs) -> RateRegion:
    """Intersection of the joint regions of receivers sharing the transmitters."""
    if not tasks:
        raise TaskError("need at least one receiver")
    first = tasks[0].spec
    for t in tasks[1:]:
        if not first.same_inputs(t.spec):
            raise TaskError("receivers must share q, K, input pmfs and symbol maps")
    return intersect_all([joint_region(t, **kwargs) for t in tasks])
