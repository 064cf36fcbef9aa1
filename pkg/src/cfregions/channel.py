"""Exact joint distributions and entropies for DM-MAC channel specs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .gflin import GfMatrix, is_prime

PROB_TOL = 1e-6


class SpecError(ValueError):
    """Invalid channel specification; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _check_distribution(key: str, values: np.ndarray, tol: float) -> None:
    if np.any(values < -tol) or not np.all(np.isfinite(values)):
        raise SpecError(key, "probabilities must be finite and nonnegative")
    total = values.sum(axis=-1)
    bad = np.abs(total - 1.0) > tol
    if np.any(bad):
        where = np.argwhere(bad)[0].tolist() if np.ndim(total) else []
        raise SpecError(key, f"entries do not sum to 1 (sum={np.asarray(total)[tuple(where)]!r} at {where})")


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """K-user DM-MAC together with the input pmfs and symbol maps.

    ``channel`` has shape ``(|X_1|, ..., |X_K|, |Y|)`` and holds p(y | x_1..x_K);
    ``symbol_map[k][u]`` is the channel input x_k(u) for u in F_q.
    Distributions are renormalised after validation.
    """

    q: int
    pmf_u: np.ndarray
    symbol_map: np.ndarray
    channel: np.ndarray
    tol: float = field(default=PROB_TOL, repr=False)

    def __post_init__(self):
        if not is_prime(self.q):
            raise SpecError("q", f"{self.q} is not prime")
        pmf = np.array(self.pmf_u, dtype=float)
        if pmf.ndim != 2 or pmf.shape[1] != self.q:
            raise SpecError("pmf_u", f"expected K arrays of length q={self.q}, got shape {pmf.shape}")
        _check_distribution("pmf_u", pmf, self.tol)
        pmf = np.clip(pmf, 0.0, None)
        pmf /= pmf.sum(axis=1, keepdims=True)
        smap = np.array(self.symbol_map, dtype=np.int64)
        if smap.shape != pmf.shape:
            raise SpecError("x_map", f"expected shape {pmf.shape}, got {smap.shape}")
        ch = np.array(self.channel, dtype=float)
        k = pmf.shape[0]
        if ch.ndim != k + 1:
            raise SpecError("channel", f"expected {k + 1} nested levels, got {ch.ndim}")
        for user in range(k):
            if smap[user].min() < 0 or smap[user].max() >= ch.shape[user]:
                raise SpecError("x_map", f"user {user + 1} maps outside its input alphabet of size {ch.shape[user]}")
        _check_distribution("channel", ch, self.tol)
        ch = np.clip(ch, 0.0, None)
        ch /= ch.sum(axis=-1, keepdims=True)
        for arr in (pmf, smap, ch):
            arr.setflags(write=False)
        object.__setattr__(self, "pmf_u", pmf)
        object.__setattr__(self, "symbol_map", smap)
        object.__setattr__(self, "channel", ch)

    @property
    def K(self) -> int:
        return self.pmf_u.shape[0]

    @property
    def x_sizes(self) -> tuple[int, ...]:
        return self.channel.shape[:-1]

    @property
    def y_size(self) -> int:
        return self.channel.shape[-1]

    def with_channel(self, channel: np.ndarray) -> ChannelSpec:
        return ChannelSpec(self.q, self.pmf_u, self.symbol_map, channel, self.tol)

    def same_inputs(self, other: ChannelSpec) -> bool:
        return (
            self.q == other.q
            and self.pmf_u.shape == other.pmf_u.shape
            and np.allclose(self.pmf_u, other.pmf_u, atol=1e-12)
            and np.array_equal(self.symbol_map, other.symbol_map)
            and self.x_sizes == other.x_sizes
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChannelSpec):
            return NotImplemented
        return (
            self.same_inputs(other)
            and self.channel.shape == other.channel.shape
            and np.allclose(self.channel, other.channel, atol=1e-12)
        )

    __hash__ = None

    @cached_property
    def joint(self) -> JointDist:
        return build_joint(self)


@dataclass(frozen=True)
class Vars:
    """A selection of random variables: U_k, X_k, Y and combinations W_F."""

    users: tuple[int, ...] = ()
    inputs: tuple[int, ...] = ()
    y: bool = False
    combos: tuple[GfMatrix, ...] = ()

    def __or__(self, other: Vars) -> Vars:
        return Vars(
            tuple(sorted(set(self.users) | set(other.users))),
            tuple(sorted(set(self.inputs) | set(other.inputs))),
            self.y or other.y,
            self.combos + other.combos,
        )

    @property
    def is_empty(self) -> bool:
        return not (self.users or self.inputs or self.y or any(c.rows for c in self.combos))


def U(*ks: int) -> Vars:
    return Vars(users=tuple(sorted(ks)))


def X(*ks: int) -> Vars:
    return Vars(inputs=tuple(sorted(ks)))


def W(*mats: GfMatrix) -> Vars:
    return Vars(combos=tuple(mats))


Y = Vars(y=True)
NOTHING = Vars()


class JointDist:
    """Joint pmf of (U_1, ..., U_K, Y).

    ``prob[i, y]`` is the probability of the i-th u-tuple (lexicographic order
    over F_q^K, user 1 most significant) together with output y.
    """

    def __init__(self, spec: ChannelSpec, prob: np.ndarray):
        self.spec = spec
        self.q = spec.q
        self.K = spec.K
        self.u_tuples = np.array(list(itertools.product(range(self.q), repeat=self.K)), dtype=np.int64).reshape(
            -1, self.K
        )
        prob = np.asarray(prob, dtype=float)
        prob.setflags(write=False)
        self.prob = prob
        self.x_tuples = np.stack([spec.symbol_map[k][self.u_tuples[:, k]] for k in range(self.K)], axis=1)

    @property
    def table(self) -> np.ndarray:
        """The pmf reshaped to ``(q,)*K + (|Y|,)``."""
        return self.prob.reshape((self.q,) * self.K + (self.spec.y_size,))

    def combo_values(self, f: GfMatrix) -> np.ndarray:
        """W_F for every u-tuple, shape ``(q**K, rows(F))``."""
        if f.cols != self.K or f.q != self.q:
            raise ValueError(f"combination matrix must be over F_{self.q} with {self.K} columns, got {f!r}")
        if f.rows == 0:
            return np.zeros((len(self.u_tuples), 0), dtype=np.int64)
        return (self.u_tuples @ f.data.T) % self.q

    def _u_labels(self, sel: Vars) -> np.ndarray | None:
        cols = []
        if sel.users:
            cols.append(self.u_tuples[:, list(sel.users)])
        if sel.inputs:
            cols.append(self.x_tuples[:, list(sel.inputs)])
        for f in sel.combos:
            if f.rows:
                cols.append(self.combo_values(f))
        if not cols:
            return None
        mat = np.concatenate(cols, axis=1)
        _, labels = np.unique(mat, axis=0, return_inverse=True)
        return labels.reshape(-1)

    def marginal(self, sel: Vars) -> np.ndarray:
        """Probabilities of the joint values of ``sel`` (order unspecified)."""
        labels = self._u_labels(sel)
        ny = self.spec.y_size
        if labels is None:
            if sel.y:
                return self.prob.sum(axis=0)
            return np.array([self.prob.sum()])
        if sel.y:
            full = labels[:, None] * ny + np.arange(ny)[None, :]
            return np.bincount(full.ravel(), weights=self.prob.ravel())
        return np.bincount(labels, weights=self.prob.sum(axis=1))

    def entropy(self, sel: Vars) -> float:
        """Shannon entropy in bits of the selection; 0 log 0 = 0."""
        if sel.is_empty:
            return 0.0
        p = self.marginal(sel)
        p = p[p > 0]
        return float(max(0.0, -(p * np.log2(p)).sum()))

    def cond_entropy(self, target: Vars, given: Vars = NOTHING) -> float:
        return self.entropy(target | given) - self.entropy(given)

    def mutual_info(self, left: Vars, right: Vars, given: Vars = NOTHING) -> float:
        return (
            self.entropy(left | given)
            + self.entropy(right | given)
            - self.entropy(left | right | given)
            - self.entropy(given)
        )


def build_joint(spec: ChannelSpec) -> JointDist:
    """Joint table ``prod_k p(u_k) * p(y | x_1(u_1), ..., x_K(u_K))``."""
    q, k = spec.q, spec.K
    tuples = np.array(list(itertools.product(range(q), repeat=k)), dtype=np.int64).reshape(-1, k)
    pu = np.ones(len(tuples))
    for user in range(k):
        pu *= spec.pmf_u[user][tuples[:, user]]
    xs = tuple(spec.symbol_map[user][tuples[:, user]] for user in range(k))
    pyx = spec.channel[xs]
    return JointDist(spec, pu[:, None] * pyx)


def entropy(d: JointDist, sel: Vars) -> float:
    return d.entropy(sel)


def cond_entropy_w(d: JointDist, b_s: GfMatrix, cb: GfMatrix) -> float:
    """H(W_{b_s} | Y, W_{cb})."""
    for m in (b_s, cb):
        if m.cols != d.K or m.q != d.q:
            raise ValueError(f"expected a matrix over F_{d.q} with {d.K} columns, got {m!r}")
    return d.cond_entropy(W(b_s), Y | W(cb))


def mutual_info(d: JointDist, left: Vars, right: Vars, given: Vars = NOTHING) -> float:
    return d.mutual_info(left, right, given)
