"""Monte Carlo simulation of nested linear codes with typicality decoding.

Every user draws codewords from one shared random generator matrix G plus a
private dither: ``u_k = [m_k, l_k, 0] G + d_k``. The encoder searches the
auxiliary index l_k for a typical codeword; the decoder searches all index
tuples for ones jointly typical with y and accepts when their A-combinations
agree.

Also holds the exhaustive oracles for the cardinality bound on the sets
L_B(r, C) of sum-index matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelSpec
from .gflin import (
    GfMatrix,
    check_budget,
    enum_fullrank_rref,
    enumeration_budget,
    nullspace_rowbasis,
    rank,
    select_rows,
    stack,
    unit_rows,
)

DECODER_BUDGET = 2**22
ORACLE_BUDGET = 2**20
DEFAULT_EPS = 0.1
DEFAULT_EPS_PRIME = 0.05
# candidate tuples examined per vectorised step
_CHUNK = 1 << 16


class IntegralityError(ValueError):
    pass


def digits_count(n: int, rate: float, q: int, what: str = "rate") -> int:
    """``n * rate / log2(q)`` as an exact integer, or IntegralityError."""
    if rate < 0:
        raise IntegralityError(f"{what} {rate} is negative")
    val = n * rate / math.log2(q)
    k = round(val)
    if abs(val - k) > 1e-9:
        raise IntegralityError(f"n*{what}/log2(q) = {val:.6g} is not an integer (n={n}, {what}={rate}, q={q})")
    return int(k)


@dataclass(frozen=True, eq=False)
class SimConfig:
    spec: ChannelSpec
    coeff: GfMatrix
    n: int
    rates: tuple[float, ...]
    aux_rates: tuple[float, ...] | None = None
    eps: float = DEFAULT_EPS
    eps_prime: float = DEFAULT_EPS_PRIME
    trials: int = 0
    seed: int = 0

    def __post_init__(self):
        k = self.spec.K
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        aux = (0.0,) * k if self.aux_rates is None else tuple(float(r) for r in self.aux_rates)
        object.__setattr__(self, "aux_rates", aux)
        if len(self.rates) != k or len(aux) != k:
            raise ValueError(f"need {k} rates and {k} auxiliary rates")
        if self.n < 1:
            raise ValueError(f"block length must be positive, got {self.n}")
        if not 0 < self.eps_prime < self.eps:
            raise ValueError(f"need 0 < eps' < eps, got eps'={self.eps_prime}, eps={self.eps}")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        if self.coeff.cols != k or self.coeff.q != self.spec.q:
            raise ValueError(f"coefficient matrix must be over F_{self.spec.q} with {k} columns")
        # validates integrality eagerly
        self.kappa
        self.kappa_aux

    @property
    def kappa(self) -> tuple[int, ...]:
        return tuple(digits_count(self.n, r, self.spec.q) for r in self.rates)

    @property
    def kappa_aux(self) -> tuple[int, ...]:
        return tuple(digits_count(self.n, r, self.spec.q, "aux rate") for r in self.aux_rates)

    @property
    def kappa_total(self) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(self.kappa, self.kappa_aux))


@dataclass(frozen=True, eq=False)
class Codebook:
    """Shared generator ``g`` (kappa x n), dithers (K x n) and the digit layout."""

    q: int
    g: np.ndarray
    dithers: np.ndarray
    kappa: tuple[int, ...]
    kappa_aux: tuple[int, ...]

    def __post_init__(self):
        for arr in (self.g, self.dithers):
            arr.setflags(write=False)

    @property
    def K(self) -> int:
        return len(self.kappa)

    @property
    def n(self) -> int:
        return self.dithers.shape[1]

    @property
    def width(self) -> int:
        return self.g.shape[0]

    def index_vector(self, k: int, m: int, l: int) -> np.ndarray:
        """Zero-padded index row ``[m digits, l digits, 0...]`` of length kappa."""
        v = np.zeros(self.width, dtype=np.int64)
        km, kl = self.kappa[k], self.kappa_aux[k]
        v[:km] = _to_digits(m, km, self.q)
        v[km : km + kl] = _to_digits(l, kl, self.q)
        return v

    def codeword_from_vector(self, k: int, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v, dtype=np.int64) @ self.g + self.dithers[k]) % self.q

    def codeword(self, k: int, m: int, l: int) -> np.ndarray:
        return self.codeword_from_vector(k, self.index_vector(k, m, l))

    def all_vectors(self, k: int) -> np.ndarray:
        """Every zero-padded index row of user k; row ``m * q**kappa_aux + l``."""
        t = self.kappa[k] + self.kappa_aux[k]
        out = np.zeros((self.q**t, self.width), dtype=np.int64)
        out[:, :t] = _all_digit_vectors(t, self.q)
        return out

    def all_codewords(self, k: int) -> np.ndarray:
        return (self.all_vectors(k) @ self.g + self.dithers[k]) % self.q


def _to_digits(value: int, width: int, q: int) -> np.ndarray:
    if not 0 <= value < q**width:
        raise ValueError(f"index {value} out of range for {width} q-ary digits")
    out = np.zeros(width, dtype=np.int64)
    for i in range(width - 1, -1, -1):
        value, out[i] = divmod(value, q)
    return out


@lru_cache(maxsize=64)
def _all_digit_vectors(width: int, q: int) -> np.ndarray:
    arr = np.array(list(itertools.product(range(q), repeat=width)), dtype=np.int64).reshape(q**width, width)
    arr.setflags(write=False)
    return arr


def sample_codebook(cfg: SimConfig, rng: np.random.Generator) -> Codebook:
    q, n = cfg.spec.q, cfg.n
    width = max(cfg.kappa_total, default=0)
    g = rng.integers(0, q, size=(width, n), dtype=np.int64)
    d = rng.integers(0, q, size=(cfg.spec.K, n), dtype=np.int64)
    return Codebook(q, g, d, cfg.kappa, cfg.kappa_aux)


# -- typicality -------------------------------------------------------------------------


def _count_bounds(pmf: np.ndarray, n: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    # small slack so exact types are not lost to rounding
    lo = (1 - eps) * pmf * n - 1e-9
    hi = (1 + eps) * pmf * n + 1e-9
    return lo, hi


def typical_set_test(x: Sequence[int], pmf: Sequence[float], eps: float) -> bool:
    """Robust typicality: ``|pi(a | x) - p(a)| <= eps * p(a)`` for every symbol a."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    p = np.asarray(pmf, dtype=float)
    if x.size == 0:
        return False
    if x.min() < 0 or x.max() >= len(p):
        return False
    counts = np.bincount(x, minlength=len(p))
    lo, hi = _count_bounds(p, x.size, eps)
    return bool(np.all((counts >= lo) & (counts <= hi)))


def _typical_rows(symbols: np.ndarray, nsym: int, pmf: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise robust typicality of a (rows x n) array of symbol indices."""
    rows, n = symbols.shape
    if rows == 0:
        return np.zeros(0, dtype=bool)
    flat = (np.arange(rows, dtype=np.int64)[:, None] * nsym + symbols).ravel()
    counts = np.bincount(flat, minlength=rows * nsym).reshape(rows, nsym)
    lo, hi = _count_bounds(pmf, n, eps)
    return np.all((counts >= lo) & (counts <= hi), axis=1)


# -- encoder and decoder ---------------------------------------------------------------


@dataclass(frozen=True)
class Encoded:
    l: int
    u: np.ndarray
    x: np.ndarray
    covered: bool


def encode(cb: Codebook, k: int, m: int, pmf_u: np.ndarray, x_map: np.ndarray, eps_prime: float, rng) -> Encoded:
    """Pick a typical codeword among the auxiliary indices of message m.

    Ties are broken uniformly at random; with no typical candidate a random
    auxiliary index is used and ``covered`` is False.
    """
    n_aux = cb.q ** cb.kappa_aux[k]
    if not 0 <= m < cb.q ** cb.kappa[k]:
        raise ValueError(f"message {m} out of range for user {k + 1}")
    words = np.stack([cb.codeword(k, m, l) for l in range(n_aux)]) if n_aux > 1 else cb.codeword(k, m, 0)[None, :]
    ok = np.flatnonzero(_typical_rows(words, cb.q, np.asarray(pmf_u), eps_prime))
    if ok.size:
        l = int(ok[rng.integers(ok.size)]) if ok.size > 1 else int(ok[0])
        covered = True
    else:
        l = int(rng.integers(n_aux))
        covered = False
    u = words[l]
    return Encoded(l, u, np.asarray(x_map)[u], covered)


@dataclass(frozen=True)
class Decoded:
    ok: bool
    estimate: np.ndarray | None
    n_typical: int
    n_values: int


def decode_joint(
    cb: Codebook,
    y: np.ndarray,
    a: GfMatrix,
    joint_pmf: np.ndarray,
    eps: float,
    budget: int | None = None,
) -> Decoded:
    """Search every index tuple for joint typicality with y.

    ``joint_pmf`` is the (q**K, |Y|) table of p(u_1..u_K, y). Success requires
    all typical tuples to agree on A times the index matrix; the estimate is
    then ``A M G + A D``.
    """
    q, kk = cb.q, cb.K
    y = np.asarray(y, dtype=np.int64)
    ny = joint_pmf.shape[1]
    sizes = [q ** (cb.kappa[k] + cb.kappa_aux[k]) for k in range(kk)]
    check_budget("decoder candidate tuples", math.prod(sizes), enumeration_budget(DECODER_BUDGET) if budget is None else budget)

    # exact pruning: joint typicality of the tuple implies typicality of each (u_k, y)
    table = joint_pmf.reshape((q,) * kk + (ny,))
    words, vecs = [], []
    for k in range(kk):
        pair = table.sum(axis=tuple(i for i in range(kk) if i != k))
        w = cb.all_codewords(k)
        keep = _typical_rows(w * ny + y[None, :], q * ny, pair.ravel(), eps)
        words.append(w[keep])
        vecs.append(np.flatnonzero(keep))
    total = math.prod(len(v) for v in vecs)
    if total == 0:
        return Decoded(False, None, 0, 0)

    flat_pmf = joint_pmf.ravel()
    nsym = len(flat_pmf)
    weights = q ** np.arange(kk - 1, -1, -1, dtype=np.int64)
    hits = []
    # iterate over user 0 in chunks, all other users in full
    rest_shape = [len(v) for v in vecs[1:]]
    rest_total = math.prod(rest_shape) if rest_shape else 1
    rest_sym = np.zeros((rest_total, cb.n), dtype=np.int64)
    if kk > 1:
        grids = np.meshgrid(*[np.arange(s) for s in rest_shape], indexing="ij")
        rest_idx = np.stack([g.ravel() for g in grids], axis=1)
        for j, k in enumerate(range(1, kk)):
            rest_sym += words[k][rest_idx[:, j]] * weights[k]
    else:
        rest_idx = np.zeros((1, 0), dtype=np.int64)
    step = max(1, _CHUNK // max(rest_total, 1))
    for start in range(0, len(vecs[0]), step):
        w0 = words[0][start : start + step]
        sym = (w0[:, None, :] * weights[0] + rest_sym[None, :, :]) * ny + y[None, None, :]
        sym = sym.reshape(-1, cb.n)
        typ = np.flatnonzero(_typical_rows(sym, nsym, flat_pmf, eps))
        for t in typ:
            i0, ir = divmod(int(t), rest_total)
            hits.append((int(vecs[0][start + i0]),) + tuple(int(vecs[j + 1][rest_idx[ir, j]]) for j in range(kk - 1)))
    if not hits:
        return Decoded(False, None, 0, 0)

    ad = (a.data @ cb.dithers) % q
    values = {}
    for h in hits:
        m = np.stack([_all_vectors_row(cb, k, h[k]) for k in range(kk)])
        key = ((a.data @ m) % q).tobytes()
        values.setdefault(key, m)
    if len(values) != 1:
        return Decoded(False, None, len(hits), len(values))
    m = next(iter(values.values()))
    est = ((a.data @ m) % q @ cb.g + ad) % q
    return Decoded(True, est, len(hits), 1)


def _all_vectors_row(cb: Codebook, k: int, idx: int) -> np.ndarray:
    out = np.zeros(cb.width, dtype=np.int64)
    t = cb.kappa[k] + cb.kappa_aux[k]
    out[:t] = _to_digits(idx, t, cb.q)
    return out


# -- trials ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimResult:
    n: int
    rates: tuple[float, ...]
    trials: int
    errors: int
    cover_failures: int
    seed: int

    @property
    def rate(self) -> float:
        return self.errors / self.trials if self.trials else float("nan")

    def wilson(self, confidence: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials, confidence)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per trial, so results do not depend on trial order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class TrialOutcome:
    error: bool
    covered: bool


def run_one(cfg: SimConfig, trial: int) -> TrialOutcome:
    spec = cfg.spec
    rng = trial_rng(cfg.seed, trial)
    cb = sample_codebook(cfg, rng)
    joint = spec.joint
    us, xs, covered = [], [], True
    for k in range(spec.K):
        m = int(rng.integers(spec.q ** cb.kappa[k]))
        enc = encode(cb, k, m, spec.pmf_u[k], spec.symbol_map[k], cfg.eps_prime, rng)
        us.append(enc.u)
        xs.append(enc.x)
        covered &= enc.covered
    y = _channel_output(spec, np.stack(xs), rng)
    dec = decode_joint(cb, y, cfg.coeff, joint.prob, cfg.eps)
    truth = (cfg.coeff.data @ np.stack(us)) % spec.q
    wrong = not dec.ok or not np.array_equal(dec.estimate, truth)
    return TrialOutcome(wrong or not covered, covered)


def _channel_output(spec: ChannelSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    probs = spec.channel[tuple(x)]  # (n, |Y|)
    cdf = np.cumsum(probs, axis=1)
    draws = rng.random(probs.shape[0])[:, None]
    return np.minimum((draws > cdf).sum(axis=1), spec.y_size - 1)


def run_trials(cfg: SimConfig) -> SimResult:
    errors = cover = 0
    for t in range(cfg.trials):
        out = run_one(cfg, t)
        errors += out.error
        cover += not out.covered
    return SimResult(cfg.n, cfg.rates, cfg.trials, errors, cover, cfg.seed)


CSV_FIELDS = ("n", "rates", "trials", "errors", "rate", "cover_failures", "seed")


def csv_header(k: int) -> str:
    return ",".join(["n"] + [f"R_{i + 1}" for i in range(k)] + ["trials", "errors", "rate", "cover_failures", "seed"])


def csv_row(res: SimResult) -> str:
    rate = "nan" if res.trials == 0 else f"{res.rate:.9g}"
    cols = [str(res.n)] + [f"{r:.9g}" for r in res.rates]
    cols += [str(res.trials), str(res.errors), rate, str(res.cover_failures), str(res.seed)]
    return ",".join(cols)


# -- cardinality oracles ------------------------------------------------------------------


@dataclass(frozen=True)
class SumIndexCells:
    """Distinct nonzero M_B = B M labelled by (rank, RREF left-nullspace basis)."""

    b: GfMatrix
    kappa: tuple[int, ...]
    cells: dict = field(default_factory=dict)  # (r, C) -> count
    total: int = 0


def _message_matrices(q: int, kappa: Sequence[int]) -> np.ndarray:
    """Every K x max(kappa) index matrix with row k supported on its first kappa_k entries."""
    width = max(kappa, default=0)
    k = len(kappa)
    n_total = q ** sum(kappa)
    check_budget("message index matrices", n_total, enumeration_budget(ORACLE_BUDGET))
    out = np.zeros((n_total, k, width), dtype=np.int64)
    digits = _all_digit_vectors(sum(kappa), q)
    off = 0
    for row, kr in enumerate(kappa):
        out[:, row, :kr] = digits[:, off : off + kr]
        off += kr
    return out


@lru_cache(maxsize=4096)
def _cells_cached(q: int, kappa: tuple[int, ...], b: GfMatrix) -> SumIndexCells:
    ms = _message_matrices(q, kappa)
    if ms.shape[2] == 0:
        return SumIndexCells(b, kappa, {}, 0)
    mb = np.einsum("lk,tkw->tlw", b.data, ms) % q
    flat = mb.reshape(len(mb), -1)
    uniq = np.unique(flat, axis=0)
    uniq = uniq[np.any(uniq != 0, axis=1)]
    cells: dict = {}
    for row in uniq:
        m = GfMatrix(row.reshape(b.rows, -1), q)
        key = (rank(m), nullspace_rowbasis(m))
        cells[key] = cells.get(key, 0) + 1
    return SumIndexCells(b, kappa, cells, len(uniq))


def sum_index_cells(q: int, kappa: Sequence[int], b: GfMatrix) -> SumIndexCells:
    kappa = tuple(int(k) for k in kappa)
    if b.q != q or b.cols != len(kappa):
        raise ValueError(f"B must be over F_{q} with {len(kappa)} columns")
    return _cells_cached(q, kappa, b)


def cardinality_bounds(q: int, kappa: Sequence[int], b: GfMatrix, r: int, c: GfMatrix) -> dict[tuple[int, ...], int]:
    """Cardinality bound ``max_T q**sum(kappa_T)`` for every valid S."""
    lb, k = b.rows, b.cols
    out = {}
    for s in itertools.combinations(range(lb), r):
        if rank(stack(c, unit_rows(s, lb, q))) != lb:
            continue
        b_s = select_rows(b, s)
        best = None
        for t in itertools.combinations(range(k), r):
            rest = [i for i in range(k) if i not in t]
            if rank(stack(b_s, unit_rows(rest, k, q))) == k:
                val = q ** sum(kappa[i] for i in t)
                best = val if best is None else max(best, val)
        if best is not None:
            out[s] = best
    return out


def lemma1_oracle(q: int, k: int, kappa: Sequence[int], b: GfMatrix, r: int, c: GfMatrix) -> tuple[int, int | None]:
    """(exact size of L_B(r, C), tightest bound over valid S); bound is None if no S is valid."""
    if len(kappa) != k:
        raise ValueError(f"need {k} digit counts, got {len(kappa)}")
    if c.cols != b.rows or c.rows != b.rows - r:
        raise ValueError(f"C must be {b.rows - r} x {b.rows}")
    cells = sum_index_cells(q, kappa, b)
    count = sum(v for (rr, cc), v in cells.cells.items() if rr == r and cc == c)
    bounds = cardinality_bounds(q, kappa, b, r, c)
    return count, (min(bounds.values()) if bounds else None)


def partition_oracle(q: int, k: int, kappa: Sequence[int], b: GfMatrix) -> bool:
    """True iff the cells over r and RREF C exactly partition the nonzero M_B.

    Every M_B is assigned to the cell of its own rank and nullspace; the check
    re-derives membership from the defining conditions rank = r and C M_B = 0
    and confirms each M_B satisfies exactly one (r, C) pair.
    """
    if len(kappa) != k:
        raise ValueError(f"need {k} digit counts, got {len(kappa)}")
    ms = _message_matrices(q, tuple(kappa))
    if ms.shape[2] == 0:
        return True
    mb = np.unique((np.einsum("lk,tkw->tlw", b.data, ms) % q).reshape(len(ms), -1), axis=0)
    mb = mb[np.any(mb != 0, axis=1)].reshape(-1, b.rows, ms.shape[2])
    lb = b.rows
    all_c = {r: list(enum_fullrank_rref(lb - r, lb, q)) for r in range(1, lb + 1)}
    for m in mb:
        gm = GfMatrix(m, q)
        r_m = rank(gm)
        hits = 0
        for r, cs in all_c.items():
            if r != r_m:
                continue
            for c in cs:
                # C M_B = 0 with rank(C) = L_B - r forces Span(C) = nullspace
                if c.rows == 0 or not np.any((c.data @ m) % q):
                    hits += 1
        if hits != 1:
            return False
    return True


def nonincreasing_within_ci(results: Sequence[SimResult], confidence: float = 0.95) -> bool:
    """Error rates fall with n, except where consecutive Wilson intervals overlap."""
    for prev, cur in zip(results, results[1:]):
        if cur.rate <= prev.rate:
            continue
        lo_p, hi_p = prev.wilson(confidence)
        lo_c, hi_c = cur.wilson(confidence)
        if lo_c > hi_p:
            return False
    return True
