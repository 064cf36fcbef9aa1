"""Dense linear algebra over prime fields F_q.

Matrices are small (a handful of rows and columns), so elimination runs on
plain Python integer lists; numpy arrays are only used for storage and for
vectorised products.  All index sets are 0-based and sorted ascending.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_BUDGET = 2**24
BUDGET_ENV = "CFREGIONS_BUDGET"


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive enumeration would exceed the budget."""

    def __init__(self, what: str, size: int, budget: int):
        super().__init__(f"{what}: search space {size} exceeds budget {budget}")
        self.what = what
        self.size = size
        self.budget = budget


def enumeration_budget(default: int = DEFAULT_BUDGET) -> int:
    """Enumeration budget, overridable through ``CFREGIONS_BUDGET``."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        value = int(float(raw))
    if value <= 0:
        raise ValueError(f"{BUDGET_ENV} must be positive, got {raw!r}")
    return value


def check_budget(what: str, size: int, budget: int | None = None) -> None:
    budget = enumeration_budget() if budget is None else budget
    if size > budget:
        raise BudgetExceeded(what, size, budget)


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class GfElem:
    """A single element of F_q."""

    value: int
    q: int

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"modulus {self.q} is not prime")
        if not 0 <= self.value < self.q:
            raise ValueError(f"{self.value} is not in [0, {self.q})")

    def __add__(self, other: GfElem) -> GfElem:
        return GfElem((self.value + other.value) % self.q, self.q)

    def __sub__(self, other: GfElem) -> GfElem:
        return GfElem((self.value - other.value) % self.q, self.q)

    def __mul__(self, other: GfElem) -> GfElem:
        return GfElem((self.value * other.value) % self.q, self.q)

    def inverse(self) -> GfElem:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return GfElem(pow(self.value, -1, self.q), self.q)


class GfMatrix:
    """Immutable matrix over a prime field.

    Zero rows or zero columns are allowed ("empty matrix"); such a matrix has
    rank 0 and counts as full rank.
    """

    __slots__ = ("_data", "q", "_key")

    def __init__(self, entries, q: int, cols: int | None = None):
        if not is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        arr = np.asarray(entries, dtype=np.int64)
        if arr.ndim == 1:
            if arr.size == 0 and cols is not None:
                arr = arr.reshape(0, cols)
            else:
                arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError("GfMatrix needs a 2-d array of entries")
        if cols is not None and arr.shape[1] != cols:
            if arr.shape[0] == 0:
                arr = arr.reshape(0, cols)
            else:
                raise ValueError(f"expected {cols} columns, got {arr.shape[1]}")
        arr = np.mod(arr, q)
        arr.setflags(write=False)
        self._data = arr
        self.q = int(q)
        self._key = None

    @classmethod
    def empty(cls, cols: int, q: int) -> GfMatrix:
        return cls(np.zeros((0, cols), dtype=np.int64), q)

    @classmethod
    def identity(cls, k: int, q: int) -> GfMatrix:
        return cls(np.eye(k, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> GfMatrix:
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def is_empty(self) -> bool:
        return self.rows == 0 or self.cols == 0

    def tolist(self) -> list[list[int]]:
        return self._data.tolist()

    def _hash_key(self):
        if self._key is None:
            self._key = (self.q, self._data.shape, self._data.tobytes())
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, GfMatrix):
            return NotImplemented
        return self._hash_key() == other._hash_key()

    def __hash__(self) -> int:
        return hash(self._hash_key())

    def __repr__(self) -> str:
        return f"GfMatrix({self.tolist()}, q={self.q}, shape={self.shape})"

    def __matmul__(self, other: GfMatrix) -> GfMatrix:
        return matmul(self, other)

    def __getitem__(self, idx):
        return self._data[idx]

    def transpose(self) -> GfMatrix:
        return GfMatrix(self._data.T, self.q)

    @property
    def T(self) -> GfMatrix:
        return self.transpose()


# -- elimination core ---------------------------------------------------------


def _eliminate(rows: list[list[int]], q: int, ncols: int) -> tuple[list[list[int]], list[int]]:
    """Reduce ``rows`` (mutated) to RREF; return (nonzero rows, pivot columns)."""
    pivots: list[int] = []
    r = 0
    nrows = len(rows)
    for col in range(ncols):
        if r == nrows:
            break
        found = -1
        for i in range(r, nrows):
            if rows[i][col] % q:
                found = i
                break
        if found < 0:
            continue
        if found != r:
            rows[r], rows[found] = rows[found], rows[r]
        inv = pow(rows[r][col], -1, q)
        pr = [(v * inv) % q for v in rows[r]]
        rows[r] = pr
        for i in range(nrows):
            if i != r:
                f = rows[i][col] % q
                if f:
                    rows[i] = [(a - f * b) % q for a, b in zip(rows[i], pr)]
        pivots.append(col)
        r += 1
    return rows[:r], pivots


def _rank_rows(rows: list[list[int]], q: int, ncols: int) -> int:
    """Rank via forward elimination only (no back substitution)."""
    rows = [list(x) for x in rows]
    r = 0
    nrows = len(rows)
    for col in range(ncols):
        if r == nrows:
            break
        found = -1
        for i in range(r, nrows):
            if rows[i][col] % q:
                found = i
                break
        if found < 0:
            continue
        rows[r], rows[found] = rows[found], rows[r]
        pr = rows[r]
        inv = pow(pr[col], -1, q)
        for i in range(r + 1, nrows):
            f = (rows[i][col] * inv) % q
            if f:
                rows[i] = [(a - f * b) % q for a, b in zip(rows[i], pr)]
        r += 1
    return r


def _check_same_field(a: GfMatrix, b: GfMatrix) -> None:
    if a.q != b.q:
        raise ValueError(f"field mismatch: q={a.q} vs q={b.q}")


# -- public operations -----------------------------------------------------------


def rank(m: GfMatrix) -> int:
    """Row rank over F_q; an empty matrix has rank 0."""
    if m.is_empty:
        return 0
    return _rank_rows(m.tolist(), m.q, m.cols)


def rref_with_pivots(m: GfMatrix) -> tuple[GfMatrix, list[int]]:
    if m.is_empty:
        return GfMatrix.empty(m.cols, m.q), []
    rows, pivots = _eliminate(m.tolist(), m.q, m.cols)
    if not rows:
        return GfMatrix.empty(m.cols, m.q), []
    return GfMatrix(rows, m.q), pivots


def rref(m: GfMatrix) -> GfMatrix:
    """Reduced row echelon form with zero rows dropped."""
    return rref_with_pivots(m)[0]


def is_full_rank(m: GfMatrix) -> bool:
    """Full row rank (empty matrices included)."""
    return rank(m) == m.rows


def stack(*mats: GfMatrix) -> GfMatrix:
    """Vertical concatenation."""
    if not mats:
        raise ValueError("stack needs at least one matrix")
    q, cols = mats[0].q, mats[0].cols
    for m in mats[1:]:
        _check_same_field(mats[0], m)
        if m.cols != cols:
            raise ValueError(f"column mismatch in stack: {cols} vs {m.cols}")
    return GfMatrix(np.vstack([m.data for m in mats]).reshape(-1, cols), q)


def span_contains(big: GfMatrix, small: GfMatrix) -> bool:
    """True iff every row of ``small`` lies in the row span of ``big``."""
    _check_same_field(big, small)
    if big.cols != small.cols:
        raise ValueError(f"column mismatch: {big.cols} vs {small.cols}")
    if small.rows == 0:
        return True
    return rank(stack(big, small)) == rank(big)


def same_span(a: GfMatrix, b: GfMatrix) -> bool:
    return span_contains(a, b) and span_contains(b, a)


def nullspace_rowbasis(m: GfMatrix) -> GfMatrix:
    """RREF basis of the left nullspace ``{c : c m = 0}``."""
    q, nr = m.q, m.rows
    if nr == 0:
        return GfMatrix.empty(0, q)
    if m.cols == 0:
        return GfMatrix.identity(nr, q)
    # solve m^T c^T = 0
    rows, pivots = _eliminate(m.transpose().tolist(), q, nr)
    free = [j for j in range(nr) if j not in pivots]
    basis = []
    for f in free:
        v = [0] * nr
        v[f] = 1
        for row, p in zip(rows, pivots):
            v[p] = (-row[f]) % q
        basis.append(v)
    if not basis:
        return GfMatrix.empty(nr, q)
    return rref(GfMatrix(basis, q))


def select_rows(m: GfMatrix, s: Iterable[int]) -> GfMatrix:
    """Rows of ``m`` indexed by ``s`` (0-based), in ascending order."""
    idx = sorted(set(s))
    for i in idx:
        if not 0 <= i < m.rows:
            raise IndexError(f"row index {i} out of range for {m.rows} rows")
    if not idx:
        return GfMatrix.empty(m.cols, m.q)
    return GfMatrix(m.data[idx, :], m.q)


def unit_rows(s: Iterable[int], k: int, q: int) -> GfMatrix:
    """The matrix I(S): standard basis rows e_i for i in ``s``."""
    return select_rows(GfMatrix.identity(k, q), s)


def matmul(a: GfMatrix, b: GfMatrix) -> GfMatrix:
    """Product mod q; products involving empty matrices are empty."""
    _check_same_field(a, b)
    if a.cols != b.rows:
        raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    if a.rows == 0 or b.cols == 0 or a.cols == 0:
        return GfMatrix.zeros(a.rows, b.cols, a.q)
    return GfMatrix(a.data @ b.data, a.q)


def gaussian_binomial(n: int, k: int, q: int) -> int:
    """Number of k-dimensional subspaces of F_q^n."""
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def enum_fullrank_rref(rows: int, cols: int, q: int, budget: int | None = None) -> Iterator[GfMatrix]:
    """Every full-rank ``rows x cols`` matrix in RREF, one per row span.

    The candidate space ``q**(rows*cols)`` is checked against the budget even
    though the generator walks the RREF cells directly.
    """
    if not is_prime(q):
        raise ValueError(f"modulus {q} is not prime")
    if rows < 0 or rows > cols:
        raise ValueError(f"need 0 <= rows <= cols, got {rows}x{cols}")
    check_budget(f"enum_fullrank_rref({rows}x{cols}, q={q})", q ** (rows * cols), budget)
    return _iter_rref_cells(rows, cols, q)


def _iter_rref_cells(rows: int, cols: int, q: int) -> Iterator[GfMatrix]:
    if rows == 0:
        yield GfMatrix.empty(cols, q)
        return
    for pivots in itertools.combinations(range(cols), rows):
        pivot_set = set(pivots)
        free = [(i, j) for i, p in enumerate(pivots) for j in range(p + 1, cols) if j not in pivot_set]
        base = np.zeros((rows, cols), dtype=np.int64)
        for i, p in enumerate(pivots):
            base[i, p] = 1
        for values in itertools.product(range(q), repeat=len(free)):
            arr = base.copy()
            for (i, j), v in zip(free, values):
                arr[i, j] = v
            yield GfMatrix(arr, q)


def enum_superspan_rref(a: GfMatrix, lb: int, budget: int | None = None) -> Iterator[GfMatrix]:
    """RREF full-rank ``lb x cols(a)`` matrices whose span contains ``a``'s."""
    if not rank(a) <= lb <= a.cols:
        raise ValueError(f"need rank(a) <= lb <= cols, got lb={lb} for rank {rank(a)}")
    for b in enum_fullrank_rref(lb, a.cols, a.q, budget):
        if span_contains(b, a):
            yield b


def parse_matrix(literal: str | Sequence, q: int, cols: int | None = None) -> GfMatrix:
    """Parse ``"1,1,1"`` or ``"1,0,0;0,1,1"`` (or nested lists) into a GfMatrix."""
    if isinstance(literal, str):
        text = literal.strip()
        if not text:
            if cols is None:
                raise ValueError("empty matrix literal needs a column count")
            return GfMatrix.empty(cols, q)
        rows = []
        for chunk in text.split(";"):
            chunk = chunk.strip().strip("[]")
            rows.append([int(v) for v in chunk.replace(" ", "").split(",") if v != ""])
    else:
        rows = [list(r) if isinstance(r, (list, tuple)) else [r] for r in literal]
        if rows and all(len(r) == 1 for r in rows) and not isinstance(literal[0], (list, tuple)):
            rows = [[r[0] for r in rows]]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged matrix literal: {literal!r}")
    return GfMatrix(rows, q, cols=cols)
