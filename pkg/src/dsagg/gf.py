"""Prime-field scalars and dense matrices.

Everything downstream (key maps, protocol variables, entropy
computation) reduces to small dense matrices over a prime field F_q
and their ranks.  Matrices are immutable numpy arrays of residues; for
moduli up to 2**31 - 1 products of two residues fit in int64, larger
moduli (allowed up to 2**61 - 1) fall back to object arrays of Python
ints so arithmetic never overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch

# Largest modulus whose products are exact in int64 arithmetic.
_INT64_SAFE_MODULUS = 2**31 - 1

MAX_FIELD_MODULUS = 2**61 - 1


# ---------------------------------------------------------------------------
# Primality
# ---------------------------------------------------------------------------

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


@lru_cache(maxsize=4096)
def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin; exact for all n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def smallest_prime_geq(n: int) -> int:
    """Least prime >= n (n >= 2)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    candidate = n
    while not is_prime(candidate):
        candidate += 1
    return candidate


def _check_modulus(q: int) -> None:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise ValueError(f"field modulus must be prime, got {q!r}")
    if q > MAX_FIELD_MODULUS:
        raise ValueError(f"field modulus {q} exceeds the 2**61 - 1 limit")


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldElement:
    """A residue in F_q with exact arithmetic."""

    value: int
    modulus: int

    def __post_init__(self) -> None:
        _check_modulus(self.modulus)
        object.__setattr__(self, "value", int(self.value) % self.modulus)

    def _coerce(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement) or other.modulus != self.modulus:
            raise DimensionMismatch("field elements have different moduli")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._coerce(other)
        return FieldElement(self.value + other.value, self.modulus)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._coerce(other)
        return FieldElement(self.value - other.value, self.modulus)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._coerce(other)
        return FieldElement(self.value * other.value, self.modulus)

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value, self.modulus)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return FieldElement(pow(self.value, -1, self.modulus), self.modulus)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        self._coerce(other)
        return self * other.inverse()

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.modulus})"


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


class FqMatrix:
    """An immutable rows x cols matrix of residues mod a prime q."""

    __slots__ = ("q", "_a")

    def __init__(self, entries, q: int, _reduced: bool = False):
        _check_modulus(q)
        dtype = np.int64 if q <= _INT64_SAFE_MODULUS else object
        a = np.array(entries, dtype=dtype)
        if a.ndim != 2:
            a = a.reshape((a.shape[0] if a.size else 0, -1))
        if not _reduced:
            a = a % q
        a.setflags(write=False)
        self.q = int(q)
        self._a = a

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "FqMatrix":
        dtype = np.int64 if q <= _INT64_SAFE_MODULUS else object
        return cls(np.zeros((rows, cols), dtype=dtype), q, _reduced=True)

    @classmethod
    def identity(cls, n: int, q: int) -> "FqMatrix":
        dtype = np.int64 if q <= _INT64_SAFE_MODULUS else object
        return cls(np.eye(n, dtype=np.int64).astype(dtype), q, _reduced=True)

    @classmethod
    def from_rows(cls, rows, q: int) -> "FqMatrix":
        return cls(rows, q)

    @classmethod
    def random(cls, rows: int, cols: int, q: int, rng: np.random.Generator) -> "FqMatrix":
        """Entries i.i.d. uniform over F_q; deterministic given the generator state."""
        _check_modulus(q)
        raw = rng.integers(0, q, size=(rows, cols), dtype=np.int64)
        if q > _INT64_SAFE_MODULUS:
            raw = raw.astype(object)
        return cls(raw, q, _reduced=True)

    @classmethod
    def stack(cls, matrices: "list[FqMatrix] | tuple[FqMatrix, ...]") -> "FqMatrix":
        """Vertical concatenation; all inputs must share q and column count."""
        if not matrices:
            raise ValueError("cannot stack an empty list without a column count")
        q = matrices[0].q
        cols = matrices[0].cols
        for m in matrices:
            if m.q != q or m.cols != cols:
                raise DimensionMismatch("stacked matrices must share modulus and width")
        return cls(np.vstack([m._a for m in matrices]), q, _reduced=True)

    # -- basic protocol ----------------------------------------------------

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    def array(self) -> np.ndarray:
        """Read-only view of the underlying residue array."""
        return self._a

    def to_lists(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self._a]

    def is_zero(self) -> bool:
        return self.rows == 0 or not np.any(self._a)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FqMatrix):
            return NotImplemented
        return self.q == other.q and self.shape == other.shape and bool(
            np.array_equal(self._a, other._a)
        )

    def __hash__(self) -> int:
        return hash((self.q, self.shape, self._a.tobytes() if self._a.dtype != object else str(self._a)))

    def __repr__(self) -> str:
        return f"FqMatrix({self.rows}x{self.cols} mod {self.q})"

    # -- arithmetic ---------------------------------------------------------

    def _check_same(self, other: "FqMatrix") -> None:
        if self.q != other.q:
            raise DimensionMismatch("matrices have different moduli")

    def __add__(self, other: "FqMatrix") -> "FqMatrix":
        self._check_same(other)
        if self.shape != other.shape:
            raise DimensionMismatch(f"shape mismatch {self.shape} vs {other.shape}")
        return FqMatrix((self._a + other._a) % self.q, self.q, _reduced=True)

    def __sub__(self, other: "FqMatrix") -> "FqMatrix":
        self._check_same(other)
        if self.shape != other.shape:
            raise DimensionMismatch(f"shape mismatch {self.shape} vs {other.shape}")
        return FqMatrix((self._a - other._a) % self.q, self.q, _reduced=True)

    def __neg__(self) -> "FqMatrix":
        return FqMatrix((-self._a) % self.q, self.q, _reduced=True)

    def __matmul__(self, other: "FqMatrix") -> "FqMatrix":
        self._check_same(other)
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        # np.dot handles both int64 and object dtypes exactly.
        prod = np.dot(self._a, other._a) % self.q
        return FqMatrix(prod, self.q, _reduced=True)

    def scale(self, c: int) -> "FqMatrix":
        return FqMatrix((self._a * (c % self.q)) % self.q, self.q, _reduced=True)

    # -- elimination ---------------------------------------------------------

    def row_reduce(self) -> tuple["FqMatrix", tuple[int, ...]]:
        """Reduced row-echelon form and the pivot column indices."""
        a = self._a.astype(self._a.dtype, copy=True)
        q = self.q
        pivots: list[int] = []
        r = 0
        for c in range(self.cols):
            if r == self.rows:
                break
            col = a[r:, c]
            nz = np.nonzero(col)[0]
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            inv = pow(int(a[r, c]), -1, q)
            a[r] = (a[r] * inv) % q
            others = np.nonzero(a[:, c])[0]
            others = others[others != r]
            if others.size:
                a[others] = (a[others] - np.outer(a[others, c], a[r])) % q
            pivots.append(c)
            r += 1
        a.setflags(write=False)
        return FqMatrix(a, q, _reduced=True), tuple(pivots)

    def rank(self) -> int:
        """Row rank over F_q via Gaussian elimination."""
        if self.rows == 0 or self.cols == 0:
            return 0
        return len(self.row_reduce()[1])

    def transpose(self) -> "FqMatrix":
        return FqMatrix(self._a.T.copy(), self.q, _reduced=True)


def stack_rank(matrices: "list[FqMatrix]") -> int:
    """Rank of the vertical stack; 0 for an empty list."""
    mats = [m for m in matrices if m.rows > 0]
    if not mats:
        return 0
    return FqMatrix.stack(mats).rank()
