"""Arithmetic and dense linear algebra over prime fields F_q.

Vectors and matrices wrap read-only ``int64`` numpy arrays, so they can be
shared freely between workers.  Batch helpers that operate on raw arrays
(``matmul_mod``, ``rref_array``, ``solve_array``) are exposed for the code
constructions, which push thousands of words through the same generator.

For q = 2 the rank computation switches to a bit-packed elimination over
``uint64`` words; ``rank_generic`` keeps the reference path available so the
two can be cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "FieldElem",
    "FieldVector",
    "FieldMatrix",
    "is_prime",
    "check_prime",
    "vec_add",
    "mat_vec_mul",
    "matmul_mod",
    "rank",
    "rank_generic",
    "rank_f2_packed",
    "pack_bits",
    "unpack_bits",
    "rref_array",
    "solve_array",
    "nullspace_array",
    "random_matrix",
    "random_vector",
    "enumerate_messages",
]


@lru_cache(maxsize=256)
def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def check_prime(q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise ValueError(f"field size must be prime, got {q!r}")
    return int(q)


def _frozen(values, q: int, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.int64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= q):
        raise ValueError(f"entries must lie in [0, {q})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldElem:
    value: int
    q: int

    def __post_init__(self):
        check_prime(self.q)
        if not 0 <= self.value < self.q:
            raise ValueError(f"value {self.value} outside [0, {self.q})")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElem):
            if other.q != self.q:
                raise ValueError("modulus mismatch")
            return other.value
        return int(other) % self.q

    def __add__(self, other):
        return FieldElem((self.value + self._coerce(other)) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElem((self.value - self._coerce(other)) % self.q, self.q)

    def __neg__(self):
        return FieldElem((-self.value) % self.q, self.q)

    def __mul__(self, other):
        return FieldElem((self.value * self._coerce(other)) % self.q, self.q)

    __rmul__ = __mul__

    def inverse(self) -> "FieldElem":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return FieldElem(pow(self.value, self.q - 2, self.q), self.q)

    def __truediv__(self, other):
        return self * FieldElem(self._coerce(other), self.q).inverse()

    def __int__(self):
        return self.value


class FieldVector:
    """Immutable length-n vector over F_q."""

    __slots__ = ("q", "data")

    def __init__(self, values, q: int):
        self.q = check_prime(q)
        self.data = _frozen(values, self.q, 1)

    @classmethod
    def zeros(cls, n: int, q: int) -> "FieldVector":
        return cls(np.zeros(n, dtype=np.int64), q)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> FieldElem:
        return FieldElem(int(self.data[i]), self.q)

    def _check(self, other: "FieldVector"):
        if not isinstance(other, FieldVector):
            raise TypeError("expected a FieldVector")
        if other.q != self.q:
            raise ValueError(f"modulus mismatch: {self.q} vs {other.q}")
        if other.n != self.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "FieldVector") -> "FieldVector":
        self._check(other)
        return FieldVector((self.data + other.data) % self.q, self.q)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        self._check(other)
        return FieldVector((self.data - other.data) % self.q, self.q)

    def __neg__(self) -> "FieldVector":
        return FieldVector((-self.data) % self.q, self.q)

    def scale(self, c: int) -> "FieldVector":
        return FieldVector((self.data * (int(c) % self.q)) % self.q, self.q)

    def weight(self) -> int:
        return int(np.count_nonzero(self.data))

    def __eq__(self, other):
        return (
            isinstance(other, FieldVector)
            and other.q == self.q
            and np.array_equal(other.data, self.data)
        )

    def __hash__(self):
        return hash((self.q, self.data.tobytes()))

    def tolist(self) -> list[int]:
        return [int(v) for v in self.data]

    def __repr__(self):
        return f"FieldVector({self.tolist()}, q={self.q})"


class FieldMatrix:
    """Immutable k x n matrix over F_q."""

    __slots__ = ("q", "data")

    def __init__(self, values, q: int, cols: int | None = None):
        self.q = check_prime(q)
        arr = np.array(values, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, cols if cols is not None else (arr.shape[1] if arr.ndim == 2 else 0))
        self.data = _frozen(arr, self.q, 2)

    @classmethod
    def identity(cls, n: int, q: int) -> "FieldMatrix":
        return cls(np.eye(n, dtype=np.int64), q)

    @classmethod
    def zeros(cls, k: int, n: int, q: int) -> "FieldMatrix":
        return cls(np.zeros((k, n), dtype=np.int64), q, cols=n)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def row(self, i: int) -> FieldVector:
        return FieldVector(self.data[i], self.q)

    def vstack(self, other: "FieldMatrix") -> "FieldMatrix":
        if other.q != self.q or other.cols != self.cols:
            raise ValueError("cannot stack matrices of different modulus or width")
        return FieldMatrix(np.vstack([self.data, other.data]), self.q, cols=self.cols)

    def scale(self, c: int) -> "FieldMatrix":
        return FieldMatrix((self.data * (int(c) % self.q)) % self.q, self.q, cols=self.cols)

    def rank(self) -> int:
        return rank(self)

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and other.q == self.q
            and other.data.shape == self.data.shape
            and np.array_equal(other.data, self.data)
        )

    def __hash__(self):
        return hash((self.q, self.data.shape, self.data.tobytes()))

    def tolist(self) -> list[list[int]]:
        return self.data.tolist()

    def __repr__(self):
        return f"FieldMatrix({self.rows}x{self.cols}, q={self.q})"


def vec_add(a: FieldVector, b: FieldVector) -> FieldVector:
    return a + b


def mat_vec_mul(m: FieldMatrix, u: FieldVector) -> FieldVector:
    """Row vector times matrix: u (length k) times m (k x n)."""
    if m.q != u.q:
        raise ValueError(f"modulus mismatch: {m.q} vs {u.q}")
    if u.n != m.rows:
        raise ValueError(f"dimension mismatch: vector length {u.n}, matrix has {m.rows} rows")
    return FieldVector(matmul_mod(u.data, m.data, m.q), m.q)


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """(a @ b) mod q on integer arrays; reduces inputs first to bound int64 growth."""
    a = np.asarray(a, dtype=np.int64) % q
    b = np.asarray(b, dtype=np.int64) % q
    inner = a.shape[-1]
    # int64 overflow guard: inner * (q-1)^2 must stay below 2^63
    if inner * (q - 1) ** 2 >= 2**62:
        raise OverflowError("product too large for int64 accumulation")
    return (a @ b) % q


def rref_array(a: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_q; pivot is the first nonzero entry at or below the current row."""
    if q == 2:
        return _rref_f2(np.asarray(a, dtype=np.int64))
    m = np.array(a, dtype=np.int64) % q
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            m[[r, p]] = m[[p, r]]
        inv = pow(int(m[r, c]), q - 2, q)
        m[r] = (m[r] * inv) % q
        factors = m[:, c].copy()
        factors[r] = 0
        hit = np.flatnonzero(factors)
        if hit.size:
            m[hit] = (m[hit] - np.outer(factors[hit], m[r])) % q
        pivots.append(c)
        r += 1
    return m, pivots


def _rref_f2(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Same contract as rref_array for q = 2, with XOR row operations on booleans."""
    m = (a % 2).astype(bool)
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            m[[r, p]] = m[[p, r]]
        hit = np.flatnonzero(m[:, c])
        hit = hit[hit != r]
        if hit.size:
            m[hit] ^= m[r]
        pivots.append(c)
        r += 1
    return m.astype(np.int64), pivots


def rank_generic(m: FieldMatrix) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    return len(rref_array(m.data, m.q)[1])


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (..., n) 0/1 array into (..., ceil(n/64)) uint64 words, bit j of word w = column 64w+j."""
    bits = np.asarray(bits, dtype=np.uint64) & np.uint64(1)
    n = bits.shape[-1]
    words = (n + 63) // 64
    padded = np.zeros(bits.shape[:-1] + (words * 64,), dtype=np.uint64)
    padded[..., :n] = bits
    shaped = padded.reshape(bits.shape[:-1] + (words, 64))
    shifts = np.arange(64, dtype=np.uint64)
    return np.bitwise_or.reduce(shaped << shifts, axis=-1)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    shifts = np.arange(64, dtype=np.uint64)
    bits = (words[..., None] >> shifts) & np.uint64(1)
    return bits.reshape(words.shape[:-1] + (-1,))[..., :n].astype(np.int64)


def rank_f2_packed(m: FieldMatrix) -> int:
    """Rank over F_2 using row elimination on packed 64-bit words."""
    if m.q != 2:
        raise ValueError("packed elimination is only defined over F_2")
    if m.rows == 0 or m.cols == 0:
        return 0
    w = pack_bits(m.data).copy()
    rows = w.shape[0]
    r = 0
    for c in range(m.cols):
        if r == rows:
            break
        word, bit = divmod(c, 64)
        mask = np.uint64(1) << np.uint64(bit)
        has = (w[r:, word] & mask) != 0
        nz = np.flatnonzero(has)
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            w[[r, p]] = w[[p, r]]
        below = np.flatnonzero((w[r + 1 :, word] & mask) != 0) + r + 1
        if below.size:
            w[below] ^= w[r]
        r += 1
    return r


def rank(m: FieldMatrix) -> int:
    if m.q == 2:
        return rank_f2_packed(m)
    return rank_generic(m)


def solve_array(a: np.ndarray, b: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Solve a @ x = b over F_q.

    Returns (particular solution, nullspace basis as rows) or None when the
    system is inconsistent.  Free variables are set to zero in the particular
    solution.
    """
    a = np.asarray(a, dtype=np.int64) % q
    b = np.asarray(b, dtype=np.int64).reshape(-1) % q
    rows, cols = a.shape
    aug = np.concatenate([a, b[:, None]], axis=1)
    red, pivots = rref_array(aug, q)
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.int64)
    for i, c in enumerate(pivots):
        x[c] = red[i, cols]
    return x, _nullspace_from_rref(red[:, :cols], pivots, cols, q)


def _nullspace_from_rref(red: np.ndarray, pivots: list[int], cols: int, q: int) -> np.ndarray:
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for j, f in enumerate(free):
        basis[j, f] = 1
        for i, c in enumerate(pivots):
            basis[j, c] = (-red[i, f]) % q
    return basis


def nullspace_array(a: np.ndarray, q: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64) % q
    cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    red, pivots = rref_array(a, q)
    return _nullspace_from_rref(red, pivots, cols, q)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_matrix(k: int, n: int, q: int, seed) -> FieldMatrix:
    q = check_prime(q)
    if k < 0 or n < 0:
        raise ValueError("dimensions must be nonnegative")
    data = _rng(seed).integers(0, q, size=(k, n), dtype=np.int64)
    return FieldMatrix(data, q, cols=n)


def random_vector(n: int, q: int, seed) -> FieldVector:
    q = check_prime(q)
    if n < 0:
        raise ValueError("length must be nonnegative")
    return FieldVector(_rng(seed).integers(0, q, size=n, dtype=np.int64), q)


def enumerate_messages(k: int, q: int) -> np.ndarray:
    """All q^k messages in lexicographic order (first coordinate most significant)."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(q**k, dtype=np.int64)
    powers = q ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q
