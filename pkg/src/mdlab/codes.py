"""Coset codes over F_q: construction, quantization, binning and channel decoding.

A coset code is {uG + b : u in F_q^k}.  Codewords are enumerated in
lexicographic message order (first message symbol most significant); every
minimum search returns the first minimiser in that order, which is the
lexicographically smallest message.

Exhaustive search is limited to k * log2(q) <= 24.  Longer codes are handled
as ``ProductCode`` (block-diagonal generator), where exhaustive search runs
per block and the per-block tie rule composes into the global one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping

import numpy as np

from mdlab import gf
from mdlab.gf import FieldMatrix, FieldVector

ENUMERATION_BITS = 24
_CHUNK_CELLS = 1 << 23  # distance-matrix cells held in memory at once

__all__ = [
    "CosetCode",
    "ProductCode",
    "NestedCosetPair",
    "SharedInnerPair",
    "SharedInnerEnsemble",
    "QuantizationResult",
    "NotFound",
    "NOT_FOUND",
    "build_coset_code",
    "build_nested_pair",
    "build_shared_inner_pair",
    "build_ensemble",
    "build_product_code",
    "sum_code",
    "hamming_distances",
    "nearest_batch",
    "quantize_min_hamming",
    "quantize_batch",
    "quantize_typical",
    "coset_bin",
    "nearest_codeword",
    "best_of",
    "code_from_dict",
]


def _seed_int(seed) -> int | None:
    if seed is None or isinstance(seed, (int, np.integer)):
        return None if seed is None else int(seed)
    return None


@dataclass(frozen=True, eq=False)
class CosetCode:
    generator: FieldMatrix
    dither: FieldVector
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.generator.q != self.dither.q:
            raise ValueError("generator and dither must share the field")
        if self.generator.cols != self.dither.n:
            raise ValueError("dither length must equal the block length")
        if self.generator.rows > self.generator.cols:
            raise ValueError(f"k={self.generator.rows} exceeds n={self.generator.cols}")

    @property
    def q(self) -> int:
        return self.generator.q

    @property
    def n(self) -> int:
        return self.generator.cols

    @property
    def k(self) -> int:
        return self.generator.rows

    @property
    def rate(self) -> float:
        return self.k / self.n * math.log2(self.q)

    @property
    def rank(self) -> int:
        if "rank" not in self._cache:
            self._cache["rank"] = gf.rank(self.generator)
        return self._cache["rank"]

    @property
    def size(self) -> int:
        return self.q**self.rank

    @property
    def enumerable(self) -> bool:
        return self.k * math.log2(self.q) <= ENUMERATION_BITS

    @property
    def is_linear(self) -> bool:
        return self.dither.weight() == 0

    def encode(self, messages) -> np.ndarray:
        """Codewords for a (..., k) array of messages."""
        m = np.asarray(messages, dtype=np.int64)
        if m.shape[-1] != self.k:
            raise ValueError(f"messages need {self.k} symbols")
        return (gf.matmul_mod(m, self.generator.data, self.q) + self.dither.data) % self.q

    def codeword(self, message: FieldVector) -> FieldVector:
        return FieldVector(self.encode(message.data), self.q)

    def codewords(self) -> np.ndarray:
        """All q^k codewords in lexicographic message order (read-only)."""
        if not self.enumerable:
            raise ValueError(
                f"codebook of {self.k} symbols over F_{self.q} is too large to enumerate; "
                "use a ProductCode or supply a decoder"
            )
        if "words" not in self._cache:
            words = self.encode(gf.enumerate_messages(self.k, self.q)).astype(np.int8 if self.q < 128 else np.int64)
            words.setflags(write=False)
            self._cache["words"] = words
        return self._cache["words"]

    def message_of(self, index) -> np.ndarray:
        idx = np.asarray(index, dtype=np.int64)
        powers = self.q ** np.arange(self.k - 1, -1, -1, dtype=np.int64)
        return (idx[..., None] // powers) % self.q

    def contains(self, word) -> bool:
        w = (np.asarray(word, dtype=np.int64) - self.dither.data) % self.q
        if self.k == 0:
            return not w.any()
        return gf.solve_array(self.generator.data.T, w, self.q) is not None

    def linear_part(self) -> "CosetCode":
        return CosetCode(self.generator, FieldVector.zeros(self.n, self.q), self.seed)

    def with_dither(self, dither: FieldVector) -> "CosetCode":
        return CosetCode(self.generator, dither, self.seed)

    def to_dict(self) -> dict:
        return {
            "kind": "coset",
            "q": self.q,
            "n": self.n,
            "k": self.k,
            "generator": self.generator.tolist(),
            "dither": self.dither.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CosetCode":
        q, n = int(d["q"]), int(d["n"])
        return cls(FieldMatrix(d["generator"], q, cols=n), FieldVector(d["dither"], q), d.get("seed"))

    def __eq__(self, other):
        return (
            isinstance(other, CosetCode)
            and self.generator == other.generator
            and self.dither == other.dither
        )

    def __hash__(self):
        return hash((self.generator, self.dither))

    def __repr__(self):
        return f"CosetCode(q={self.q}, n={self.n}, k={self.k})"


@dataclass(frozen=True, eq=False)
class ProductCode:
    """Block-diagonal coset code: independent component codes on consecutive coordinate blocks."""

    blocks: tuple[CosetCode, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("need at least one block")
        if len({b.q for b in self.blocks}) != 1:
            raise ValueError("blocks must share the field")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def q(self) -> int:
        return self.blocks[0].q

    @property
    def n(self) -> int:
        return sum(b.n for b in self.blocks)

    @property
    def k(self) -> int:
        return sum(b.k for b in self.blocks)

    @property
    def rate(self) -> float:
        return self.k / self.n * math.log2(self.q)

    @property
    def offsets(self) -> list[tuple[int, int]]:
        out, pos = [], 0
        for b in self.blocks:
            out.append((pos, pos + b.n))
            pos += b.n
        return out

    @property
    def message_offsets(self) -> list[tuple[int, int]]:
        out, pos = [], 0
        for b in self.blocks:
            out.append((pos, pos + b.k))
            pos += b.k
        return out

    def encode(self, messages) -> np.ndarray:
        m = np.asarray(messages, dtype=np.int64)
        parts = [b.encode(m[..., s:e]) for b, (s, e) in zip(self.blocks, self.message_offsets)]
        return np.concatenate(parts, axis=-1)

    def as_coset_code(self) -> CosetCode:
        g = np.zeros((self.k, self.n), dtype=np.int64)
        for b, (ms, me), (cs, ce) in zip(self.blocks, self.message_offsets, self.offsets):
            g[ms:me, cs:ce] = b.generator.data
        dither = np.concatenate([b.dither.data for b in self.blocks])
        return CosetCode(FieldMatrix(g, self.q, cols=self.n), FieldVector(dither, self.q))

    @property
    def is_linear(self) -> bool:
        return all(b.is_linear for b in self.blocks)

    def to_dict(self) -> dict:
        return {"kind": "product", "blocks": [b.to_dict() for b in self.blocks]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProductCode":
        return cls(tuple(CosetCode.from_dict(b) for b in d["blocks"]))

    def __repr__(self):
        return f"ProductCode(q={self.q}, n={self.n}, k={self.k}, blocks={len(self.blocks)})"


def code_from_dict(d: Mapping):
    kinds = {"coset": CosetCode, "product": ProductCode, "nested": NestedCosetPair, "shared_inner": SharedInnerPair}
    return kinds[d.get("kind", "coset")].from_dict(d)


# construction -------------------------------------------------------------


def build_coset_code(q: int, n: int, k: int, seed, *, linear: bool = False) -> CosetCode:
    """Uniform random generator and dither (zero dither when ``linear``)."""
    q = gf.check_prime(q)
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    g = gf.random_matrix(k, n, q, rng)
    b = FieldVector.zeros(n, q) if linear else gf.random_vector(n, q, rng)
    return CosetCode(g, b, _seed_int(seed))


def build_product_code(q: int, n: int, rate: float, block: int, seed, *, linear: bool = True, pad_rate: bool = True) -> ProductCode:
    """Balanced blocks of length about ``block`` with k_b = ceil(rate * n_b / log2 q) each."""
    count = max(1, round(n / block))
    sizes = [n // count + (1 if i < n % count else 0) for i in range(count)]
    if isinstance(seed, np.random.Generator):
        children = seed.spawn(count)
    else:
        children = np.random.SeedSequence(seed).spawn(count)
    blocks = []
    for size, child in zip(sizes, children):
        exact = rate * size / math.log2(q)
        k = min(size, math.ceil(exact - 1e-12) if pad_rate else int(exact))
        blocks.append(build_coset_code(q, size, k, np.random.default_rng(child), linear=linear))
    return ProductCode(tuple(blocks))


@dataclass(frozen=True, eq=False)
class NestedCosetPair:
    """Inner code {aG + b} inside outer code {aG + m dG + b}."""

    inner: CosetCode
    outer: CosetCode

    def __post_init__(self):
        ki, ko = self.inner.k, self.outer.k
        if ki > ko:
            raise ValueError("inner code has more rows than outer code")
        if not np.array_equal(self.outer.generator.data[:ki], self.inner.generator.data):
            raise ValueError("outer generator must start with the inner rows")
        if self.inner.dither != self.outer.dither:
            raise ValueError("nested codes share one dither")

    @property
    def delta_rows(self) -> int:
        return self.outer.k - self.inner.k

    @property
    def inner_rate(self) -> float:
        return self.inner.rate

    @property
    def outer_rate(self) -> float:
        return self.outer.rate

    def to_dict(self) -> dict:
        return {"kind": "nested", "inner": self.inner.to_dict(), "outer": self.outer.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NestedCosetPair":
        return cls(CosetCode.from_dict(d["inner"]), CosetCode.from_dict(d["outer"]))


def _nested(inner_g: np.ndarray, extra: np.ndarray, dither: FieldVector, q: int, seed) -> NestedCosetPair:
    n = dither.n
    inner = CosetCode(FieldMatrix(inner_g, q, cols=n), dither, _seed_int(seed))
    outer = CosetCode(FieldMatrix(np.vstack([inner_g, extra]), q, cols=n), dither, _seed_int(seed))
    return NestedCosetPair(inner, outer)


def build_nested_pair(q: int, n: int, k_i: int, k_o: int, seed) -> NestedCosetPair:
    q = gf.check_prime(q)
    if not 0 <= k_i < k_o <= n:
        raise ValueError(f"need 0 <= k_i < k_o <= n, got {k_i}, {k_o}, {n}")
    rng = np.random.default_rng(seed)
    g = rng.integers(0, q, (k_i, n), dtype=np.int64)
    dg = rng.integers(0, q, (k_o - k_i, n), dtype=np.int64)
    b = gf.random_vector(n, q, rng)
    return _nested(g, dg, b, q, seed)


@dataclass(frozen=True, eq=False)
class SharedInnerPair:
    """Two nested pairs whose inner generators are the same rows G; dithers are independent."""

    first: NestedCosetPair
    second: NestedCosetPair

    def __post_init__(self):
        if not np.array_equal(self.first.inner.generator.data, self.second.inner.generator.data):
            raise ValueError("the two pairs must share their inner rows")

    @property
    def q(self) -> int:
        return self.first.outer.q

    @property
    def n(self) -> int:
        return self.first.outer.n

    @property
    def shared_rows(self) -> int:
        return self.first.inner.k

    @property
    def rates(self) -> dict[str, float]:
        return {
            "r_i": self.first.inner.rate,
            "r_o": self.first.outer.rate,
            "r_o_prime": self.second.outer.rate,
        }

    @property
    def codes(self) -> tuple[CosetCode, CosetCode]:
        return self.first.outer, self.second.outer

    def stacked_generator(self) -> np.ndarray:
        """[G; dG; dG'] whose row space is the linear part of the sum code."""
        k = self.shared_rows
        return np.vstack(
            [self.first.outer.generator.data, self.second.outer.generator.data[k:]]
        )

    def to_dict(self) -> dict:
        return {"kind": "shared_inner", "first": self.first.to_dict(), "second": self.second.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SharedInnerPair":
        return cls(NestedCosetPair.from_dict(d["first"]), NestedCosetPair.from_dict(d["second"]))


def build_shared_inner_pair(q: int, n: int, k: int, l: int, l_prime: int, seed) -> SharedInnerPair:
    """C_o = {aG + m dG + B}, C'_o = {bG + m' dG' + B'} with a common k-row inner part."""
    q = gf.check_prime(q)
    if min(k, l, l_prime) < 0 or k + max(l, l_prime) > n:
        raise ValueError(f"dimension budget violated: k={k}, l={l}, l'={l_prime}, n={n}")
    rng = np.random.default_rng(seed)
    g = rng.integers(0, q, (k, n), dtype=np.int64)
    dg = rng.integers(0, q, (l, n), dtype=np.int64)
    dg2 = rng.integers(0, q, (l_prime, n), dtype=np.int64)
    b1 = gf.random_vector(n, q, rng)
    b2 = gf.random_vector(n, q, rng)
    first = NestedCosetPair(
        CosetCode(FieldMatrix(g, q, cols=n), b1, _seed_int(seed)),
        CosetCode(FieldMatrix(np.vstack([g, dg]), q, cols=n), b1, _seed_int(seed)),
    )
    second = NestedCosetPair(
        CosetCode(FieldMatrix(g, q, cols=n), b2, _seed_int(seed)),
        CosetCode(FieldMatrix(np.vstack([g, dg2]), q, cols=n), b2, _seed_int(seed)),
    )
    return SharedInnerPair(first, second)


def sum_code(c1: CosetCode, c2: CosetCode, alpha: int, beta: int) -> CosetCode:
    """Coset code alpha*C1 + beta*C2: generator is a basis of the combined row span."""
    if c1.q != c2.q or c1.n != c2.n:
        raise ValueError("codes must share field and length")
    q = c1.q
    a, b = int(alpha) % q, int(beta) % q
    if a == 0 or b == 0:
        raise ValueError("alpha and beta must be nonzero")
    stacked = np.vstack([(a * c1.generator.data) % q, (b * c2.generator.data) % q])
    if stacked.shape[0]:
        red, piv = gf.rref_array(stacked, q)
        basis = red[: len(piv)]
    else:
        basis = stacked
    dither = (a * c1.dither.data + b * c2.dither.data) % q
    return CosetCode(FieldMatrix(basis, q, cols=c1.n), FieldVector(dither, q))


@dataclass(frozen=True, eq=False)
class SharedInnerEnsemble:
    """m coset codes whose generators share row blocks; ``exclusive[J]`` rows are common to exactly the codes in J."""

    codes: tuple[CosetCode, ...]
    intersection_dims: dict
    exclusive: dict

    @property
    def m(self) -> int:
        return len(self.codes)

    def designed_dim(self, subset) -> int:
        s = frozenset(subset)
        return sum(v for j, v in self.exclusive.items() if s <= j)


def build_ensemble(q: int, n: int, m: int, intersection_dims: Mapping, seed, *, linear: bool = False) -> SharedInnerEnsemble:
    """Codes C_1..C_m with dim(intersection over J) = intersection_dims[J] (generic rank).

    ``intersection_dims`` maps subsets of {1..m} (any iterable) to row counts;
    singletons give the code dimensions and missing subsets of size >= 2 are 0.
    Requires sum over strict supersets J' of dims[J'] <= dims[J] for every J.
    """
    q = gf.check_prime(q)
    subsets = [frozenset(c) for r in range(1, m + 1) for c in combinations(range(1, m + 1), r)]
    dims = {s: 0 for s in subsets}
    for key, v in intersection_dims.items():
        s = frozenset([key]) if isinstance(key, int) else frozenset(key)
        if s not in dims:
            raise ValueError(f"subset {sorted(s)} outside 1..{m}")
        dims[s] = int(v)
    for s in subsets:
        above = sum(dims[t] for t in subsets if s < t)
        if above > dims[s]:
            raise ValueError(f"infeasible parameter lattice at {sorted(s)}: supersets need {above} > {dims[s]}")
    # Moebius inversion on the subset lattice: rows shared by exactly J
    exclusive = {}
    for s in subsets:
        exclusive[s] = sum((-1) ** (len(t) - len(s)) * dims[t] for t in subsets if s <= t)
        if exclusive[s] < 0:
            raise ValueError(f"infeasible parameter lattice at {sorted(s)}")
    total = sum(exclusive.values())
    if total > n:
        raise ValueError(f"ensemble needs {total} independent rows but n={n}")
    rng = np.random.default_rng(seed)
    blocks = {s: rng.integers(0, q, (exclusive[s], n), dtype=np.int64) for s in subsets}
    codes = []
    for i in range(1, m + 1):
        # larger shared blocks first so common rows lead every generator
        rows = [blocks[s] for s in sorted(subsets, key=lambda t: (-len(t), sorted(t))) if i in s]
        g = np.vstack(rows) if rows else np.zeros((0, n), dtype=np.int64)
        b = FieldVector.zeros(n, q) if linear else gf.random_vector(n, q, rng)
        codes.append(CosetCode(FieldMatrix(g, q, cols=n), b, _seed_int(seed)))
    return SharedInnerEnsemble(tuple(codes), dims, exclusive)


# distance kernels ---------------------------------------------------------


def hamming_distances(x: np.ndarray, words: np.ndarray, q: int) -> np.ndarray:
    """(B, M) Hamming distances between rows of x (B, n) and words (M, n)."""
    x = np.asarray(x)
    words = np.asarray(words)
    n = x.shape[-1]
    if q == 2:
        xf = x.astype(np.float32)
        wf = words.astype(np.float32)
        d = xf.sum(1)[:, None] + wf.sum(1)[None, :] - 2.0 * (xf @ wf.T)
    else:
        agree = np.zeros((x.shape[0], words.shape[0]), dtype=np.float32)
        for s in range(q):
            agree += (x == s).astype(np.float32) @ (words == s).astype(np.float32).T
        d = n - agree
    # float32 is exact for integers below 2^24
    return np.rint(d).astype(np.int64)


def nearest_batch(code: CosetCode, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index (lexicographic message order) and distance of the nearest codeword for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    words = code.codewords()
    bsz = x.shape[0]
    best_d = np.full(bsz, np.iinfo(np.int64).max, dtype=np.int64)
    best_i = np.zeros(bsz, dtype=np.int64)
    chunk = max(1, _CHUNK_CELLS // max(bsz, 1))
    for start in range(0, words.shape[0], chunk):
        d = hamming_distances(x, words[start : start + chunk], code.q)
        i = d.argmin(axis=1)
        v = d[np.arange(bsz), i]
        better = v < best_d  # strict: earlier chunks win ties
        best_d[better] = v[better]
        best_i[better] = i[better] + start
    return best_i, best_d


@dataclass(frozen=True)
class QuantizationResult:
    message: FieldVector
    codeword: FieldVector
    distortion: float


class NotFound:
    """Encoder failure marker returned by typical-set quantization."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self):
        return False

    def __repr__(self):
        return "NOT_FOUND"


NOT_FOUND = NotFound()


def quantize_batch(code, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-Hamming quantization of each row of x: (messages, codewords, per-row distortion)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    if isinstance(code, ProductCode):
        msgs, words = [], []
        for b, (s, e) in zip(code.blocks, code.offsets):
            m, w, _ = quantize_batch(b, x[:, s:e])
            msgs.append(m)
            words.append(w)
        m = np.concatenate(msgs, axis=1)
        w = np.concatenate(words, axis=1)
        return m, w, (w != x).mean(axis=1)
    if not code.enumerable:
        raise ValueError("codebook too large to search; use a ProductCode")
    idx, dist = nearest_batch(code, x)
    words = np.asarray(code.codewords()[idx], dtype=np.int64)
    return code.message_of(idx), words, dist / code.n


def quantize_min_hamming(code, x) -> QuantizationResult:
    xv = x.data if isinstance(x, FieldVector) else np.asarray(x, dtype=np.int64)
    if xv.shape[-1] != code.n:
        raise ValueError(f"word length {xv.shape[-1]} != n={code.n}")
    m, w, d = quantize_batch(code, xv[None, :])
    return QuantizationResult(FieldVector(m[0], code.q), FieldVector(w[0], code.q), float(d[0]))


def nearest_codeword(code, y) -> FieldVector:
    return quantize_min_hamming(code, y).codeword


def coset_bin(inner, x) -> FieldVector:
    """Quantization noise x - Q_inner(x); equal for words in the same coset of the inner code (unique minimiser)."""
    xv = x.data if isinstance(x, FieldVector) else np.asarray(x, dtype=np.int64)
    q = inner.q
    return FieldVector((xv - quantize_min_hamming(inner, xv).codeword.data) % q, q)


def coset_bin_batch(inner, x: np.ndarray) -> np.ndarray:
    _, w, _ = quantize_batch(inner, x)
    return (np.asarray(x, dtype=np.int64) - w) % inner.q


def quantize_typical(code: CosetCode, x, pmf, eps: float, *, source: str = "X", aux: str = "U"):
    """First codeword, in message order, jointly typical with x under the (source, aux) marginal of pmf."""
    from mdlab.infotheory import typicality_margin

    xv = x.data if isinstance(x, FieldVector) else np.asarray(x, dtype=np.int64)
    probs = pmf.marginal_table([source, aux])
    sx, su = probs.shape
    if su != code.q:
        raise ValueError("auxiliary alphabet must be the code field")
    words = code.codewords()
    n = code.n
    onehot_x = (xv[:, None] == np.arange(sx)[None, :]).astype(np.float32)
    chunk = max(1, _CHUNK_CELLS // (n * su))
    for start in range(0, words.shape[0], chunk):
        w = np.asarray(words[start : start + chunk])
        onehot_w = (w[:, :, None] == np.arange(su)).astype(np.float32)
        counts = np.rint(np.einsum("ia,mib->mab", onehot_x, onehot_w)).astype(np.int64)
        ok = np.flatnonzero(typicality_margin(counts, probs, n) <= eps * (1 + 1e-12))
        if ok.size:
            i = start + int(ok[0])
            cw = FieldVector(np.asarray(words[i], dtype=np.int64), code.q)
            return QuantizationResult(FieldVector(code.message_of(i), code.q), cw, float((cw.data != xv).mean()))
    return NOT_FOUND


# finite-n code search -------------------------------------------------------


def best_of(trials: int, build: Callable[[np.random.Generator], object], score: Callable[[object, np.random.Generator], float], seed):
    """Draw ``trials`` candidate codes and keep the lowest-scoring one (first on ties).

    Returns (code, score, all scores).  Candidate i uses its own child seed, so
    the choice is independent of evaluation order.
    """
    if trials < 1:
        raise ValueError("need at least one candidate")
    children = np.random.SeedSequence(seed).spawn(trials)
    best, best_score, scores = None, math.inf, []
    for child in children:
        build_rng, score_rng = (np.random.default_rng(s) for s in child.spawn(2))
        cand = build(build_rng)
        s = float(score(cand, score_rng))
        scores.append(s)
        if s < best_score:
            best, best_score = cand, s
    return best, best_score, scores
