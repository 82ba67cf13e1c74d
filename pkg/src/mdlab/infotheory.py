"""Finite joint PMFs, Shannon functionals, typicality and point-to-point rate-distortion.

All logarithms are base 2.  ``JointPmf`` holds a dense table over the product
of named finite alphabets and is immutable; every derived object (marginal,
extension by a channel, deterministic function of existing variables) is a
new instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

MAX_CELLS = 1 << 24
NORMALIZATION_TOL = 1e-12

__all__ = [
    "JointPmf",
    "DistortionFn",
    "ReconstructionMap",
    "BlahutArimotoResult",
    "ConvergenceError",
    "entropy",
    "conditional_entropy",
    "mutual_information",
    "entropy_of_table",
    "binary_entropy",
    "binary_convolve",
    "empirical_counts",
    "typicality_margin",
    "is_jointly_typical",
    "table1_pmf",
    "hamming_distortion",
    "asymmetric_binary_distortion",
    "expected_distortion",
    "blahut_arimoto",
]


def _names(vars) -> tuple[str, ...]:
    if vars is None:
        return ()
    if isinstance(vars, str):
        return (vars,)
    return tuple(vars)


def entropy_of_table(t: np.ndarray) -> float:
    p = np.asarray(t, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


class JointPmf:
    """Joint distribution over named variables with finite alphabets {0..size-1}."""

    __slots__ = ("names", "sizes", "probs")

    def __init__(self, variables: Sequence[tuple[str, int]], probs):
        names = tuple(str(n) for n, _ in variables)
        sizes = tuple(int(s) for _, s in variables)
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be unique: {names}")
        if any(s < 1 for s in sizes):
            raise ValueError("alphabet sizes must be positive")
        if math.prod(sizes) > MAX_CELLS:
            raise ValueError(f"alphabet product {math.prod(sizes)} exceeds {MAX_CELLS} cells")
        table = np.array(probs, dtype=float).reshape(sizes)
        if table.min(initial=0.0) < -NORMALIZATION_TOL:
            raise ValueError("probabilities must be nonnegative")
        table = np.clip(table, 0.0, None)
        total = table.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        table = table / total
        table.setflags(write=False)
        self.names = names
        self.sizes = sizes
        self.probs = table

    # construction helpers -------------------------------------------------

    @classmethod
    def uniform(cls, name: str, size: int) -> "JointPmf":
        return cls([(name, size)], np.full(size, 1.0 / size))

    @classmethod
    def from_dict(cls, d: Mapping) -> "JointPmf":
        variables = [(v["name"], int(v["size"])) for v in d["variables"]]
        return cls(variables, np.array(d["probs"], dtype=float))

    def to_dict(self) -> dict:
        return {
            "variables": [{"name": n, "size": s} for n, s in zip(self.names, self.sizes)],
            "probs": self.probs.tolist(),
        }

    @property
    def variables(self) -> list[tuple[str, int]]:
        return list(zip(self.names, self.sizes))

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; have {self.names}") from None

    def size(self, name: str) -> int:
        return self.sizes[self.axis(name)]

    def __contains__(self, name: str) -> bool:
        return name in self.names

    # marginals and conditionals ---------------------------------------------

    def marginal_table(self, vars) -> np.ndarray:
        vars = _names(vars)
        axes = [self.axis(v) for v in vars]
        if len(set(axes)) != len(axes):
            raise ValueError("repeated variable in marginal")
        drop = tuple(i for i in range(len(self.names)) if i not in axes)
        t = self.probs.sum(axis=drop) if drop else self.probs
        kept = [i for i in range(len(self.names)) if i in axes]
        return np.transpose(t, [kept.index(a) for a in axes]) if axes else np.asarray(t)

    def marginal(self, vars) -> "JointPmf":
        vars = _names(vars)
        return JointPmf([(v, self.size(v)) for v in vars], self.marginal_table(vars))

    def conditional_table(self, vars, given) -> np.ndarray:
        """P(vars | given) with shape given-sizes + vars-sizes; rows with zero mass are zero."""
        vars, given = _names(vars), _names(given)
        joint = self.marginal_table(given + vars)
        den = self.marginal_table(given) if given else np.array(1.0)
        den = den.reshape(den.shape + (1,) * len(vars))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, joint / np.where(den > 0, den, 1.0), 0.0)

    # derived variables ----------------------------------------------------

    def extend(self, name: str, size: int, channel, given) -> "JointPmf":
        """Append a variable drawn from channel[given..., new] conditioned on existing variables."""
        given = _names(given)
        ch = np.asarray(channel, dtype=float)
        expect = tuple(self.size(g) for g in given) + (size,)
        if ch.shape != expect:
            raise ValueError(f"channel shape {ch.shape} != {expect}")
        if not np.allclose(ch.sum(axis=-1), 1.0, atol=1e-9):
            raise ValueError("channel rows must sum to 1")
        # reorder channel axes to table order, then broadcast over the other variables
        by_position = sorted((self.axis(g), i) for i, g in enumerate(given))
        ch = np.transpose(ch, [i for _, i in by_position] + [len(given)])
        shape = [1] * len(self.names) + [size]
        for a, _ in by_position:
            shape[a] = self.sizes[a]
        table = self.probs[..., None] * ch.reshape(shape)
        return JointPmf(self.variables + [(name, size)], table)

    def derive(self, name: str, size: int, func: Callable[..., np.ndarray], inputs) -> "JointPmf":
        """Append a deterministic function of existing variables."""
        inputs = _names(inputs)
        grids = np.meshgrid(*[np.arange(self.size(v)) for v in inputs], indexing="ij")
        values = np.asarray(func(*grids), dtype=np.int64)
        if values.min(initial=0) < 0 or values.max(initial=0) >= size:
            raise ValueError("derived values outside the declared alphabet")
        channel = np.zeros(values.shape + (size,))
        np.put_along_axis(channel, values[..., None], 1.0, axis=-1)
        return self.extend(name, size, channel, inputs)

    def rename(self, mapping: Mapping[str, str]) -> "JointPmf":
        return JointPmf([(mapping.get(n, n), s) for n, s in self.variables], self.probs)

    def product(self, other: "JointPmf") -> "JointPmf":
        """Joint of two independent PMFs over disjoint variables."""
        t = np.multiply.outer(self.probs, other.probs)
        return JointPmf(self.variables + other.variables, t)

    # functionals ----------------------------------------------------------

    def entropy(self, vars) -> float:
        return entropy_of_table(self.marginal_table(vars))

    def expectation(self, fn_table: np.ndarray, vars) -> float:
        """E f(vars) where fn_table is indexed by the listed variables."""
        return float((self.marginal_table(vars) * np.asarray(fn_table, dtype=float)).sum())

    def sample(self, n: int, rng) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(rng)
        flat = rng.choice(self.probs.size, size=n, p=self.probs.ravel())
        idx = np.unravel_index(flat, self.sizes)
        return {name: np.asarray(i, dtype=np.int64) for name, i in zip(self.names, idx)}

    def __eq__(self, other):
        return (
            isinstance(other, JointPmf)
            and other.names == self.names
            and other.sizes == self.sizes
            and np.array_equal(other.probs, self.probs)
        )

    def __hash__(self):
        return hash((self.names, self.sizes, self.probs.tobytes()))

    def __repr__(self):
        return f"JointPmf({', '.join(f'{n}:{s}' for n, s in self.variables)})"


def entropy(p: JointPmf, vars) -> float:
    return p.entropy(vars)


def conditional_entropy(p: JointPmf, vars, given=None) -> float:
    vars, given = _names(vars), _names(given)
    both = tuple(dict.fromkeys(given + vars))
    return p.entropy(both) - (p.entropy(given) if given else 0.0)


def mutual_information(p: JointPmf, a, b, given=None) -> float:
    a, b, given = _names(a), _names(b), _names(given)
    value = (
        conditional_entropy(p, a, given)
        + conditional_entropy(p, b, given)
        - conditional_entropy(p, tuple(dict.fromkeys(a + b)), given)
    )
    return max(value, 0.0) if abs(value) < 1e-12 else value


def _check_unit(p, what="argument"):
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError(f"{what} must lie in [0, 1], got {p}")
    return arr


def binary_entropy(p):
    arr = _check_unit(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(arr > 0, arr * np.log2(np.where(arr > 0, arr, 1)), 0.0) - np.where(
            arr < 1, (1 - arr) * np.log2(np.where(arr < 1, 1 - arr, 1)), 0.0
        )
    return float(h) if h.ndim == 0 else h


def binary_convolve(a, b):
    a, b = _check_unit(a), _check_unit(b)
    out = a * (1 - b) + b * (1 - a)
    return float(out) if out.ndim == 0 else out


# typicality ---------------------------------------------------------------


def empirical_counts(seqs: Sequence[np.ndarray], sizes: Sequence[int]) -> np.ndarray:
    """Joint symbol counts; accepts (n,) sequences or (batch, n) stacks."""
    arrs = [np.asarray(s, dtype=np.int64) for s in seqs]
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ValueError("sequences must have equal length")
    flat = np.ravel_multi_index(tuple(arrs), tuple(sizes))
    cells = math.prod(sizes)
    if flat.ndim == 1:
        return np.bincount(flat, minlength=cells).reshape(tuple(sizes))
    offs = np.arange(flat.shape[0])[:, None] * cells
    counts = np.bincount((flat + offs).ravel(), minlength=cells * flat.shape[0])
    return counts.reshape((flat.shape[0],) + tuple(sizes))


def typicality_margin(counts: np.ndarray, probs: np.ndarray, n: int) -> np.ndarray:
    """max over symbols of |freq - p| / p (inf if a zero-probability symbol occurs)."""
    freq = counts / n
    p = np.broadcast_to(probs, freq.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, np.abs(freq - p) / np.where(p > 0, p, 1), np.where(freq > 0, np.inf, 0.0))
    axes = tuple(range(freq.ndim - probs.ndim, freq.ndim))
    return ratio.max(axis=axes)


def is_jointly_typical(seqs: Sequence, p: JointPmf, eps: float, vars=None) -> bool:
    """Robust typicality: |freq(a)/n - p(a)| <= eps * p(a) for every joint symbol a.

    ``seqs`` follows ``vars`` (default: all variables of ``p`` in order).  A
    symbol with p(a) = 0 must not occur.
    """
    vars = _names(vars) or p.names
    if len(seqs) != len(vars):
        raise ValueError(f"expected {len(vars)} sequences, got {len(seqs)}")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ValueError("sequences must have equal length")
    n = lengths.pop()
    probs = p.marginal_table(vars)
    counts = empirical_counts(seqs, probs.shape)
    return bool(typicality_margin(counts, probs, n) <= eps * (1 + 1e-12))


# distortion and reconstruction ----------------------------------------------


@dataclass(frozen=True)
class DistortionFn:
    """Bounded nonnegative distortion matrix d[x, xhat]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("distortion must be a matrix")
        if not np.all(np.isfinite(m)) or m.min() < 0:
            raise ValueError("distortion must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, x, xhat):
        return self.matrix[np.asarray(x), np.asarray(xhat)]

    def average(self, x, xhat) -> float:
        return float(self(x, xhat).mean())

    def __eq__(self, other):
        return isinstance(other, DistortionFn) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


def hamming_distortion(q: int = 2) -> DistortionFn:
    return DistortionFn(1.0 - np.eye(q))


def asymmetric_binary_distortion(cost_0_to_1: float, cost_1_to_0: float) -> DistortionFn:
    """d(0, 1) = cost_0_to_1, d(1, 0) = cost_1_to_0, zero on the diagonal."""
    return DistortionFn(np.array([[0.0, cost_0_to_1], [cost_1_to_0, 0.0]]))


@dataclass(frozen=True)
class ReconstructionMap:
    """Decoder-side table from decoded auxiliaries to reconstruction symbols."""

    inputs: tuple[str, ...]
    table: np.ndarray
    decoder: object = None

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        if t.ndim != len(self.inputs):
            raise ValueError("table rank must equal the number of inputs")
        if t.min(initial=0) < 0:
            raise ValueError("reconstruction symbols must be nonnegative")
        t.setflags(write=False)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "table", t)

    @classmethod
    def constant(cls, value: int = 0, decoder=None) -> "ReconstructionMap":
        return cls((), np.array(value), decoder)

    def __call__(self, *cols):
        return self.table[tuple(np.asarray(c) for c in cols)] if self.inputs else self.table[()]


def expected_distortion(
    p: JointPmf, recon: ReconstructionMap, d: DistortionFn, source: str | Sequence[str] = "X"
) -> float:
    """E d(source, g(inputs)); a tuple source is flattened in mixed radix order."""
    src = _names(source)
    vars = tuple(dict.fromkeys(src + recon.inputs))
    t = p.marginal_table(vars)
    grids = np.meshgrid(*[np.arange(s) for s in t.shape], indexing="ij")
    pos = {v: i for i, v in enumerate(vars)}
    xs = np.zeros(t.shape, dtype=np.int64)
    for v in src:
        xs = xs * p.size(v) + grids[pos[v]]
    xhat = recon(*[grids[pos[v]] for v in recon.inputs]) if recon.inputs else np.full(t.shape, recon.table[()])
    return float((t * d.matrix[xs, xhat]).sum())


# Blahut-Arimoto -------------------------------------------------------------


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlahutArimotoResult:
    channel: np.ndarray  # P(xhat | x)
    rate: float
    distortion: float
    slope: float
    joint: np.ndarray = field(repr=False)  # P(x, xhat)
    iterations: int = 0
    kkt_residual: float = 0.0


def _ba_fixed_slope(px, d, s, max_iter, tol):
    m = d.shape[1]
    out = np.full(m, 1.0 / m)
    a = np.exp(-s * (d - d.min(axis=1, keepdims=True)))
    it = 0
    residual = np.inf
    for it in range(1, max_iter + 1):
        den = a @ out
        c = (px / den) @ a  # KKT multipliers, equal 1 on the support at the optimum
        new = out * c
        new /= new.sum()
        # sum(out * c) == 1, so max(c) - 1 >= 0 bounds the suboptimality of the current output law
        residual = float(np.max(c) - 1.0) if np.isfinite(c).all() else np.inf
        out = new
        if residual < tol:
            break
    else:
        raise ConvergenceError(f"no convergence at slope {s} after {max_iter} iterations")
    w = a * out
    w /= w.sum(axis=1, keepdims=True)
    joint = px[:, None] * w
    dist = float((joint * d).sum())
    marg = px @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, w / np.where(marg > 0, marg, 1)[None, :], 1.0)
    rate = float((joint * np.log2(ratio)).sum())
    return BlahutArimotoResult(w, max(rate, 0.0), dist, s, joint, it, abs(residual))


def _deterministic_result(px, d, choice, s):
    w = np.zeros_like(d)
    w[np.arange(len(px)), choice] = 1.0
    joint = px[:, None] * w
    rate = entropy_of_table(joint.sum(axis=0))
    return BlahutArimotoResult(w, rate, float((joint * d).sum()), s, joint, 0, 0.0)


def blahut_arimoto(
    source,
    d: DistortionFn,
    *,
    slope: float | None = None,
    target_distortion: float | None = None,
    target_rate: float | None = None,
    max_iter: int = 100_000,
    tol: float = 1e-9,
) -> BlahutArimotoResult:
    """Point-to-point rate-distortion test channel by alternating minimisation.

    Exactly one of ``slope`` (Lagrange multiplier, natural units), a target
    distortion, or a target rate selects the point on the curve; targets are
    reached by bracketing the slope.
    """
    if sum(v is not None for v in (slope, target_distortion, target_rate)) != 1:
        raise ValueError("give exactly one of slope, target_distortion, target_rate")
    px = np.asarray(source.probs if isinstance(source, JointPmf) else source, dtype=float).ravel()
    if px.min() < 0 or abs(px.sum() - 1) > 1e-9:
        raise ValueError("source must be a normalized distribution")
    dm = d.matrix if isinstance(d, DistortionFn) else np.asarray(d, dtype=float)
    if dm.shape[0] != px.size:
        raise ValueError("distortion rows must match the source alphabet")
    if slope is not None:
        return _ba_fixed_slope(px, dm, float(slope), max_iter, tol)

    d_min = float(px @ dm.min(axis=1))
    d_max = float((px @ dm).min())
    zero_rate = _deterministic_result(px, dm, np.full(px.size, int(np.argmin(px @ dm))), 0.0)
    best = _deterministic_result(px, dm, dm.argmin(axis=1), np.inf)

    if target_distortion is not None:
        t = float(target_distortion)
        if t <= d_min + 1e-12:
            return best
        if t >= d_max:
            return zero_rate
        f = lambda s: _ba_fixed_slope(px, dm, s, max_iter, tol).distortion - t
    else:
        t = float(target_rate)
        if t <= 0:
            return zero_rate
        if t >= best.rate:
            return best
        f = lambda s: _ba_fixed_slope(px, dm, s, max_iter, tol).rate - t
    # rate rises and distortion falls with the slope; bracket outward from s = 1
    sign = 1.0 if target_rate is not None else -1.0
    lo = hi = 1.0
    while sign * f(lo) > 0:
        lo /= 2
        if lo < 1e-4:
            raise ConvergenceError("could not bracket the slope for the requested target")
    while sign * f(hi) < 0:
        hi *= 2
        if hi > 1e4:
            raise ConvergenceError("could not bracket the slope for the requested target")
    s = brentq(f, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=500)
    return _ba_fixed_slope(px, dm, s, max_iter, tol)


# worked-example source ------------------------------------------------------

SQRT2 = math.sqrt(2.0)


def table1_pmf(d0: float) -> JointPmf:
    """Joint law of (X, V1, V2) for the scalar two-codeword example.

    V1, V2 are i.i.d. Bernoulli(1 - 1/sqrt2) and X is their OR passed through
    a BSC(d0); X is then uniform.
    """
    if not 0 < d0 < 0.5:
        raise ValueError(f"d0 must lie in (0, 1/2), got {d0}")
    a = SQRT2 - 1
    b = 3 - 2 * SQRT2
    t = np.array(
        [
            [[(1 - d0) / 2, a * d0 / 2], [a * d0 / 2, b * d0 / 2]],
            [[d0 / 2, a * (1 - d0) / 2], [a * (1 - d0) / 2, b * (1 - d0) / 2]],
        ]
    )
    return JointPmf([("X", 2), ("V1", 2), ("V2", 2)], t)
