"""Monte Carlo checks of the mutual covering and packing bounds for two coset codes sharing inner rows.

Two search strategies find jointly typical codeword pairs:

* exhaustive: every pair of codewords is scored (tiny codes only);
* affine: when every conditional law P(u, v | x) is uniform on an affine
  subspace of F_q^2, the support constraints are linear in the messages, so
  Gaussian elimination gives the exact set of pairs meeting them; typicality
  of the remaining free coordinates is then checked on that solution space
  (all of it when small, otherwise a seeded sample of ``solution_budget``
  points, which makes the reported success a lower bound).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from mdlab import gf
from mdlab.codes import ENUMERATION_BITS, CosetCode, SharedInnerPair
from mdlab.experiments.common import (
    ExperimentConfig,
    ExperimentError,
    ExperimentReport,
    frequency_half_width,
    run_trials,
    trial_rng,
)
from mdlab.infotheory import JointPmf, conditional_entropy, entropy, typicality_margin

DEFAULT_BUDGET = 256


class EnumerationCapExceeded(ValueError):
    """Neither the exhaustive nor the affine strategy applies."""


# analytic bounds ------------------------------------------------------------------


def _with_combination(p: JointPmf, q: int, alpha: int, beta: int, u: str, v: str) -> tuple[JointPmf, str]:
    name = f"{alpha}{u}+{beta}{v}"
    if name in p:
        return p, name
    return p.derive(name, q, lambda a, b: (alpha * a + beta * b) % q, [u, v]), name


def covering_bounds(p: JointPmf, q: int, *, source: str = "X", u: str = "U", v: str = "V") -> dict[str, float]:
    """Right-hand sides of the mutual covering bounds (keys name the constrained rate expression)."""
    log_q = math.log2(q)
    out = {
        "r_o": log_q - conditional_entropy(p, u, source),
        "r_o'": log_q - conditional_entropy(p, v, source),
        "r_o+r_o'": 2 * log_q - conditional_entropy(p, [u, v], source),
    }
    for alpha in range(1, q):
        for beta in range(1, q):
            pp, name = _with_combination(p, q, alpha, beta, u, v)
            out[f"r_o+r_o'-r_i[{alpha},{beta}]"] = log_q - conditional_entropy(pp, name, source)
    return out


def covering_slack(rates: dict[str, float], bounds: dict[str, float]) -> dict[str, float]:
    """Per-bound slack (positive = satisfied) for rates r_o, r_o', r_i."""
    ro, ro2, ri = rates["r_o"], rates["r_o'"], rates["r_i"]
    out = {}
    for key, rhs in bounds.items():
        if key == "r_o":
            lhs = ro
        elif key == "r_o'":
            lhs = ro2
        elif key == "r_o+r_o'":
            lhs = ro + ro2
        else:
            lhs = ro + ro2 - ri
        out[key] = lhs - rhs
    return out


def packing_bounds(p: JointPmf, q: int, *, u: str = "U", v: str = "V") -> dict[str, float]:
    """Right-hand sides of the three packing bounds on r_o - rho_1, r_o' - rho_2 and their sum."""
    log_q = math.log2(q)
    return {
        "r_o-rho1": log_q - conditional_entropy(p, u, v),
        "r_o'-rho2": log_q - conditional_entropy(p, v, u),
        "sum": 2 * log_q - entropy(p, [u, v]),
    }


def packing_slack(rates: dict[str, float], bounds: dict[str, float]) -> dict[str, float]:
    a = rates["r_o"] - rates["rho1"]
    b = rates["r_o'"] - rates["rho2"]
    return {"r_o-rho1": bounds["r_o-rho1"] - a, "r_o'-rho2": bounds["r_o'-rho2"] - b, "sum": bounds["sum"] - (a + b)}


def dropped_packing_slack(rates: dict[str, float], p: JointPmf, q: int, *, u: str = "U", v: str = "V") -> dict[int, float]:
    """Slack of r_i - rho_1 - rho_2 <= log q - H(U, V | U + iV) for every nonzero i."""
    out = {}
    for i in range(1, q):
        pp, name = _with_combination(p, q, 1, i, u, v)
        rhs = math.log2(q) - conditional_entropy(pp, [u, v], name)
        out[i] = rhs - (rates["r_i"] - rates["rho1"] - rates["rho2"])
    return out


def pair_rates(pair: SharedInnerPair) -> dict[str, float]:
    r = pair.rates
    return {"r_o": r["r_o"], "r_o'": r["r_o_prime"], "r_i": r["r_i"]}


# typicality -----------------------------------------------------------------------


def conditional_margin(counts: np.ndarray, cond: np.ndarray) -> np.ndarray:
    """max over (a, u, v) of |N(a,u,v) - N(a) P(u,v|a)| / (N(a) P(u,v|a)); inf if a zero-probability cell occurs.

    ``counts`` has shape (..., |X|, q, q); symbols a with N(a) = 0 impose nothing.
    """
    na = counts.sum(axis=(-2, -1), keepdims=True)
    expected = na * cond
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(expected > 0, np.abs(counts - expected) / np.where(expected > 0, expected, 1), np.where(counts > 0, np.inf, 0.0))
    return ratio.max(axis=(-3, -2, -1))


def _triple_counts(x: np.ndarray, u: np.ndarray, v: np.ndarray, sx: int, q: int) -> np.ndarray:
    """Counts of (x, u_j, v_j) for each row j of u and v (x shared)."""
    flat = (x[None, :] * q + u) * q + v
    cells = sx * q * q
    offs = np.arange(flat.shape[0])[:, None] * cells
    return np.bincount((flat + offs).ravel(), minlength=cells * flat.shape[0]).reshape(flat.shape[0], sx, q, q)


def _pair_counts(u: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    flat = u * q + v
    offs = np.arange(flat.shape[0])[:, None] * q * q
    return np.bincount((flat + offs).ravel(), minlength=q * q * flat.shape[0]).reshape(flat.shape[0], q, q)


# affine support -------------------------------------------------------------------


def affine_constraints(table: np.ndarray, q: int):
    """Linear description of the support of P(u, v) if it is an affine subspace carrying a uniform law.

    Returns (rows, rhs) with rows @ (u, v) = rhs exactly on the support, or
    None when the support is not affine or the law on it is not uniform.
    """
    support = np.argwhere(table > 0)
    if len(support) == 0:
        return None
    vals = table[table > 0]
    if not np.allclose(vals, vals[0], rtol=1e-9, atol=0):
        return None
    base = support[0]
    diffs = (support - base) % q
    span = np.zeros((0, 2), dtype=np.int64)
    if diffs.any():
        red, piv = gf.rref_array(diffs, q)
        span = red[: len(piv)]
    if len(support) != q ** len(span):
        return None
    # every element of base + span(diffs) must be in the support
    members = {tuple(s) for s in support}
    for coeffs in itertools.product(range(q), repeat=len(span)):
        point = tuple(int(c) for c in (base + np.asarray(coeffs, dtype=np.int64) @ span.reshape(-1, 2)) % q)
        if point not in members:
            return None
    rows = gf.nullspace_array(span, q) if len(span) else np.eye(2, dtype=np.int64)
    return rows, (rows @ base) % q


def affine_structure(p: JointPmf, q: int, *, source: str = "X", u: str = "U", v: str = "V"):
    """Per-source-symbol affine constraints, or None if some conditional law is not affine-uniform."""
    joint = p.marginal_table([source, u, v])
    out = {}
    for a in range(joint.shape[0]):
        if joint[a].sum() <= 0:
            continue
        c = affine_constraints(joint[a] / joint[a].sum(), q)
        if c is None:
            return None
        out[a] = c
    return out


@dataclass(frozen=True)
class SolutionSpace:
    particular: np.ndarray
    basis: np.ndarray  # rows

    @property
    def dim(self) -> int:
        return len(self.basis)

    def points(self, q: int, budget: int, rng: np.random.Generator) -> np.ndarray:
        """All points when q^dim <= budget, otherwise ``budget`` seeded samples (the particular point first)."""
        if self.dim == 0:
            return self.particular[None, :]
        if self.dim * math.log2(q) <= math.log2(budget):
            coeffs = gf.enumerate_messages(self.dim, q)
        else:
            coeffs = rng.integers(0, q, (budget, self.dim))
            coeffs[0] = 0
        return (self.particular[None, :] + gf.matmul_mod(coeffs, self.basis, q)) % q


def _solve(rows: list[np.ndarray], rhs: list[np.ndarray], unknowns: int, q: int) -> SolutionSpace | None:
    if not rows:
        return SolutionSpace(np.zeros(unknowns, dtype=np.int64), np.eye(unknowns, dtype=np.int64))
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    sol = gf.solve_array(a, b, q)
    if sol is None:
        return None
    return SolutionSpace(*sol)


def _support_system(codes: tuple[CosetCode, CosetCode], x: np.ndarray, constraints: dict, q: int):
    """Rows over the stacked messages (m1, m2) forcing (u_i, v_i) into the support for symbol x_i."""
    g1, g2 = codes[0].generator.data, codes[1].generator.data
    d1, d2 = codes[0].dither.data, codes[1].dither.data
    rows, rhs = [], []
    for a, (h, c) in constraints.items():
        pos = np.flatnonzero(x == a)
        if len(pos) == 0:
            continue
        for hu, hv, ci in zip(h[:, 0], h[:, 1], c):
            block = np.hstack([(hu * g1[:, pos]).T, (hv * g2[:, pos]).T]) % q
            rows.append(block)
            rhs.append((ci - hu * d1[pos] - hv * d2[pos]) % q)
    return rows, rhs


# covering ---------------------------------------------------------------------------


def _codes(pair: SharedInnerPair) -> tuple[CosetCode, CosetCode]:
    return pair.codes


def choose_strategy(pair: SharedInnerPair, p: JointPmf, names: tuple[str, str, str]) -> str:
    c1, c2 = _codes(pair)
    if (c1.k + c2.k) * math.log2(pair.q) <= ENUMERATION_BITS:
        return "exhaustive"
    if affine_structure(p, pair.q, source=names[0], u=names[1], v=names[2]) is not None:
        return "affine"
    raise EnumerationCapExceeded(
        f"{c1.k + c2.k} message symbols exceed the enumeration cap and the law has no affine support structure"
    )


@dataclass(frozen=True)
class CoveringHit:
    messages: tuple[np.ndarray, np.ndarray]
    words: tuple[np.ndarray, np.ndarray]
    margin: float


def find_typical_pair(pair: SharedInnerPair, x: np.ndarray, p: JointPmf, eps: float, *, names=("X", "U", "V"), strategy: str | None = None, budget: int = DEFAULT_BUDGET, rng=None) -> tuple[CoveringHit | None, dict]:
    """Search C1 x C2 for a pair conditionally typical with x; returns (hit or None, diagnostics)."""
    q = pair.q
    c1, c2 = _codes(pair)
    cond_joint = p.marginal_table(list(names))
    sx = cond_joint.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(cond_joint.sum(axis=(1, 2), keepdims=True) > 0, cond_joint / cond_joint.sum(axis=(1, 2), keepdims=True), 0.0)
    strategy = strategy or choose_strategy(pair, p, names)
    if strategy == "exhaustive":
        m1 = gf.enumerate_messages(c1.k, q)
        m2 = gf.enumerate_messages(c2.k, q)
        w1, w2 = c1.encode(m1), c2.encode(m2)
        counts = np.zeros((len(w1), len(w2), sx, q, q))
        for a in range(sx):
            mask = (x == a).astype(float)
            for s in range(q):
                left = (w1 == s) * mask
                for t in range(q):
                    counts[:, :, a, s, t] = left @ (w2 == t).T.astype(float)
        margins = conditional_margin(counts, cond)
        ok = np.flatnonzero(margins.ravel() <= eps * (1 + 1e-12))
        diag = {"strategy": "exhaustive", "candidates": int(margins.size)}
        if not len(ok):
            return None, diag
        i, j = divmod(int(ok[0]), len(w2))
        return CoveringHit((m1[i], m2[j]), (w1[i], w2[j]), float(margins.ravel()[ok[0]])), diag
    if strategy != "affine":
        raise ValueError(f"unknown strategy {strategy!r}")
    constraints = affine_structure(p, q, source=names[0], u=names[1], v=names[2])
    if constraints is None:
        raise EnumerationCapExceeded("the law has no affine support structure")
    rows, rhs = _support_system((c1, c2), x, constraints, q)
    space = _solve(rows, rhs, c1.k + c2.k, q)
    if space is None:
        return None, {"strategy": "affine", "consistent": False, "solution_dim": -1}
    rng = rng if rng is not None else np.random.default_rng(0)
    msgs = space.points(q, budget, rng)
    u = c1.encode(msgs[:, : c1.k])
    v = c2.encode(msgs[:, c1.k :])
    margins = conditional_margin(_triple_counts(x, u, v, sx, q), cond)
    ok = np.flatnonzero(margins <= eps * (1 + 1e-12))
    diag = {"strategy": "affine", "consistent": True, "solution_dim": space.dim, "candidates": len(msgs)}
    if not len(ok):
        return None, diag
    i = int(ok[0])
    return CoveringHit((msgs[i, : c1.k], msgs[i, c1.k :]), (u[i], v[i]), float(margins[i])), diag


def sample_source(p: JointPmf, source: str, n: int, rng: np.random.Generator) -> np.ndarray:
    px = p.marginal_table([source])
    return rng.choice(len(px), size=n, p=px)


def _covering_trial(pair, p, eps, names, strategy, budget, seed, trial) -> dict:
    rng = trial_rng(seed, trial)
    x = sample_source(p, names[0], pair.n, rng)
    hit, diag = find_typical_pair(pair, x, p, eps, names=names, strategy=strategy, budget=budget, rng=trial_rng(seed, trial, 1))
    return {
        "trial": trial,
        "success": int(hit is not None),
        "margin": hit.margin if hit is not None else math.inf,
        "solution_dim": diag.get("solution_dim", -1),
    }


def covering_mc(pair: SharedInnerPair, p: JointPmf, cfg: ExperimentConfig, *, names=("X", "U", "V")) -> ExperimentReport:
    """Fraction of x^n ~ P_X^n for which C1 x C2 holds a pair in the conditional typical set A_eps(U, V | x)."""
    q = pair.q
    for name in names[1:]:
        if p.size(name) != q:
            raise ValueError(f"{name} must take values in F_{q}")
    strategy = choose_strategy(pair, p, names)
    budget = int(cfg.param("solution_budget", DEFAULT_BUDGET))
    task = functools.partial(_covering_trial, pair, p, cfg.eps, tuple(names), strategy, budget, cfg.seed)
    rows = run_trials(task, cfg.trials, cfg.workers)
    freq = float(np.mean([r["success"] for r in rows]))
    rates = pair_rates(pair)
    slack = covering_slack(rates, covering_bounds(p, q, source=names[0], u=names[1], v=names[2]))
    return ExperimentReport(
        experiment="covering",
        rates=rates,
        distortions={},
        stats={"success_frequency": freq, "min_bound_slack": min(slack.values()), **{f"slack[{k}]": s for k, s in slack.items()}},
        config={**cfg.to_dict(), "n": pair.n, "strategy": strategy},
        half_widths={"success_frequency": frequency_half_width(freq, len(rows))},
        rows=rows,
    )


# packing ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearBinning:
    """Bin index H m + h of a message m: uniform and pairwise independent over the random (H, h)."""

    matrix: np.ndarray
    offset: np.ndarray
    q: int

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def rate(self, n: int) -> float:
        return self.rows * math.log2(self.q) / n

    def index(self, messages: np.ndarray) -> np.ndarray:
        return (gf.matmul_mod(np.atleast_2d(messages), self.matrix.T, self.q) + self.offset) % self.q


def random_linear_binning(k: int, rows: int, q: int, rng: np.random.Generator) -> LinearBinning:
    if not 0 <= rows:
        raise ValueError("bin rows must be nonnegative")
    return LinearBinning(rng.integers(0, q, (rows, k)), rng.integers(0, q, rows), q)


def _packing_trial(pair, bins, p, eps, names, strategy, budget, seed, trial) -> dict:
    q = pair.q
    c1, c2 = _codes(pair)
    rng = trial_rng(seed, trial)
    x = sample_source(p, names[0], pair.n, rng)
    hit, _ = find_typical_pair(pair, x, p, eps, names=names, strategy=strategy, budget=budget, rng=trial_rng(seed, trial, 1))
    if hit is None:
        return {"trial": trial, "covered": 0, "collision": 0, "solution_dim": -1}
    probs = p.marginal_table(list(names[1:]))
    m1, m2 = hit.messages
    b1, b2 = bins[0].index(m1)[0], bins[1].index(m2)[0]
    k1, k2 = c1.k, c2.k
    if strategy == "exhaustive":
        all1, all2 = gf.enumerate_messages(k1, q), gf.enumerate_messages(k2, q)
        in1 = all1[(bins[0].index(all1) == b1).all(axis=1)]
        in2 = all2[(bins[1].index(all2) == b2).all(axis=1)]
        msgs = np.hstack([np.repeat(in1, len(in2), axis=0), np.tile(in2, (len(in1), 1))])
        dim = -1
    else:
        rows = [np.hstack([bins[0].matrix, np.zeros((bins[0].rows, k2), dtype=np.int64)]),
                np.hstack([np.zeros((bins[1].rows, k1), dtype=np.int64), bins[1].matrix])]
        rhs = [(b1 - bins[0].offset) % q, (b2 - bins[1].offset) % q]
        support = affine_constraints(probs, q)
        if support is not None:
            r2, h2 = _support_system((c1, c2), np.zeros(pair.n, dtype=np.int64), {0: support}, q)
            rows += r2
            rhs += h2
        space = _solve(rows, rhs, k1 + k2, q)
        msgs = space.points(q, budget, trial_rng(seed, trial, 2))
        dim = space.dim
    u = c1.encode(msgs[:, :k1])
    v = c2.encode(msgs[:, k1:])
    other = ~((u == hit.words[0]).all(axis=1) & (v == hit.words[1]).all(axis=1))
    typical = typicality_margin(_pair_counts(u, v, q), probs, pair.n) <= eps * (1 + 1e-12)
    return {"trial": trial, "covered": 1, "collision": int((other & typical).any()), "solution_dim": dim}


def packing_mc(pair: SharedInnerPair, bins: tuple[LinearBinning, LinearBinning], p: JointPmf, cfg: ExperimentConfig, *, names=("X", "U", "V")) -> ExperimentReport:
    """Frequency with which the bins of the encoder's pair hold a second pair typical under P(U, V)."""
    q = pair.q
    strategy = choose_strategy(pair, p, names)
    budget = int(cfg.param("solution_budget", DEFAULT_BUDGET))
    task = functools.partial(_packing_trial, pair, tuple(bins), p, cfg.eps, tuple(names), strategy, budget, cfg.seed)
    rows = run_trials(task, cfg.trials, cfg.workers)
    covered = [r for r in rows if r["covered"]]
    if not covered:
        raise ExperimentError("the encoder found no typical pair in any trial, so the packing error is undefined")
    err = float(np.mean([r["collision"] for r in covered]))
    rates = {**pair_rates(pair), "rho1": bins[0].rate(pair.n), "rho2": bins[1].rate(pair.n)}
    slack = packing_slack(rates, packing_bounds(p, q, u=names[1], v=names[2]))
    return ExperimentReport(
        experiment="packing",
        rates=rates,
        distortions={},
        stats={
            "error_frequency": err,
            "covering_frequency": len(covered) / len(rows),
            "min_bound_slack": min(slack.values()),
            **{f"slack[{k}]": s for k, s in slack.items()},
        },
        config={**cfg.to_dict(), "n": pair.n, "strategy": strategy},
        half_widths={"error_frequency": frequency_half_width(err, len(covered))},
        rows=rows,
    )


# example laws -----------------------------------------------------------------------

PATTERNS = ("point", "u_fixed", "v_fixed", "sum_fixed", "free")


def pattern_pmf(weights: dict[str, float]) -> JointPmf:
    """Binary (X, U, V) law whose conditionals are uniform on affine subsets of F_2^2.

    X encodes a pattern and the fixed values: ``point`` fixes (u, v),
    ``u_fixed`` fixes u, ``v_fixed`` fixes v, ``sum_fixed`` fixes u + v and
    ``free`` fixes nothing.  Fixed values are uniform.
    """
    if set(weights) - set(PATTERNS):
        raise ValueError(f"patterns must come from {PATTERNS}")
    total = sum(weights.values())
    if not math.isclose(total, 1.0, abs_tol=1e-12):
        raise ValueError("pattern weights must sum to 1")
    symbols = []  # (probability, cell set)
    for name in PATTERNS:
        w = weights.get(name, 0.0)
        if name == "point":
            symbols += [(w / 4, [(s, t)]) for s in range(2) for t in range(2)]
        elif name == "u_fixed":
            symbols += [(w / 2, [(s, 0), (s, 1)]) for s in range(2)]
        elif name == "v_fixed":
            symbols += [(w / 2, [(0, s), (1, s)]) for s in range(2)]
        elif name == "sum_fixed":
            symbols += [(w / 2, [(0, s), (1, 1 ^ s)]) for s in range(2)]
        else:
            symbols.append((w, [(s, t) for s in range(2) for t in range(2)]))
    table = np.zeros((len(symbols), 2, 2))
    for a, (w, cells) in enumerate(symbols):
        for s, t in cells:
            table[a, s, t] = w / len(cells)
    return JointPmf([("X", len(symbols)), ("U", 2), ("V", 2)], table)


def diagonal_pmf(erasure: float) -> JointPmf:
    """U = V uniform; X reveals the common value except with probability ``erasure``."""
    table = np.zeros((3, 2, 2))
    table[0, 0, 0] = table[1, 1, 1] = (1 - erasure) / 2
    table[2, 0, 0] = table[2, 1, 1] = erasure / 2
    return JointPmf([("X", 3), ("U", 2), ("V", 2)], table)
