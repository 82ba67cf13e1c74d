"""Sweep of the two-auxiliary objective that rules out the SSC scheme for the scalar example."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from mdlab.experiments.scalar import critical_weights, nonredundancy_lhs, sum_distortion_bound, sum_rate_bound
from mdlab.infotheory import asymmetric_binary_distortion, binary_entropy, blahut_arimoto, table1_pmf

CHUNK_POINTS = 1 << 16
NEGATIVE_TOL = 1e-12


@dataclass
class FigdResult:
    d0: float
    step: float
    max_value: float
    argmax: tuple[float, float, float, float]
    grid_max: float
    grid_argmax: tuple[float, float, float, float]
    bound: float
    valid_points: int  # among evaluated orbit representatives
    evaluated_points: int
    total_points: int
    x3_law: np.ndarray = field(repr=False)
    surface: np.ndarray = field(repr=False)  # max over (alpha1, beta1) for each (alpha0, beta0)

    @property
    def margin(self) -> float:
        return self.bound - self.max_value

    def summary(self) -> dict:
        return {
            "D0": self.d0,
            "step": self.step,
            "max_value": self.max_value,
            "argmax": list(self.argmax),
            "grid_max": self.grid_max,
            "grid_argmax": list(self.grid_argmax),
            "bound": self.bound,
            "margin": self.margin,
            "valid_points": self.valid_points,
            "evaluated_points": self.evaluated_points,
            "total_points": self.total_points,
            "x3_law": self.x3_law.tolist(),
        }

    def surface_rows(self) -> list[dict]:
        axis = np.round(np.arange(self.surface.shape[0]) * self.step, 10)
        return [
            {"alpha0": float(a), "beta0": float(b), "max_value": float(self.surface[i, j])}
            for i, a in enumerate(axis)
            for j, b in enumerate(axis)
        ]


def x3_law(d0: float, mode: str = "distortion") -> np.ndarray:
    """P(X, X3) of the point-to-point optimal test channel for the asymmetric distortion.

    ``mode="distortion"`` targets the sum-distortion bound, ``mode="rate"``
    targets the sum-rate bound; the two differ on the finite curve.
    """
    alpha, beta = critical_weights(d0)
    d = asymmetric_binary_distortion(alpha, beta)
    if mode == "distortion":
        res = blahut_arimoto([0.5, 0.5], d, target_distortion=sum_distortion_bound(d0, alpha, beta))
    elif mode == "rate":
        res = blahut_arimoto([0.5, 0.5], d, target_rate=sum_rate_bound(d0))
    else:
        raise ValueError(f"unknown X3 law mode {mode!r}")
    return res.joint


def _entropy_rows(t: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of a (N, ...) array of probabilities."""
    flat = t.reshape(t.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(flat > 0, np.log2(np.where(flat > 0, flat, 1.0)), 0.0)
    return -(flat * logs).sum(axis=1)


def objective_batch(source: np.ndarray, joint_x3: np.ndarray, a0, a1, b0, b1) -> np.ndarray:
    """I(T G X1 X3; X) + I(T G X2 X3; X) for each parameter tuple (nan where no valid X3 channel exists).

    ``source[x, x1, x2]`` is the three-variable table, ``joint_x3[x, x3]`` the
    fixed X-X3 law, and a_i = P(T=0 | X1=i), b_i = P(G=0 | X2=i).
    """
    a0, a1, b0, b1 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a0, a1, b0, b1))
    a = np.stack([np.stack([a0, 1 - a0], -1), np.stack([a1, 1 - a1], -1)], 1)  # (N, x1, t)
    b = np.stack([np.stack([b0, 1 - b0], -1), np.stack([b1, 1 - b1], -1)], 1)  # (N, x2, g)
    src = source.transpose(1, 2, 0)  # (x1, x2, x)
    # base[n, t, g, x1, x2, x] = P(x, x1, x2) P(t | x1) P(g | x2)
    base = (
        a.transpose(0, 2, 1)[:, :, None, :, None, None]
        * b.transpose(0, 2, 1)[:, None, :, None, :, None]
        * src[None, None, None]
    )
    side1 = base.sum(axis=4)  # (N, t, g, x1, x)
    side2 = base.sum(axis=3)  # (N, t, g, x2, x)
    ptgx = side1.sum(axis=3)  # (N, t, g, x)
    # P(t, g | x3) from P(t, g, x) = sum_x3 P(x, x3) P(t, g | x3)
    chan = np.einsum("kx,ntgx->nktg", np.linalg.inv(joint_x3), ptgx)
    valid = (chan >= -NEGATIVE_TOL).all(axis=(1, 2, 3))
    chan = np.clip(chan, 0.0, None)
    num = chan.transpose(0, 2, 3, 1)[..., None] * joint_x3.T  # (N, t, g, x3, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(ptgx[:, :, :, None, :] > 0, num / ptgx[:, :, :, None, :], 0.0)  # P(x3 | t, g, x)
    h_x = _entropy_rows(source.sum(axis=(1, 2))[None])[0]
    total = np.zeros(len(a0))
    for side in (side1, side2):
        w = side[:, :, :, :, None, :] * cond[:, :, :, None, :, :]  # (N, t, g, xi, x3, x)
        total += h_x + _entropy_rows(w.sum(axis=-1)) - _entropy_rows(w)
    return np.where(valid, total, np.nan)


def objective(d0: float, a0: float, a1: float, b0: float, b1: float, *, mode: str = "distortion") -> float:
    return float(objective_batch(table1_pmf(d0).probs, x3_law(d0, mode), a0, a1, b0, b1)[0])


def check_d0(d0: float) -> None:
    if not 0 < d0 < 0.5:
        raise ValueError(f"D0 must lie in (0, 1/2), got {d0}")
    if nonredundancy_lhs(d0) < 1:
        raise ValueError(f"the nonredundancy constraint fails at D0={d0}")


def figd_sweep(d0: float, grid_step: float = 0.01, *, refine: bool = True, mode: str = "distortion") -> FigdResult:
    """Grid search over [0,1]^4 for the maximum of the two-auxiliary objective, then local refinement.

    Relabelling T or G (a -> 1 - a, b -> 1 - b) leaves the objective unchanged,
    and so does swapping (a, b) when the source table is symmetric in
    (x1, x2); only one representative per orbit is evaluated and the surface
    is filled in by those symmetries.
    """
    check_d0(d0)
    count = int(round(1 / grid_step))
    if count < 1 or abs(count * grid_step - 1) > 1e-9:
        raise ValueError("grid_step must divide 1")
    axis = np.linspace(0.0, 1.0, count + 1)
    m = len(axis)
    half = count // 2 + 1  # indices 0..count/2 represent every relabelling orbit
    source = table1_pmf(d0).probs
    swap = np.allclose(source, source.transpose(0, 2, 1))
    law = x3_law(d0, mode)
    reduced = np.full((half, half), -np.inf)
    best, best_at, valid, evaluated = -np.inf, (0.0, 0.0, 0.0, 0.0), 0, 0
    pairs = np.stack(np.meshgrid(np.arange(half), np.arange(m), indexing="ij"), -1).reshape(-1, 2)
    keys = pairs[:, 0] * m + pairs[:, 1]
    rows_per_chunk = max(1, CHUNK_POINTS // len(pairs))
    for start in range(0, len(pairs), rows_per_chunk):
        block = np.arange(start, min(start + rows_per_chunk, len(pairs)))
        outer = np.repeat(block, len(pairs))
        inner = np.tile(np.arange(len(pairs)), len(block))
        if swap:
            keep = keys[inner] >= keys[outer]
            outer, inner = outer[keep], inner[keep]
        if not len(outer):
            continue
        ia, ib = pairs[outer], pairs[inner]
        vals = objective_batch(source, law, axis[ia[:, 0]], axis[ia[:, 1]], axis[ib[:, 0]], axis[ib[:, 1]])
        evaluated += len(vals)
        ok = ~np.isnan(vals)
        valid += int(ok.sum())
        if not ok.any():
            continue
        v = np.where(ok, vals, -np.inf)
        i = int(v.argmax())
        if v[i] > best:
            best = float(v[i])
            best_at = (float(axis[ia[i, 0]]), float(axis[ia[i, 1]]), float(axis[ib[i, 0]]), float(axis[ib[i, 1]]))
        np.maximum.at(reduced, (ia[:, 0], ib[:, 0]), v)
    if swap:
        reduced = np.maximum(reduced, reduced.T)
    fold = np.minimum(np.arange(m), count - np.arange(m))
    surface = reduced[np.ix_(fold, fold)]
    grid_best, grid_at = best, best_at
    if refine and np.isfinite(best):
        best, best_at = _refine(source, law, best, best_at, grid_step)
    return FigdResult(
        d0=d0,
        step=grid_step,
        max_value=best,
        argmax=best_at,
        grid_max=grid_best,
        grid_argmax=grid_at,
        bound=2 * (1 - binary_entropy(d0)),
        valid_points=valid,
        evaluated_points=evaluated,
        total_points=m**4,
        x3_law=law,
        surface=surface,
    )


def _refine(source, law, best, start, step):
    def negative(theta):
        t = np.clip(theta, 0.0, 1.0)
        v = objective_batch(source, law, *t)[0]
        return 10.0 if np.isnan(v) else -v

    res = minimize(negative, np.asarray(start), method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-10, "initial_simplex": None, "maxiter": 4000})
    cand = np.clip(res.x, 0.0, 1.0)
    val = objective_batch(source, law, *cand)[0]
    if np.isfinite(val) and val > best:
        return float(val), tuple(float(c) for c in cand)
    return best, start
