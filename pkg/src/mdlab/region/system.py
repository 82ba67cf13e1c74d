"""Linear inequality systems over named rate variables, membership and projection.

Every variable of a system is implicitly nonnegative.  Inequalities are stored
in the form ``sum(coeff * var) <= bound``.  The point variables (``R1``...,
``D{..}``) are fixed by a candidate RD vector; the remaining variables are the
auxiliary codebook and binning rates that a witness must supply.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

FEASIBILITY_TOL = 1e-9
# LP optima this close to the tolerance are re-decided with rational arithmetic
AMBIGUITY_BAND = 1e-7
EXACT_MAX_VARIABLES = 40
PROJECTION_MAX_VARIABLES = 40
PROJECTION_MAX_ROWS = 4000


class ProjectionBlowup(RuntimeError):
    """Fourier-Motzkin elimination exceeded its caps; check membership pointwise instead."""


class ConditioningError(RuntimeError):
    """The floating-point LP failed and the exact fallback is unavailable."""


@dataclass(frozen=True)
class Inequality:
    coeffs: tuple[tuple[str, float], ...]
    bound: float
    kind: str = ""
    label: str = ""

    @classmethod
    def of(cls, coeffs: Mapping[str, float], bound: float, kind: str = "", label: str = "") -> "Inequality":
        merged: dict[str, float] = {}
        for name, c in coeffs.items():
            merged[name] = merged.get(name, 0.0) + float(c)
        terms = tuple(sorted((n, c) for n, c in merged.items() if c != 0.0))
        return cls(terms, float(bound), kind, label)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.coeffs)

    def lhs(self, values: Mapping[str, float]) -> float:
        return sum(c * values[n] for n, c in self.coeffs)

    def holds(self, values: Mapping[str, float], tol: float = FEASIBILITY_TOL) -> bool:
        return self.lhs(values) <= self.bound + tol

    def to_dict(self) -> dict:
        return {"coeffs": dict(self.coeffs), "bound": self.bound, "kind": self.kind, "label": self.label}

    def __str__(self):
        terms = " ".join(f"{c:+.6g}*{n}" for n, c in self.coeffs) or "0"
        return f"{terms} <= {self.bound:.9g}"


@dataclass(frozen=True)
class BoundSystem:
    """Inequalities over point variables (rates, distortions) and witness variables."""

    kind: str
    point_variables: tuple[str, ...]
    variables: tuple[str, ...]
    inequalities: tuple[Inequality, ...]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        seen = set(self.point_variables) | set(self.variables)
        for ineq in self.inequalities:
            missing = set(ineq.variables) - seen
            if missing:
                raise ValueError(f"inequality uses undeclared variables {sorted(missing)}")
            if not np.isfinite(ineq.bound):
                raise ValueError(f"non-finite constant in {ineq.label or ineq}")
        used = {n for ineq in self.inequalities for n in ineq.variables}
        unused = [v for v in self.variables if v not in used]
        if unused:
            raise ValueError(f"variables without constraints: {unused}")

    @property
    def witness_variables(self) -> tuple[str, ...]:
        return self.variables

    def count(self, kind: str | None = None) -> int:
        return sum(1 for i in self.inequalities if kind is None or i.kind == kind)

    def kinds(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for i in self.inequalities:
            out[i.kind] = out.get(i.kind, 0) + 1
        return out

    def matrices(self, order: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        pos = {n: j for j, n in enumerate(order)}
        a = np.zeros((len(self.inequalities), len(order)))
        b = np.zeros(len(self.inequalities))
        for r, ineq in enumerate(self.inequalities):
            for n, c in ineq.coeffs:
                a[r, pos[n]] += c
            b[r] = ineq.bound
        return a, b

    def violations(self, values: Mapping[str, float], tol: float = FEASIBILITY_TOL) -> list[Inequality]:
        full = {n: 0.0 for n in self.point_variables + self.variables}
        full.update(values)
        neg = [n for n, v in full.items() if v < -tol]
        out = [Inequality.of({n: -1.0}, 0.0, "nonnegative", n) for n in neg]
        return out + [i for i in self.inequalities if not i.holds(full, tol)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "point_variables": list(self.point_variables),
            "variables": list(self.variables),
            "inequalities": [i.to_dict() for i in self.inequalities],
        }


@dataclass(frozen=True)
class Membership:
    feasible: bool
    slack: float
    witness: dict[str, float] | None
    method: str

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "slack": self.slack,
            "method": self.method,
            "witness": self.witness,
        }


def _fixed_system(system: BoundSystem, point: Mapping[str, float]) -> tuple[np.ndarray, np.ndarray]:
    missing = [v for v in system.point_variables if v not in point]
    if missing:
        raise ValueError(f"RD vector lacks values for {missing}")
    order = system.point_variables + system.variables
    a, b = system.matrices(order)
    k = len(system.point_variables)
    fixed = np.array([point[v] for v in system.point_variables], dtype=float)
    return a[:, k:], b - a[:, :k] @ fixed


def _min_slack(a: np.ndarray, b: np.ndarray):
    """min t s.t. a x - t <= b, x >= 0; returns (status, t, x)."""
    m, n = a.shape
    if m == 0:
        return 0, -np.inf, np.zeros(n)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_t = np.hstack([a, -np.ones((m, 1))])
    bounds = [(0, None)] * n + [(-1e6, None)]
    res = linprog(c, A_ub=a_t, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return res.status, np.nan, None
    return 0, float(res.x[-1]), np.maximum(res.x[:-1], 0.0)


def exact_feasible(a, b) -> tuple[bool, list[Fraction] | None]:
    """Decide {x >= 0 : a x <= b} nonempty with rational phase-one simplex (Bland's rule)."""
    a = [[Fraction(float(v)) for v in row] for row in np.asarray(a, dtype=float)]
    b = [Fraction(float(v)) for v in np.asarray(b, dtype=float)]
    m = len(a)
    n = len(a[0]) if m else 0
    if m == 0:
        return True, [Fraction(0)] * n
    # columns: x (n), slack (m), artificial (one per row with negative rhs)
    neg_rows = [r for r in range(m) if b[r] < 0]
    art_col = {r: n + m + k for k, r in enumerate(neg_rows)}
    width = n + m + len(neg_rows)
    tab = []
    basis = []
    for r in range(m):
        sign = -1 if b[r] < 0 else 1
        row = [sign * v for v in a[r]] + [Fraction(0)] * (m + len(neg_rows))
        row[n + r] = Fraction(sign)
        if r in art_col:
            row[art_col[r]] = Fraction(1)
            basis.append(art_col[r])
        else:
            basis.append(n + r)
        tab.append(row + [sign * b[r]])
    # phase-one objective: minimize the sum of artificials, kept as reduced costs
    cost = [Fraction(0)] * (width + 1)
    for r in neg_rows:
        for j in range(width + 1):
            cost[j] -= tab[r][j]
    for c in art_col.values():
        cost[c] = Fraction(0)
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        ratios = [
            (tab[r][-1] / tab[r][enter], basis[r], r) for r in range(m) if tab[r][enter] > 0
        ]
        if not ratios:  # unbounded below cannot happen for a sum of nonnegatives
            break
        _, _, leave = min(ratios)
        piv = tab[leave][enter]
        tab[leave] = [v / piv for v in tab[leave]]
        for r in range(m):
            if r != leave and tab[r][enter] != 0:
                f = tab[r][enter]
                tab[r] = [v - f * w for v, w in zip(tab[r], tab[leave])]
        f = cost[enter]
        cost = [v - f * w for v, w in zip(cost, tab[leave])]
        basis[leave] = enter
    if -cost[-1] != 0:
        return False, None
    x = [Fraction(0)] * n
    for r, col in enumerate(basis):
        if col < n:
            x[col] = tab[r][-1]
    return True, x


def check_membership(
    system: BoundSystem,
    point: Mapping[str, float],
    tol: float = FEASIBILITY_TOL,
    exact: bool | None = None,
) -> Membership:
    """Linear feasibility of the system with the point variables fixed.

    ``exact=None`` uses the float LP and re-decides ambiguous or failed solves
    with rational arithmetic; ``True`` forces the rational path.
    """
    a, b = _fixed_system(system, point)
    names = system.variables
    if exact is not True:
        status, t, x = _min_slack(a, b)
        decided = status == 0 and abs(t - tol) > AMBIGUITY_BAND
        if decided or exact is False:
            if status != 0:
                raise ConditioningError(f"LP solver status {status}")
            ok = t <= tol
            wit = {n: float(v) for n, v in zip(names, x)} if ok else None
            return Membership(bool(ok), float(t), wit, "lp")
    if len(names) > EXACT_MAX_VARIABLES:
        raise ConditioningError(f"exact fallback limited to {EXACT_MAX_VARIABLES} variables, have {len(names)}")
    ok, xs = exact_feasible(a, b + tol)
    wit = {n: float(v) for n, v in zip(names, xs)} if ok else None
    slack = float(np.max(a @ np.array([float(v) for v in xs]) - b, initial=-np.inf)) if ok else np.inf
    return Membership(ok, slack, wit, "exact")


# Fourier-Motzkin projection -------------------------------------------------


def _normalize_rows(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = np.max(np.abs(a), axis=1)
    keep_zero = scale == 0
    scale[keep_zero] = 1.0
    a, b = a / scale[:, None], b / scale
    # all-zero rows are either vacuous or certify emptiness
    vacuous = keep_zero & (b >= -FEASIBILITY_TOL)
    a, b = a[~vacuous], b[~vacuous]
    key = np.round(np.hstack([a, b[:, None]]), 9)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx.sort()
    return a[idx], b[idx]


def _prune_redundant(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop rows implied by the others together with nonnegativity."""
    keep = np.ones(len(b), dtype=bool)
    n = a.shape[1]
    for r in range(len(b)):
        others = keep.copy()
        others[r] = False
        if not others.any():
            continue
        res = linprog(-a[r], A_ub=a[others], b_ub=b[others], bounds=[(0, None)] * n, method="highs")
        if res.status == 0 and -res.fun <= b[r] + FEASIBILITY_TOL:
            keep[r] = False
        elif res.status == 2:  # the remaining rows are already infeasible
            break
    return a[keep], b[keep]


def project_region(
    system: BoundSystem,
    keep: Iterable[str] | None = None,
    max_rows: int = PROJECTION_MAX_ROWS,
    prune: bool = True,
) -> list[Inequality]:
    """Eliminate every variable not in ``keep`` (default: the point variables)."""
    keep = tuple(system.point_variables if keep is None else keep)
    order = tuple(dict.fromkeys(keep + system.point_variables + system.variables))
    if len(order) > PROJECTION_MAX_VARIABLES:
        raise ProjectionBlowup(f"{len(order)} variables exceed the projection cap {PROJECTION_MAX_VARIABLES}")
    a, b = system.matrices(order)
    n = len(order)
    # nonnegativity of eliminated variables takes part in the elimination
    elim = [j for j, v in enumerate(order) if v not in keep]
    nonneg = np.zeros((len(elim), n))
    nonneg[np.arange(len(elim)), elim] = -1.0
    a = np.vstack([a, nonneg])
    b = np.concatenate([b, np.zeros(len(elim))])
    a, b = _normalize_rows(a, b)
    remaining = list(elim)
    while remaining:
        counts = [(int((a[:, j] > 0).sum()), int((a[:, j] < 0).sum()), j) for j in remaining]
        p, q, j = min(counts, key=lambda c: c[0] * c[1] - c[0] - c[1])
        remaining.remove(j)
        pos, neg = a[:, j] > 0, a[:, j] < 0
        zero = ~(pos | neg)
        if p * q + int(zero.sum()) > max_rows:
            raise ProjectionBlowup(f"elimination would produce {p * q + int(zero.sum())} rows")
        ap, bp = a[pos] / a[pos, j][:, None], b[pos] / a[pos, j]
        an, bn = a[neg] / -a[neg, j][:, None], b[neg] / -a[neg, j]
        comb_a = (ap[:, None, :] + an[None, :, :]).reshape(-1, n)
        comb_b = (bp[:, None] + bn[None, :]).reshape(-1)
        a = np.vstack([a[zero], comb_a])
        b = np.concatenate([b[zero], comb_b])
        a[:, j] = 0.0
        a, b = _normalize_rows(a, b)
        if prune and len(b):
            a, b = _prune_redundant(a, b)
    kept_cols = [order.index(v) for v in keep]
    out = []
    for row, bound in zip(a, b):
        coeffs = {keep[i]: float(row[c]) for i, c in enumerate(kept_cols) if abs(row[c]) > 1e-12}
        out.append(Inequality.of(coeffs, float(bound), "projected"))
    return out

