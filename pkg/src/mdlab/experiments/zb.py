"""Search for a two-description test channel that places a target RD point inside the ZB region.

The central decoder is lossless by construction (U12 = X), and the side
decoders use the MAP estimate of X from (C, U_i).  The search minimises a
log-sum-exp relaxation of the worst constraint violation over softmax
parametrised P(C | X) P(U1, U2 | X, C), with Nelder-Mead on an increasing
temperature schedule from seeded random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from mdlab.experiments.common import ExperimentConfig, setup_rng
from mdlab.infotheory import JointPmf, ReconstructionMap, entropy_of_table, hamming_distortion
from mdlab.region import Decoding, Membership, RdVector, RegionSpec, check_membership, egc_bounds, zb_bounds
from mdlab.sperner import DecoderSet

TARGET_RATES = (0.629, 0.629)
TARGET_SIDE = 0.11
DEFAULTS = {
    "aux_size": 2,
    "restarts": 12,
    "temperatures": [20.0, 100.0, 500.0],
    "max_iter": 4000,
    "init_scale": 2.0,
}
SIDE_1, SIDE_2, CENTRAL = (DecoderSet.of(m, 2) for m in ([1], [2], [1, 2]))


def target_vector(rates=TARGET_RATES, side: float = TARGET_SIDE) -> RdVector:
    return RdVector(rates, {SIDE_1: side, SIDE_2: side, CENTRAL: 0.0})


def _table(theta: np.ndarray, size: int) -> np.ndarray:
    """P(x, c, u1, u2) with X uniform on {0, 1} and C binary."""
    common = softmax(theta[:4].reshape(2, 2), axis=1)
    sides = softmax(theta[4:].reshape(2, 2, size * size), axis=2).reshape(2, 2, size, size)
    return 0.5 * common[:, :, None, None] * sides


def _info_with_x(table: np.ndarray, keep: tuple[int, ...]) -> float:
    """I(variables on axes ``keep``; X) for a (x, c, u1, u2) table."""
    drop = tuple(i for i in (1, 2, 3) if i not in keep)
    m = table.sum(axis=drop)
    return entropy_of_table(m.sum(axis=0)) + entropy_of_table(table.sum(axis=(1, 2, 3))) - entropy_of_table(m)


def channel_stats(table: np.ndarray) -> dict[str, float]:
    """ZB rate bounds and MAP side distortions when U12 = X."""
    h_c = entropy_of_table(table.sum(axis=(0, 2, 3)))
    penalty = (
        entropy_of_table(table.sum(axis=(0, 3)))
        + entropy_of_table(table.sum(axis=(0, 2)))
        - entropy_of_table(table.sum(axis=0))
        - h_c
    )
    side1, side2 = table.sum(axis=3), table.sum(axis=2)
    return {
        "R1": _info_with_x(table, (1, 2)),
        "R2": _info_with_x(table, (1, 3)),
        "sum": _info_with_x(table, (1,)) + entropy_of_table(table.sum(axis=(1, 2, 3))) + penalty,
        "D1": float(np.minimum(side1[0], side1[1]).sum()),
        "D2": float(np.minimum(side2[0], side2[1]).sum()),
    }


def _violations(stats: dict, target: RdVector) -> np.ndarray:
    r1, r2 = target.rates
    return np.array(
        [
            stats["R1"] - r1,
            stats["R2"] - r2,
            stats["sum"] - (r1 + r2),
            stats["D1"] - target.distortions[SIDE_1],
            stats["D2"] - target.distortions[SIDE_2],
        ]
    )


@dataclass(frozen=True)
class ZbWitness:
    pmf: JointPmf
    target: RdVector
    slack: float  # max constraint violation of the target (negative = strictly inside)
    stats: dict
    zb: Membership
    egc: Membership
    restarts: int

    def __iter__(self):
        yield self.pmf
        yield self.target

    def summary(self) -> dict:
        return {
            "target": self.target.to_dict(),
            "slack": self.slack,
            "stats": self.stats,
            "zb": self.zb.to_dict(),
            "egc": self.egc.to_dict(),
            "restarts": self.restarts,
        }


def witness_pmf(table: np.ndarray) -> JointPmf:
    """Variables X, C, U1, U2 from the table plus U12 = X and the EGC side variables V_i = (C, U_i)."""
    size = table.shape[2]
    p = JointPmf([("X", 2), ("C", 2), ("U1", size), ("U2", size)], table)
    p = p.derive("U12", 2, lambda x: x, ["X"])
    p = p.derive("V1", 2 * size, lambda c, u: size * c + u, ["C", "U1"])
    return p.derive("V2", 2 * size, lambda c, u: size * c + u, ["C", "U2"])


def _map_decoding(p: JointPmf, inputs: list[str]) -> Decoding:
    joint = p.marginal_table(["X", *inputs])
    return Decoding(ReconstructionMap(tuple(inputs), joint.argmax(axis=0)), hamming_distortion(2))


def zb_spec(p: JointPmf, *, degenerate: bool = False) -> RegionSpec:
    """ZB spec; ``degenerate`` drops the common and central parts and uses V_i as the side auxiliaries."""
    if degenerate:
        aux = {"1": "V1", "2": "V2"}
        decoders = {SIDE_1: _map_decoding(p, ["V1"]), SIDE_2: _map_decoding(p, ["V2"]), CENTRAL: _map_decoding(p, ["V1", "V2"])}
    else:
        aux = {"common": "C", "1": "U1", "2": "U2", "12": "U12"}
        decoders = {SIDE_1: _map_decoding(p, ["C", "U1"]), SIDE_2: _map_decoding(p, ["C", "U2"]), CENTRAL: _map_decoding(p, ["U12"])}
    return RegionSpec("ZB", 2, p, aux, decoders)


def egc_spec(p: JointPmf, *, degenerate: bool = False) -> RegionSpec:
    """EGC spec with constant time sharing and V_i = (C, U_i) as the side auxiliaries."""
    aux = {"1": "V1", "2": "V2"} if degenerate else {"1": "V1", "2": "V2", "12": "U12"}
    central = ["V1", "V2"] if degenerate else ["U12"]
    decoders = {SIDE_1: _map_decoding(p, ["V1"]), SIDE_2: _map_decoding(p, ["V2"]), CENTRAL: _map_decoding(p, central)}
    return RegionSpec("EGC", 2, p, aux, decoders)


def degenerate_systems(p: JointPmf):
    """(ZB system, EGC system) with no common or central auxiliary; the two must coincide."""
    return zb_bounds(zb_spec(p, degenerate=True)), egc_bounds(egc_spec(p, degenerate=True))


def zb_witness_search(cfg: ExperimentConfig, target: RdVector | None = None) -> ZbWitness:
    """Best-effort search; the verdicts come from the region systems, not from the search objective."""
    prm = {**DEFAULTS, **cfg.params}
    size = int(prm["aux_size"])
    if not 2 <= size <= 4:
        raise ValueError("aux_size must lie in [2, 4]")
    target = target or target_vector()
    rng = setup_rng(cfg.seed, 0)
    dim = 4 + 4 * size * size

    def smooth(theta, temp):
        return logsumexp(temp * _violations(channel_stats(_table(theta, size)), target)) / temp

    best_theta, best = None, np.inf
    for _ in range(int(prm["restarts"])):
        theta = rng.normal(0.0, float(prm["init_scale"]), dim)
        for temp in prm["temperatures"]:
            res = minimize(smooth, theta, args=(float(temp),), method="Nelder-Mead",
                           options={"maxiter": int(prm["max_iter"]), "xatol": 1e-6, "fatol": 1e-9})
            theta = res.x
        worst = float(_violations(channel_stats(_table(theta, size)), target).max())
        if worst < best:
            best, best_theta = worst, theta
    table = _table(best_theta, size)
    p = witness_pmf(table)
    point = target.assignment()
    return ZbWitness(
        pmf=p,
        target=target,
        slack=best,
        stats=channel_stats(table),
        zb=check_membership(zb_bounds(zb_spec(p)), point),
        egc=check_membership(egc_bounds(egc_spec(p)), point),
        restarts=int(prm["restarts"]),
    )
