"""Ready-made region specs for the worked examples."""

from __future__ import annotations

import numpy as np

from mdlab.infotheory import DistortionFn, JointPmf, ReconstructionMap, binary_convolve, binary_entropy
from mdlab.region.spec import Decoding, RdVector, RegionSpec, Summation
from mdlab.sperner import DecoderSet, SpernerFamily


def _pair_source_distortions() -> dict[str, DistortionFn]:
    # source symbol s = 2 x + z
    x = np.array([0, 0, 1, 1])
    z = np.array([0, 1, 0, 1])
    bit = np.arange(2)
    pair_x, pair_z = np.arange(4) // 2, np.arange(4) % 2
    return {
        "x": DistortionFn((x[:, None] != bit[None, :]).astype(float)),
        "z": DistortionFn((z[:, None] != bit[None, :]).astype(float)),
        "sum": DistortionFn(((x ^ z)[:, None] != bit[None, :]).astype(float)),
        "pair": DistortionFn(
            (x[:, None] != pair_x[None, :]).astype(float) + (z[:, None] != pair_z[None, :]).astype(float)
        ),
    }


def sum_source_pmf(delta: float) -> JointPmf:
    """Independent uniform bits X, Z with test channels V1 = X + N, V2 = Z + N' (BSC(delta) noise)."""
    if not 0 <= delta <= 0.5:
        raise ValueError("delta must lie in [0, 1/2]")
    bsc = np.array([[1 - delta, delta], [delta, 1 - delta]])
    p = JointPmf.uniform("X", 2).product(JointPmf.uniform("Z", 2))
    p = p.extend("V1", 2, bsc, "X").extend("V2", 2, bsc, "Z")
    return p.derive("S", 4, lambda x, z: 2 * x + z, ["X", "Z"]).marginal(["S", "V1", "V2"]).rename({"S": "XZ"})


def sum_source_stage2_spec(delta: float) -> RegionSpec:
    """Three descriptions: {1} wants X, {2} wants Z, {3} wants X+Z, pairs want (X, Z)."""
    l = 3
    p = sum_source_pmf(delta)
    dist = _pair_source_distortions()
    one, two, three = (SpernerFamily.of([[i]], l) for i in (1, 2, 3))
    summ = Summation((one, two), three, ("V1", "V2"), 2, "W")
    dec = lambda *m: DecoderSet.of(m, l)
    decoders = {
        dec(1): Decoding(ReconstructionMap(("V1",), np.arange(2)), dist["x"]),
        dec(2): Decoding(ReconstructionMap(("V2",), np.arange(2)), dist["z"]),
        dec(3): Decoding(ReconstructionMap(("W",), np.arange(2)), dist["sum"]),
        dec(1, 2): Decoding(ReconstructionMap(("V1", "V2"), 2 * np.arange(2)[:, None] + np.arange(2)[None, :]), dist["pair"]),
        # from (V1, W) the second bit is W - V1, and symmetrically for (V2, W)
        dec(1, 3): Decoding(ReconstructionMap(("V1", "W"), 2 * np.arange(2)[:, None] + (np.arange(2)[:, None] ^ np.arange(2)[None, :])), dist["pair"]),
        dec(2, 3): Decoding(ReconstructionMap(("V2", "W"), 2 * (np.arange(2)[:, None] ^ np.arange(2)[None, :]) + np.arange(2)[:, None]), dist["pair"]),
    }
    return RegionSpec("Stage2", l, p, {}, decoders, source=("XZ",), q=2, sums=(summ,))


def sum_source_target(delta: float) -> RdVector:
    """Rates 1 - h(delta) on each description; distortions delta, delta, delta*delta and 2 delta on pairs."""
    l = 3
    r = 1 - binary_entropy(delta)
    dec = lambda *m: DecoderSet.of(m, l)
    dist = {
        dec(1): delta,
        dec(2): delta,
        dec(3): binary_convolve(delta, delta),
        dec(1, 2): 2 * delta,
        dec(1, 3): 2 * delta,
        dec(2, 3): 2 * delta,
    }
    return RdVector((r, r, r), dist)
