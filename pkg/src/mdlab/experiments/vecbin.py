"""Four descriptions of correlated bit vectors with coset binning by a nested inner code."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from mdlab import gf
from mdlab.codes import CosetCode, ProductCode, best_of, build_coset_code, quantize_batch
from mdlab.experiments.common import (
    CodeSearchError,
    ExperimentConfig,
    ExperimentReport,
    frequency_half_width,
    run_trials,
    setup_rng,
    summarize,
    trial_rng,
)
from mdlab.experiments.vecsource import block_sizes
from mdlab.gf import FieldMatrix, FieldVector
from mdlab.infotheory import binary_entropy

DEFAULTS = {
    "superblock": 64,
    "outer_blocks": 3,
    "inner_dim": 16,
    "training_words": 256,
    "training_noise": 2000,
    "search_slack": 0.05,
    "max_block_error": 0.05,
    "side_range": [0.08, 0.13],
    "batch": 25,
}


@dataclass(frozen=True, eq=False)
class BlockNestedPair:
    """Linear nested pair with a common superblock structure.

    The outer code is a product of short blocks (a source code with exact
    minimum-distance quantization); each inner superblock code is spanned by
    rows of the outer code restricted to that superblock, so inner is a
    subcode of outer.
    """

    outer: ProductCode
    inner: ProductCode

    @property
    def n(self) -> int:
        return self.outer.n

    def is_nested(self) -> bool:
        outer = self.outer.as_coset_code().generator.data
        inner = self.inner.as_coset_code().generator.data
        return gf.rank(FieldMatrix(np.vstack([outer, inner]), 2)) == gf.rank(FieldMatrix(outer, 2))

    def to_dict(self) -> dict:
        return {"kind": "block_nested", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


def _block_error(code: CosetCode, noise: np.ndarray, rng: np.random.Generator) -> float:
    msgs = rng.integers(0, 2, (noise.shape[0], code.k))
    sent = code.encode(msgs)
    _, decoded, _ = quantize_batch(code, (sent + noise) % 2)
    return float(np.mean((decoded != sent).any(axis=1)))


def build_block_nested_pair(n: int, outer_rate: float, p: float, cfg: ExperimentConfig, rng: np.random.Generator) -> BlockNestedPair:
    """Outer blocks are best-of-T source codes; inner superblock codes are best-of-T channel codes for BSC(p)."""
    prm = {**DEFAULTS, **cfg.params}
    outer_blocks: list[CosetCode] = []
    inner_blocks: list[CosetCode] = []
    for sb_len in block_sizes(n, int(prm["superblock"])):
        sizes = block_sizes(sb_len, max(1, sb_len // int(prm["outer_blocks"])))
        parts = []
        for size in sizes:
            k = min(size, math.ceil(outer_rate * size - 1e-12))
            train = rng.integers(0, 2, (int(prm["training_words"]), size))
            build = lambda g, size=size, k=k: build_coset_code(2, size, k, g, linear=True)
            score = lambda code, _g, train=train: float(quantize_batch(code, train)[2].mean())
            code, _, _ = best_of(cfg.best_of, build, score, int(rng.integers(2**63)))
            parts.append(code)
        outer_sb = ProductCode(tuple(parts)).as_coset_code().generator.data
        k_i = min(int(prm["inner_dim"]), outer_sb.shape[0])
        noise = (rng.random((int(prm["training_noise"]), sb_len)) < p).astype(np.int64)

        def build_inner(g, outer_sb=outer_sb, k_i=k_i, sb_len=sb_len):
            # inner rows are random combinations of outer rows, redrawn until full rank
            while True:
                mix = g.integers(0, 2, (k_i, outer_sb.shape[0]))
                rows = gf.matmul_mod(mix, outer_sb, 2)
                if gf.rank(FieldMatrix(rows, 2)) == k_i:
                    return CosetCode(FieldMatrix(rows, 2, cols=sb_len), FieldVector.zeros(sb_len, 2))

        inner, _, _ = best_of(cfg.best_of, build_inner, lambda c, g, noise=noise: _block_error(c, noise, g), int(rng.integers(2**63)))
        outer_blocks.extend(parts)
        inner_blocks.append(inner)
    return BlockNestedPair(ProductCode(tuple(outer_blocks)), ProductCode(tuple(inner_blocks)))


def _vecbin_batch(pair: BlockNestedPair, p: float, seed: int, trial_ids: list[int]) -> list[dict]:
    n = pair.n
    xs, zs = [], []
    for t in trial_ids:
        rng = trial_rng(seed, t)
        x = rng.integers(0, 2, n)
        noise = (rng.random(n) < p).astype(np.int64)
        xs.append(x)
        zs.append(x ^ noise)
    x, z = np.asarray(xs), np.asarray(zs)
    both = np.concatenate([x, z])
    _, q_outer, dist = quantize_batch(pair.outer, both)
    _, q_inner, _ = quantize_batch(pair.inner, both)
    bins = (both - q_inner) % 2  # coset leader: the quantization noise of the inner code
    m = len(trial_ids)
    # decoders {1,2} and {3,4}: Q_o(x) - B_i(x) = Q_i(x) - (outer noise), decoded in the inner code
    _, lossless_inner, _ = quantize_batch(pair.inner, (q_outer - bins) % 2)
    recovered = (lossless_inner + bins) % 2
    # decoder {2,3}: B_i(x) + B_i(z) = (x + z) + (inner codeword), a BSC(p) channel output
    received = (bins[:m] + bins[m:]) % 2
    _, sum_inner, _ = quantize_batch(pair.inner, received)
    sum_est = (received - sum_inner) % 2
    rows = []
    for j, t in enumerate(trial_ids):
        true_inner = (q_inner[j] + q_inner[m + j]) % 2
        inner_ok = bool(np.array_equal(sum_inner[j], true_inner))
        sum_ok = bool(np.array_equal(sum_est[j], x[j] ^ z[j]))
        rows.append(
            {
                "trial": t,
                "D1": float(dist[j]),
                "D4": float(dist[m + j]),
                "error_12": int(not np.array_equal(recovered[j], x[j])),
                "error_34": int(not np.array_equal(recovered[m + j], z[j])),
                "error_23": int(not sum_ok),
                # whenever the inner decode is right the bin identity must give x + z exactly
                "identity_ok": (not inner_ok) or sum_ok,
            }
        )
    return rows


def run_vecbin(p: float, cfg: ExperimentConfig) -> ExperimentReport:
    """Quantize X with the outer code, bin X and Z by inner cosets, and decode X, Z and X + Z losslessly."""
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    prm = {**DEFAULTS, **cfg.params}
    outer_rate = 1 - binary_entropy(p) + cfg.rate_pad
    pair = build_block_nested_pair(cfg.n, outer_rate, p, cfg, setup_rng(cfg.seed, 0))
    task = functools.partial(_vecbin_batch, pair, p, cfg.seed)
    rows = run_trials(task, cfg.trials, cfg.workers, batch_size=int(prm["batch"]))
    means, widths = summarize(rows, ["D1", "D4", "error_12", "error_34", "error_23"])
    if max(means["D1"], means["D4"]) > p + float(prm["search_slack"]):
        raise CodeSearchError(f"side distortion {max(means['D1'], means['D4']):.4f} exceeds {p} by more than {prm['search_slack']}")
    r_outer = pair.outer.rate
    r_inner = pair.inner.rate
    lo, hi = prm["side_range"]
    errors = {k: means[f"error_{k}"] for k in ("12", "34", "23")}
    return ExperimentReport(
        experiment="vecbin",
        rates={"R1": r_outer, "R2": 1 - r_inner, "R3": 1 - r_inner, "R4": r_outer},
        distortions={"{1}": means["D1"], "{4}": means["D4"], "{1,2}": errors["12"], "{3,4}": errors["34"], "{2,3}": errors["23"]},
        stats={
            "block_error_rate_12": errors["12"],
            "block_error_rate_34": errors["34"],
            "block_error_rate_23": errors["23"],
            "identity_frequency": float(np.mean([r["identity_ok"] for r in rows])),
            "nominal_outer_rate": outer_rate,
            "inner_rate": r_inner,
            "nested": float(pair.is_nested()),
        },
        config={**cfg.to_dict(), "params": prm, "p": p},
        half_widths={
            "{1}": widths["D1"],
            "{4}": widths["D4"],
            **{f"block_error_rate_{k}": frequency_half_width(v, len(rows)) for k, v in errors.items()},
        },
        checks={
            "identity_every_trial": all(r["identity_ok"] for r in rows),
            "lossless_within_budget": max(errors.values()) <= float(prm["max_block_error"]),
            "side_in_range": lo <= means["D1"] <= hi and lo <= means["D4"] <= hi,
        },
        targets={"R1": 1 - binary_entropy(p), "R2": binary_entropy(p), "{1}": p, "{4}": p},
        rows=rows,
    )
