"""Scalar binary source: one shared linear code quantizes x to a codeword pair typical under the three-variable table."""

from __future__ import annotations

import functools
import math

import numpy as np

from mdlab.codes import CosetCode, best_of, build_coset_code
from mdlab.experiments.common import (
    ExperimentConfig,
    ExperimentError,
    ExperimentReport,
    run_trials,
    setup_rng,
    summarize,
    trial_rng,
)
from mdlab.infotheory import (
    SQRT2,
    asymmetric_binary_distortion,
    binary_entropy,
    conditional_entropy,
    entropy,
    table1_pmf,
    typicality_margin,
)

ALPHA, BETA = 4.566, 2.495
DEFAULTS = {
    "block": 32,
    "candidates": 512,
    "passes": 3,
    "alpha": ALPHA,
    "beta": BETA,
    "training_blocks": 32,
    "max_covering_failure": 0.2,
}


# closed forms for the scalar example --------------------------------------------


def side_distortion(d0: float) -> float:
    return 0.5 * (1 - (1 - 2 * d0) * (2 - SQRT2))


def sum_distortion_bound(d0: float, alpha: float = ALPHA, beta: float = BETA) -> float:
    return alpha * (SQRT2 - 1) * d0 + beta * ((3 - 2 * SQRT2) / 2 * (1 - d0) + d0 / 2)


def sum_rate_bound(d0: float) -> float:
    return 0.5 + binary_entropy(SQRT2 - 1) - binary_entropy(SQRT2 / 2) - binary_entropy(d0) / 2


def nonredundancy_lhs(d0: float) -> float:
    """Left side of the constraint that must be at least 1 for the scalar scheme to apply."""
    c = 2 * (SQRT2 - 1)
    return binary_entropy(d0) + 2 * binary_entropy(SQRT2 / 2) + binary_entropy(c * d0) + binary_entropy(c * (1 - d0))


def critical_weights(d0: float) -> tuple[float, float]:
    """(alpha, beta) of the asymmetric distortion for which the SSC scheme provably falls short."""
    c = SQRT2 - 1
    alpha = math.log2((1 - 2 * c * d0) / (2 * (2 - SQRT2) * d0))
    beta = -math.log2((1 - 2 * c * (1 - d0)) / (2 * (2 - SQRT2) * (1 - d0)))
    return alpha, beta


def bin_rates(d0: float, pad: float) -> dict[str, float]:
    """Code rate and bin rates of the three descriptions from the achievability argument."""
    p = table1_pmf(d0)
    h_pair = conditional_entropy(p, ["V1", "V2"], "X")
    p = p.derive("V3", 2, lambda a, b: a ^ b, ["V1", "V2"])
    return {
        "code": 1 - h_pair / 2 + pad,
        "R1": entropy(p, "V1") - h_pair / 2 + pad,
        "R2": entropy(p, "V2") - h_pair / 2 + pad,
        "R3": entropy(p, "V3") - h_pair / 2 + pad,
    }


# pair quantizer ---------------------------------------------------------------------


def _pair_counts(x: np.ndarray, words: np.ndarray) -> np.ndarray:
    """counts[a, u, v, i, j] = #positions with x = a, words[i] = u, words[j] = v (int16)."""
    m = len(words)
    out = np.empty((2, 2, 2, m, m), dtype=np.int16)
    for a in range(2):
        mask = (x == a).astype(np.float32)
        total = mask.sum()
        ones = words @ mask
        both = (words * mask) @ words.T
        out[a, 1, 1] = both
        out[a, 1, 0] = ones[:, None] - both
        out[a, 0, 1] = ones[None, :] - both
        out[a, 0, 0] = total - ones[:, None] - ones[None, :] + both
    return out


class PairQuantizer:
    """Finds a codeword pair (c1, c2) of a linear product code with identical blocks, typical with x.

    Each block keeps the ``candidates`` codewords with the highest likelihood
    score sum log P(V | x); pairs are then chosen block by block to minimise
    the chi-square distance between the running joint type of (x, c1, c2) and
    the target law, followed by ``passes - 1`` coordinate-descent sweeps.
    """

    def __init__(self, block: CosetCode, pmf_table: np.ndarray, candidates: int, passes: int):
        self.block = block
        self.table = pmf_table
        self.cond = pmf_table / pmf_table.sum(axis=(1, 2), keepdims=True)
        marg = self.cond.sum(axis=2)
        self.score = (np.log2(marg[:, 1]) - np.log2(marg[:, 0])).astype(np.float32)
        self.words = block.codewords().astype(np.float32)
        self.candidates = min(candidates, len(self.words))
        self.passes = passes

    def quantize(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = self.block.n
        blocks = x.reshape(-1, b)
        cand_words, cand_counts = [], []
        for xb in blocks:
            s = self.words @ self.score[xb]
            if self.candidates < len(s):
                idx = np.argpartition(-s, self.candidates - 1)[: self.candidates]
                idx.sort()
            else:
                idx = np.arange(len(s))
            w = self.words[idx]
            cand_words.append(w)
            cand_counts.append(_pair_counts(xb, w))
        total_x = np.array([(x == 0).sum(), (x == 1).sum()], dtype=float)
        running = np.zeros((2, 2, 2))
        chosen: list[tuple[int, int] | None] = [None] * len(blocks)
        chosen_counts = [np.zeros((2, 2, 2))] * len(blocks)
        for sweep in range(self.passes):
            for j, counts in enumerate(cand_counts):
                if chosen[j] is not None:
                    running = running - chosen_counts[j]
                trial = running[..., None, None] + counts
                if sweep == 0:
                    nx = trial.sum(axis=(1, 2), keepdims=True)
                else:
                    nx = total_x[:, None, None, None, None]
                target = nx * self.cond[..., None, None]
                objective = ((trial - target) ** 2 / target).sum(axis=(0, 1, 2))
                i, k = np.unravel_index(int(objective.argmin()), objective.shape)
                chosen[j] = (i, k)
                chosen_counts[j] = counts[:, :, :, i, k].astype(float)
                running = running + chosen_counts[j]
        c1 = np.concatenate([cand_words[j][i] for j, (i, _) in enumerate(chosen)]).astype(np.int64)
        c2 = np.concatenate([cand_words[j][k] for j, (_, k) in enumerate(chosen)]).astype(np.int64)
        return c1, c2


def _scalar_trial(quantizer: PairQuantizer, n: int, alpha: float, beta: float, eps: float, seed: int, trial: int) -> dict:
    rng = trial_rng(seed, trial)
    x = rng.integers(0, 2, n)
    c1, c2 = quantizer.quantize(x)
    counts = np.zeros((2, 2, 2))
    np.add.at(counts, (x, c1, c2), 1)
    margin = float(typicality_margin(counts, quantizer.table, n))
    d3 = asymmetric_binary_distortion(alpha, beta)
    joint = c1 | c2  # reconstruction is 0 only when both codewords are 0
    return {
        "trial": trial,
        "D1": float(np.mean(c1 != x)),
        "D2": float(np.mean(c2 != x)),
        "D3": d3.average(x, c1 ^ c2),
        "D_pair": float(np.mean(joint != x)),
        "typicality_margin": margin,
        "covered": int(margin <= eps),
    }


def build_scalar_code(d0: float, cfg: ExperimentConfig) -> tuple[CosetCode, float]:
    """Block code of length ``block`` with k = ceil(code rate * block); best of T by training typicality margin."""
    prm = {**DEFAULTS, **cfg.params}
    b = int(prm["block"])
    rate = bin_rates(d0, cfg.rate_pad)["code"]
    k = min(b, math.ceil(rate * b - 1e-12))
    table = table1_pmf(d0).probs
    rng = setup_rng(cfg.seed, 0)
    train = rng.integers(0, 2, b * int(prm["training_blocks"]))

    def score(code, _g):
        c1, c2 = PairQuantizer(code, table, int(prm["candidates"]), int(prm["passes"])).quantize(train)
        counts = np.zeros((2, 2, 2))
        np.add.at(counts, (train, c1, c2), 1)
        return float(typicality_margin(counts, table, len(train)))

    code, margin, _ = best_of(cfg.best_of, lambda g: build_coset_code(2, b, k, g, linear=True), score, int(rng.integers(2**63)))
    return code, margin


def run_scalar(d0: float, cfg: ExperimentConfig) -> ExperimentReport:
    """Joint pair quantization of a uniform bit source under the three-variable table at distortion d0."""
    if not 0 < d0 < 0.5:
        raise ValueError("d0 must lie in (0, 1/2)")
    if nonredundancy_lhs(d0) < 1:
        raise ValueError(f"the nonredundancy constraint fails at d0={d0}")
    prm = {**DEFAULTS, **cfg.params}
    b = int(prm["block"])
    if cfg.n % b:
        raise ValueError(f"n={cfg.n} must be a multiple of the block length {b}")
    code, train_margin = build_scalar_code(d0, cfg)
    quantizer = PairQuantizer(code, table1_pmf(d0).probs, int(prm["candidates"]), int(prm["passes"]))
    alpha, beta = float(prm["alpha"]), float(prm["beta"])
    task = functools.partial(_scalar_trial, quantizer, cfg.n, alpha, beta, cfg.eps, cfg.seed)
    rows = run_trials(task, cfg.trials, cfg.workers)
    means, widths = summarize(rows, ["D1", "D2", "D3", "D_pair", "typicality_margin"])
    failure = 1 - float(np.mean([r["covered"] for r in rows]))
    if failure > float(prm["max_covering_failure"]):
        raise ExperimentError(f"covering failed in {failure:.0%} of trials; n is too small for d0={d0}")
    rates = bin_rates(d0, cfg.rate_pad)
    side, d3_bound = side_distortion(d0), sum_distortion_bound(d0, alpha, beta)
    return ExperimentReport(
        experiment="scalar",
        rates={"R1": rates["R1"], "R2": rates["R2"], "R3": rates["R3"]},
        distortions={
            "{1}": means["D1"],
            "{2}": means["D2"],
            "{3}": means["D3"],
            "{1,2}": means["D_pair"],
            "{1,3}": means["D_pair"],
            "{2,3}": means["D_pair"],
        },
        stats={
            "code_rate": code.rate,
            "nominal_code_rate": rates["code"],
            "covering_failure_rate": failure,
            "mean_typicality_margin": means["typicality_margin"],
            "training_typicality_margin": train_margin,
            "R3_bound": sum_rate_bound(d0),
        },
        config={**cfg.to_dict(), "params": prm, "D0": d0},
        half_widths={"{1}": widths["D1"], "{2}": widths["D2"], "{3}": widths["D3"], "{1,2}": widths["D_pair"]},
        checks={
            "side_matches_formula": max(abs(means["D1"] - side), abs(means["D2"] - side)) <= 0.05,
            "sum_matches_bound": abs(means["D3"] - d3_bound) <= 0.05,
            "pair_within_budget": means["D_pair"] <= d0 + 0.03,
        },
        targets={
            "R1": (1 - binary_entropy(d0)) / 2,
            "R3": sum_rate_bound(d0),
            "{1}": side,
            "{2}": side,
            "{3}": d3_bound,
            "{1,2}": d0,
        },
        rows=rows,
    )
