"""Acceptance criteria 1-10; each test records one PASS/FAIL line (see the terminal summary)."""

import time

import numpy as np
import pytest

from mdlab.codes import build_shared_inner_pair
from mdlab.experiments import (
    ExperimentConfig,
    covering_mc,
    diagonal_pmf,
    figd_sweep,
    packing_mc,
    pattern_pmf,
    random_linear_binning,
    run_scalar,
    run_vecbin,
    run_vecsource,
)
from mdlab.experiments.scalar import side_distortion, sum_distortion_bound
from mdlab.infotheory import JointPmf, binary_convolve, binary_entropy
from mdlab.region import check_membership, is_member, nested_coset_bounds, ssc_bounds
from mdlab.region.catalog import sum_source_stage2_spec, sum_source_target
from mdlab.sperner import DecoderSet, SpernerFamily, ancestor_codebooks, decoded_at, enumerate_sperner
from test_experiments import DEFAULT_WEIGHTS, brute_force_covering_probability, dropped_bound_check
from test_region import random_decoders, random_pmf, ssc_spec

pytestmark = pytest.mark.slow

# reference decoded and ancestor lists, l = 3
DECODED_1 = [[[1], [2], [3]], [[1], [2]], [[1], [3]], [[1], [2, 3]], [[1]]]
DECODED_23 = [
    [[1], [2], [3]], [[1, 2], [1, 3], [2, 3]], [[1], [2]], [[1], [3]], [[2], [3]], [[1], [2, 3]], [[2], [1, 3]],
    [[3], [1, 2]], [[1, 2], [2, 3]], [[1, 3], [2, 3]], [[2]], [[3]], [[2, 3]],
]
ANCESTORS_23 = [[[1], [2], [3]], [[1], [2]], [[1], [3]], [[2], [3]], [[2], [1, 3]], [[3], [1, 2]], [[2]], [[3]]]


def _fams(lists):
    return {SpernerFamily.of(f, 3) for f in lists}


def test_criterion_1_sperner_counts(criterion):
    counts = {l: len(enumerate_sperner(l)) for l in (2, 3)}
    start = time.perf_counter()
    counts[4] = len(enumerate_sperner(4))
    elapsed = time.perf_counter() - start
    ok = counts == {2: 3, 3: 17, 4: 165} and elapsed < 10
    assert criterion(1, ok, f"counts {counts}, l=4 in {elapsed:.2f}s (need 3/17/165, <10s)")


def test_criterion_2_decoded_tables(criterion):
    d1 = set(decoded_at(DecoderSet.of([1], 3))) == _fams(DECODED_1)
    d23 = set(decoded_at(DecoderSet.of([2, 3], 3))) == _fams(DECODED_23)
    a23 = set(ancestor_codebooks(DecoderSet.of([2, 3], 3))) == _fams(ANCESTORS_23)
    assert criterion(2, d1 and d23 and a23, f"decoded {{1}} {d1}, decoded {{2,3}} {d23}, ancestors {{2,3}} {a23}")


def test_criterion_3_vecsource(criterion):
    start = time.perf_counter()
    rep = run_vecsource(0.1, ExperimentConfig(n=1024, trials=200, seed=0))
    elapsed = time.perf_counter() - start
    d1, d2, d3 = rep.distortions["{1}"], rep.distortions["{2}"], rep.distortions["{3}"]
    gap = abs(d3 - binary_convolve(d1, d2))
    rate = rep.stats["nominal_rate"]
    ok = gap <= 0.01 and max(d1, d2) <= 0.13 and elapsed < 120 and rep.checks["linearity_every_trial"]
    ok &= abs(rate - (1 - binary_entropy(0.1) + 0.05)) < 1e-12
    detail = f"D1={d1:.4f} D2={d2:.4f} D3={d3:.4f} |D3-conv(D1,D2)|={gap:.4f} (<=0.01) rate={rate:.4f} time={elapsed:.0f}s (<120)"
    assert criterion(3, ok, detail)


def test_criterion_4_vecbin(criterion):
    start = time.perf_counter()
    rep = run_vecbin(0.1, ExperimentConfig(n=512, trials=200, seed=0))
    elapsed = time.perf_counter() - start
    errors = {k: rep.stats[f"block_error_rate_{k}"] for k in ("12", "34", "23")}
    sides = rep.distortions["{1}"], rep.distortions["{4}"]
    ok = max(errors.values()) <= 0.05 and all(0.08 <= s <= 0.13 for s in sides) and elapsed < 300
    detail = f"block errors {errors} (<=0.05), side {sides[0]:.4f}/{sides[1]:.4f} in [0.08,0.13], time={elapsed:.0f}s (<300)"
    assert criterion(4, ok, detail)


def test_criterion_5_covering_and_packing(criterion):
    cfg = ExperimentConfig(n=256, trials=100, seed=0)
    p = pattern_pmf(DEFAULT_WEIGHTS)
    good = covering_mc(build_shared_inner_pair(2, 256, 100, 16, 16, 1), p, cfg)
    bad = covering_mc(build_shared_inner_pair(2, 256, 30, 8, 170, 1), p, cfg)
    newe_violation = -bad.stats["slack[r_o]"]
    # n = 8 brute-force oracle
    table = np.array([[[0.3, 0.1], [0.05, 0.05]], [[0.05, 0.1], [0.05, 0.3]]])
    small_p = JointPmf([("X", 2), ("U", 2), ("V", 2)], table)
    small = build_shared_inner_pair(2, 8, 1, 2, 2, 4)
    exact = brute_force_covering_probability(small, small_p, 1.0)
    mc = covering_mc(small, small_p, ExperimentConfig(n=8, trials=1000, seed=3, eps=1.0)).stats["success_frequency"]
    # packing: U = V, X erases the common value with probability 1/2
    pair = build_shared_inner_pair(2, 256, 141, 64, 64, 3)
    rng = np.random.default_rng(5)
    wide = tuple(random_linear_binning(c.k, 85, 2, rng) for c in pair.codes)
    narrow = tuple(random_linear_binning(c.k, 64, 2, rng) for c in pair.codes)
    pack_ok = packing_mc(pair, wide, diagonal_pmf(0.5), cfg)
    pack_bad = packing_mc(pair, narrow, diagonal_pmf(0.5), cfg)
    kept, implied = dropped_bound_check(200, seed=1)
    checks = {
        "cover>=0.9": good.stats["success_frequency"] >= 0.9 and good.stats["min_bound_slack"] >= 0.05,
        "cover<=0.2": bad.stats["success_frequency"] <= 0.2 and newe_violation >= 0.1 - 1e-9,
        "oracle": abs(mc - exact) <= 0.05,
        "pack<=0.1": pack_ok.stats["error_frequency"] <= 0.1 and pack_ok.stats["min_bound_slack"] > 0,
        "pack>=0.5": pack_bad.stats["error_frequency"] >= 0.5 and pack_bad.stats["slack[sum]"] <= -0.1 + 1e-9,
        "dropped": kept == implied == 200,
    }
    detail = (
        f"cover {good.stats['success_frequency']:.2f} (slack {good.stats['min_bound_slack']:.3f}) / "
        f"{bad.stats['success_frequency']:.2f} (newe violated by {newe_violation:.3f}); "
        f"n=8 mc {mc:.3f} vs exact {exact:.3f}; pack {pack_ok.stats['error_frequency']:.2f} "
        f"(slack {pack_ok.stats['min_bound_slack']:.3f}) / {pack_bad.stats['error_frequency']:.2f} "
        f"(sum slack {pack_bad.stats['slack[sum]']:.3f}); dropped bound {implied}/{kept}; {checks}"
    )
    assert criterion(5, all(checks.values()), detail)


def test_criterion_6_figd(criterion):
    start = time.perf_counter()
    fine = figd_sweep(0.035, 0.01)
    elapsed = time.perf_counter() - start
    bound = 2 * (1 - binary_entropy(0.035))
    ok = fine.max_value < bound and fine.margin >= 0.1 and fine.max_value <= 1.45 and elapsed < 600
    detail = (
        f"max {fine.max_value:.4f} at {tuple(round(v, 3) for v in fine.argmax)}, bound {bound:.4f}, "
        f"margin {fine.margin:.4f} (>=0.1), <=1.45, time={elapsed:.0f}s (<600)"
    )
    assert criterion(6, ok, detail)


def test_criterion_7_ssc_stage1_equivalence(criterion):
    agree = total = 0
    for seed in range(20):
        p = random_pmf(500 + seed)
        dec = random_decoders(seed)
        ssc = ssc_bounds(ssc_spec(p, dec))
        st1 = nested_coset_bounds(ssc_spec(p, dec, "Stage1", q=2))
        rng = np.random.default_rng(1000 + seed)
        base = {"D{1}": 0.0, "D{2}": 0.0, "D{1,2}": 0.0}
        for row in ssc.inequalities:
            if row.kind == "distortion":
                base[row.variables[0]] = -row.bound
        for _ in range(50):
            v = {"R1": rng.uniform(0, 1.5), "R2": rng.uniform(0, 1.5)}
            v.update({k: max(val + rng.uniform(-0.05, 0.05), 0.0) for k, val in base.items()})
            agree += check_membership(ssc, v).feasible == check_membership(st1, v).feasible
            total += 1
    assert criterion(7, agree == total, f"{agree}/{total} membership decisions agree (need 100%)")


def test_criterion_8_example4_region(criterion):
    spec = sum_source_stage2_spec(0.1)
    target = sum_source_target(0.1)
    d3 = DecoderSet.of([3], 3)
    lowered = target.replace(distortions={d3: target.distortions[d3] - 0.1})
    yes, no = is_member(spec, target), is_member(spec, lowered)
    ok = yes.feasible and yes.witness is not None and not no.feasible
    assert criterion(8, ok, f"RDv3 feasible={yes.feasible} (witness {yes.witness is not None}); D3-0.1 feasible={no.feasible}")


def test_criterion_9_scalar(criterion):
    d0 = 0.035
    rep = run_scalar(d0, ExperimentConfig(n=1024, trials=10, seed=0))
    side = side_distortion(d0)
    bound = sum_distortion_bound(d0)
    d1, d2, d3, pair = (rep.distortions[k] for k in ("{1}", "{2}", "{3}", "{1,2}"))
    ok = max(abs(d1 - side), abs(d2 - side)) <= 0.05 and abs(d3 - bound) <= 0.05 and pair <= d0 + 0.03
    detail = f"D1={d1:.4f} D2={d2:.4f} vs {side:.4f}; D3={d3:.4f} vs {bound:.4f}; D12={pair:.4f} (<= {d0 + 0.03:.3f})"
    assert criterion(9, ok, detail)


def test_criterion_10_documented_only(criterion):
    # strict-improvement claims rest on converse proofs; criteria 6 and 8 are the computable surrogates
    assert criterion(10, None, "not computable; covered by the surrogates in criteria 6 and 8 (see README)")
