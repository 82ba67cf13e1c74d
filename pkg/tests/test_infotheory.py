import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdlab.infotheory import (
    DistortionFn,
    JointPmf,
    ReconstructionMap,
    asymmetric_binary_distortion,
    binary_convolve,
    binary_entropy,
    blahut_arimoto,
    conditional_entropy,
    entropy,
    expected_distortion,
    hamming_distortion,
    is_jointly_typical,
    mutual_information,
    table1_pmf,
)

SQRT2 = math.sqrt(2)
D0 = 0.035
ALPHA, BETA = 4.566, 2.495


def random_pmf(seed, sizes=(2, 3, 2)):
    rng = np.random.default_rng(seed)
    t = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    names = ["A", "B", "C", "D"][: len(sizes)]
    return JointPmf(list(zip(names, sizes)), t)


def scalar_rate_bound(d0):
    return 0.5 + binary_entropy(SQRT2 - 1) - binary_entropy(SQRT2 / 2) - binary_entropy(d0) / 2


def scalar_d3_bound(d0, alpha=ALPHA, beta=BETA):
    return alpha * (SQRT2 - 1) * d0 + beta * ((3 - 2 * SQRT2) / 2 * (1 - d0) + d0 / 2)


class TestJointPmf:
    def test_rejects_bad_tables(self):
        with pytest.raises(ValueError):
            JointPmf([("X", 2)], [0.5, 0.6])
        with pytest.raises(ValueError):
            JointPmf([("X", 2)], [1.5, -0.5])
        with pytest.raises(ValueError):
            JointPmf([("X", 2), ("X", 2)], np.full((2, 2), 0.25))

    def test_cell_cap(self):
        with pytest.raises(ValueError):
            JointPmf([("A", 1 << 13), ("B", 1 << 12)], None)

    def test_unknown_variable(self):
        with pytest.raises(KeyError):
            entropy(random_pmf(0), "Z")

    def test_marginal_order(self):
        p = random_pmf(1)
        assert np.allclose(p.marginal_table(["C", "A"]), p.probs.sum(axis=1).T)

    def test_extend_and_derive(self):
        p = JointPmf([("A", 2), ("B", 3)], np.arange(6) / 15)
        e = p.extend("C", 2, np.array([[1, 0], [0, 1], [0.5, 0.5]]), "B")
        assert np.allclose(e.conditional_table("C", "B"), [[1, 0], [0, 1], [0.5, 0.5]])
        assert np.allclose(e.marginal_table(["A", "B"]), p.probs)
        w = e.derive("W", 2, lambda a, c: (a + c) % 2, ["A", "C"])
        assert conditional_entropy(w, "W", ["A", "C"]) == pytest.approx(0, abs=1e-12)

    def test_roundtrip_dict(self):
        p = random_pmf(3)
        assert JointPmf.from_dict(p.to_dict()) == p

    def test_sample_frequencies(self):
        p = random_pmf(4, (2, 2))
        s = p.sample(200_000, 9)
        freq = np.zeros((2, 2))
        np.add.at(freq, (s["A"], s["B"]), 1)
        assert np.allclose(freq / 200_000, p.probs, atol=0.005)


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy(JointPmf.uniform("X", 2), "X") == pytest.approx(1.0)

    def test_independent_mi_zero(self):
        p = JointPmf.uniform("X", 2).product(JointPmf([("Y", 3)], [0.2, 0.3, 0.5]))
        assert mutual_information(p, "X", "Y") == pytest.approx(0, abs=1e-12)

    def test_table1_x_uniform(self):
        p = table1_pmf(D0)
        rows = p.probs.sum(axis=(1, 2))
        assert np.allclose(rows, [0.5, 0.5])
        assert entropy(p, "X") == pytest.approx(1.0)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_chain_rule_and_nonnegativity(self, seed):
        p = random_pmf(seed)
        assert entropy(p, ["A", "B"]) == pytest.approx(
            entropy(p, "A") + conditional_entropy(p, "B", "A"), abs=1e-10
        )
        assert mutual_information(p, "A", "B") >= -1e-12
        assert mutual_information(p, "A", "B", given="C") >= -1e-12
        assert conditional_entropy(p, "A", ["B", "C"]) <= conditional_entropy(p, "A", "B") + 1e-12
        assert conditional_entropy(p, "A", "B") <= entropy(p, "A") + 1e-12


class TestBinaryHelpers:
    def test_values(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0) == 0.0
        assert binary_entropy(1) == 0.0
        assert binary_convolve(0.1, 0.1) == pytest.approx(0.18)

    def test_range(self):
        with pytest.raises(ValueError):
            binary_entropy(1.2)
        with pytest.raises(ValueError):
            binary_convolve(-0.1, 0.2)

    @given(a=st.floats(0, 1), b=st.floats(0, 1))
    def test_convolve_symmetric(self, a, b):
        assert binary_convolve(a, b) == pytest.approx(binary_convolve(b, a))


class TestTypicality:
    def test_iid_sequences_typical(self):
        # smallest cell 0.4: eps * p is about 4 standard deviations of the frequency at n = 10^4
        p = JointPmf([("X", 2), ("Y", 2)], [[0.6, 0.0], [0.0, 0.4]])
        rng = np.random.default_rng(0)
        hits = 0
        for _ in range(1000):
            s = p.sample(10_000, rng)
            hits += is_jointly_typical((s["X"], s["Y"]), p, 0.05)
        assert hits / 1000 >= 0.99

    def test_constant_sequence_not_typical(self):
        p = JointPmf.uniform("X", 2)
        assert not is_jointly_typical((np.zeros(100, int),), p, 0.05)

    def test_zero_probability_symbol(self):
        p = JointPmf([("X", 3)], [0.5, 0.5, 0.0])
        seq = np.array([0, 1] * 50 + [2])
        assert not is_jointly_typical((seq,), p, 10.0)

    def test_length_mismatch(self):
        p = JointPmf([("X", 2), ("Y", 2)], np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            is_jointly_typical((np.zeros(4, int), np.zeros(5, int)), p, 0.1)


class TestScalarExampleSource:
    def test_cells(self):
        p = table1_pmf(D0).probs
        assert p[0, 0, 0] == pytest.approx((1 - D0) / 2)
        assert p[0, 0, 1] == pytest.approx((SQRT2 - 1) * D0 / 2)
        assert p[1, 1, 1] == pytest.approx((3 - 2 * SQRT2) * (1 - D0) / 2)
        assert p[1, 0, 0] == pytest.approx(D0 / 2)

    def test_mass_one(self):
        assert table1_pmf(D0).probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_structure(self):
        # independent V1, V2 and X = OR(V1, V2) through a BSC(D0)
        p = table1_pmf(D0)
        v = p.marginal_table(["V1", "V2"])
        assert np.allclose(v, np.outer(v.sum(1), v.sum(0)))
        assert v.sum(1)[1] == pytest.approx(1 - SQRT2 / 2)

    @pytest.mark.parametrize("d0", [0.01, 0.035, 0.2, 0.45])
    def test_sum_rate_identity(self, d0):
        p = table1_pmf(d0)
        assert mutual_information(p, ["V1", "V2"], "X") == pytest.approx(1 - binary_entropy(d0), abs=1e-9)

    def test_range(self):
        for bad in (0, 0.5, -0.1):
            with pytest.raises(ValueError):
                table1_pmf(bad)


class TestDistortion:
    def test_expected_distortion(self):
        p = table1_pmf(D0).derive("V3", 2, lambda a, b: a ^ b, ["V1", "V2"])
        d3 = asymmetric_binary_distortion(ALPHA, BETA)
        g = ReconstructionMap(("V3",), np.array([0, 1]))
        assert expected_distortion(p, g, d3) == pytest.approx(scalar_d3_bound(D0))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DistortionFn(np.array([[0, -1], [1, 0]]))


class TestBlahutArimoto:
    @pytest.mark.parametrize("target", [0.05, 0.1, 0.25, 0.4])
    def test_bss_hamming(self, target):
        r = blahut_arimoto([0.5, 0.5], hamming_distortion(), target_distortion=target)
        assert r.rate == pytest.approx(1 - binary_entropy(target), abs=1e-6)
        assert np.allclose(r.channel, [[1 - target, target], [target, 1 - target]], atol=1e-6)
        assert r.kkt_residual < 1e-9

    def test_zero_distortion(self):
        r = blahut_arimoto([0.3, 0.7], hamming_distortion(), target_distortion=0.0)
        assert r.rate == pytest.approx(binary_entropy(0.3))

    def test_large_distortion_zero_rate(self):
        r = blahut_arimoto([0.5, 0.5], hamming_distortion(), target_distortion=0.6)
        assert r.rate == pytest.approx(0.0)

    def test_requires_one_mode(self):
        with pytest.raises(ValueError):
            blahut_arimoto([0.5, 0.5], hamming_distortion())

    def test_monotone_in_target(self):
        d = asymmetric_binary_distortion(ALPHA, BETA)
        rates = [blahut_arimoto([0.5, 0.5], d, target_distortion=t).rate for t in np.linspace(0.05, 1.0, 12)]
        assert all(a >= b - 1e-9 for a, b in zip(rates, rates[1:]))

    def test_asymmetric_at_d3_recovers_sum_channel(self):
        # at distortion D3 the optimal test channel is the (X, V1 xor V2) law
        p = table1_pmf(D0).derive("V3", 2, lambda a, b: a ^ b, ["V1", "V2"])
        r = blahut_arimoto([0.5, 0.5], asymmetric_binary_distortion(ALPHA, BETA), target_distortion=scalar_d3_bound(D0))
        assert np.allclose(r.joint, p.marginal_table(["X", "V3"]), atol=1e-5)
        assert r.rate == pytest.approx(mutual_information(p, "V3", "X"), abs=1e-5)

    def test_asymmetric_at_rate_bound_matches_d3(self):
        # Literal reading of the acceptance example: at the rate of the scalar R3 bound the
        # distortion should equal the D3 bound.  The optimal point-to-point curve gives a
        # larger distortion (about 0.343 against 0.316); see the decisions ledger.
        r = blahut_arimoto([0.5, 0.5], asymmetric_binary_distortion(ALPHA, BETA), target_rate=scalar_rate_bound(D0))
        assert r.distortion == pytest.approx(scalar_d3_bound(D0), abs=1e-3)
