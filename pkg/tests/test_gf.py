import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mdlab import gf
from mdlab.gf import FieldElem, FieldMatrix, FieldVector


def naive_mat_vec(m: FieldMatrix, u: FieldVector) -> list[int]:
    out = []
    for j in range(m.cols):
        acc = 0
        for i in range(m.rows):
            acc = (acc + u.tolist()[i] * m.tolist()[i][j]) % m.q
        out.append(acc)
    return out


def exhaustive_rank(m: FieldMatrix) -> int:
    # largest row subset whose span has q^size elements
    rows = m.tolist()
    best = 0
    for size in range(1, len(rows) + 1):
        for subset in itertools.combinations(rows, size):
            span = set()
            for coeffs in itertools.product(range(m.q), repeat=size):
                vec = tuple(
                    sum(c * r[j] for c, r in zip(coeffs, subset)) % m.q for j in range(m.cols)
                )
                span.add(vec)
            if len(span) == m.q**size:
                best = size
                break
    return best


class TestConstruction:
    def test_non_prime_rejected(self):
        for q in (0, 1, 4, 6, 9, 15):
            with pytest.raises(ValueError):
                FieldVector([0], q)

    def test_prime_accepted(self):
        for q in (2, 3, 5, 7, 11, 13):
            assert FieldVector([0, 1], q).q == q

    def test_out_of_range_entries_rejected(self):
        with pytest.raises(ValueError):
            FieldVector([0, 2], 2)
        with pytest.raises(ValueError):
            FieldMatrix([[0, -1]], 3)

    def test_values_are_immutable(self):
        v = FieldVector([1, 0, 1], 2)
        with pytest.raises(ValueError):
            v.data[0] = 0

    def test_field_elem_inverse(self):
        for a in range(1, 7):
            assert (FieldElem(a, 7) * FieldElem(a, 7).inverse()).value == 1
        with pytest.raises(ZeroDivisionError):
            FieldElem(0, 5).inverse()


class TestVecAdd:
    def test_xor(self):
        assert gf.vec_add(FieldVector([1, 0, 1], 2), FieldVector([1, 1, 1], 2)).tolist() == [0, 1, 0]

    def test_identity(self):
        v = FieldVector([2, 0, 1, 2], 3)
        assert gf.vec_add(v, FieldVector.zeros(4, 3)) == v

    def test_mod3(self):
        assert gf.vec_add(FieldVector([1, 2], 3), FieldVector([2, 2], 3)).tolist() == [0, 1]

    def test_mismatch_errors(self):
        with pytest.raises(ValueError):
            gf.vec_add(FieldVector([1, 0], 2), FieldVector([1, 0, 1], 2))
        with pytest.raises(ValueError):
            gf.vec_add(FieldVector([1, 0], 2), FieldVector([1, 0], 3))


class TestMatVecMul:
    def test_identity(self):
        u = FieldVector([1, 0, 1, 1], 2)
        assert gf.mat_vec_mul(FieldMatrix.identity(4, 2), u) == u

    def test_zero_message(self):
        m = gf.random_matrix(3, 5, 2, seed=1)
        assert gf.mat_vec_mul(m, FieldVector.zeros(3, 2)).weight() == 0

    def test_random_against_naive(self):
        m = gf.random_matrix(3, 5, 2, seed=11)
        u = FieldVector([1, 1, 0], 2)
        got = gf.mat_vec_mul(m, u)
        assert got.tolist() == naive_mat_vec(m, u)
        assert got.tolist() == [(a + b) % 2 for a, b in zip(m.tolist()[0], m.tolist()[1])]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gf.mat_vec_mul(gf.random_matrix(3, 5, 2, seed=0), FieldVector([1, 0], 2))


class TestRank:
    def test_identity(self):
        for n in (1, 4, 9):
            assert gf.rank(FieldMatrix.identity(n, 2)) == n
            assert gf.rank(FieldMatrix.identity(n, 5)) == n

    def test_zero(self):
        assert gf.rank(FieldMatrix.zeros(4, 6, 2)) == 0
        assert gf.rank(FieldMatrix.zeros(4, 6, 3)) == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_random_against_exhaustive(self, seed):
        m = gf.random_matrix(4, 6, 2, seed=seed)
        assert gf.rank(m) == exhaustive_rank(m)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_f3_against_exhaustive(self, seed):
        m = gf.random_matrix(3, 4, 3, seed=seed)
        assert gf.rank(m) == exhaustive_rank(m)

    def test_dependent_rows(self):
        m = FieldMatrix([[1, 0, 1], [0, 1, 1], [1, 1, 0]], 2)
        assert gf.rank(m) == 2

    @given(
        k=st.integers(0, 12),
        n=st.integers(1, 140),
        seed=st.integers(0, 2**32 - 1),
        density=st.sampled_from([0.05, 0.5]),
    )
    @settings(max_examples=80, deadline=None)
    def test_packed_path_matches_generic(self, k, n, seed, density):
        rng = np.random.default_rng(seed)
        m = FieldMatrix((rng.random((k, n)) < density).astype(np.int64), 2, cols=n)
        assert gf.rank_f2_packed(m) == gf.rank_generic(m)

    def test_packed_rejects_other_fields(self):
        with pytest.raises(ValueError):
            gf.rank_f2_packed(FieldMatrix.identity(2, 3))


class TestRandom:
    def test_deterministic(self):
        assert gf.random_matrix(5, 7, 3, seed=42) == gf.random_matrix(5, 7, 3, seed=42)
        assert gf.random_vector(9, 5, seed=3) == gf.random_vector(9, 5, seed=3)

    def test_empty(self):
        m = gf.random_matrix(0, 6, 2, seed=1)
        assert m.shape == (0, 6)
        assert gf.rank(m) == 0

    def test_uniform_chi_square(self):
        q = 5
        entries = gf.random_vector(100_000, q, seed=7).data
        counts = np.bincount(entries, minlength=q)
        chi2 = ((counts - entries.size / q) ** 2 / (entries.size / q)).sum()
        # 3-sigma upper quantile for q-1 degrees of freedom
        assert chi2 < stats.chi2.ppf(0.9987, q - 1)


class TestPackBits:
    @given(n=st.integers(1, 200), seed=st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_roundtrip(self, n, seed):
        bits = np.random.default_rng(seed).integers(0, 2, (3, n))
        assert np.array_equal(gf.unpack_bits(gf.pack_bits(bits), n), bits)


class TestSolve:
    @given(seed=st.integers(0, 10_000), q=st.sampled_from([2, 3, 5]))
    @settings(max_examples=60, deadline=None)
    def test_solution_and_nullspace(self, seed, q):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, q, (rng.integers(1, 6), rng.integers(1, 7)))
        x_true = rng.integers(0, q, a.shape[1])
        b = (a @ x_true) % q
        res = gf.solve_array(a, b, q)
        assert res is not None
        x, null = res
        assert np.array_equal((a @ x) % q, b)
        assert null.shape[0] == a.shape[1] - gf.rank(FieldMatrix(a, q))
        if null.size:
            assert not ((a @ null.T) % q).any()

    def test_inconsistent(self):
        a = np.array([[1, 1], [1, 1]])
        assert gf.solve_array(a, np.array([0, 1]), 2) is None

    def test_messages_lexicographic(self):
        msgs = gf.enumerate_messages(3, 2)
        assert msgs.tolist()[:3] == [[0, 0, 0], [0, 0, 1], [0, 1, 0]]
        assert len(gf.enumerate_messages(2, 3)) == 9
        assert gf.enumerate_messages(0, 2).shape == (1, 0)


vec3 = st.lists(st.integers(0, 6), min_size=6, max_size=6)


class TestAlgebraicLaws:
    @given(a=vec3, b=vec3, c=vec3, s=st.integers(0, 6))
    @settings(max_examples=1000, deadline=None)
    def test_group_and_distributive_laws(self, a, b, c, s):
        va, vb, vc = (FieldVector(x, 7) for x in (a, b, c))
        assert (va + vb) + vc == va + (vb + vc)
        assert va + FieldVector.zeros(6, 7) == va
        assert (va + vb).scale(s) == va.scale(s) + vb.scale(s)
        assert va - va == FieldVector.zeros(6, 7)

    @given(seed=st.integers(0, 10_000), q=st.sampled_from([2, 3, 7]))
    @settings(max_examples=200, deadline=None)
    def test_linearity(self, seed, q):
        rng = np.random.default_rng(seed)
        k, n = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        g = gf.random_matrix(k, n, q, seed=rng)
        u1, u2 = gf.random_vector(k, q, seed=rng), gf.random_vector(k, q, seed=rng)
        assert gf.mat_vec_mul(g, u1 + u2) == gf.mat_vec_mul(g, u1) + gf.mat_vec_mul(g, u2)

    @given(seed=st.integers(0, 10_000), q=st.sampled_from([2, 3, 5]))
    @settings(max_examples=100, deadline=None)
    def test_rank_bounds(self, seed, q):
        rng = np.random.default_rng(seed)
        k, n = int(rng.integers(0, 7)), int(rng.integers(1, 8))
        g = gf.random_matrix(k, n, q, seed=rng)
        r = gf.rank(g)
        assert r <= min(k, n)
        assert gf.rank(g.vstack(g)) == r
