from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdlab.sperner import (
    DecoderSet,
    SpernerFamily,
    all_decoders,
    ancestor_codebooks,
    codebook_tables,
    decoded_at,
    enumerate_sperner,
    is_sperner,
)


def brute_force_antichain_count(l: int) -> int:
    """Antichains over the full power set of L, including the empty family and {emptyset}."""
    subsets = list(range(1 << l))
    count = 0
    for r in range(len(subsets) + 1):
        for fam in combinations(subsets, r):
            if all(a & ~b and b & ~a for a, b in combinations(fam, 2)):
                count += 1
    return count


def fams(l, *lists):
    return {SpernerFamily.of(f, l) for f in lists}


class TestIsSperner:
    def test_incomparable_pair(self):
        assert is_sperner([{1, 2}, {1, 3}])

    def test_nested_pair(self):
        assert not is_sperner([{1}, {1, 2}])

    def test_singleton(self):
        assert is_sperner([{2}])

    def test_duplicates_count_as_nested(self):
        assert not is_sperner([{1}, {1}])

    def test_constructor_rejects_chain(self):
        with pytest.raises(ValueError):
            SpernerFamily.of([[1], [1, 2]], 2)


class TestEnumerate:
    @pytest.mark.parametrize("l,count", [(1, 0), (2, 3), (3, 17), (4, 165)])
    def test_counts(self, l, count):
        assert len(enumerate_sperner(l)) == count

    def test_l2_members(self):
        assert set(enumerate_sperner(2)) == fams(2, [[1]], [[2]], [[1], [2]])

    @pytest.mark.parametrize("l", [1, 2, 3, 4])
    def test_plus_three_matches_brute_force(self, l):
        assert len(enumerate_sperner(l)) + 3 == brute_force_antichain_count(l)

    def test_l4_plus_three_is_dedekind(self):
        assert len(enumerate_sperner(4)) + 3 == 168

    def test_l5_plus_three_is_dedekind(self):
        # M(5) = 7581 (OEIS A000372); brute force over 2^31 families is out of reach
        families = enumerate_sperner(5)
        assert len(families) + 3 == 7581
        assert len(set(families)) == len(families)
        assert all(is_sperner(f) for f in families)

    def test_canonical_order(self):
        for l in (2, 3, 4):
            fs = enumerate_sperner(l)
            assert list(fs) == sorted(fs)
            assert len(set(fs)) == len(fs)

    def test_excludes_full_set(self):
        for l in (2, 3, 4):
            full = SpernerFamily((DecoderSet((1 << l) - 1, l),))
            assert full not in enumerate_sperner(l)

    @pytest.mark.parametrize("l", [0, 6])
    def test_range_guard(self, l):
        with pytest.raises(ValueError):
            enumerate_sperner(l)


PAPER_DECODED_1 = [
    [[1], [2], [3]],
    [[1], [2]],
    [[1], [3]],
    [[1], [2, 3]],
    [[1]],
]
PAPER_DECODED_23 = [
    [[1], [2], [3]],
    [[1, 2], [1, 3], [2, 3]],
    [[1], [2]],
    [[1], [3]],
    [[2], [3]],
    [[1], [2, 3]],
    [[2], [1, 3]],
    [[3], [1, 2]],
    [[1, 2], [2, 3]],
    [[1, 3], [2, 3]],
    [[2]],
    [[3]],
    [[2, 3]],
]
PAPER_ANCESTORS_23 = [
    [[1], [2], [3]],
    [[1], [2]],
    [[1], [3]],
    [[2], [3]],
    [[2], [1, 3]],
    [[3], [1, 2]],
    [[2]],
    [[3]],
]


class TestDecodedMaps:
    def test_decoder_1(self):
        assert set(decoded_at(DecoderSet.of([1], 3))) == fams(3, *PAPER_DECODED_1)

    def test_decoder_23(self):
        assert set(decoded_at(DecoderSet.of([2, 3], 3))) == fams(3, *PAPER_DECODED_23)

    def test_ancestors_23(self):
        assert set(ancestor_codebooks(DecoderSet.of([2, 3], 3))) == fams(3, *PAPER_ANCESTORS_23)

    def test_full_decoder_sees_everything(self):
        for l in (2, 3, 4):
            assert decoded_at(DecoderSet((1 << l) - 1, l)) == enumerate_sperner(l)

    def test_singleton_has_no_ancestors(self):
        for i in (1, 2, 3):
            assert ancestor_codebooks(DecoderSet.of([i], 3)) == ()

    def test_l2_full_ancestors(self):
        a = set(decoded_at(DecoderSet.of([1], 2))) | set(decoded_at(DecoderSet.of([2], 2)))
        assert set(ancestor_codebooks(DecoderSet.of([1, 2], 2))) == a

    @given(l=st.integers(2, 4), data=st.data())
    def test_monotone_and_nested(self, l, data):
        masks = st.integers(1, (1 << l) - 1)
        a = DecoderSet(data.draw(masks), l)
        b = DecoderSet(a.mask | data.draw(masks), l)
        assert set(decoded_at(a)) <= set(decoded_at(b))
        assert set(ancestor_codebooks(b)) <= set(decoded_at(b))

    def test_support_is_union(self):
        f = SpernerFamily.of([[1, 2], [2, 3]], 3)
        assert f.support.members == (1, 2, 3)


def test_tables_json_shape():
    t = codebook_tables(3)
    assert t["count"] == 17
    assert len(t["decoders"]) == len(all_decoders(3)) == 7
    d1 = next(d for d in t["decoders"] if d["decoder"] == [1])
    assert len(d1["decoded"]) == 5
