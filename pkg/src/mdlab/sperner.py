"""Sperner families over the description set L = {1..l} and decoded-codebook maps.

Subsets of L are bitmasks (bit i-1 set means description i is present).  A
family is an antichain of nonempty subsets; the set S_L of codebook indices is
every such antichain except the empty family and the family {L}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable

MAX_DESCRIPTIONS = 5

__all__ = [
    "DecoderSet",
    "SpernerFamily",
    "CodebookIndex",
    "MAX_DESCRIPTIONS",
    "is_sperner",
    "enumerate_sperner",
    "all_decoders",
    "decoded_at",
    "ancestor_codebooks",
    "codebook_tables",
]


def _check_l(l: int) -> int:
    if not isinstance(l, int) or not 1 <= l <= MAX_DESCRIPTIONS:
        raise ValueError(f"description count must be in [1, {MAX_DESCRIPTIONS}], got {l!r}")
    return l


@dataclass(frozen=True, order=True)
class DecoderSet:
    """Nonempty subset of {1..l} stored as a bitmask."""

    mask: int
    l: int

    def __post_init__(self):
        _check_l(self.l)
        if not 0 < self.mask < (1 << self.l):
            raise ValueError(f"mask {self.mask} is not a nonempty subset of {{1..{self.l}}}")

    @classmethod
    def of(cls, members: Iterable[int], l: int) -> "DecoderSet":
        mask = 0
        for i in members:
            if not 1 <= int(i) <= l:
                raise ValueError(f"description {i} outside 1..{l}")
            mask |= 1 << (int(i) - 1)
        return cls(mask, l)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.l) if self.mask >> i & 1)

    def __len__(self):
        return bin(self.mask).count("1")

    def issubset(self, other: "DecoderSet") -> bool:
        return self.mask & ~other.mask == 0

    def strict_subsets(self) -> list["DecoderSet"]:
        out = []
        sub = (self.mask - 1) & self.mask
        while sub:
            out.append(DecoderSet(sub, self.l))
            sub = (sub - 1) & self.mask
        return sorted(out)

    def label(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"

    def __repr__(self):
        return f"DecoderSet({self.label()})"


@dataclass(frozen=True)
class SpernerFamily:
    """Antichain of decoder sets, members kept sorted by mask."""

    sets: tuple[DecoderSet, ...]

    def __post_init__(self):
        if not self.sets:
            raise ValueError("a codebook family needs at least one member")
        ls = {s.l for s in self.sets}
        if len(ls) != 1:
            raise ValueError("members must share the description count")
        ordered = tuple(sorted(set(self.sets)))
        if len(ordered) != len(self.sets):
            raise ValueError("members must be distinct")
        object.__setattr__(self, "sets", ordered)
        if not is_sperner(ordered):
            raise ValueError(f"{self.label()} is not an antichain")

    @classmethod
    def of(cls, members: Iterable[Iterable[int]], l: int) -> "SpernerFamily":
        return cls(tuple(DecoderSet.of(m, l) for m in members))

    @property
    def l(self) -> int:
        return self.sets[0].l

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(s.mask for s in self.sets)

    @property
    def support(self) -> DecoderSet:
        """Union of the member sets: the descriptions that carry this codebook."""
        mask = 0
        for s in self.sets:
            mask |= s.mask
        return DecoderSet(mask, self.l)

    def is_decoded_by(self, decoder: DecoderSet) -> bool:
        return any(s.issubset(decoder) for s in self.sets)

    def as_lists(self) -> list[list[int]]:
        return [list(s.members) for s in self.sets]

    def label(self) -> str:
        return "{" + ",".join(s.label() for s in self.sets) + "}"

    def sort_key(self) -> tuple[int, ...]:
        return self.masks

    def __lt__(self, other: "SpernerFamily") -> bool:
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        return f"SpernerFamily({self.label()})"


# A codebook is indexed by its family; the support is derived on demand.
CodebookIndex = SpernerFamily


def _masks(family) -> list[int]:
    out = []
    for s in family:
        if isinstance(s, DecoderSet):
            out.append(s.mask)
        elif isinstance(s, int):
            out.append(s)
        else:
            mask = 0
            for i in s:
                mask |= 1 << (int(i) - 1)
            out.append(mask)
    return out


def is_sperner(family) -> bool:
    """True iff no member is a subset of a different member (duplicates count as nested)."""
    if isinstance(family, SpernerFamily):
        family = family.sets
    masks = _masks(family)
    for a, b in combinations(masks, 2):
        if a & ~b == 0 or b & ~a == 0:
            return False
    return True


@lru_cache(maxsize=None)
def _antichain_masks(l: int) -> tuple[tuple[int, ...], ...]:
    full = (1 << l) - 1
    # decreasing cardinality, then increasing mask: larger sets first prune more
    cands = sorted(range(1, full + 1), key=lambda m: (-bin(m).count("1"), m))
    found: list[tuple[int, ...]] = []

    def extend(start: int, chosen: list[int]):
        if chosen:
            found.append(tuple(sorted(chosen)))
        for i in range(start, len(cands)):
            c = cands[i]
            if all(c & ~m and m & ~c for m in chosen):
                chosen.append(c)
                extend(i + 1, chosen)
                chosen.pop()

    extend(0, [])
    found = [f for f in found if f != (full,)]
    found.sort()
    return tuple(found)


@lru_cache(maxsize=None)
def enumerate_sperner(l: int) -> tuple[SpernerFamily, ...]:
    """S_L in canonical order (families compared as sorted member-mask tuples)."""
    _check_l(l)
    return tuple(
        SpernerFamily(tuple(DecoderSet(m, l) for m in masks)) for masks in _antichain_masks(l)
    )


def all_decoders(l: int) -> tuple[DecoderSet, ...]:
    """Every nonempty subset of L, ordered by size then mask."""
    _check_l(l)
    return tuple(
        sorted(
            (DecoderSet(m, l) for m in range(1, 1 << l)),
            key=lambda d: (len(d), d.mask),
        )
    )


def decoded_at(decoder: DecoderSet, families=None) -> tuple[SpernerFamily, ...]:
    """Families having at least one member contained in the decoder (the map M_N)."""
    if families is None:
        families = enumerate_sperner(decoder.l)
    return tuple(f for f in families if f.is_decoded_by(decoder))


def ancestor_codebooks(decoder: DecoderSet, families=None) -> tuple[SpernerFamily, ...]:
    """Families decoded at some strict nonempty subset of the decoder."""
    if families is None:
        families = enumerate_sperner(decoder.l)
    subs = decoder.strict_subsets()
    return tuple(f for f in families if any(f.is_decoded_by(s) for s in subs))


def codebook_tables(l: int) -> dict:
    """JSON-ready listing of S_L with the decoded and ancestor maps for every decoder."""
    fams = enumerate_sperner(l)
    index = {f: i for i, f in enumerate(fams)}
    decoders = []
    for d in all_decoders(l):
        decoders.append(
            {
                "decoder": list(d.members),
                "decoded": [index[f] for f in decoded_at(d, fams)],
                "ancestors": [index[f] for f in ancestor_codebooks(d, fams)],
            }
        )
    return {
        "l": l,
        "count": len(fams),
        "families": [f.as_lists() for f in fams],
        "decoders": decoders,
    }
