"""Region specifications, RD vectors and the entropy oracle shared by all generators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from mdlab.infotheory import DistortionFn, JointPmf, ReconstructionMap, entropy_of_table, expected_distortion
from mdlab.sperner import DecoderSet, SpernerFamily, all_decoders

KINDS = ("EGC", "ZB", "SSC", "Stage1", "Stage2", "Stage3", "Stage4")
TWO_DESCRIPTION_ROLES = {
    "EGC": ("Q", "1", "2", "12"),
    "ZB": ("common", "1", "2", "12"),
}


def rate_name(i: int) -> str:
    return f"R{i}"


def distortion_name(decoder: DecoderSet) -> str:
    return f"D{decoder.label()}"


@dataclass(frozen=True)
class RdVector:
    """Rates per description and distortions per decoder (decoders without an entry are unconstrained)."""

    rates: tuple[float, ...]
    distortions: Mapping[DecoderSet, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "distortions", dict(self.distortions))
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be nonnegative")
        if any(d < 0 for d in self.distortions.values()):
            raise ValueError("distortions must be nonnegative")
        for dec in self.distortions:
            if dec.l != len(self.rates):
                raise ValueError(f"decoder {dec.label()} does not match {len(self.rates)} descriptions")

    @property
    def l(self) -> int:
        return len(self.rates)

    def assignment(self) -> dict[str, float]:
        out = {rate_name(i + 1): r for i, r in enumerate(self.rates)}
        out.update({distortion_name(d): v for d, v in self.distortions.items()})
        return out

    def replace(self, rates=None, distortions=None) -> "RdVector":
        return RdVector(self.rates if rates is None else rates, {**self.distortions, **(distortions or {})})

    def to_dict(self) -> dict:
        return {
            "rates": list(self.rates),
            "distortions": {",".join(map(str, d.members)): v for d, v in self.distortions.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RdVector":
        rates = d["rates"]
        l = len(rates)
        dist = {
            DecoderSet.of([int(x) for x in str(k).split(",")], l): float(v)
            for k, v in d.get("distortions", {}).items()
        }
        return cls(rates, dist)


@dataclass(frozen=True)
class Summation:
    """One structured summation layer: V variables on families A_1..A_m, sum decoded on ``target``."""

    families: tuple[SpernerFamily, ...]
    target: SpernerFamily
    variables: tuple[str, ...]
    q: int
    name: str = "W"

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "variables", tuple(self.variables))
        if len(self.families) != len(self.variables):
            raise ValueError("one V variable per family is required")
        if len({*self.families, self.target}) != len(self.families) + 1:
            raise ValueError("summation families must be distinct")
        if len(self.families) < 2:
            raise ValueError("a summation needs at least two codebooks")

    @property
    def m(self) -> int:
        return len(self.families)

    def to_dict(self) -> dict:
        return {
            "families": [f.as_lists() for f in self.families],
            "target": self.target.as_lists(),
            "variables": list(self.variables),
            "q": self.q,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: Mapping, l: int) -> "Summation":
        return cls(
            tuple(SpernerFamily.of(f, l) for f in d["families"]),
            SpernerFamily.of(d["target"], l),
            tuple(d["variables"]),
            int(d["q"]),
            d.get("name", "W"),
        )


@dataclass(frozen=True)
class Decoding:
    recon: ReconstructionMap
    distortion: DistortionFn


@dataclass(frozen=True)
class RegionSpec:
    """Everything a bound generator needs: PMF, auxiliaries, decoders and stage parameters.

    ``aux`` maps Sperner families to PMF variable names for SSC and Stages 1-4,
    and role names (see ``TWO_DESCRIPTION_ROLES``) for EGC and ZB.  Families
    without an entry are degenerate and contribute no codebook.
    """

    kind: str
    l: int
    pmf: JointPmf
    aux: Mapping[object, str]
    decoders: Mapping[DecoderSet, Decoding] = field(default_factory=dict)
    source: tuple[str, ...] = ("X",)
    q: int | None = None
    sums: tuple[Summation, ...] = ()
    covering_whitelist: tuple[tuple[SpernerFamily, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        object.__setattr__(self, "source", tuple([self.source] if isinstance(self.source, str) else self.source))
        object.__setattr__(self, "aux", dict(self.aux))
        object.__setattr__(self, "decoders", dict(self.decoders))
        object.__setattr__(self, "sums", tuple(self.sums))
        for name in self.source:
            if name not in self.pmf:
                raise KeyError(f"source variable {name!r} missing from pmf")
        for key, name in self.aux.items():
            if name not in self.pmf:
                raise KeyError(f"auxiliary {name!r} for {key} missing from pmf")
        for s in self.sums:
            for name in s.variables:
                if name not in self.pmf:
                    raise KeyError(f"summation variable {name!r} missing from pmf")
        for dec in self.decoders:
            if dec.l != self.l:
                raise ValueError(f"decoder {dec.label()} has l={dec.l}, spec has l={self.l}")

    def with_pmf(self, pmf: JointPmf, **changes) -> "RegionSpec":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(pmf=pmf, **changes)
        return RegionSpec(**fields)

    def to_dict(self) -> dict:
        """JSON form; Sperner-family keys become member lists, role keys stay strings."""
        aux = [
            {"role": key, "variable": name} if isinstance(key, str) else {"family": key.as_lists(), "variable": name}
            for key, name in self.aux.items()
        ]
        decoders = [
            {
                "decoder": list(dec.members),
                "inputs": list(d.recon.inputs),
                "table": d.recon.table.tolist(),
                "distortion": d.distortion.matrix.tolist(),
            }
            for dec, d in self.decoders.items()
        ]
        out = {
            "kind": self.kind,
            "l": self.l,
            "pmf": self.pmf.to_dict(),
            "source": list(self.source),
            "aux": aux,
            "decoders": decoders,
            "q": self.q,
            "sums": [s.to_dict() for s in self.sums],
        }
        if self.covering_whitelist is not None:
            out["covering_whitelist"] = [[f.as_lists() for f in group] for group in self.covering_whitelist]
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "RegionSpec":
        l = int(d["l"])
        aux = {}
        for entry in d.get("aux", []):
            key = entry["role"] if "role" in entry else SpernerFamily.of(entry["family"], l)
            aux[key] = entry["variable"]
        decoders = {
            DecoderSet.of(e["decoder"], l): Decoding(
                ReconstructionMap(tuple(e["inputs"]), np.array(e["table"], dtype=np.int64)),
                DistortionFn(np.array(e["distortion"], dtype=float)),
            )
            for e in d.get("decoders", [])
        }
        whitelist = d.get("covering_whitelist")
        if whitelist is not None:
            whitelist = tuple(tuple(SpernerFamily.of(f, l) for f in group) for group in whitelist)
        return cls(
            kind=d["kind"],
            l=l,
            pmf=JointPmf.from_dict(d["pmf"]),
            aux=aux,
            decoders=decoders,
            source=tuple(d.get("source", ["X"])),
            q=d.get("q"),
            sums=tuple(Summation.from_dict(s, l) for s in d.get("sums", [])),
            covering_whitelist=whitelist,
        )


# items: the unit of covering and packing bookkeeping --------------------------


@dataclass(frozen=True)
class Item:
    """A decodable object: an unstructured codeword, a structured V codeword or a sum W.

    ``constant`` is H(U) for SSC items and log2 of the alphabet for structured
    ones; ``rate`` is a linear expression in witness variables; bins are sent
    on every description in the support of ``family``.
    """

    key: tuple
    label: str
    base: tuple[str, ...]
    family: SpernerFamily
    constant: float
    rate: tuple[tuple[str, float], ...]
    bin_prefix: str
    modulus: int | None = None
    weights: tuple[int, ...] | None = None

    def bin_name(self, i: int) -> str:
        return f"{self.bin_prefix}{self.label}@{i}"

    def values(self, columns: Sequence[np.ndarray]) -> np.ndarray:
        if self.weights is None:
            return columns[0]
        acc = np.zeros_like(columns[0])
        for w, c in zip(self.weights, columns):
            acc = acc + w * c
        return acc % self.modulus


class EntropyOracle:
    """Cached joint entropies of item sets, optionally together with the source."""

    def __init__(self, pmf: JointPmf, source: Sequence[str]):
        self.pmf = pmf
        self.source = tuple(source)
        self._cache: dict[frozenset, float] = {}

    def entropy(self, items: Sequence[Item], with_source: bool = False) -> float:
        key = frozenset([it.key for it in items] + (["__source__"] if with_source else []))
        if key in self._cache:
            return self._cache[key]
        base = list(dict.fromkeys(v for it in items for v in it.base))
        extra = [v for v in self.source if v not in base] if with_source else []
        names = base + extra
        if not names:
            self._cache[key] = 0.0
            return 0.0
        table = self.pmf.marginal_table(names)
        cells = np.nonzero(table)
        probs = table[cells]
        pos = {v: i for i, v in enumerate(names)}
        cols = [it.values([cells[pos[v]] for v in it.base]) for it in items]
        cols += [cells[pos[v]] for v in self.source] if with_source else []
        if not cols:
            h = 0.0
        else:
            keys = np.stack(cols, axis=1)
            _, inv = np.unique(keys, axis=0, return_inverse=True)
            h = entropy_of_table(np.bincount(inv.ravel(), weights=probs))
        self._cache[key] = h
        return h

    def conditional(self, items: Sequence[Item], given: Sequence[Item], given_source: bool = False) -> float:
        both = list({it.key: it for it in list(items) + list(given)}.values())
        return self.entropy(both, given_source) - self.entropy(given, given_source)


def nonempty_subsets(seq: Sequence, include_empty: bool = False):
    start = 0 if include_empty else 1
    for r in range(start, len(seq) + 1):
        yield from itertools.combinations(seq, r)


def check_decoder_inputs(spec: RegionSpec, allowed: Mapping[DecoderSet, set[str]]) -> None:
    for dec, d in spec.decoders.items():
        bad = [v for v in d.recon.inputs if v not in allowed.get(dec, set())]
        if bad:
            raise ValueError(f"decoder {dec.label()} reconstructs from undecoded variables {bad}")


def distortion_constraints(spec: RegionSpec) -> list[tuple[str, float]]:
    """(D_N name, E d_N) for every decoder with a reconstruction map."""
    out = []
    for dec in sorted(spec.decoders, key=lambda d: (len(d), d.mask)):
        d = spec.decoders[dec]
        out.append((distortion_name(dec), expected_distortion(spec.pmf, d.recon, d.distortion, spec.source)))
    return out


def ordered_decoders(l: int) -> tuple[DecoderSet, ...]:
    return tuple(sorted(all_decoders(l), key=lambda d: (len(d), d.mask)))


def derive_sum(pmf: JointPmf, s: Summation, weights: Sequence[int], name: str) -> JointPmf:
    if name in pmf:
        return pmf
    func: Callable = lambda *cols: sum(w * c for w, c in zip(weights, cols)) % s.q
    return pmf.derive(name, s.q, func, s.variables)
