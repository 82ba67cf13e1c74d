"""Bound-system generators for the two-description and l-description achievable regions."""

from __future__ import annotations

import itertools
import math
import re
from typing import Sequence

import numpy as np

from mdlab import gf
from mdlab.sperner import DecoderSet, SpernerFamily
from mdlab.region.spec import (
    TWO_DESCRIPTION_ROLES,
    Decoding,
    EntropyOracle,
    Item,
    RegionSpec,
    Summation,
    check_decoder_inputs,
    derive_sum,
    distortion_constraints,
    nonempty_subsets,
    ordered_decoders,
    rate_name,
)
from mdlab.region.system import BoundSystem, Inequality
from mdlab.infotheory import ReconstructionMap

MAX_ACTIVE_FAMILIES = 12
MAX_CONSTRAINTS = 250_000
_POINT = re.compile(r"^(R\d+|D\{[\d,]+\})$")


class CapExceeded(ValueError):
    """Too many active families or constraints; supply a covering whitelist."""


# shared assembly ------------------------------------------------------------


class _Builder:
    def __init__(self, spec: RegionSpec):
        self.spec = spec
        self.rows: list[Inequality] = []
        self.variables: dict[str, None] = {}

    def var(self, name: str) -> str:
        self.variables.setdefault(name, None)
        return name

    def add(self, coeffs: dict, bound: float, kind: str, label: str = "") -> None:
        for name in coeffs:
            if not _POINT.match(name):
                self.var(name)
        self.rows.append(Inequality.of(coeffs, bound, kind, label))
        if len(self.rows) > MAX_CONSTRAINTS:
            raise CapExceeded(f"more than {MAX_CONSTRAINTS} constraints")

    def finish(self, kind: str, bins_by_description: dict[int, list[str]], meta: dict) -> BoundSystem:
        spec = self.spec
        for i in range(1, spec.l + 1):
            coeffs = {b: 1.0 for b in bins_by_description.get(i, [])}
            coeffs[rate_name(i)] = -1.0
            self.rows.append(Inequality.of(coeffs, 0.0, "rate", f"rate assembly for description {i}"))
        points = [rate_name(i) for i in range(1, spec.l + 1)]
        for name, value in distortion_constraints(spec):
            points.append(name)
            self.rows.append(Inequality.of({name: -1.0}, -value, "distortion", f"{name} >= E d"))
        witness = tuple(v for v in self.variables if v not in points)
        return BoundSystem(kind, tuple(points), witness, tuple(self.rows), meta)


def _rate_terms(item: Item, sign: float = 1.0) -> dict[str, float]:
    return {n: sign * c for n, c in item.rate}


def _add_terms(acc: dict, terms: dict) -> None:
    for n, c in terms.items():
        acc[n] = acc.get(n, 0.0) + c


# items ----------------------------------------------------------------------


def _check_families(spec: RegionSpec) -> list[SpernerFamily]:
    fams = []
    for fam in spec.aux:
        if not isinstance(fam, SpernerFamily):
            raise TypeError(f"{spec.kind} auxiliaries must be keyed by Sperner families, got {fam!r}")
        if fam.l != spec.l:
            raise ValueError(f"family {fam.label()} is over l={fam.l}, spec has l={spec.l}")
        if fam.support.mask == (1 << spec.l) - 1 and len(fam.sets) == 1 and len(fam.sets[0]) == spec.l:
            raise ValueError("the family {L} carries no codebook")
        fams.append(fam)
    return sorted(fams)


def _u_items(spec: RegionSpec, structured: bool) -> list[Item]:
    items = []
    for fam in _check_families(spec):
        name = spec.aux[fam]
        base = (name,)
        if structured:
            if spec.pmf.size(name) != spec.q:
                raise ValueError(f"auxiliary {name!r} has alphabet {spec.pmf.size(name)}, field is {spec.q}")
            rate, const = f"ro{fam.label()}", math.log2(spec.q)
        else:
            rate, const = f"r{fam.label()}", spec.pmf.entropy(name)
        items.append(Item(("U", fam), fam.label(), base, fam, const, ((rate, 1.0),), "rho"))
    return items


def _sum_tag(spec: RegionSpec, s: int) -> str:
    return f"[{s + 1}]" if len(spec.sums) > 1 else ""


def _ri_name(tag: str, subset: Sequence[int]) -> str:
    return f"ri{tag}{{{','.join(str(k + 1) for k in subset)}}}"


def _v_items(spec: RegionSpec) -> list[Item]:
    items = []
    for s, summ in enumerate(spec.sums):
        gf.check_prime(summ.q)
        tag = _sum_tag(spec, s)
        for k, (fam, name) in enumerate(zip(summ.families, summ.variables)):
            if fam.l != spec.l:
                raise ValueError(f"family {fam.label()} is over l={fam.l}")
            if spec.pmf.size(name) != summ.q:
                raise ValueError(f"V variable {name!r} has alphabet {spec.pmf.size(name)}, field is {summ.q}")
            label = f"{tag}{fam.label()}"
            items.append(
                Item(("V", s, k), label, (name,), fam, math.log2(summ.q), ((f"ro'{label}", 1.0),), "rho_o")
            )
    return items


def _w_item(spec: RegionSpec, s: int, alpha: tuple[int, ...]) -> Item:
    summ = spec.sums[s]
    tag = _sum_tag(spec, s)
    support = [k for k, a in enumerate(alpha) if a]
    rate: dict[str, float] = {f"ro'{tag}{summ.families[k].label()}": 1.0 for k in support}
    if len(support) >= 2:
        rate[_ri_name(tag, support)] = -1.0
    label = f"{tag}{summ.target.label()}[{','.join(map(str, alpha))}]"
    return Item(
        ("W", s, alpha),
        label,
        summ.variables,
        summ.target,
        math.log2(summ.q),
        tuple(sorted(rate.items())),
        "rho_w",
        modulus=summ.q,
        weights=alpha,
    )


def _nonzero_alphas(q: int, m: int, all_nonzero: bool) -> list[tuple[int, ...]]:
    vals = range(1, q) if all_nonzero else range(q)
    out = [a for a in itertools.product(vals, repeat=m) if any(a)]
    return out


def _independent_sets(alphas: list[tuple[int, ...]], q: int, m: int) -> list[tuple[tuple[int, ...], ...]]:
    out = []
    for r in range(1, m + 1):
        for combo in itertools.combinations(alphas, r):
            if gf.rank(gf.FieldMatrix(np.array(combo), q)) == r:
                out.append(combo)
    return out


# covering and packing -------------------------------------------------------


def _covering_u_subsets(spec: RegionSpec, u_items: list[Item], include_empty: bool):
    if spec.covering_whitelist is not None:
        by_family = {it.family: it for it in u_items}
        subsets = []
        for fams in spec.covering_whitelist:
            try:
                subsets.append(tuple(by_family[f] for f in fams))
            except KeyError as e:
                raise ValueError(f"whitelisted family {e.args[0]} is not active") from None
        if include_empty:
            subsets.insert(0, ())
        return subsets
    if len(u_items) > MAX_ACTIVE_FAMILIES:
        raise CapExceeded(
            f"{len(u_items)} active families exceed the cap of {MAX_ACTIVE_FAMILIES}; "
            f"{(1 << len(u_items)) - 1} covering subsets would be generated"
        )
    return list(nonempty_subsets(u_items, include_empty))


def covering_subset_count(active: int) -> int:
    """Number of covering constraints an SSC system over ``active`` families needs."""
    return (1 << active) - 1


def _add_covering(b: _Builder, oracle: EntropyOracle, items: Sequence[Item], kind: str = "covering") -> None:
    h = oracle.conditional(items, [], given_source=True)
    coeffs: dict[str, float] = {}
    for it in items:
        _add_terms(coeffs, _rate_terms(it, -1.0))
    b.add(coeffs, h - sum(it.constant for it in items), kind, "cover " + " ".join(it.label for it in items))


def _decoded_items(items: Sequence[Item], decoder: DecoderSet) -> list[Item]:
    return [it for it in items if it.family.is_decoded_by(decoder)]


def _add_packing(b: _Builder, oracle: EntropyOracle, decodable: Sequence[Item], l: int) -> dict[int, list[str]]:
    bins: dict[int, list[str]] = {}
    for it in decodable:
        for i in it.family.support.members:
            bins.setdefault(i, []).append(b.var(it.bin_name(i)))
    for dec in ordered_decoders(l):
        bar = _decoded_items(decodable, dec)
        hat_keys = {it.key for sub in dec.strict_subsets() for it in _decoded_items(decodable, sub)}
        hat = [it for it in decodable if it.key in hat_keys]
        fresh = [it for it in bar if it.key not in hat_keys]
        if len(fresh) > 20:
            raise CapExceeded(f"decoder {dec.label()} has {len(fresh)} fresh codebooks")
        for r in range(len(fresh)):
            for known in itertools.combinations(fresh, r):
                known_keys = {it.key for it in known}
                unknown = [it for it in fresh if it.key not in known_keys]
                h = oracle.conditional(unknown, hat + list(known))
                coeffs: dict[str, float] = {}
                for it in unknown:
                    _add_terms(coeffs, _rate_terms(it, 1.0))
                    # bins only count on descriptions this decoder receives
                    for i in it.family.support.members:
                        if i in dec.members:
                            coeffs[it.bin_name(i)] = coeffs.get(it.bin_name(i), 0.0) - 1.0
                label = f"pack {dec.label()}: " + " ".join(it.label for it in unknown)
                b.add(coeffs, sum(it.constant for it in unknown) - h, "packing", label)
    return bins


def _allowed_inputs(spec: RegionSpec, decodable: Sequence[Item], extra: dict | None = None) -> dict:
    allowed = {}
    for dec in ordered_decoders(spec.l):
        names = {v for it in _decoded_items(decodable, dec) for v in it.base if it.weights is None}
        names |= (extra or {}).get(dec, set())
        allowed[dec] = names
    return allowed


# SSC and Stage 1 --------------------------------------------------------------


def _unstructured_or_nested(spec: RegionSpec, structured: bool) -> BoundSystem:
    oracle = EntropyOracle(spec.pmf, spec.source)
    u = _u_items(spec, structured)
    check_decoder_inputs(spec, _allowed_inputs(spec, u))
    b = _Builder(spec)
    for subset in _covering_u_subsets(spec, u, include_empty=False):
        _add_covering(b, oracle, subset)
    bins = _add_packing(b, oracle, u, spec.l)
    for it in u:
        (name, _), = it.rate
        b.add({name: 1.0}, it.constant, "cap", f"{name} <= {'log q' if structured else 'H(U)'}")
    kind = "Stage1" if structured else "SSC"
    return b.finish(kind, bins, {"active": [it.label for it in u]})


def ssc_bounds(spec: RegionSpec) -> BoundSystem:
    """Covering over every subset of active codebooks, packing at every decoder, rate assembly."""
    if spec.kind != "SSC":
        raise ValueError(f"expected an SSC spec, got {spec.kind}")
    return _unstructured_or_nested(spec, structured=False)


def nested_coset_bounds(spec: RegionSpec) -> BoundSystem:
    """SSC-shaped system with log q in place of H(U_M) and outer-code rates r_o."""
    if spec.kind != "Stage1":
        raise ValueError(f"expected a Stage1 spec, got {spec.kind}")
    if spec.q is None:
        raise ValueError("Stage1 needs the field size q")
    gf.check_prime(spec.q)
    return _unstructured_or_nested(spec, structured=True)


# Stages 2-4 -------------------------------------------------------------------


def _with_sum_variables(spec: RegionSpec) -> RegionSpec:
    pmf = spec.pmf
    for summ in spec.sums:
        pmf = derive_sum(pmf, summ, (1,) * summ.m, summ.name)
    return spec.with_pmf(pmf)


def _structured(spec: RegionSpec, mode: str) -> BoundSystem:
    if spec.q is None:
        raise ValueError(f"{spec.kind} needs the field size q")
    gf.check_prime(spec.q)
    if not spec.sums:
        raise ValueError(f"{spec.kind} needs at least one summation")
    for summ in spec.sums:
        for fam in summ.families + (summ.target,):
            if not isinstance(fam, SpernerFamily):
                raise TypeError("summation families must be Sperner families")
    spec = _with_sum_variables(spec)
    oracle = EntropyOracle(spec.pmf, spec.source)
    u = _u_items(spec, structured=True)
    v = _v_items(spec)
    decoded_w = [_w_item(spec, s, (1,) * summ.m) for s, summ in enumerate(spec.sums)]
    extra = {}
    for dec in ordered_decoders(spec.l):
        extra[dec] = {summ.name for summ in spec.sums if summ.target.is_decoded_by(dec)}
    check_decoder_inputs(spec, _allowed_inputs(spec, u + v, extra))
    b = _Builder(spec)
    u_subsets = _covering_u_subsets(spec, u, include_empty=True)
    for us in u_subsets:
        for vs in nonempty_subsets(v, include_empty=True):
            if us or vs:
                _add_covering(b, oracle, list(us) + list(vs))
    w_groups: list[list[tuple[Item, ...]]] = []
    for s, summ in enumerate(spec.sums):
        if mode == "pair":
            alphas = _nonzero_alphas(summ.q, summ.m, all_nonzero=True)
            w_groups.append([(_w_item(spec, s, a),) for a in alphas])
        else:
            alphas = _nonzero_alphas(summ.q, summ.m, all_nonzero=False)
            sets = _independent_sets(alphas, summ.q, summ.m)
            w_groups.append([tuple(_w_item(spec, s, a) for a in combo) for combo in sets])
    # one W set per summation at most; the empty choice for every summation is the V/U family above
    for choice in itertools.product(*[[()] + g for g in w_groups]):
        ws = [it for group in choice for it in group]
        if not ws:
            continue
        for us in u_subsets:
            _add_covering(b, oracle, list(us) + ws, "covering-sum")
    bins = _add_packing(b, oracle, u + v + decoded_w, spec.l)
    for it in u + v:
        (name, _), = it.rate
        b.add({name: 1.0}, it.constant, "cap", f"{name} <= log q")
    for s, summ in enumerate(spec.sums):
        tag = _sum_tag(spec, s)
        _add_lattice(b, tag, summ)
    meta = {
        "active": [it.label for it in u],
        "structured": [it.label for it in v],
        "sum_items": sorted({it.label for g in w_groups for combo in g for it in combo}),
    }
    return b.finish(spec.kind, bins, meta)


def _add_lattice(b: _Builder, tag: str, summ: Summation) -> None:
    """Intersection-rate lattice: for every J, the strict supersets' rates fit inside J's."""
    m = summ.m

    def dim(subset):
        if len(subset) == 1:
            return f"ro'{tag}{summ.families[subset[0]].label()}"
        return _ri_name(tag, subset)

    subsets = [c for r in range(1, m + 1) for c in itertools.combinations(range(m), r)]
    for j in subsets:
        supers = [s for s in subsets if len(s) > len(j) and set(j) <= set(s)]
        if not supers:
            continue
        coeffs = {dim(s): 1.0 for s in supers}
        coeffs[dim(j)] = coeffs.get(dim(j), 0.0) - 1.0
        b.add(coeffs, 0.0, "lattice", f"lattice at {dim(j)}")


def stage2_bounds(spec: RegionSpec) -> BoundSystem:
    """Two V codebooks sharing an inner code; their sum is decoded wherever A_3 is."""
    if spec.kind != "Stage2":
        raise ValueError(f"expected a Stage2 spec, got {spec.kind}")
    if len(spec.sums) != 1 or spec.sums[0].m != 2:
        raise ValueError("Stage2 takes exactly one summation of two codebooks")
    return _structured(spec, "pair")


def stage3_bounds(spec: RegionSpec) -> BoundSystem:
    """One m-fold summation with an ensemble of nested coset codes."""
    if spec.kind != "Stage3":
        raise ValueError(f"expected a Stage3 spec, got {spec.kind}")
    if len(spec.sums) != 1:
        raise ValueError("Stage3 takes exactly one summation")
    return _structured(spec, "ensemble")


def stage4_bounds(spec: RegionSpec) -> BoundSystem:
    """Several summations, each over its own prime field."""
    if spec.kind != "Stage4":
        raise ValueError(f"expected a Stage4 spec, got {spec.kind}")
    return _structured(spec, "ensemble")


# two-description regions ------------------------------------------------------


def _role_items(spec: RegionSpec) -> dict[str, list[Item]]:
    roles = TWO_DESCRIPTION_ROLES[spec.kind]
    unknown = set(spec.aux) - set(roles)
    if unknown:
        raise ValueError(f"unknown {spec.kind} roles {sorted(map(str, unknown))}; expected {roles}")
    out = {}
    dummy = SpernerFamily.of([[1]], 2)
    for r in roles:
        if r in spec.aux:
            out[r] = [Item(("role", r), r, (spec.aux[r],), dummy, 0.0, (), "")]
        else:
            out[r] = []
    return out


def _two_description(spec: RegionSpec) -> BoundSystem:
    if spec.l != 2:
        raise ValueError(f"{spec.kind} is a two-description region, spec has l={spec.l}")
    oracle = EntropyOracle(spec.pmf, spec.source)
    it = _role_items(spec)
    names = {r: {spec.aux[r]} if r in spec.aux else set() for r in it}

    def h(a, g=()):
        return oracle.conditional(a, list(g))

    def mi_x(a, g=()):
        return oracle.conditional(a, list(g)) - oracle.conditional(a, list(g), given_source=True)

    d1, d2, d12 = (DecoderSet.of(m, 2) for m in ([1], [2], [1, 2]))
    if spec.kind == "EGC":
        q, u1, u2, u12 = it["Q"], it["1"], it["2"], it["12"]
        r1 = mi_x(u1, q)
        r2 = mi_x(u2, q)
        penalty = h(u1, q) + h(u2, q) - h(u1 + u2, q)
        total = mi_x(u1 + u2, q) + penalty + mi_x(u12, u1 + u2 + q)
        shared = names["Q"]
    else:
        c, u1, u2, u12 = it["common"], it["1"], it["2"], it["12"]
        r1 = mi_x(c + u1)
        r2 = mi_x(c + u2)
        penalty = h(u1, c) + h(u2, c) - h(u1 + u2, c)
        total = mi_x(c) + mi_x(c + u12 + u1 + u2) + penalty
        shared = names["common"]
    allowed = {
        d1: shared | names["1"],
        d2: shared | names["2"],
        d12: shared | names["1"] | names["2"] | names["12"],
    }
    check_decoder_inputs(spec, allowed)
    b = _Builder(spec)
    b.rows.append(Inequality.of({"R1": -1.0}, -r1, "rate-bound", "R1"))
    b.rows.append(Inequality.of({"R2": -1.0}, -r2, "rate-bound", "R2"))
    b.rows.append(Inequality.of({"R1": -1.0, "R2": -1.0}, -total, "rate-bound", "R1+R2"))
    points = ["R1", "R2"]
    for name, value in distortion_constraints(spec):
        points.append(name)
        b.rows.append(Inequality.of({name: -1.0}, -value, "distortion", f"{name} >= E d"))
    meta = {"R1": r1, "R2": r2, "sum": total, "penalty": penalty}
    return BoundSystem(spec.kind, tuple(points), (), tuple(b.rows), meta)


def egc_bounds(spec: RegionSpec) -> BoundSystem:
    if spec.kind != "EGC":
        raise ValueError(f"expected an EGC spec, got {spec.kind}")
    return _two_description(spec)


def zb_bounds(spec: RegionSpec) -> BoundSystem:
    if spec.kind != "ZB":
        raise ValueError(f"expected a ZB spec, got {spec.kind}")
    return _two_description(spec)


GENERATORS = {
    "EGC": egc_bounds,
    "ZB": zb_bounds,
    "SSC": ssc_bounds,
    "Stage1": nested_coset_bounds,
    "Stage2": stage2_bounds,
    "Stage3": stage3_bounds,
    "Stage4": stage4_bounds,
}


def bounds_for(spec: RegionSpec) -> BoundSystem:
    return GENERATORS[spec.kind](spec)


# reconstruction rewrite -------------------------------------------------------


def _reroute(recon: ReconstructionMap, old: str, new: str, out_size: int, new_size: int) -> ReconstructionMap:
    """Read ``old`` through ``new`` where old = new // out_size."""
    inputs = tuple(new if v == old else v for v in recon.inputs)
    axis = recon.inputs.index(old)
    table = np.take(recon.table, np.arange(new_size) // out_size, axis=axis)
    return ReconstructionMap(inputs, table, recon.decoder)


def rewrite_reconstructions(spec: RegionSpec) -> RegionSpec:
    """Fold every SSC decoder's reconstruction into its own codebook variable.

    A decoder N whose reconstruction reads several decoded variables gets a
    new U_{{N}} = (old U_{{N}}, reconstruction); its map then reads only that
    variable.  The full decoder has no own codebook and is left untouched.
    """
    if spec.kind != "SSC":
        raise ValueError("the rewrite applies to SSC specs")
    pmf, aux, decoders = spec.pmf, dict(spec.aux), dict(spec.decoders)
    for dec in sorted(spec.decoders, key=lambda d: (len(d), d.mask)):
        d = decoders[dec]
        if len(dec) == spec.l:
            continue
        own = SpernerFamily((dec,))
        old = aux.get(own)
        if not d.recon.inputs or d.recon.inputs == (old,):
            continue
        out_size = int(d.recon.table.max(initial=0)) + 1
        inputs = ((old,) if old else ()) + tuple(v for v in d.recon.inputs if v != old)
        base_size = pmf.size(old) if old else 1
        positions = [inputs.index(v) for v in d.recon.inputs]
        name = f"{old or 'U'}~{dec.label()}"

        def fold(*cols, positions=positions, recon=d.recon, has_old=old is not None):
            xhat = recon(*[cols[p] for p in positions])
            return (cols[0] * out_size if has_old else 0) + xhat

        new_size = base_size * out_size
        pmf = pmf.derive(name, new_size, fold, inputs)
        aux[own] = name
        decoders[dec] = Decoding(ReconstructionMap((name,), np.arange(new_size) % out_size, dec), d.distortion)
        if old:
            for other, od in decoders.items():
                if old in od.recon.inputs:
                    decoders[other] = Decoding(_reroute(od.recon, old, name, out_size, new_size), od.distortion)
    return spec.with_pmf(pmf, aux=aux, decoders=decoders)
