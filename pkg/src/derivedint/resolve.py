"""Koszul resolutions of complete intersections cut out by an explicit section."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exactlin import RatMatrix, SlicedComplex, cohomology, span_rank
from .gca import (Algebra, BaseRing, Derivation, GcaElement, Generator, enumerate_monomials,
                  format_element, slice_basis, slice_complex, square_vanishes_on_generators,
                  vector_to_element)
from .parallel import parallel_map


@dataclass(frozen=True)
class KoszulData:
    base: BaseRing
    algebra: Algebra
    section: tuple[GcaElement, ...]
    Q: Derivation
    flags: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.section)

    @property
    def odd_names(self) -> tuple[str, ...]:
        return self.algebra.gen_names

    def degrees(self) -> range:
        return range(-self.rank, 1)


def build_koszul(base: BaseRing, section: Sequence, names: Sequence[str] | None = None) -> KoszulData:
    """The dg-algebra (Λ(e_1..e_r) ⊗ base, Q) with Q(e_i) = s_i.

    Section entries may be strings in the element grammar or elements of the
    base algebra.  Each e_i gets degree -1 and the weight of s_i.
    """
    if not section:
        raise ValueError("the section must have at least one component")
    plain = Algebra(base, ())
    comps = [plain.element(s) if isinstance(s, str) else s for s in section]
    names = list(names) if names else [f"e{i + 1}" for i in range(len(comps))]
    if len(names) != len(comps):
        raise ValueError("one odd generator per section component is required")
    gens, flags = [], []
    for n, s in zip(names, comps):
        if s.algebra.base != base or s.algebra.generators:
            raise ValueError(f"section component {s} is not a base-ring element")
        w = s.weight
        if w is None:
            raise ValueError(f"section component {s} is not weight-homogeneous")
        if not s:
            flags.append(f"component for {n} is zero: section is not regular")
        gens.append(Generator(n, -1, w))
    alg = Algebra(base, tuple(gens))
    lifted = tuple(_lift(alg, s) for s in comps)
    Q = Derivation(alg, 1, {n: s for n, s in zip(names, lifted)})
    return KoszulData(base, alg, lifted, Q, tuple(flags))


def _lift(alg: Algebra, s: GcaElement) -> GcaElement:
    ng = alg.ngens()
    return GcaElement(alg, {(m[0], (0,) * ng): c for m, c in s.terms.items()})


def quotient_dimension(base_alg: Algebra, ideal_gens: Sequence[GcaElement], weight: int,
                       window: int | None = None) -> int:
    """dim of (base / ideal)_weight, by spanning all monomial multiples of the generators."""
    target = enumerate_monomials(base_alg, weight, window=window)
    index = {m: i for i, m in enumerate(target)}
    vectors = []
    for g in ideal_gens:
        gw = g.weight
        if not g or gw is None or gw > weight:
            continue
        for m in enumerate_monomials(base_alg, weight - gw, window=window):
            prod = base_alg.monomial(m) * g
            v = [Fraction(0)] * len(target)
            for t, c in prod.terms.items():
                v[index[t]] = c
            vectors.append(v)
    return len(target) - span_rank(vectors, len(target))


@dataclass
class WeightResult:
    weight: int
    dims: dict[int, int]
    expected_h0: int
    euler_ok: bool
    nonzero_negative: dict[int, list[str]] = field(default_factory=dict)


@dataclass
class ResolutionReport:
    rows: list[WeightResult]
    flags: list[str]
    diagnostics: list[str]

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def h0_dims(self) -> tuple[int, ...]:
        return tuple(r.dims.get(0, 0) for r in self.rows)


def koszul_slice(k: KoszulData, weight: int) -> SlicedComplex:
    return slice_complex(k.Q, k.algebra, weight, k.degrees())


def _check_weight(args) -> WeightResult:
    k, w = args
    c = koszul_slice(k, w)
    coh = cohomology(c)
    base_alg = Algebra(k.base, ())
    plain_section = [GcaElement(base_alg, {(m[0], ()): v for m, v in s.terms.items()}) for s in k.section]
    expected = quotient_dimension(base_alg, plain_section, w)
    chi_c = c.euler_characteristic()
    chi_h = sum((-1) ** (n % 2) * h.dim for n, h in coh.items())
    negatives = {}
    basis = slice_basis(k.algebra, k.degrees(), w)
    for n, h in coh.items():
        if n < 0 and h.dim:
            negatives[n] = [format_element(vector_to_element(k.algebra, basis[n], v))
                            for v in h.representatives]
    return WeightResult(w, {n: h.dim for n, h in coh.items()}, expected, chi_c == chi_h, negatives)


def check_resolution(k: KoszulData, w_max: int, jobs: int = 1) -> ResolutionReport:
    diagnostics = []
    bad = square_vanishes_on_generators(k.Q)
    if bad:
        diagnostics.append(f"Q^2 != 0 on {bad}")
    rows = parallel_map(_check_weight, [(k, w) for w in range(w_max + 1)], jobs)
    for r in rows:
        if r.dims.get(0, 0) != r.expected_h0:
            diagnostics.append(f"weight {r.weight}: H^0 has dim {r.dims.get(0, 0)}, quotient has dim {r.expected_h0}")
        for n, reps in r.nonzero_negative.items():
            diagnostics.append(f"weight {r.weight}: H^{n} has dim {r.dims[n]} (representative {reps[0]})")
        if not r.euler_ok:
            diagnostics.append(f"weight {r.weight}: Euler characteristic mismatch")
    return ResolutionReport(rows, list(k.flags), diagnostics)


def koszul_euler_expected(k: KoszulData, weight: int) -> int:
    """Σ_i (−1)^i dim(Λ^i E ⊗ base)_w counted directly from monomials."""
    total = 0
    for m in enumerate_monomials(k.algebra, weight):
        i = sum(m[1])
        total += -1 if i % 2 else 1
    return total
