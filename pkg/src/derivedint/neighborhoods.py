"""Relative de Rham complex of a Koszul resolution, its truncations, the
comparison map to O_Y/I^{k+1}, and the derived self-intersection.

Conventions.  Each odd generator e_i gets an even form generator ``de_i`` of
degree 0 and the same weight.  d_DR (degree 1) sends e_i to de_i; L_Q (degree
1) sends e_i to s_i; the contraction ι_Q (degree 0) sends de_i to −s_i, which
is the sign making L_Q = d_DR∘ι_Q − ι_Q∘d_DR with the usual graded commutator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Sequence

from .exactlin import (RatMatrix, SlicedComplex, cohomology, induced_rank, span_rank)
from .gca import (Algebra, Derivation, GcaElement, Generator, Monomial, apply, commutator,
                  derivations_agree, enumerate_monomials, format_element, operator_matrix,
                  slice_basis, slice_complex, square_vanishes_on_generators, substitute)
from .parallel import parallel_map
from .resolve import KoszulData


class ConstructionError(AssertionError):
    """An identity that holds by construction failed: a sign or wiring bug."""


def form_name(e: str) -> str:
    return f"d{e}"


@dataclass(frozen=True)
class DeRhamComplex:
    koszul: KoszulData
    algebra: Algebra
    d_dr: Derivation
    iota_q: Derivation
    lie_q: Derivation

    @property
    def D(self) -> Derivation:
        return self.d_dr + self.lie_q

    @property
    def odd_names(self) -> tuple[str, ...]:
        return self.koszul.odd_names

    @property
    def form_names(self) -> tuple[str, ...]:
        return tuple(form_name(e) for e in self.odd_names)

    def form_degree(self, m: Monomial) -> int:
        r = self.koszul.rank
        return sum(m[1][r:])

    def identity_failures(self) -> dict[str, list[str]]:
        """Generators on which Cartan, D² = 0 or L_Q² = 0 fail (empty lists when sound)."""
        return {
            "cartan": derivations_agree(commutator(self.d_dr, self.iota_q), self.lie_q),
            "D^2": square_vanishes_on_generators(self.D),
            "L_Q^2": square_vanishes_on_generators(self.lie_q),
            "d_DR^2": square_vanishes_on_generators(self.d_dr),
        }


def build_de_rham(k: KoszulData) -> DeRhamComplex:
    base_alg = k.algebra
    forms = tuple(Generator(form_name(g.name), g.degree + 1, g.weight) for g in base_alg.generators)
    alg = base_alg.extend(forms)
    lift = {g.name: substitute(k.Q.images[g.name], alg, {}) for g in base_alg.generators}
    d_dr = Derivation(alg, 1, {g.name: alg.gen(form_name(g.name)) for g in base_alg.generators})
    iota = Derivation(alg, 0, {form_name(g.name): -lift[g.name] for g in base_alg.generators})
    lie_images = dict(lift)
    for g in base_alg.generators:
        lie_images[form_name(g.name)] = -apply(d_dr, lift[g.name])
    lie_q = Derivation(alg, 1, lie_images)
    dr = DeRhamComplex(k, alg, d_dr, iota, lie_q)
    failures = {name: bad for name, bad in dr.identity_failures().items() if bad}
    if failures:
        raise ConstructionError(f"de Rham identities fail: {failures}")
    return dr


@dataclass(frozen=True)
class TruncatedCE:
    de_rham: DeRhamComplex
    k: int

    def keep(self, m: Monomial) -> bool:
        return self.de_rham.form_degree(m) <= self.k

    def slice(self, weight: int) -> SlicedComplex:
        return slice_complex(self.de_rham.D, self.de_rham.algebra, weight,
                             self.de_rham.koszul.degrees(), keep=self.keep)

    def basis(self, weight: int) -> dict[int, list[Monomial]]:
        return slice_basis(self.de_rham.algebra, self.de_rham.koszul.degrees(), weight, keep=self.keep)


def truncate(dr: DeRhamComplex, k: int) -> TruncatedCE:
    if k < 0:
        raise ValueError("truncation order must be >= 0")
    return TruncatedCE(dr, k)


# ---------------------------------------------------------------------------
# the comparison map to O_Y / I^{k+1}


def _plain_base(k: KoszulData) -> Algebra:
    return Algebra(k.base, ())


def _to_plain(alg: Algebra, a: GcaElement) -> GcaElement:
    return GcaElement(alg, {(m[0], ()): c for m, c in a.terms.items()})


def ideal_power_generators(k: KoszulData, power: int) -> list[GcaElement]:
    plain = _plain_base(k)
    comps = [_to_plain(plain, s) for s in k.section]
    out = []
    for combo in combinations_with_replacement(range(len(comps)), power):
        g = plain.one()
        for i in combo:
            g = g * comps[i]
        out.append(g)
    return out


def phi(dr: DeRhamComplex, a: GcaElement) -> GcaElement:
    """Algebra map to O_Y: kill odd generators, send de_i to −ε(s_i)."""
    plain = _plain_base(dr.koszul)
    r = dr.koszul.rank
    images = [-_to_plain(plain, s) for s in dr.koszul.section]
    out = plain.zero()
    for (base, gens), c in a.terms.items():
        if any(gens[:r]):
            continue
        term = plain.monomial((base, ()), c)
        for e, img in zip(gens[r:], images):
            if e:
                term = term * img ** e
        out = out + term
    return out


@dataclass
class QuotientSlice:
    """(O_Y / I^{k+1})_w presented as a monomial basis plus an ideal span."""

    basis: list[Monomial]
    ideal_vectors: list[list[Fraction]]

    @property
    def dim(self) -> int:
        return len(self.basis) - span_rank(self.ideal_vectors, len(self.basis))

    def vector(self, a: GcaElement) -> list[Fraction]:
        index = {m: i for i, m in enumerate(self.basis)}
        v = [Fraction(0)] * len(self.basis)
        for m, c in a.terms.items():
            v[index[m]] += c
        return v

    def in_ideal(self, a: GcaElement) -> bool:
        n = len(self.basis)
        base = span_rank(self.ideal_vectors, n)
        return span_rank(self.ideal_vectors + [self.vector(a)], n) == base

    def image_rank(self, elements: Sequence[GcaElement]) -> int:
        n = len(self.basis)
        base = span_rank(self.ideal_vectors, n)
        return span_rank(self.ideal_vectors + [self.vector(a) for a in elements], n) - base


def quotient_slice(k: KoszulData, power: int, weight: int) -> QuotientSlice:
    plain = _plain_base(k)
    basis = enumerate_monomials(plain, weight)
    index = {m: i for i, m in enumerate(basis)}
    vectors = []
    for g in ideal_power_generators(k, power):
        gw = g.weight
        if gw is None or gw > weight:
            continue
        for m in enumerate_monomials(plain, weight - gw):
            v = [Fraction(0)] * len(basis)
            for t, c in (plain.monomial(m) * g).terms.items():
                v[index[t]] += c
            vectors.append(v)
    return QuotientSlice(basis, vectors)


@dataclass
class PhiRow:
    weight: int
    dims: dict[int, int]
    expected_h0: int
    phi_rank: int
    chain_map: bool
    into_ideal: bool


@dataclass
class PhiReport:
    k: int
    rows: list[PhiRow]

    @property
    def ok(self) -> bool:
        return all(r.chain_map and r.into_ideal and r.dims.get(0, 0) == r.expected_h0 == r.phi_rank
                   and not any(v for n, v in r.dims.items() if n != 0) for r in self.rows)

    @property
    def total_h0(self) -> int:
        return sum(r.dims.get(0, 0) for r in self.rows)

    def diagnostics(self) -> list[str]:
        out = []
        for r in self.rows:
            if r.dims.get(0, 0) != r.expected_h0:
                out.append(f"k={self.k} weight {r.weight}: H^0 dim {r.dims.get(0, 0)} != {r.expected_h0}")
            if r.phi_rank != r.expected_h0:
                out.append(f"k={self.k} weight {r.weight}: phi has rank {r.phi_rank} on H^0")
            for n, v in r.dims.items():
                if n != 0 and v:
                    out.append(f"k={self.k} weight {r.weight}: H^{n} has dim {v}")
            if not r.chain_map:
                out.append(f"k={self.k} weight {r.weight}: phi is not a chain map")
            if not r.into_ideal:
                out.append(f"k={self.k} weight {r.weight}: augmentation ideal not sent into I")
        return out


def _phi_row(args) -> PhiRow:
    t, w = args
    dr = t.de_rham
    c = t.slice(w)
    basis = t.basis(w)
    coh = cohomology(c)
    q = quotient_slice(dr.koszul, t.k + 1, w)
    alg = dr.algebra
    reps = [GcaElement(alg, dict(zip(basis[0], v))) for v in coh[0].representatives] if 0 in coh else []
    phi_rank = q.image_rank([phi(dr, a) for a in reps])
    chain = True
    if -1 in basis:
        for m in basis[-1]:
            img = apply(dr.D, alg.monomial(m)).filter(t.keep)
            if not q.in_ideal(phi(dr, img)):
                chain = False
                break
    into_ideal = True
    q1 = quotient_slice(dr.koszul, 1, w)
    for m in basis.get(0, []):
        if dr.form_degree(m) >= 1 and not q1.in_ideal(phi(dr, alg.monomial(m))):
            into_ideal = False
            break
    return PhiRow(w, {n: h.dim for n, h in coh.items()}, q.dim, phi_rank, chain, into_ideal)


def verify_phi_quasi_iso(t: TruncatedCE, w_max: int, jobs: int = 1) -> PhiReport:
    rows = parallel_map(_phi_row, [(t, w) for w in range(w_max + 1)], jobs)
    return PhiReport(t.k, rows)


# ---------------------------------------------------------------------------
# derived self-intersection


def prime(name: str) -> str:
    return f"{name}'"


def diag_name(name: str) -> str:
    return f"u{name}"


@dataclass(frozen=True)
class SelfIntersection:
    koszul: KoszulData
    algebra: Algebra            # generators e_i then e_i'
    Q: Derivation               # Q ⊗ 1 + 1 ⊗ Q
    diag_algebra: Algebra       # generators e_i then u_i = e_i − e_i'
    diag_Q: Derivation

    @property
    def rank(self) -> int:
        return self.koszul.rank

    def degrees(self) -> range:
        return range(-2 * self.rank, 1)

    def to_diagonal(self, a: GcaElement) -> GcaElement:
        """Rewrite an element in the coordinates (e_i, u_i)."""
        imgs = {}
        for g in self.koszul.algebra.generators:
            e = self.diag_algebra.gen(g.name)
            imgs[g.name] = e
            imgs[prime(g.name)] = e - self.diag_algebra.gen(diag_name(g.name))
        return substitute(a, self.diag_algebra, imgs)

    def from_diagonal(self, a: GcaElement) -> GcaElement:
        imgs = {}
        for g in self.koszul.algebra.generators:
            e = self.algebra.gen(g.name)
            imgs[g.name] = e
            imgs[diag_name(g.name)] = e - self.algebra.gen(prime(g.name))
        return substitute(a, self.algebra, imgs)

    def diagonal_generators(self) -> list[GcaElement]:
        return [self.algebra.gen(g.name) - self.algebra.gen(prime(g.name))
                for g in self.koszul.algebra.generators]

    def u_degree(self, m: Monomial) -> int:
        return sum(m[1][self.rank:])

    def full_slice(self, weight: int) -> SlicedComplex:
        return slice_complex(self.Q, self.algebra, weight, self.degrees())

    def truncated_slice(self, k: int, weight: int) -> SlicedComplex:
        """Slice of O_Δ^(k) = doubled algebra / J^{k+1}."""
        return slice_complex(self.diag_Q, self.diag_algebra, weight, self.degrees(),
                             keep=lambda m: self.u_degree(m) <= k)

    def swap(self, a: GcaElement) -> GcaElement:
        """Exchange the two tensor factors (e_i <-> e_i')."""
        imgs = {}
        for g in self.koszul.algebra.generators:
            imgs[g.name] = self.algebra.gen(prime(g.name))
            imgs[prime(g.name)] = self.algebra.gen(g.name)
        return substitute(a, self.algebra, imgs)

    def swap_is_chain_map(self) -> bool:
        return all(self.swap(apply(self.Q, self.algebra.gen(g.name)))
                   == apply(self.Q, self.swap(self.algebra.gen(g.name)))
                   for g in self.algebra.generators)


def build_self_intersection(k: KoszulData) -> SelfIntersection:
    gens = k.algebra.generators
    doubled = Algebra(k.base, gens + tuple(Generator(prime(g.name), g.degree, g.weight) for g in gens))
    images = {}
    for g in gens:
        s = substitute(k.Q.images[g.name], doubled, {})
        images[g.name] = s
        images[prime(g.name)] = s
    Q = Derivation(doubled, 1, images)
    diag = Algebra(k.base, gens + tuple(Generator(diag_name(g.name), g.degree, g.weight) for g in gens))
    si = SelfIntersection(k, doubled, Q, diag, Derivation(diag, 1, {}))
    # transport the differential into diagonal coordinates
    diag_images = {}
    for g in diag.generators:
        diag_images[g.name] = si.to_diagonal(apply(Q, si.from_diagonal(diag.gen(g.name))))
    si = SelfIntersection(k, doubled, Q, diag, Derivation(diag, 1, diag_images))
    bad = square_vanishes_on_generators(Q)
    if bad:
        raise ConstructionError(f"total differential squares to nonzero on {bad}")
    for j in si.diagonal_generators():
        if apply(Q, j):
            raise ConstructionError(f"diagonal ideal generator {j} is not a cycle")
    return si


@dataclass
class TorReport:
    per_weight: dict[int, dict[int, int]]

    def totals(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for dims in self.per_weight.values():
            for n, v in dims.items():
                out[n] = out.get(n, 0) + v
        return out

    def tor_dims(self) -> tuple[int, ...]:
        """Total dims of Tor_i, i = 0, 1, 2, ... (cohomological degree −i)."""
        tot = self.totals()
        top = max((-n for n, v in tot.items() if v), default=0)
        return tuple(tot.get(-i, 0) for i in range(top + 1))


def _tor_weight(args):
    si, w = args
    c = si.full_slice(w)
    return {n: h.dim for n, h in cohomology(c, representatives=False).items()}


def tor_dims(si: SelfIntersection, w_max: int, jobs: int = 1) -> TorReport:
    rows = parallel_map(_tor_weight, [(si, w) for w in range(w_max + 1)], jobs)
    return TorReport(dict(zip(range(w_max + 1), rows)))


def _quotient_chain_map(si: SelfIntersection, k: int, w: int) -> tuple[dict[int, RatMatrix], SlicedComplex, SlicedComplex]:
    full = slice_complex(si.diag_Q, si.diag_algebra, w, si.degrees())
    trunc = si.truncated_slice(k, w)
    src = slice_basis(si.diag_algebra, si.degrees(), w)
    keep = lambda m: si.u_degree(m) <= k
    maps = {}
    for n in si.degrees():
        tgt = [m for m in src[n] if keep(m)]
        maps[n] = operator_matrix(lambda a: a, si.diag_algebra, src[n], tgt, keep=keep)
    return maps, full, trunc


@dataclass
class CompletionRow:
    k: int
    weight: int
    full: dict[int, int]
    truncated: dict[int, int]
    induced: dict[int, int]

    @property
    def agrees(self) -> bool:
        return all(self.full.get(n, 0) == self.truncated.get(n, 0) == self.induced.get(n, 0)
                   for n in set(self.full) | set(self.truncated))


@dataclass
class CompletionReport:
    rows: list[CompletionRow]
    k_values: list[int]

    def agreement(self, k: int) -> bool:
        return all(r.agrees for r in self.rows if r.k == k)

    @property
    def smallest_k(self) -> int | None:
        """Smallest k such that every checked k' >= k agrees on all slices."""
        best = None
        for k in sorted(self.k_values, reverse=True):
            if self.agreement(k):
                best = k
            else:
                break
        return best

    def failures(self, k: int) -> list[str]:
        out = []
        for r in self.rows:
            if r.k == k and not r.agrees:
                for n in sorted(set(r.full) | set(r.truncated)):
                    if r.full.get(n, 0) != r.truncated.get(n, 0) or r.induced.get(n, 0) != r.full.get(n, 0):
                        out.append(f"k={k} weight {r.weight} degree {n}: full {r.full.get(n, 0)} "
                                   f"truncated {r.truncated.get(n, 0)} induced rank {r.induced.get(n, 0)}")
        return out


def _completion_row(args) -> CompletionRow:
    si, k, w = args
    maps, full, trunc = _quotient_chain_map(si, k, w)
    hf = cohomology(full, representatives=False)
    ht = cohomology(trunc, representatives=False)
    induced = {n: induced_rank(maps, full, trunc, n) for n in si.degrees()}
    return CompletionRow(k, w, {n: h.dim for n, h in hf.items()}, {n: h.dim for n, h in ht.items()}, induced)


def verify_completion(si: SelfIntersection, k_values: Sequence[int], w_max: int, jobs: int = 1) -> CompletionReport:
    tasks = [(si, k, w) for k in k_values for w in range(w_max + 1)]
    return CompletionReport(parallel_map(_completion_row, tasks, jobs), list(k_values))
