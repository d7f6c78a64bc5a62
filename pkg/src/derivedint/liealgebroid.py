"""The tangent dg-Lie algebroid of a Koszul resolution A = (Λ(e) ⊗ O_Y, Q).

T is free over A on the odd coordinate fields ∂_i = ∂/∂e_i (degree +1,
weight −w(e_i)).  From it we build the Chevalley-Eilenberg cochains (checked
against the truncated de Rham complex), the enveloping algebra realized as
normally ordered differential operators a·∂_I, the jets as its left A-dual,
and the O_Y-linear endomorphism complex of A.

Sign conventions used throughout:

* a p-cochain is recorded by its values on sorted tuples of coordinate
  fields; the pairing with forms is ω(v_1..v_p) = ι_{v_p}⋯ι_{v_1} ω with
  ι_{∂_i}(de_j) = δ_ij;
* the comparison map (A⊗A)/J^{k+1} → J^(k) carries the Koszul sign
  a⊗a' ↦ (P ↦ (−1)^{|P||a'|} a·P(a')), the sign that makes it a chain map.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from math import factorial
from typing import Iterable, Sequence

from .exactlin import (RatMatrix, SlicedComplex, cohomology, induced_rank, rank)
from .gca import (Algebra, Derivation, GcaElement, Monomial, apply, commutator,
                  enumerate_monomials, operator_matrix, slice_basis, substitute)
from .neighborhoods import (DeRhamComplex, SelfIntersection, build_de_rham,
                            build_self_intersection, form_name, prime, truncate)
from .parallel import parallel_map
from .resolve import KoszulData, check_resolution

Field = tuple[Monomial, int]          # a·∂_i as (monomial of a, i)
DiffMono = tuple[Monomial, tuple[int, ...]]   # a·∂_I, I strictly increasing


def _sign(b: bool) -> int:
    return -1 if b else 1


# ---------------------------------------------------------------------------
# the tangent algebroid


@dataclass(frozen=True)
class TangentAlgebroid:
    koszul: KoszulData

    @property
    def algebra(self) -> Algebra:
        return self.koszul.algebra

    @property
    def rank(self) -> int:
        return self.koszul.rank

    def field_weight(self, i: int) -> int:
        return -self.algebra.generators[i].weight

    def coordinate_field(self, i: int, coeff: GcaElement | None = None) -> Derivation:
        """The derivation coeff·∂_i (O_Y-linear)."""
        alg = self.algebra
        coeff = alg.one() if coeff is None else coeff
        deg = 1 + (coeff.degree or 0)
        images = {g.name: (coeff if j == i else alg.zero()) for j, g in enumerate(alg.generators)}
        return Derivation(alg, deg, images)

    def from_fields(self, vec: dict[Field, Fraction]) -> Derivation:
        alg = self.algebra
        images = {g.name: alg.zero() for g in alg.generators}
        degs = set()
        for (m, i), c in vec.items():
            name = alg.generators[i].name
            images[name] = images[name] + alg.monomial(m, c)
            degs.add(alg.mono_degree(m) + 1)
        deg = degs.pop() if len(degs) == 1 else (1 if not degs else None)
        if deg is None:
            raise ValueError("inhomogeneous vector field")
        return Derivation(alg, deg, images)

    def to_fields(self, D: Derivation) -> dict[Field, Fraction]:
        if any(D.var_images.values()):
            raise ValueError("derivation is not O_Y-linear")
        out = {}
        for i in range(self.rank):
            for m, c in D.image_of_generator(i).terms.items():
                out[(m, i)] = c
        return out

    @property
    def Q(self) -> Derivation:
        return self.koszul.Q

    def differential(self, D: Derivation) -> Derivation:
        return commutator(self.Q, D)

    def bracket(self, D1: Derivation, D2: Derivation) -> Derivation:
        return commutator(D1, D2)

    def slice_basis(self, degree: int, weight: int) -> list[Field]:
        out = []
        for i in range(self.rank):
            for m in enumerate_monomials(self.algebra, weight - self.field_weight(i), degree - 1):
                out.append((m, i))
        return out

    def slice(self, weight: int) -> SlicedComplex:
        degs = range(1 - self.rank, 2)
        bases = {n: self.slice_basis(n, weight) for n in degs}
        diffs = {}
        for n in degs:
            if n + 1 not in bases:
                continue
            index = {f: j for j, f in enumerate(bases[n + 1])}
            ent = {}
            for col, (m, i) in enumerate(bases[n]):
                img = self.to_fields(self.differential(self.coordinate_field(i, self.algebra.monomial(m))))
                for f, c in img.items():
                    ent[(index[f], col)] = c
            diffs[n] = RatMatrix(len(bases[n + 1]), len(bases[n]), ent)
        return SlicedComplex({n: len(b) for n, b in bases.items()}, diffs)

    def normal_bundle_dim(self, weight: int) -> int:
        """Σ_i dim (O_X)_{weight + w_i}: the expected H^1 slice."""
        total = 0
        for i in range(self.rank):
            w = weight - self.field_weight(i)
            if w < 0:
                continue
            total += check_resolution(self.koszul, w).rows[w].expected_h0
        return total


def build_tangent(k: KoszulData) -> TangentAlgebroid:
    return TangentAlgebroid(k)


@dataclass
class TangentReport:
    per_weight: dict[int, dict[int, int]]
    expected_h1: dict[int, int]
    d_squared_ok: bool
    flat_q: bool

    @property
    def ok(self) -> bool:
        conc = all(v == 0 for dims in self.per_weight.values() for n, v in dims.items() if n != 1)
        match = all(self.per_weight[w].get(1, 0) == self.expected_h1[w] for w in self.per_weight)
        return conc and match and self.d_squared_ok

    def total_h1(self) -> int:
        return sum(d.get(1, 0) for d in self.per_weight.values())


def tangent_cohomology(t: TangentAlgebroid, weights: Iterable[int]) -> TangentReport:
    per, exp = {}, {}
    dd = True
    for w in weights:
        c = t.slice(w)
        dd = dd and not c.square_defects()
        per[w] = {n: h.dim for n, h in cohomology(c, representatives=False).items()}
        exp[w] = t.normal_bundle_dim(w)
    flat = all(commutator(t.Q, t.coordinate_field(i)).is_zero() for i in range(t.rank))
    return TangentReport(per, exp, dd, flat)


def jacobi_defect(D1: Derivation, D2: Derivation, D3: Derivation) -> Derivation:
    """[D1,[D2,D3]] − [[D1,D2],D3] − (−1)^{|D1||D2|}[D2,[D1,D3]]."""
    s = _sign((D1.degree * D2.degree) % 2)
    return (commutator(D1, commutator(D2, D3)) - commutator(commutator(D1, D2), D3)
            - commutator(D2, commutator(D1, D3)).scaled(s))


def _sample_fields(t: TangentAlgebroid, limit: int = 3) -> list[Derivation]:
    alg = t.algebra
    coeffs = [alg.one()] + [alg.var(v.name) for v in alg.base.variables] + [alg.gen(g.name) for g in alg.generators]
    return [t.coordinate_field(i, a) for i in range(t.rank) for a in coeffs[:limit + 1]]


def algebroid_failures(t: TangentAlgebroid) -> list[str]:
    """[Q,-]² = 0, antisymmetry, Jacobi and anchor compatibility on sampled fields."""
    alg = t.algebra
    out = []
    fields = _sample_fields(t)
    for v in fields:
        if not commutator(t.Q, commutator(t.Q, v)).is_zero():
            out.append(f"[Q,[Q,v]] != 0 for v = {t.to_fields(v)}")
    for a, v in enumerate(fields):
        for w in fields[a:]:
            s = _sign((v.degree * w.degree) % 2 == 1)
            if not (commutator(v, w) + commutator(w, v).scaled(s)).is_zero():
                out.append("bracket is not graded antisymmetric")
            for u in fields[:4]:
                if not jacobi_defect(u, v, w).is_zero():
                    out.append("Jacobi identity fails")
            for b in [alg.var(x.name) for x in alg.base.variables] + [alg.gen(g.name) for g in alg.generators]:
                bw = _times(t, b, w)
                lhs = commutator(v, bw)
                rhs = _times(t, apply(v, b), w) + _times(t, b, commutator(v, w)).scaled(
                    _sign((v.degree * (b.degree or 0)) % 2 == 1))
                if not (lhs - rhs).is_zero():
                    out.append("anchor compatibility fails")
    return sorted(set(out))


def _times(t: TangentAlgebroid, a: GcaElement, D: Derivation) -> Derivation:
    """The derivation a·D."""
    if not a:
        return Derivation(t.algebra, D.degree, {})
    images = {g.name: a * D.image_of_generator(i) for i, g in enumerate(t.algebra.generators)}
    return Derivation(t.algebra, D.degree + (a.degree or 0), images)


# ---------------------------------------------------------------------------
# Chevalley-Eilenberg cochains versus the truncated de Rham complex


def _contraction(dr: DeRhamComplex, i: int) -> Derivation:
    alg = dr.algebra
    return Derivation(alg, 0, {form_name(dr.odd_names[i]): alg.one()})


def pairing(dr: DeRhamComplex, omega: GcaElement, fields: Sequence[int]) -> GcaElement:
    """ι_{∂_{i_p}}⋯ι_{∂_{i_1}} ω restricted to form degree 0, as an element of A."""
    out = omega
    for i in fields:
        out = apply(_contraction(dr, i), out)
    r = dr.koszul.rank
    kept = out.filter(lambda m: not any(m[1][r:]))
    return substitute(kept, dr.koszul.algebra, {n: dr.koszul.algebra.zero() for n in dr.form_names})


@dataclass(frozen=True)
class CochainSlice:
    """Basis of p-cochains (p ≤ k): pairs (sorted field tuple, monomial value)."""

    basis: dict[int, list[tuple[tuple[int, ...], Monomial]]]


def _cochain_basis(t: TangentAlgebroid, k: int, degree: int, weight: int) -> list[tuple[tuple[int, ...], Monomial]]:
    out = []
    for p in range(k + 1):
        for I in combinations_with_replacement(range(t.rank), p):
            w_val = weight - sum(t.algebra.generators[i].weight for i in I)
            for m in enumerate_monomials(t.algebra, w_val, degree):
                out.append((I, m))
    return out


def ce_differential(t: TangentAlgebroid, values: dict[tuple[int, ...], GcaElement], k: int) -> dict[tuple[int, ...], GcaElement]:
    """Total CE differential of a cochain given by its values on sorted field tuples.

    Internal part: Q applied to values (requires [Q, ∂_i] = 0, checked).
    CE part: (dω)(v_0..v_p) = Σ_i ρ(v_i) ω(..v̂_i..) − Σ_{i<j} ω(μ(v_i,v_j), ..).
    """
    alg = t.algebra
    fields = [t.coordinate_field(i) for i in range(t.rank)]
    for i, f in enumerate(fields):
        if not commutator(t.Q, f).is_zero():
            raise NotImplementedError("[Q, ∂_i] != 0: anchor differential term not supported")
    out: dict[tuple[int, ...], GcaElement] = {}
    for I, v in values.items():
        out[I] = out.get(I, alg.zero()) + apply(t.Q, v)
    for p in range(k):
        for J in combinations_with_replacement(range(t.rank), p + 1):
            acc = alg.zero()
            for pos in range(len(J)):
                rest = J[:pos] + J[pos + 1:]
                if rest in values:
                    acc = acc + apply(fields[J[pos]], values[rest])
            for a in range(len(J)):
                for b in range(a + 1, len(J)):
                    br = t.to_fields(commutator(fields[J[a]], fields[J[b]]))
                    for (m, i), c in br.items():
                        rest = tuple(sorted(J[:a] + J[a + 1:b] + J[b + 1:] + (i,)))
                        if rest in values and alg.mono_degree(m) == 0 and not any(m[0]):
                            acc = acc - values[rest] * c
                        elif c and rest in values:
                            raise NotImplementedError("non-constant bracket coefficients")
            if acc:
                out[J] = out.get(J, alg.zero()) + acc
    return out


@dataclass
class CERow:
    weight: int
    degree: int
    matrices_equal: bool
    pairing_invertible: bool


@dataclass
class CEReport:
    k: int
    rows: list[CERow]

    @property
    def ok(self) -> bool:
        return all(r.matrices_equal and r.pairing_invertible for r in self.rows)


def ce_consistency(t: TangentAlgebroid, k: int, w_max: int) -> CEReport:
    """Compare the CE formula with D = d_DR + L_Q on Ω^(k), slice by slice."""
    dr = build_de_rham(t.koszul)
    tr = truncate(dr, k)
    alg = t.algebra
    rows = []
    for w in range(w_max + 1):
        forms = tr.basis(w)
        for n in t.koszul.degrees():
            src = forms.get(n, [])
            tgt_forms = forms.get(n + 1, [])
            cb_src = _cochain_basis(t, k, n, w)
            cb_tgt = _cochain_basis(t, k, n + 1, w)
            idx_src = {b: j for j, b in enumerate(cb_src)}
            idx_tgt = {b: j for j, b in enumerate(cb_tgt)}

            def psi(omega: GcaElement, index) -> list[Fraction]:
                vec = [Fraction(0)] * len(index)
                for p in range(k + 1):
                    for I in combinations_with_replacement(range(t.rank), p):
                        val = pairing(dr, omega, I)
                        for m, c in val.terms.items():
                            vec[index[(I, m)]] += c
                return vec

            psi_src = RatMatrix.from_columns([psi(alg_m(dr, m), idx_src) for m in src], len(cb_src))
            psi_tgt = RatMatrix.from_columns([psi(alg_m(dr, m), idx_tgt) for m in tgt_forms], len(cb_tgt))
            D_forms = operator_matrix(lambda a: apply(dr.D, a), dr.algebra, src, tgt_forms, keep=tr.keep)
            cols = []
            for (I, m) in cb_src:
                img = ce_differential(t, {I: alg.monomial(m)}, k)
                vec = [Fraction(0)] * len(cb_tgt)
                for J, val in img.items():
                    if len(J) > k:
                        continue
                    for mm, c in val.terms.items():
                        vec[idx_tgt[(J, mm)]] += c
                cols.append(vec)
            D_ce = RatMatrix.from_columns(cols, len(cb_tgt))
            equal = (psi_tgt @ D_forms - D_ce @ psi_src).is_zero()
            inv = (rank(psi_src) == len(src) == len(cb_src))
            rows.append(CERow(w, n, equal, inv))
    return CEReport(k, rows)


def alg_m(dr: DeRhamComplex, m: Monomial) -> GcaElement:
    return dr.algebra.monomial(m)


# ---------------------------------------------------------------------------
# enveloping algebra as normally ordered differential operators


@dataclass(frozen=True)
class DiffOps:
    """Differential operators Σ c · a·∂_I on A, stored in normal order."""

    tangent: TangentAlgebroid

    @property
    def algebra(self) -> Algebra:
        return self.tangent.algebra

    @property
    def rank(self) -> int:
        return self.tangent.rank

    def degree(self, d: DiffMono) -> int:
        return self.algebra.mono_degree(d[0]) + len(d[1])

    def weight(self, d: DiffMono) -> int:
        return self.algebra.mono_weight(d[0]) - sum(self.algebra.generators[i].weight for i in d[1])

    def from_element(self, a: GcaElement) -> dict[DiffMono, Fraction]:
        return {(m, ()): c for m, c in a.terms.items()}

    def field(self, i: int) -> dict[DiffMono, Fraction]:
        return {(self.algebra.unit_monomial(), (i,)): Fraction(1)}

    def Q_operator(self) -> dict[DiffMono, Fraction]:
        out: dict[DiffMono, Fraction] = {}
        for i, s in enumerate(self.tangent.koszul.section):
            for m, c in s.terms.items():
                out[(m, (i,))] = out.get((m, (i,)), Fraction(0)) + c
        return out

    # -- action on A ----------------------------------------------------------------
    def act(self, P: dict[DiffMono, Fraction], b: GcaElement) -> GcaElement:
        alg = self.algebra
        out = alg.zero()
        fields = [self.tangent.coordinate_field(i) for i in range(self.rank)]
        for (m, I), c in P.items():
            val = b
            for i in reversed(I):
                val = apply(fields[i], val)
            out = out + alg.monomial(m, c) * val
        return out

    # -- products -----------------------------------------------------------------------
    def _fields_times_element(self, I: tuple[int, ...], b: GcaElement) -> dict[tuple[tuple[int, ...], Monomial], Fraction]:
        """Normal order ∂_I · b as Σ c·m·∂_K, returned as {(K, m): c}."""
        alg = self.algebra
        if not I:
            return {((), m): c for m, c in b.terms.items()}
        head, tail = I[0], I[1:]
        inner = self._fields_times_element(tail, b)
        out: dict[tuple[tuple[int, ...], Monomial], Fraction] = {}
        field = self.tangent.coordinate_field(head)
        for (K, m), c in inner.items():
            mono = alg.monomial(m)
            # ∂_h · m = ∂_h(m) + (−1)^{|m|} m ∂_h
            for mm, cc in apply(field, mono).terms.items():
                key = (K, mm)
                out[key] = out.get(key, Fraction(0)) + c * cc
            sign, K2 = _insert_field(head, K)
            if K2 is not None:
                key = (K2, m)
                out[key] = out.get(key, Fraction(0)) + c * sign * _sign(alg.mono_degree(m) % 2 == 1)
        return {k: v for k, v in out.items() if v}

    def multiply(self, P: dict[DiffMono, Fraction], R: dict[DiffMono, Fraction]) -> dict[DiffMono, Fraction]:
        alg = self.algebra
        out: dict[DiffMono, Fraction] = {}
        for (m1, I), c1 in P.items():
            for (m2, J), c2 in R.items():
                for (K, m), c in self._fields_times_element(I, alg.monomial(m2)).items():
                    sign, L = _merge_fields(K, J)
                    if L is None:
                        continue
                    prod = alg.monomial(m1) * alg.monomial(m)
                    for mm, cc in prod.terms.items():
                        key = (mm, L)
                        out[key] = out.get(key, Fraction(0)) + c1 * c2 * c * cc * sign
        return {k: v for k, v in out.items() if v}

    def add(self, P, R, scale=1):
        out = dict(P)
        for k, v in R.items():
            out[k] = out.get(k, Fraction(0)) + scale * v
        return {k: v for k, v in out.items() if v}

    def homogeneous_degree(self, P) -> int:
        ds = {self.degree(d) for d in P}
        if len(ds) > 1:
            raise ValueError("inhomogeneous operator")
        return ds.pop() if ds else 0

    def differential(self, P: dict[DiffMono, Fraction]) -> dict[DiffMono, Fraction]:
        """[Q, P] = Q·P − (−1)^{|P|} P·Q."""
        if not P:
            return {}
        Qop = self.Q_operator()
        s = _sign(self.homogeneous_degree(P) % 2 == 1)
        return self.add(self.multiply(Qop, P), self.multiply(P, Qop), -s)

    def filtration(self, P) -> int:
        return max((len(I) for _, I in P), default=0)

    def basis(self, degree: int, weight: int, k: int) -> list[DiffMono]:
        out = []
        for p in range(min(k, self.rank) + 1):
            for I in combinations(range(self.rank), p):
                w_a = weight + sum(self.algebra.generators[i].weight for i in I)
                for m in enumerate_monomials(self.algebra, w_a, degree - p):
                    out.append((m, I))
        return out


def _insert_field(h: int, K: tuple[int, ...]) -> tuple[int, tuple[int, ...] | None]:
    """∂_h·∂_K rewritten with sorted indices, using ∂_a∂_b = −∂_b∂_a and ∂_a² = 0."""
    if h in K:
        return 0, None
    pos = sum(1 for x in K if x < h)
    return _sign(pos % 2 == 1), tuple(sorted(K + (h,)))


def _merge_fields(K: tuple[int, ...], J: tuple[int, ...]) -> tuple[int, tuple[int, ...] | None]:
    if set(K) & set(J):
        return 0, None
    inversions = sum(1 for a in K for b in J if a > b)
    return _sign(inversions % 2 == 1), tuple(sorted(K + J))


@dataclass(frozen=True)
class TruncatedUEA:
    ops: DiffOps
    k: int

    def basis(self, degree: int, weight: int) -> list[DiffMono]:
        return self.ops.basis(degree, weight, self.k)

    def product(self, P, R):
        return self.ops.multiply(P, R)


def build_uea(t: TangentAlgebroid, k: int) -> TruncatedUEA:
    if k not in (0, 1, 2):
        raise ValueError("enveloping algebra truncation supports orders 0, 1, 2")
    return TruncatedUEA(DiffOps(t), k)


@dataclass
class UEAReport:
    relation_failures: list[str]
    leibniz_failures: list[str]
    action_failures: list[str]
    pbw: dict[tuple[int, int], tuple[int, int]]
    filtration_failures: list[str]

    @property
    def ok(self) -> bool:
        return not (self.relation_failures or self.leibniz_failures or self.action_failures
                    or self.filtration_failures) and all(a == b for a, b in self.pbw.values())


def check_uea(u: TruncatedUEA, w_max: int) -> UEAReport:
    """Relations, Leibniz for [Q,-], faithfulness of products, and PBW dimensions."""
    ops = u.ops
    alg = ops.algebra
    rel, leib, act, filt = [], [], [], []
    elements = [alg.one()] + [alg.var(v.name) for v in alg.base.variables] + [alg.gen(g.name) for g in alg.generators]
    # relation ∂·b − (−1)^{|b|} b·∂ = ∂(b)
    for i in range(ops.rank):
        for b in elements:
            lhs = ops.add(ops.multiply(ops.field(i), ops.from_element(b)),
                          ops.multiply(ops.from_element(b), ops.field(i)), -_sign((b.degree or 0) % 2 == 1))
            rhs = ops.from_element(apply(ops.tangent.coordinate_field(i), b))
            if lhs != rhs:
                rel.append(f"∂_{i} against {b}")
    samples = []
    for w in range(-ops.rank * 2, w_max + 1):
        for n in range(-ops.rank, ops.rank + 1):
            samples += [{d: Fraction(1)} for d in u.basis(n, w)[:3]]
    samples = samples[:24]
    probes = [alg.monomial(m) for w in range(0, 3) for m in enumerate_monomials(alg, w)][:12]
    for P in samples:
        for R in samples[:8]:
            PR = ops.multiply(P, R)
            if ops.filtration(PR) > ops.filtration(P) + ops.filtration(R):
                filt.append("filtration")
            for b in probes:
                if ops.act(PR, b) != ops.act(P, ops.act(R, b)):
                    act.append(f"product does not act as composition on {b}")
                    break
            dP = ops.differential(P)
            lhs = ops.differential(PR)
            s = _sign(ops.homogeneous_degree(P) % 2 == 1)
            rhs = ops.add(ops.multiply(dP, R), ops.multiply(P, ops.differential(R)), s)
            if lhs != rhs:
                leib.append("Leibniz rule for [Q,-] fails")
        if ops.differential(ops.differential(P)):
            leib.append("[Q,[Q,P]] != 0")
    # PBW shadow: gr U^{≤k} slice dims versus A ⊕ g ⊕ Λ²g counted directly
    pbw = {}
    for w in range(-2 * max(g.weight for g in alg.generators), w_max + 1):
        for n in range(-ops.rank, ops.rank + 1):
            got = len(u.basis(n, w))
            expect = 0
            for p in range(min(u.k, ops.rank) + 1):
                for I in combinations(range(ops.rank), p):
                    expect += len(enumerate_monomials(alg, w + sum(alg.generators[i].weight for i in I), n - p))
            pbw[(w, n)] = (got, expect)
    return UEAReport(rel, leib[:5], act[:5], pbw, filt[:5])


# ---------------------------------------------------------------------------
# coproduct and jets


def coproduct_fields(I: tuple[int, ...]) -> dict[tuple[tuple[int, ...], tuple[int, ...]], int]:
    """Δ(∂_I) = Π_{i∈I} (∂_i⊗1 + 1⊗∂_i) with Koszul signs, as {(I1, I2): sign}."""
    terms = {((), ()): 1}
    for i in I:
        new: dict = {}
        for (A, B), c in terms.items():
            # (A⊗B)(∂_i⊗1) = (−1)^{|B|} A∂_i ⊗ B
            s, A2 = _merge_fields(A, (i,))
            if A2 is not None:
                key = (A2, B)
                new[key] = new.get(key, 0) + c * s * _sign(len(B) % 2 == 1)
            s, B2 = _merge_fields(B, (i,))
            if B2 is not None:
                key = (A, B2)
                new[key] = new.get(key, 0) + c * s
        terms = {k: v for k, v in new.items() if v}
    return terms


@dataclass(frozen=True)
class TruncatedJet:
    """Left A-linear maps U^{≤k} → A, recorded by their values on ∂_I (|I| ≤ k)."""

    tangent: TangentAlgebroid
    k: int

    def index_sets(self) -> list[tuple[int, ...]]:
        return [I for p in range(min(self.k, self.tangent.rank) + 1)
                for I in combinations(range(self.tangent.rank), p)]

    def basis(self, degree: int, weight: int) -> list[tuple[tuple[int, ...], Monomial]]:
        alg = self.tangent.algebra
        out = []
        for I in self.index_sets():
            w_val = weight - sum(alg.generators[i].weight for i in I)
            for m in enumerate_monomials(alg, w_val, degree + len(I)):
                out.append((I, m))
        return out

    def product(self, j1: dict, j2: dict, deg2: int) -> dict:
        """(j1·j2)(∂_I) = Σ ± j1(∂_{I1}) j2(∂_{I2}) over the coproduct of ∂_I."""
        alg = self.tangent.algebra
        out = {}
        for I in self.index_sets():
            acc = alg.zero()
            for (I1, I2), s in coproduct_fields(I).items():
                if I1 in j1 and I2 in j2:
                    acc = acc + j1[I1] * j2[I2] * (s * _sign((deg2 * len(I1)) % 2 == 1))
            if acc:
                out[I] = acc
        return out

    def differential(self, j: dict, deg: int) -> dict:
        """(dj)(P) = Q(j(P)) − (−1)^{|j|} j([Q,P]); here [Q, ∂_I] is computed and must vanish."""
        ops = DiffOps(self.tangent)
        out = {}
        for I in self.index_sets():
            val = apply(self.tangent.Q, j[I]) if I in j else self.tangent.algebra.zero()
            comm = ops.differential({(self.tangent.algebra.unit_monomial(), I): Fraction(1)})
            for (m, K), c in comm.items():
                if K in j:
                    val = val - self.tangent.algebra.monomial(m, c) * j[K] * _sign(
                        (deg * self.tangent.algebra.mono_degree(m)) % 2 == 1) * _sign(deg % 2 == 1)
            if val:
                out[I] = val
        return out


    def left_unit(self, a: GcaElement) -> dict:
        """a ↦ (P ↦ a·P(1))."""
        return {(): a} if a else {}

    def right_unit(self, a: GcaElement) -> dict:
        """a ↦ (P ↦ (−1)^{|P||a|} P(a))."""
        fields = [self.tangent.coordinate_field(i) for i in range(self.tangent.rank)]
        out = {}
        for I in self.index_sets():
            val = a
            for i in reversed(I):
                val = apply(fields[i], val)
            if val:
                out[I] = val * _sign((len(I) * (a.degree or 0)) % 2 == 1)
        return out


def build_jets(u: TruncatedUEA) -> TruncatedJet:
    return TruncatedJet(u.ops.tangent, u.k)


def comparison_map(si: SelfIntersection, jets: TruncatedJet, x: GcaElement) -> dict[tuple[int, ...], GcaElement]:
    """Image of x ∈ A⊗A (doubled algebra) in J^(k): a⊗a' ↦ (P ↦ (−1)^{|P||a'|} a·P(a'))."""
    k = si.koszul
    A = k.algebra
    r = k.rank
    fields = [jets.tangent.coordinate_field(i) for i in range(r)]
    out: dict[tuple[int, ...], GcaElement] = {}
    for (base, gens), c in x.terms.items():
        a = A.monomial((base, gens[:r]), c)
        a2 = A.monomial(((0,) * len(base), gens[r:]))
        deg_a2 = A.mono_degree(next(iter(a2.terms)))
        for I in jets.index_sets():
            val = a2
            for i in reversed(I):
                val = apply(fields[i], val)
            val = a * val * _sign((len(I) * deg_a2) % 2 == 1)
            if val:
                out[I] = out.get(I, A.zero()) + val
    return {I: v for I, v in out.items() if v}


@dataclass
class JetRow:
    weight: int
    degree: int
    source_dim: int
    target_dim: int
    rank: int
    kills_ideal: bool


@dataclass
class JetReport:
    k: int
    rows: list[JetRow]
    chain_map: bool
    multiplicative: bool
    coproduct_ok: bool
    unit_failures: list[str] = field(default_factory=list)

    @property
    def isomorphism(self) -> bool:
        return all(r.source_dim == r.target_dim == r.rank and r.kills_ideal for r in self.rows)

    @property
    def ok(self) -> bool:
        return (self.isomorphism and self.chain_map and self.multiplicative and self.coproduct_ok
                and not self.unit_failures)


def _jet_vector(jets: TruncatedJet, j: dict, index: dict) -> list[Fraction]:
    v = [Fraction(0)] * len(index)
    for I, val in j.items():
        for m, c in val.terms.items():
            v[index[(I, m)]] += c
    return v


def jet_comparison(k: KoszulData, order: int, w_max: int) -> JetReport:
    """Slice-wise check that (A⊗A)/J^{order+1} → J^(order) is an isomorphism of dg-algebras."""
    t = build_tangent(k)
    si = build_self_intersection(k)
    jets = build_jets(build_uea(t, order))
    rows = []
    chain = True
    mult = True
    wmin = -sum(g.weight for g in k.algebra.generators)
    for w in range(wmin, w_max + 1):
        if w < 0:
            # the doubled algebra has no negative weights; the jet side must vanish too
            for n in range(-2 * k.rank, 1):
                tb = jets.basis(n, w)
                rows.append(JetRow(w, n, 0, len(tb), 0, True))
            continue
        src = slice_basis(si.diag_algebra, si.degrees(), w, keep=lambda m: si.u_degree(m) <= order)
        for n in si.degrees():
            tb = jets.basis(n, w)
            index = {b: i for i, b in enumerate(tb)}
            cols = []
            for m in src[n]:
                x = si.from_diagonal(si.diag_algebra.monomial(m))
                cols.append(_jet_vector(jets, comparison_map(si, jets, x), index))
            rk = rank(RatMatrix.from_columns(cols, len(tb))) if cols else 0
            kills = True
            for m in slice_basis(si.diag_algebra, [n], w, keep=lambda m: si.u_degree(m) == order + 1)[n]:
                if comparison_map(si, jets, si.from_diagonal(si.diag_algebra.monomial(m))):
                    kills = False
                    break
            rows.append(JetRow(w, n, len(src[n]), len(tb), rk, kills))
            # chain map and multiplicativity on this slice
            for m in src[n][:6]:
                x = si.from_diagonal(si.diag_algebra.monomial(m))
                lhs = comparison_map(si, jets, apply(si.Q, x))
                rhs = jets.differential(comparison_map(si, jets, x), n)
                if _strip(lhs) != _strip(rhs):
                    chain = False
                for m2 in src[n][:4]:
                    y = si.from_diagonal(si.diag_algebra.monomial(m2))
                    lhs = comparison_map(si, jets, x * y)
                    rhs = jets.product(comparison_map(si, jets, x), comparison_map(si, jets, y), n)
                    if _strip(lhs) != _strip(_truncate_jet(rhs, order)):
                        mult = False
    return JetReport(order, rows, chain, mult, coproduct_checks(t, order), unit_failures(si, jets))


def _strip(j: dict) -> dict:
    return {I: v for I, v in j.items() if v}


def _truncate_jet(j: dict, order: int) -> dict:
    return {I: v for I, v in j.items() if len(I) <= order}


def unit_failures(si: SelfIntersection, jets: TruncatedJet) -> list[str]:
    """Both units are multiplicative and pull back to the two factor inclusions."""
    alg = jets.tangent.algebra
    out = []
    probes = [alg.monomial(m) for w in range(0, 3) for m in enumerate_monomials(alg, w)][:10]
    for a in probes:
        first = substitute(a, si.algebra, {})
        second = substitute(a, si.algebra, {g.name: si.algebra.gen(prime(g.name)) for g in alg.generators})
        if _strip(comparison_map(si, jets, first)) != _strip(jets.left_unit(a)):
            out.append(f"left unit differs from first inclusion on {a}")
        if _strip(comparison_map(si, jets, second)) != _strip(jets.right_unit(a)):
            out.append(f"right unit differs from second inclusion on {a}")
        for b in probes:
            for unit in (jets.left_unit, jets.right_unit):
                lhs = _strip(unit(a * b))
                rhs = _strip(_truncate_jet(jets.product(unit(a), unit(b), b.degree or 0), jets.k))
                if lhs != rhs:
                    out.append(f"{unit.__name__} is not multiplicative on {a}, {b}")
    return out


def coproduct_checks(t: TangentAlgebroid, order: int) -> bool:
    """Δ(P)(a, a') = P(aa') and coassociativity for all ∂_I with |I| ≤ order."""
    alg = t.algebra
    fields = [t.coordinate_field(i) for i in range(t.rank)]

    def act(I, b):
        for i in reversed(I):
            b = apply(fields[i], b)
        return b

    probes = [alg.monomial(m) for w in range(0, 3) for m in enumerate_monomials(alg, w)][:10]
    for p in range(min(order, t.rank) + 1):
        for I in combinations(range(t.rank), p):
            cop = coproduct_fields(I)
            for a in probes:
                da = a.degree or 0
                for a2 in probes:
                    lhs = act(I, a * a2)
                    rhs = alg.zero()
                    for (I1, I2), s in cop.items():
                        rhs = rhs + act(I1, a) * act(I2, a2) * (s * _sign((len(I2) * da) % 2 == 1))
                    if lhs != rhs:
                        return False
            left, right = {}, {}
            for (I1, I2), s in cop.items():
                for (J1, J2), s2 in coproduct_fields(I1).items():
                    key = (J1, J2, I2)
                    left[key] = left.get(key, 0) + s * s2
                for (J1, J2), s2 in coproduct_fields(I2).items():
                    key = (I1, J1, J2)
                    right[key] = right.get(key, 0) + s * s2
            if {k: v for k, v in left.items() if v} != {k: v for k, v in right.items() if v}:
                return False
    return True


# ---------------------------------------------------------------------------
# the endomorphism complex


@dataclass(frozen=True)
class EndComplex:
    koszul: KoszulData

    @property
    def subsets(self) -> list[tuple[int, ...]]:
        r = self.koszul.rank
        return [S for p in range(r + 1) for S in combinations(range(r), p)]

    def basis_element(self, S: tuple[int, ...]) -> GcaElement:
        A = self.koszul.algebra
        out = A.one()
        for i in S:
            out = out * A.gen(A.generators[i].name)
        return out

    def weight_of(self, S) -> int:
        return sum(self.koszul.algebra.generators[i].weight for i in S)

    def basis(self, degree: int, weight: int) -> list[tuple[tuple[int, ...], Monomial]]:
        out = []
        for S in self.subsets:
            for m in enumerate_monomials(self.koszul.algebra, weight + self.weight_of(S), degree - len(S)):
                out.append((S, m))
        return out

    def evaluate(self, phi: dict[tuple[int, ...], GcaElement], a: GcaElement) -> GcaElement:
        """Apply an O_Y-linear map given by values on the e_S to an element of A."""
        A = self.koszul.algebra
        r = self.koszul.rank
        out = A.zero()
        for (base, gens), c in a.terms.items():
            S = tuple(i for i in range(r) if gens[i])
            if S in phi:
                out = out + A.monomial((base, (0,) * r), c) * phi[S]
        return out

    def differential(self, phi: dict, deg: int) -> dict:
        A = self.koszul.algebra
        out = {}
        for S in self.subsets:
            val = apply(self.koszul.Q, phi[S]) if S in phi else A.zero()
            val = val - self.evaluate(phi, apply(self.koszul.Q, self.basis_element(S))) * _sign(deg % 2 == 1)
            if val:
                out[S] = val
        return out

    def slice(self, weight: int) -> SlicedComplex:
        r = self.koszul.rank
        degs = range(-r, r + 1)
        bases = {n: self.basis(n, weight) for n in degs}
        A = self.koszul.algebra
        diffs = {}
        for n in degs:
            if n + 1 not in bases:
                continue
            index = {b: i for i, b in enumerate(bases[n + 1])}
            ent = {}
            for col, (S, m) in enumerate(bases[n]):
                img = self.differential({S: A.monomial(m)}, n)
                for T, val in img.items():
                    for mm, c in val.terms.items():
                        ent[(index[(T, mm)], col)] = c
            diffs[n] = RatMatrix(len(bases[n + 1]), len(bases[n]), ent)
        return SlicedComplex({n: len(b) for n, b in bases.items()}, diffs)


@dataclass
class EndReport:
    per_weight: dict[int, dict[int, int]]
    stabilized: bool
    u_chain_map: bool
    u_induced_iso: bool

    def ext_dims(self) -> tuple[int, ...]:
        tot: dict[int, int] = {}
        for dims in self.per_weight.values():
            for n, v in dims.items():
                tot[n] = tot.get(n, 0) + v
        top = max((n for n, v in tot.items() if v), default=0)
        return tuple(tot.get(i, 0) for i in range(top + 1))

    @property
    def ok(self) -> bool:
        neg = all(v == 0 for d in self.per_weight.values() for n, v in d.items() if n < 0)
        return self.stabilized and self.u_chain_map and self.u_induced_iso and neg


def _end_weight(args):
    ec, ops, w, k = args
    ecx = ec.slice(w)
    coh = {n: h.dim for n, h in cohomology(ecx, representatives=False).items()}
    # comparison from U^{≤k}
    r = ec.koszul.rank
    degs = range(-r, r + 1)
    ubases = {n: ops.basis(n, w, k) for n in degs}
    dims = {n: len(b) for n, b in ubases.items()}
    udiffs = {}
    for n in degs:
        if n + 1 not in ubases:
            continue
        index = {b: i for i, b in enumerate(ubases[n + 1])}
        ent = {}
        for col, d in enumerate(ubases[n]):
            for dd, cc in ops.differential({d: Fraction(1)}).items():
                if dd in index:
                    ent[(index[dd], col)] = cc
        udiffs[n] = RatMatrix(len(ubases[n + 1]), len(ubases[n]), ent)
    ucx = SlicedComplex(dims, udiffs)
    maps = {}
    chain = True
    for n in degs:
        ebasis = ec.basis(n, w)
        index = {b: i for i, b in enumerate(ebasis)}
        cols = []
        for d in ubases[n]:
            vals = {S: ops.act({d: Fraction(1)}, ec.basis_element(S)) for S in ec.subsets}
            v = [Fraction(0)] * len(ebasis)
            for S, val in vals.items():
                for m, c in val.terms.items():
                    v[index[(S, m)]] += c
            cols.append(v)
        maps[n] = RatMatrix.from_columns(cols, len(ebasis)) if cols else RatMatrix.zero(len(ebasis), 0)
    for n in degs:
        if n + 1 in ubases and not (maps[n + 1] @ ucx.d(n) - ecx.d(n) @ maps[n]).is_zero():
            chain = False
    iso = all(induced_rank(maps, ucx, ecx, n) == coh.get(n, 0) for n in degs) if chain else False
    hu = cohomology(ucx, representatives=False)
    iso = iso and all(hu[n].dim == coh.get(n, 0) for n in degs)
    return coh, chain, iso


def end_complex(k: KoszulData, window: int, uea_order: int = 2, jobs: int = 1) -> EndReport:
    """Ext_{O_Y}(O_X, O_X) via the endomorphism complex of A, weights in [−Σw, window]."""
    ec = EndComplex(k)
    ops = DiffOps(build_tangent(k))
    wmin = -sum(g.weight for g in k.algebra.generators)
    ws = list(range(wmin, window + 2))
    results = parallel_map(_end_weight, [(ec, ops, w, uea_order) for w in ws], jobs)
    per = {w: res[0] for w, res in zip(ws, results)}
    last = per.pop(window + 1)
    stabilized = all(v == 0 for v in last.values())
    chain = all(res[1] for res in results)
    iso = all(res[2] for res in results)
    return EndReport(per, stabilized, chain, iso)
