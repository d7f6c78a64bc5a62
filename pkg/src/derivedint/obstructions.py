"""Formal neighborhoods of a curve on a two-chart ℙ¹ cover: transition cocycles,
the induced structure maps a_k, l_k, and their obstruction classes.

Everything lives in the ambient ring L = ℚ[z^{±1}][n]/(n^{m+1}) written in the
chart-0 frame.  Chart data (the chart-1 coordinates z1 = F(z, n), n1 = G(z, n)
expressed through chart-0 ones) is an input.  It determines the unipotent
automorphism Ψ of L with Ψ(z) = 1/F and Ψ(n) = G / (frame ratio of N∨ at Ψ(z)),
whose logarithm T is the non-abelian cocycle driving the deformed resolution
(TW(S^{≤m} N∨), d + α(T dt)).

Obstruction classes are decided twice: by a Čech coboundary solve in a Laurent
window, and by solving d_TW h = −θ in the Thom-Whitney complex of the coefficient
bundle.  The TW solution h, when it exists, yields the lift f ↦ f + h(f).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Mapping, Sequence

from .exactlin import RatMatrix, rank, solve
from .gca import Algebra, Derivation, GcaElement, apply, format_element
from .mcgauge import DerivationLie, action_derivation, bch, deform_tw, DeformReport
from .thomwhitney import (ChartAlgebra, LineBundle, TWSlice, dt_name, line_bundle_diagram,
                          simplex_algebra, symmetric_algebra_sheaf, t_name, tw, tw_add,
                          tw_d, tw_product, tw_sub, algebra_tw_slice)


class ConstructionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# truncated series in L


@dataclass(frozen=True)
class NeighborhoodRing:
    """ℚ[z^{±1}][n]/(n^{order+1}) with torus weights."""

    ambient: Algebra
    order: int
    coordinate: str = "z"
    normal: str = "n"

    @property
    def zi(self) -> int:
        return self.ambient.base.index(self.coordinate)

    @property
    def ni(self) -> int:
        return self.ambient.base.index(self.normal)

    def clip(self, x: GcaElement, order: int | None = None) -> GcaElement:
        cap = self.order if order is None else order
        ni = x.algebra.base.index(self.normal)
        return x.filter(lambda m: m[0][ni] <= cap)

    def n_part(self, x: GcaElement, j: int) -> GcaElement:
        ni = x.algebra.base.index(self.normal)
        return x.filter(lambda m: m[0][ni] == j)

    def n_degrees(self, x: GcaElement) -> set[int]:
        ni = x.algebra.base.index(self.normal)
        return {m[0][ni] for m in x.terms}

    def inverse(self, x: GcaElement) -> GcaElement:
        """Series inverse; the n-free part must be a single Laurent monomial."""
        lead = self.n_part(x, 0)
        if len(lead.terms) != 1:
            raise ConstructionError(f"cannot invert {format_element(x)}: leading part is not a unit")
        lead_inv = lead ** -1
        eps = self.clip(lead_inv * (x - lead))
        out, term = self.ambient.one(), self.ambient.one()
        for _ in range(self.order):
            term = self.clip(term * eps) * -1
            if not term:
                break
            out = out + term
        return self.clip(out * lead_inv)

    def power(self, x: GcaElement, e: int) -> GcaElement:
        base = x if e >= 0 else self.inverse(x)
        out = self.ambient.one()
        for _ in range(abs(e)):
            out = self.clip(out * base)
        return out

    def quotient(self, num: GcaElement, den: GcaElement) -> GcaElement:
        return self.clip(num * self.inverse(den))


def neighborhood_ring(order: int, normal_weight: int, coordinate: str = "z", normal: str = "n") -> NeighborhoodRing:
    ca = symmetric_algebra_sheaf(LineBundle(0), order, normal_weight, coordinate, normal)
    return NeighborhoodRing(ca.ambient, order, coordinate, normal)


# ---------------------------------------------------------------------------
# automorphisms and the cover


@dataclass
class FilteredAutomorphism:
    """Algebra endomorphism of L given by the images of z and n."""

    ring: NeighborhoodRing
    images: dict[str, GcaElement]

    def __call__(self, f: GcaElement) -> GcaElement:
        R = self.ring
        out = R.ambient.zero()
        zimg, nimg = self.images[R.coordinate], self.images[R.normal]
        for (base, _), c in f.terms.items():
            a, j = base[R.zi], base[R.ni]
            out = out + R.clip(R.power(zimg, a) * R.power(nimg, j)) * c
        return R.clip(out)

    def compose(self, other: "FilteredAutomorphism") -> "FilteredAutomorphism":
        """self ∘ other."""
        return FilteredAutomorphism(self.ring, {v: self(img) for v, img in other.images.items()})

    def graded_defects(self) -> list[str]:
        """gr^{≤1} must be the identity: z ↦ z mod n, n ↦ n mod n²."""
        R = self.ring
        z, n = R.ambient.var(R.coordinate), R.ambient.var(R.normal)
        out = []
        if R.n_part(self.images[R.coordinate] - z, 0):
            out.append(f"{R.coordinate} ↦ {format_element(self.images[R.coordinate])} is not the identity modulo {R.normal}")
        dn = self.images[R.normal] - n
        if R.n_part(dn, 0) or R.n_part(dn, 1):
            out.append(f"{R.normal} ↦ {format_element(self.images[R.normal])} is not the identity modulo {R.normal}^2")
        return out

    def multiplicative_defects(self, samples: Sequence[tuple[GcaElement, GcaElement]]) -> list[str]:
        R = self.ring
        out = []
        for a, b in samples:
            if self(R.clip(a * b)) != R.clip(self(a) * self(b)):
                out.append(f"Φ({format_element(a)}·{format_element(b)}) != Φ(a)Φ(b)")
        return out

    def equals(self, other: "FilteredAutomorphism") -> list[str]:
        return [v for v in self.images if self.ring.clip(self.images[v] - other.images[v])]


def identity_automorphism(ring: NeighborhoodRing) -> FilteredAutomorphism:
    return FilteredAutomorphism(ring, {ring.coordinate: ring.ambient.var(ring.coordinate),
                                       ring.normal: ring.ambient.var(ring.normal)})


@dataclass
class ChartCover:
    """Two-chart ℙ¹ cover of X with N∨ and T_X given by frame ratios.

    ``z1``/``n1`` are the chart-1 coordinates (of the neighborhood) written in chart-0
    coordinates; along X, z1 must be z^{-1}.
    """

    ring: NeighborhoodRing
    conormal: LineBundle
    tangent: LineBundle
    z1: GcaElement
    n1: GcaElement
    name: str = ""

    @property
    def order(self) -> int:
        return self.ring.order

    @property
    def normal(self) -> LineBundle:
        return self.conormal.dual()

    def chart_algebra(self, order: int | None = None) -> ChartAlgebra:
        w = self.ring.ambient.base.variables[self.ring.ni].weight
        return symmetric_algebra_sheaf(self.conormal, self.order if order is None else order, w,
                                       self.ring.coordinate, self.ring.normal)

    def consistency_defects(self) -> list[str]:
        R = self.ring
        z = R.ambient.var(R.coordinate)
        n = R.ambient.var(R.normal)
        out = []
        if R.n_part(self.z1, 0) != z ** -1:
            out.append(f"chart-1 coordinate restricts to {format_element(R.n_part(self.z1, 0))} on X, expected {R.coordinate}^-1")
        expected = R.ambient.const(self.conormal.scale) * z ** self.conormal.d * n
        if R.n_part(self.n1, 1) != expected or R.n_part(self.n1, 0):
            out.append(f"linear part of the chart-1 normal coordinate is {format_element(R.n_part(self.n1, 1))}, "
                       f"bundle data gives {format_element(expected)}")
        tangent = LineBundle(2, Fraction(-1))
        if self.tangent != tangent:
            out.append("T_X data must be the standard O(2) frame change of ℙ¹")
        return out

    def transition(self) -> FilteredAutomorphism:
        """Ψ = Φ_0^{-1} Φ_1 on L: f1 = Ψ^{-1}(f0) glues chart functions."""
        bad = self.consistency_defects()
        if bad:
            raise ConstructionError("; ".join(bad))
        R = self.ring
        zimg = R.inverse(self.z1)
        frame = R.power(zimg, self.conormal.d) * self.conormal.scale
        nimg = R.quotient(self.n1, frame)
        psi = FilteredAutomorphism(R, {R.coordinate: zimg, R.normal: nimg})
        bad = psi.graded_defects()
        if bad:
            raise ConstructionError("; ".join(bad))
        return psi


# ---------------------------------------------------------------------------
# log / exp


def derivation_lie(ring: NeighborhoodRing) -> DerivationLie:
    return DerivationLie(ring.ambient, ring.clip, ring.order)


def log_cocycle(phi: FilteredAutomorphism) -> Derivation:
    """T with exp(T) = Φ, from log(Φ) = Σ (−1)^{k+1} (Φ − id)^k / k on the generators."""
    bad = phi.graded_defects()
    if bad:
        raise ConstructionError("not filtration-unipotent: " + "; ".join(bad))
    R = phi.ring
    images = {}
    for v in (R.coordinate, R.normal):
        x = R.ambient.var(v)
        term = x
        acc = R.ambient.zero()
        for k in range(1, R.order + 1):
            term = R.clip(phi(term) - term)
            if not term:
                break
            acc = acc + term * Fraction((-1) ** (k + 1), k)
        images[v] = R.clip(acc)
    T = derivation_lie(R).make(images)
    back = exp_automorphism(R, T)
    wrong = back.equals(phi)
    if wrong:
        raise ConstructionError(f"exp(log Φ) != Φ on {wrong}")
    return T


def exp_automorphism(ring: NeighborhoodRing, T: Derivation) -> FilteredAutomorphism:
    lie = derivation_lie(ring)
    return FilteredAutomorphism(ring, {v: lie.exp_act(T, ring.ambient.var(v)) for v in (ring.coordinate, ring.normal)})


def inverse_automorphism(phi: FilteredAutomorphism) -> FilteredAutomorphism:
    return exp_automorphism(phi.ring, log_cocycle(phi).scaled(-1))


@dataclass
class CocycleReport:
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_cocycle(phi01: FilteredAutomorphism, phi10: FilteredAutomorphism) -> CocycleReport:
    """Two charts: Φ10∘Φ01 = id and Φ01∘Φ10 = id, generator by generator."""
    R = phi01.ring
    fails = []
    for label, comp in (("Φ10∘Φ01", phi10.compose(phi01)), ("Φ01∘Φ10", phi01.compose(phi10))):
        for v, img in comp.images.items():
            diff = R.clip(img - R.ambient.var(v))
            if diff:
                lowest = min(R.n_degrees(diff))
                fails.append(f"{label} differs from the identity on {v} at order {lowest}: "
                             f"{format_element(R.n_part(diff, lowest))}")
    return CocycleReport(fails)


def verify_three_chart_cocycle(phi01, phi12, phi20) -> CocycleReport:
    comp = phi20.compose(phi12).compose(phi01)
    R = phi01.ring
    fails = []
    for v, img in comp.images.items():
        diff = R.clip(img - R.ambient.var(v))
        if diff:
            fails.append(f"Φ20∘Φ12∘Φ01 differs from the identity on {v}: {format_element(diff)}")
    return CocycleReport(fails)


# ---------------------------------------------------------------------------
# Čech Ext on the two-chart ℙ¹


@dataclass
class CechExt:
    bundle: LineBundle
    window: range
    ext0: int
    ext1: int
    stabilized: bool
    delta: RatMatrix
    c1_exponents: list[int]

    def is_coboundary(self, cochain: Mapping[int, Fraction]) -> bool:
        outside = [a for a, c in cochain.items() if c and a not in self.window]
        if outside:
            raise ConstructionError(f"cochain exponents {outside} outside the Ext window")
        b = [Fraction(cochain.get(a, 0)) for a in self.c1_exponents]
        if not any(b):
            return True
        if self.delta.cols == 0:
            return False
        return solve(self.delta, b) is not None


def _cech_dims(bundle: LineBundle, window: range):
    c0 = [(0, a) for a in window if bundle.on_chart((0,), a)] + [(1, a) for a in window if bundle.on_chart((1,), a)]
    c1 = list(window)
    pos = {a: i for i, a in enumerate(c1)}
    ent = {}
    for j, (chart, a) in enumerate(c0):
        ent[(pos[a], j)] = Fraction(1 if chart == 1 else -1)
    delta = RatMatrix(len(c1), len(c0), ent)
    r = rank(delta)
    return len(c0) - r, len(c1) - r, delta, c1


def cech_ext(F: LineBundle, G: LineBundle, window: range) -> CechExt:
    """Ext^i(F, G) = H^i(F∨ ⊗ G) from 0 → C(U0) ⊕ C(U1) → C(U01) → 0 in a Laurent window."""
    E = F.dual().tensor(G)
    e0, e1, delta, c1 = _cech_dims(E, window)
    wider = range(window.start - 1, window.stop + 1)
    s0, s1, _, _ = _cech_dims(E, wider)
    return CechExt(E, window, e0, e1, (e0, e1) == (s0, s1), delta, c1)


def laurent_count(E: LineBundle) -> tuple[int, int]:
    """Oracle: h⁰ = #{0 ≤ a ≤ d}, h¹ = #{d < a < 0}."""
    return max(0, E.d + 1), max(0, -E.d - 1)


def ext_window(order: int) -> range:
    return range(-(order + 6), order + 7)


# ---------------------------------------------------------------------------
# the L∞ structure


def n_degree_components(ring: NeighborhoodRing, T: Derivation) -> dict[int, Derivation]:
    """Q_r: the part of T raising the n-degree by exactly r."""
    lie = derivation_lie(ring)
    out = {}
    for r in range(0, ring.order + 1):
        zimg = ring.n_part(T.var_images.get(ring.coordinate, ring.ambient.zero()), r)
        nimg = ring.n_part(T.var_images.get(ring.normal, ring.ambient.zero()), r + 1)
        D = lie.make({ring.coordinate: zimg, ring.normal: nimg})
        if not D.is_zero():
            out[r] = D
    return out


@dataclass
class LinftyStructure:
    cover: ChartCover
    T: Derivation
    components: dict[int, Derivation]
    chart_algebra: ChartAlgebra

    @property
    def ring(self) -> NeighborhoodRing:
        return self.cover.ring

    @property
    def order(self) -> int:
        return self.cover.order

    def anchor_coefficient(self, k: int) -> GcaElement:
        """θ^{0,k}: the n^k part of T(z)."""
        return self.ring.n_part(self.T.var_images.get(self.ring.coordinate, self.ring.ambient.zero()), k)

    def bracket_coefficient(self, k: int) -> GcaElement:
        """The n^k part of T(n), i.e. the generator image of l_k."""
        return self.ring.n_part(self.T.var_images.get(self.ring.normal, self.ring.ambient.zero()), k)

    def a_vanishes(self, k: int) -> bool:
        return not self.anchor_coefficient(k)

    def l_vanishes(self, k: int) -> bool:
        return not self.bracket_coefficient(k)

    def Q(self, r: int | None = None) -> Derivation | None:
        D = self.T if r is None else self.components.get(r)
        if D is None:
            return None
        return action_derivation(self.chart_algebra, D)

    def apply(self, r: int | None, x: dict) -> dict:
        Q = self.Q(r)
        if Q is None or (0, 1) not in x:
            return {}
        img = self.chart_algebra.clip(apply(Q, x[(0, 1)]))
        return {(0, 1): img} if img else {}

    def minimality_defects(self) -> list[str]:
        out = []
        if self.anchor_coefficient(0):
            out.append("a_0 != 0")
        if self.bracket_coefficient(0) or self.bracket_coefficient(1):
            out.append("l_0 or l_1 != 0")
        return out


def linfty_from_cocycle(cover: ChartCover, T: Derivation | None = None) -> LinftyStructure:
    """Q = α(T dt) with T = log Ψ, decomposed by n-degree shift."""
    if T is None:
        T = log_cocycle(cover.transition())
    ring = cover.ring
    L = LinftyStructure(cover, T, n_degree_components(ring, T), cover.chart_algebra())
    bad = L.minimality_defects()
    if bad:
        raise ConstructionError("; ".join(bad))
    return L


def _samples(L: LinftyStructure, weights: Sequence[int], p_max: int = 1) -> dict[tuple[int, int], list[dict]]:
    """TW basis elements by (degree, n-degree), split so each sample is n-homogeneous."""
    ca = L.chart_algebra
    ring = L.ring
    out: dict[tuple[int, int], list[dict]] = {}
    for w in weights:
        sl = algebra_tw_slice(ca, w, p_max)
        for N in (0, 1):
            for x in sl.basis_elements(N):
                for j in range(L.order + 1):
                    part = {I: ring.n_part(v, j) for I, v in x.items()}
                    part = {I: v for I, v in part.items() if v}
                    if part:
                        out.setdefault((N, j), []).append(part)
    return out


def _op_sum(*xs):
    out = {}
    for x in xs:
        out = tw_add(out, x)
    return out


def _scale(x, c):
    return {I: v * c for I, v in x.items() if v * c}


@dataclass
class RelationReport:
    checked: dict[str, int]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def structure_relations(L: LinftyStructure, weights: Sequence[int]) -> RelationReport:
    """[d, Q_r] + ½ Σ_{i+j=r} [Q_i, Q_j] = 0 on O_X and N∨ samples for every r ≤ order,
    (d + Q)² = 0, and the module relation [l_k, e(f)] = e(a_{k−1}(f))."""
    ca = L.chart_algebra
    d = lambda x: tw_d(ca, x)
    S = _samples(L, weights)
    checked: dict[str, int] = {}
    fails = []

    def name(r, part):
        if part == 0:
            return f"[d,a{r}]" + "".join(f" + l{j + 1}∘a{i}" for i in range(1, r) for j in [r - i] if j >= 1)
        return f"[d,l{r + 1}]" + (" + quadratic terms in l" if r > 1 else "")

    for r in range(1, L.order + 1):
        for part in (0, 1):
            label = name(r, part) + " = 0"
            for N in (0, 1):
                for x in S.get((N, part), []):
                    lhs = tw_add(d(L.apply(r, x)), L.apply(r, d(x)))
                    for i in range(1, r):
                        j = r - i
                        lhs = tw_add(lhs, _scale(L.apply(i, L.apply(j, x)), Fraction(1, 2)))
                        lhs = tw_add(lhs, _scale(L.apply(j, L.apply(i, x)), Fraction(1, 2)))
                    checked[label] = checked.get(label, 0) + 1
                    if lhs:
                        fails.append(f"{label} fails on a degree-{N} sample")
    for N in (0, 1):
        for j in range(L.order + 1):
            for x in S.get((N, j), []):
                y = tw_add(d(x), L.apply(None, x))
                z = tw_add(d(y), L.apply(None, y))
                checked["(d+Q)^2 = 0"] = checked.get("(d+Q)^2 = 0", 0) + 1
                if z:
                    fails.append(f"(d+Q)^2 != 0 on a degree-{N} sample of n-degree {j}")
    for k in range(2, L.order + 1):
        label = f"[l{k}, e(f)] = e(a{k - 1}(f))"
        for f in S.get((0, 0), [])[:6]:
            for x in S.get((0, 1), [])[:6]:
                lhs = tw_sub(L.apply(k - 1, tw_product(ca, f, x)), tw_product(ca, f, L.apply(k - 1, x)))
                rhs = tw_product(ca, L.apply(k - 1, f), x)
                checked[label] = checked.get(label, 0) + 1
                if tw_sub(lhs, rhs):
                    fails.append(f"{label} fails")
    return RelationReport(checked, fails)


# ---------------------------------------------------------------------------
# obstruction classes


def coefficient_exponents(x: GcaElement, ring: NeighborhoodRing, j: int) -> dict[int, Fraction]:
    """c(z) of the n^j part, as exponent -> coefficient."""
    out = {}
    for (base, _), c in ring.n_part(x, j).terms.items():
        out[base[ring.zi]] = out.get(base[ring.zi], Fraction(0)) + c
    return {a: c for a, c in out.items() if c}


def _dt_key():
    alg = simplex_algebra(1)
    return next(iter(alg.gen(dt_name(1)).terms))


def tw_primitive(E: LineBundle, cochain: Mapping[int, Fraction], p_max: int = 2):
    """Solve d_TW h = −(Σ c_a z^a dt) exponent by exponent; returns per-exponent TW 0-cochains or None."""
    out = {}
    key = _dt_key()
    for a, c in cochain.items():
        V = line_bundle_diagram(E, a)
        T = tw(V, p_max)
        theta = {(1, 0, 0, key): -Fraction(c)}
        coords = [T.to_vector(theta, 1)[f] for f in T.free.get(1, [])]
        D = T.complex.d(0)
        if D.cols == 0:
            return None
        x = solve(D, coords)
        if x is None:
            return None
        amb = [Fraction(0)] * len(T.ambient[0])
        for xj, vec in zip(x, T.kernel[0]):
            for i, v in enumerate(vec):
                amb[i] += xj * v
        charts = [I for I in ((0,), (1,)) if E.on_chart(I, a)]
        h = {}
        for (n, q, i, m), v in zip(T.ambient[0], amb):
            if not v:
                continue
            I = charts[i] if n == 0 else (0, 1)
            h.setdefault(I, {})[m] = h.get(I, {}).get(m, Fraction(0)) + v
        out[a] = h
    return out


def tw_class_vanishes(E: LineBundle, cochain: Mapping[int, Fraction], p_max: int = 2) -> bool:
    return tw_primitive(E, cochain, p_max) is not None


def _homotopy_derivations(L: LinftyStructure, h_parts, target_var: str, power: int) -> dict:
    """Turn per-exponent TW 0-cochains into derivations v ↦ h_I(z, t) n^power on each level algebra."""
    ca = L.chart_algebra
    ring = L.ring
    coeff: dict = {}
    for a, h in h_parts.items():
        for I, forms in h.items():
            alg = ca.level_algebra(len(I) - 1)
            z = alg.var(ring.coordinate)
            for m, c in forms.items():
                val = z ** a * c
                if len(I) == 2:
                    val = val * alg.var(t_name(1)) ** m[0][0]
                coeff[I] = coeff.get(I, alg.zero()) + val
    out = {}
    for I, c in coeff.items():
        alg = ca.level_algebra(len(I) - 1)
        out[I] = Derivation(alg, 0, {}, {target_var: c * alg.var(ring.normal) ** power})
    return out


def _apply_family(ca: ChartAlgebra, fam: dict, x: dict, order: int, ring: NeighborhoodRing) -> dict:
    out = {}
    for I, v in x.items():
        if I in fam:
            img = ring.clip(apply(fam[I], v), order)
            if img:
                out[I] = img
    return out


@dataclass
class ClassReport:
    label: str
    k: int
    bundle: LineBundle
    ext0: int
    ext1: int
    stabilized: bool
    cocycle_certified: bool
    cech_vanishes: bool
    tw_vanishes: bool
    lift_constructed: bool
    lift_verified: bool
    representative: str
    notes: list[str] = field(default_factory=list)

    @property
    def routes_agree(self) -> bool:
        return self.cech_vanishes == self.tw_vanishes

    @property
    def vanishes(self) -> bool:
        return self.cech_vanishes and self.tw_vanishes

    @property
    def ok(self) -> bool:
        lift_ok = (not self.vanishes) or (self.lift_constructed and self.lift_verified)
        return self.stabilized and self.cocycle_certified and self.routes_agree and lift_ok


def _certify_cocycle(E: LineBundle, cochain: Mapping[int, Fraction]) -> bool:
    """θ = c dt is d_TW-closed in every exponent slice."""
    key = _dt_key()
    for a, c in cochain.items():
        T = tw(line_bundle_diagram(E, a), 2)
        x = {(1, 0, 0, key): Fraction(c)}
        v = T.to_vector(x, 1)
        coords = [v[f] for f in T.free.get(1, [])]
        recon = [Fraction(0)] * len(v)
        for cj, kv in zip(coords, T.kernel.get(1, [])):
            for i, val in enumerate(kv):
                recon[i] += cj * val
        if recon != v:
            return False
        if 2 in T.complex.dims and any(T.complex.d(1).matvec(coords)):
            return False
    return True


def _verify_lift(L: LinftyStructure, fam: dict, weights: Sequence[int], source_part: int, cap: int) -> tuple[bool, list[str]]:
    """f ↦ f + h(f) on samples of n-degree ≤ source_part must be an algebra map into F^(cap)
    that commutes with the differentials (d on the source, d + Q on the target)."""
    ca = L.chart_algebra
    ring = L.ring
    S = _samples(L, weights)
    clipk = lambda x: {I: v for I, v in ((I, ring.clip(v, cap)) for I, v in x.items()) if v}
    lift = lambda x: clipk(tw_add(x, _apply_family(ca, fam, x, cap, ring)))
    notes = []
    src = [x for N in (0, 1) for j in range(source_part + 1) for x in S.get((N, j), [])]
    from .thomwhitney import algebra_equalizer_defect
    for x in src:
        if algebra_equalizer_defect(ca, lift(x)):
            notes.append("lift leaves the equalizer")
            break
        y = lift(x)
        lhs = clipk(tw_add(tw_d(ca, y), L.apply(None, y)))
        rhs = lift(clipk(tw_d(ca, x)))
        if tw_sub(lhs, rhs):
            notes.append("lift does not commute with the differentials")
            break
    deg0 = [x for j in range(source_part + 1) for x in S.get((0, j), [])][:8]
    for a in deg0:
        for b in deg0:
            if tw_sub(lift(clipk(tw_product(ca, a, b))), clipk(tw_product(ca, lift(a), lift(b)))):
                notes.append("lift is not multiplicative")
                return False, notes
    return not notes, notes


def splitting_obstruction(L: LinftyStructure, k: int, weights: Sequence[int]) -> ClassReport:
    """[a_{k+1}] ∈ Ext¹(S^{k+1}N, T_X), assuming a_i = 0 for i ≤ k."""
    for i in range(1, k + 1):
        if not L.a_vanishes(i):
            raise ConstructionError(f"precondition fails: a_{i} != 0")
    ring = L.ring
    E = L.cover.tangent.tensor(_sym(L.cover.conormal, k + 1))
    c = coefficient_exponents(L.T.var_images.get(ring.coordinate, ring.ambient.zero()), ring, k + 1)
    return _class_report(L, f"[a{k + 1}]", k, E, c, ring.coordinate, k + 1, weights, source_part=0, cap=k + 1)


def linearization_obstruction(L: LinftyStructure, k: int, weights: Sequence[int]) -> ClassReport:
    """[l_k] ∈ Ext¹(S^k N, N), assuming a_i = 0 for i ≤ k and l_i = 0 for i < k."""
    for i in range(1, k + 1):
        if not L.a_vanishes(i):
            raise ConstructionError(f"precondition fails: a_{i} != 0")
    for i in range(2, k):
        if not L.l_vanishes(i):
            raise ConstructionError(f"precondition fails: l_{i} != 0")
    ring = L.ring
    E = L.cover.normal.tensor(_sym(L.cover.conormal, k))
    c = coefficient_exponents(L.T.var_images.get(ring.normal, ring.ambient.zero()), ring, k)
    return _class_report(L, f"[l{k}]", k, E, c, ring.normal, k, weights, source_part=k, cap=k)


def _sym(bundle: LineBundle, k: int) -> LineBundle:
    return LineBundle(bundle.d * k, bundle.scale ** k)


def _class_report(L, label, k, E, cochain, var, power, weights, source_part, cap) -> ClassReport:
    window = ext_window(L.order)
    if cochain:
        window = range(min(window.start, min(cochain)), max(window.stop, max(cochain) + 1))
    ext = cech_ext(LineBundle(0), E, window)
    certified = _certify_cocycle(E, cochain)
    cech = ext.is_coboundary(cochain)
    prim = tw_primitive(E, cochain)
    rep = " + ".join(f"{c}*z^{a}" for a, c in sorted(cochain.items())) or "0"
    report = ClassReport(label, k, E, ext.ext0, ext.ext1, ext.stabilized, certified, cech, prim is not None,
                         False, False, rep)
    if prim is not None and cech:
        fam = _homotopy_derivations(L, prim, var, power)
        report.lift_constructed = True
        ok, notes = _verify_lift(L, fam, weights, source_part, cap)
        report.lift_verified = ok
        report.notes += notes
        report.homotopy = prim  # type: ignore[attr-defined]
    return report


def regauge(L: LinftyStructure, report: ClassReport, var: str, power: int) -> LinftyStructure:
    """Apply the chart gauge b = −(vertex values of h) so that the obstructed component vanishes."""
    ring = L.ring
    lie = derivation_lie(ring)
    prim = report.homotopy  # type: ignore[attr-defined]
    z = ring.ambient.var(ring.coordinate)
    n = ring.ambient.var(ring.normal)
    b = {0: ring.ambient.zero(), 1: ring.ambient.zero()}
    for a, h in prim.items():
        for I, forms in h.items():
            if len(I) == 1:
                b[I[0]] = b[I[0]] + z ** a * sum(forms.values(), Fraction(0))
    b0 = lie.make({var: -b[0] * n ** power})
    b1 = lie.make({var: -b[1] * n ** power})
    T2 = bch(lie, bch(lie, b0, L.T), b1.scaled(-1))
    return linfty_from_cocycle(L.cover, T2)


@dataclass
class TowerReport:
    cover_name: str
    order: int
    cocycle: CocycleReport
    relations: RelationReport
    classes: list[ClassReport]
    stopped: str

    @property
    def ok(self) -> bool:
        return self.cocycle.ok and self.relations.ok and all(c.ok for c in self.classes)


def slice_weights(cover: ChartCover, span: int = 3) -> list[int]:
    return list(range(-span, span + 1))


def obstruction_tower(cover: ChartCover, T: Derivation | None = None, weights: Sequence[int] | None = None) -> TowerReport:
    """Splitting classes [a_1], [a_2], ... then linearization classes [l_2], [l_3], ...

    After each vanishing class the cocycle is re-gauged so the next precondition holds;
    the first non-vanishing class stops the corresponding tower.
    """
    weights = list(weights) if weights is not None else slice_weights(cover)
    psi = cover.transition()
    cyc = verify_cocycle(psi, inverse_automorphism(psi))
    L = linfty_from_cocycle(cover, T)
    relations = structure_relations(L, weights)
    classes = []
    stopped = ""
    for k in range(cover.order):
        rep = splitting_obstruction(L, k, weights)
        classes.append(rep)
        if not rep.vanishes:
            stopped = f"{rep.label} does not vanish"
            break
        L = regauge(L, rep, cover.ring.coordinate, k + 1)
        if not L.a_vanishes(k + 1):
            rep.notes.append("re-gauging did not remove the component")
    else:
        for k in range(2, cover.order + 1):
            rep = linearization_obstruction(L, k, weights)
            classes.append(rep)
            if not rep.vanishes:
                stopped = f"{rep.label} does not vanish"
                break
            L = regauge(L, rep, cover.ring.normal, k)
            if not L.l_vanishes(k):
                rep.notes.append("re-gauging did not remove the component")
    return TowerReport(cover.name, cover.order, cyc, relations, classes, stopped)


def gauge_defects(cover: ChartCover, b: Derivation, chart: int) -> list[str]:
    """b must lie in Der⁺ over U_chart: z ↦ sections of T_X ⊗ S^{≥1}N∨, n ↦ sections of N ⊗ S^{≥2}N∨."""
    ring = cover.ring
    out = []
    for var, shift, first, home in ((ring.coordinate, 0, 1, cover.tangent), (ring.normal, 1, 2, cover.normal)):
        img = b.var_images.get(var)
        if img is None:
            continue
        for (base, _), c in img.terms.items():
            a, j = base[ring.zi], base[ring.ni]
            E = home.tensor(_sym(cover.conormal, j))
            if j < first or not E.on_chart((chart,), a):
                out.append(f"{var} ↦ {c}*{ring.coordinate}^{a}*{ring.normal}^{j} is not a Der+ section over U{chart}")
    return out


def chart_gauge(cover: ChartCover, T: Derivation, b0: Derivation, b1: Derivation) -> Derivation:
    """Cocycle transformed by chart automorphisms exp(b0) on U0 and exp(b1) on U1."""
    bad = gauge_defects(cover, b0, 0) + gauge_defects(cover, b1, 1)
    if bad:
        raise ConstructionError("; ".join(bad))
    lie = derivation_lie(cover.ring)
    return bch(lie, bch(lie, b0, T), b1.scaled(-1))


def neighborhood_h0(cover: ChartCover, weights: Sequence[int], order: int | None = None) -> DeformReport:
    """H⁰ of the deformed resolution against the directly glued neighborhood algebra."""
    ring = cover.ring
    T = log_cocycle(cover.transition())
    ca = cover.chart_algebra()
    return deform_tw(ca, T, weights, order if order is not None else ring.order)
