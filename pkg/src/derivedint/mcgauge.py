"""Nilpotent dg Lie algebras: Maurer-Cartan elements, gauge action, BCH, holonomy,
non-abelian Čech cocycles and deformed Thom-Whitney resolutions.

All series are finite because every Lie algebra here carries a certified bound
on bracket depth.  The algorithms are written against a small interface
(``zero``, ``add``, ``scale``, ``bracket``, ``d``, ``is_zero``, ``depth``)
implemented by ``DglaOver`` (a finite nilpotent dgla with coefficients in a
graded-commutative ring, e.g. polynomial forms) and ``DerivationLie``
(filtration-raising derivations of a truncated algebra).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Callable, Mapping, Sequence

from .exactlin import RatMatrix, SlicedComplex, cohomology, independent_columns, rank, solve, span_rank
from .gca import (Algebra, BaseRing, Derivation, GcaElement, Monomial, apply, commutator,
                  substitute)
from .thomwhitney import (AlgebraTWSlice, ChartAlgebra, LineBundle, algebra_tw_slice, dt_name,
                          line_bundle_diagram, simplex_inclusion, t_name, tw, tw_d, with_simplex)

# ---------------------------------------------------------------------------
# finite nilpotent dg Lie algebras


@dataclass(frozen=True)
class NilpotentDgla:
    """Basis x_0..x_{r-1} with degrees, rational structure constants and differential.

    ``brackets[(i, j)]`` gives [x_i, x_j] for the stored pairs; the other order
    is filled in by graded antisymmetry.  ``differential[i]`` gives d(x_i).
    """

    names: tuple[str, ...]
    degrees: tuple[int, ...]
    brackets: Mapping[tuple[int, int], Mapping[int, Fraction]]
    differential: Mapping[int, Mapping[int, Fraction]] = field(default_factory=dict)

    def __post_init__(self):
        full = {}
        for (i, j), v in self.brackets.items():
            v = {k: Fraction(c) for k, c in v.items() if c}
            full[(i, j)] = v
            sign = -(-1) ** (self.degrees[i] * self.degrees[j])
            other = {k: sign * c for k, c in v.items()}
            if (j, i) in full and (j, i) in self.brackets and full[(j, i)] != other:
                raise ValueError(f"brackets of {self.names[i]}, {self.names[j]} violate antisymmetry")
            full.setdefault((j, i), other)
        object.__setattr__(self, "_table", full)
        for (i, j), v in full.items():
            for k in v:
                if self.degrees[k] != self.degrees[i] + self.degrees[j]:
                    raise ValueError(f"[{self.names[i]}, {self.names[j]}] has the wrong degree")
        for i, v in self.differential.items():
            for k in v:
                if self.degrees[k] != self.degrees[i] + 1:
                    raise ValueError(f"d({self.names[i]}) has the wrong degree")

    @property
    def dim(self) -> int:
        return len(self.names)

    def bracket_basis(self, i: int, j: int) -> dict[int, Fraction]:
        return self._table.get((i, j), {})

    def d_basis(self, i: int) -> dict[int, Fraction]:
        return {k: Fraction(c) for k, c in self.differential.get(i, {}).items() if c}

    # vectors are dicts index -> Fraction
    def bracket(self, x: Mapping[int, Fraction], y: Mapping[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for i, a in x.items():
            for j, b in y.items():
                for k, c in self.bracket_basis(i, j).items():
                    out[k] = out.get(k, Fraction(0)) + a * b * c
        return {k: v for k, v in out.items() if v}

    def d(self, x: Mapping[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for i, a in x.items():
            for k, c in self.d_basis(i).items():
                out[k] = out.get(k, Fraction(0)) + a * c
        return {k: v for k, v in out.items() if v}

    def invariant_failures(self) -> list[str]:
        out = []
        e = lambda i: {i: Fraction(1)}
        r = range(self.dim)
        for i, j, k in product(r, r, r):
            lhs = self.bracket(e(i), self.bracket(e(j), e(k)))
            rhs = _vadd(self.bracket(self.bracket(e(i), e(j)), e(k)),
                        _vscale(self.bracket(e(j), self.bracket(e(i), e(k))),
                                (-1) ** (self.degrees[i] * self.degrees[j])))
            if _vsub(lhs, rhs):
                out.append(f"Jacobi fails on ({self.names[i]}, {self.names[j]}, {self.names[k]})")
        for i in r:
            if self.d(self.d(e(i))):
                out.append(f"d^2 != 0 on {self.names[i]}")
            for j in r:
                lhs = self.d(self.bracket(e(i), e(j)))
                rhs = _vadd(self.bracket(self.d(e(i)), e(j)),
                            _vscale(self.bracket(e(i), self.d(e(j))), (-1) ** self.degrees[i]))
                if _vsub(lhs, rhs):
                    out.append(f"d is not a derivation on ({self.names[i]}, {self.names[j]})")
        return out

    def nilpotency_class(self) -> int:
        """Smallest c with all (c+1)-fold brackets zero, via the lower central series."""
        span = [[Fraction(1) if k == i else Fraction(0) for k in range(self.dim)] for i in range(self.dim)]
        for c in range(1, self.dim + 2):
            nxt = []
            for i in range(self.dim):
                for v in span:
                    b = self.bracket({i: Fraction(1)}, {k: x for k, x in enumerate(v) if x})
                    if b:
                        nxt.append([b.get(k, Fraction(0)) for k in range(self.dim)])
            if not nxt or span_rank(nxt, self.dim) == 0:
                return c
            span = [nxt[j] for j in independent_columns(nxt, self.dim)]
        raise ValueError("bracket is not nilpotent")


def _vadd(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) + v
    return {k: v for k, v in out.items() if v}


def _vscale(a, c):
    return {k: v * c for k, v in a.items() if v * c}


def _vsub(a, b):
    return _vadd(a, _vscale(b, -1))


def abelian(n: int, degree: int = 0) -> NilpotentDgla:
    return NilpotentDgla(tuple(f"x{i + 1}" for i in range(n)), (degree,) * n, {})


def heisenberg() -> NilpotentDgla:
    """[x, y] = z: class 2."""
    return NilpotentDgla(("x", "y", "z"), (0, 0, 0), {(0, 1): {2: 1}})


def upper_triangular(n: int) -> NilpotentDgla:
    """Strictly upper-triangular n×n matrices with the commutator: class n−1."""
    idx = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pos = {e: k for k, e in enumerate(idx)}
    br = {}
    for a, (i, j) in enumerate(idx):
        for b, (k, l) in enumerate(idx):
            if a >= b:
                continue
            v = {}
            if j == k:
                v[pos[(i, l)]] = v.get(pos[(i, l)], 0) + 1
            if l == i:
                v[pos[(k, j)]] = v.get(pos[(k, j)], 0) - 1
            if v:
                br[(a, b)] = v
    return NilpotentDgla(tuple(f"E{i + 1}{j + 1}" for i, j in idx), (0,) * len(idx), br)


def suspended_heisenberg() -> NilpotentDgla:
    """Heisenberg in degree 0 with a degree-1 copy and d = suspension: a small dgla with d ≠ 0."""
    names = ("x", "y", "z", "dx", "dy", "dz")
    br = {(0, 1): {2: 1}, (3, 1): {5: Fraction(1, 2)}, (0, 4): {5: Fraction(1, 2)}}
    return NilpotentDgla(names, (0, 0, 0, 1, 1, 1), br, {0: {3: 1}, 1: {4: 1}, 2: {5: 1}})


# ---------------------------------------------------------------------------
# coefficient extension


class DglaOver:
    """g ⊗ R for a graded-commutative ring R (optionally with a differential), truncated by ``clip``.

    Elements are dicts basis-index → element of R.  [f x, h y] = (−1)^{|x||h|} f h [x, y].
    """

    def __init__(self, g: NilpotentDgla, ring: Algebra, ring_d: Derivation | None = None,
                 depth: int | None = None):
        self.g = g
        self.ring = ring
        self.ring_d = ring_d
        self.depth = depth if depth is not None else g.nilpotency_class()

    def zero(self) -> dict:
        return {}

    def basis(self, i: int, coeff=None) -> dict:
        return {i: coeff if coeff is not None else self.ring.one()}

    def from_scalars(self, v: Mapping[int, Fraction]) -> dict:
        return self._clean({i: self.ring.const(c) for i, c in v.items()})

    def _clean(self, x):
        return {i: v for i, v in x.items() if v}

    def add(self, x, y):
        out = dict(x)
        for i, v in y.items():
            out[i] = out[i] + v if i in out else v
        return self._clean(out)

    def scale(self, x, c):
        return self._clean({i: v * c for i, v in x.items()})

    def sub(self, x, y):
        return self.add(x, self.scale(y, -1))

    def is_zero(self, x) -> bool:
        return not self._clean(x)

    def _parity_split(self, h: GcaElement) -> tuple[GcaElement, GcaElement]:
        even = h.filter(lambda m: self.ring.mono_parity(m) == 0)
        return even, h - even

    def bracket(self, x, y):
        out: dict = {}
        for i, f in x.items():
            for j, h in y.items():
                br = self.g.bracket_basis(i, j)
                if not br:
                    continue
                ev, od = self._parity_split(h)
                prod = f * ev + (f * od) * ((-1) ** self.g.degrees[i])
                for k, c in br.items():
                    out[k] = out[k] + prod * c if k in out else prod * c
        return self._clean(out)

    def d(self, x):
        out: dict = {}
        for i, f in x.items():
            if self.ring_d is not None:
                df = apply(self.ring_d, f)
                if df:
                    out[i] = out[i] + df if i in out else df
            dx = self.g.d_basis(i)
            if dx:
                ev, od = self._parity_split(f)
                ff = ev - od
                for k, c in dx.items():
                    out[k] = out[k] + ff * c if k in out else ff * c
        return self._clean(out)

    def map_coefficients(self, x, fn: Callable[[GcaElement], GcaElement]) -> dict:
        return self._clean({i: fn(v) for i, v in x.items()})

    def degree_of(self, x) -> int | None:
        ds = set()
        for i, v in x.items():
            for m in v.terms:
                ds.add(self.g.degrees[i] + self.ring.mono_degree(m))
        return ds.pop() if len(ds) == 1 else (None if ds else 0)

    def equal(self, x, y) -> bool:
        return self.is_zero(self.sub(x, y))


def forms_lie(g: NilpotentDgla, n: int, coefficients: Algebra | None = None) -> DglaOver:
    """g ⊗ R ⊗ Ω(Δ^n) with the de Rham differential on the form factor."""
    base = coefficients if coefficients is not None else Algebra(BaseRing(()), ())
    ring = with_simplex(base, n)
    d = Derivation(ring, 1, {}, {t_name(i): ring.gen(dt_name(i)) for i in range(1, n + 1)})
    return DglaOver(g, ring, d)


# ---------------------------------------------------------------------------
# series


def ad_power(lie, a, x, k: int):
    for _ in range(k):
        x = lie.bracket(a, x)
    return x


def exp_ad(lie, a, x):
    out, term = x, x
    for k in range(1, lie.depth + 1):
        term = lie.bracket(a, term)
        if lie.is_zero(term):
            break
        out = lie.add(out, lie.scale(term, Fraction(1, factorial(k))))
    return out


def gauge(lie, a, theta):
    """e^a * θ = e^{ad a}(θ) − ((e^{ad a} − 1)/ad a)(da)."""
    out = exp_ad(lie, a, theta)
    term = lie.d(a)
    for k in range(0, lie.depth + 1):
        if lie.is_zero(term):
            break
        out = lie.sub(out, lie.scale(term, Fraction(1, factorial(k + 1))))
        term = lie.bracket(a, term)
    return out


def mc_defect(lie, theta):
    """dθ + ½[θ, θ]."""
    return lie.add(lie.d(theta), lie.scale(lie.bracket(theta, theta), Fraction(1, 2)))


def is_mc(lie, theta) -> bool:
    return lie.is_zero(mc_defect(lie, theta))


@lru_cache(maxsize=None)
def _free_log_exp(depth: int) -> dict[tuple[int, ...], Fraction]:
    """Coefficients of log(e^X e^Y) in the free associative algebra on X=0, Y=1, up to word length depth."""

    def mul(p, q):
        out = {}
        for w1, c1 in p.items():
            for w2, c2 in q.items():
                w = w1 + w2
                if len(w) <= depth:
                    out[w] = out.get(w, Fraction(0)) + c1 * c2
        return {w: c for w, c in out.items() if c}

    def exp_letter(letter):
        return {(letter,) * k: Fraction(1, factorial(k)) for k in range(depth + 1)}

    prod = mul(exp_letter(0), exp_letter(1))
    W = {w: c for w, c in prod.items() if w}
    out, power = {}, {(): Fraction(1)}
    for k in range(1, depth + 1):
        power = mul(power, W)
        for w, c in power.items():
            out[w] = out.get(w, Fraction(0)) + c * Fraction((-1) ** (k + 1), k)
    return {w: c for w, c in out.items() if c}


@lru_cache(maxsize=None)
def bch_lie_terms(depth: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Dynkin form: log(e^a e^b) = Σ c_w/|w| [w_1, [w_2, ... w_n]], restricted to surviving words."""
    terms = []
    for w, c in sorted(_free_log_exp(depth).items(), key=lambda t: (len(t[0]), t[0])):
        if len(w) > 1 and w[-1] == w[-2]:
            continue
        terms.append((w, c / len(w)))
    return tuple(terms)


def bch(lie, a, b):
    """log(e^a e^b), exact for brackets of depth ≤ lie.depth."""
    letters = (a, b)
    out = lie.zero()
    cache: dict[tuple[int, ...], object] = {}

    def nested(w):
        if w in cache:
            return cache[w]
        if len(w) == 1:
            v = letters[w[0]]
        else:
            inner = nested(w[1:])
            v = lie.zero() if lie.is_zero(inner) else lie.bracket(letters[w[0]], inner)
        cache[w] = v
        return v

    for w, c in bch_lie_terms(lie.depth + 1 if lie.depth >= 1 else 1):
        if len(w) > lie.depth:
            continue
        v = nested(w)
        if not lie.is_zero(v):
            out = lie.add(out, lie.scale(v, c))
    return out


# ---------------------------------------------------------------------------
# holonomy


BERNOULLI = [Fraction(1), Fraction(-1, 2), Fraction(1, 6), Fraction(0), Fraction(-1, 30), Fraction(0),
             Fraction(1, 42), Fraction(0), Fraction(-1, 30), Fraction(0), Fraction(5, 66)]


def _antiderivative(x: GcaElement) -> GcaElement:
    """∫_0^s in the variable t1 (s stands for t1)."""
    alg = x.algebra
    i = alg.base.index(t_name(1))
    out = {}
    for (base, gens), c in x.terms.items():
        nb = list(base)
        nb[i] += 1
        out[(tuple(nb), gens)] = c / nb[i]
    return GcaElement(alg, out)


def _strip_dt(lie: DglaOver, theta) -> dict:
    """θ = A(s) ds on Δ¹ ↦ A(s)."""
    ring = lie.ring
    j = ring.gen_index(dt_name(1))
    out = {}
    for i, f in theta.items():
        terms = {}
        for (base, gens), c in f.terms.items():
            if not gens[j]:
                raise ValueError("edge form has a 0-form part")
            sign = (-1) ** sum(gens[j + 1:]) if any(gens[j + 1:]) else 1
            ng = gens[:j] + (0,) + gens[j + 1:]
            terms[(base, ng)] = sign * c
        out[i] = GcaElement(ring, terms)
    return lie._clean(out)


def transport_log(lie1: DglaOver, theta) -> dict:
    """Ω(s) with U = e^{Ω} solving U' = U·A, U(0) = 1, where θ = A(s) ds on Δ¹.

    Picard iteration of Ω' = Σ B_k/k! (−ad Ω)^k A; the depth of the algebra bounds
    the number of iterations needed.
    """
    A = _strip_dt(lie1, theta)
    omega = lie1.zero()
    for _ in range(lie1.depth + 1):
        integrand = lie1.zero()
        term = A
        for k in range(lie1.depth + 1):
            if lie1.is_zero(term):
                break
            if k < len(BERNOULLI) and BERNOULLI[k]:
                integrand = lie1.add(integrand, lie1.scale(term, BERNOULLI[k] / factorial(k)))
            term = lie1.scale(lie1.bracket(omega, term), -1)
        nxt = lie1.map_coefficients(integrand, _antiderivative)
        if lie1.equal(nxt, omega):
            break
        omega = nxt
    return omega


def evaluate_at_end(lie1: DglaOver, x, target: Algebra, s=1) -> dict:
    imgs = {t_name(1): target.const(s)}
    return {i: v for i, v in ((i, substitute(f, target, {dt_name(1): target.zero()}, imgs)) for i, f in x.items()) if v}


def edge_holonomy(lie: DglaOver, theta, n: int, p: int, q: int, coefficients: Algebra) -> dict:
    """log of the holonomy of d + θ along the edge from vertex p to vertex q of Δ^n."""
    lie1 = DglaOver(lie.g, with_simplex(coefficients, 1), None, lie.depth)
    if n == 1 and (p, q) == (0, 1):
        edge = theta
    else:
        edge = {i: simplex_inclusion(f, n, (p, q), lie1.ring) for i, f in theta.items()}
        edge = lie1._clean(edge)
    omega = transport_log(lie1, edge)
    return evaluate_at_end(lie1, omega, coefficients)


def holonomy(lie: DglaOver, theta, n: int, coefficients: Algebra | None = None) -> list[dict]:
    """Logs of e(θ)_1..e(θ)_n along consecutive edges; θ must be Maurer-Cartan."""
    coefficients = coefficients if coefficients is not None else Algebra(BaseRing(()), ())
    if not is_mc(lie, theta):
        raise ValueError("holonomy requires a Maurer-Cartan element")
    return [edge_holonomy(lie, theta, n, i - 1, i, coefficients) for i in range(1, n + 1)]


@dataclass
class GaugeLawReport:
    algebra: str
    nilpotency_class: int
    instances: int
    action_failures: int
    mc_failures: int
    holonomy_failures: int
    holonomy_checked: bool = True

    @property
    def ok(self) -> bool:
        return not (self.action_failures or self.mc_failures or self.holonomy_failures)


def gauge_laws(g: NilpotentDgla, instances: int, seed: int = 0, name: str = "") -> GaugeLawReport:
    """Randomized exact checks on g ⊗ Ω(Δ²):

    gauge(a, gauge(b, θ)) = gauge(bch(a, b), θ), both sides Maurer-Cartan, and the
    edge holonomies of θ compose: bch(hol_01, hol_12) = hol_02 (when g sits in degree 0).
    θ is a random gauge transform of a random constant MC element.
    """
    import random
    rng = random.Random(seed)
    L = forms_lie(g, 2)
    Q = Algebra(BaseRing(()), ())
    L0 = DglaOver(g, Q)
    t1, t2 = L.ring.var(t_name(1)), L.ring.var(t_name(2))
    monos = [L.ring.one(), t1, t2, t1 * t2, t1 * t1, t2 * t2]

    def rnd():
        return Fraction(rng.randint(-5, 5), rng.randint(1, 4))

    def poly():
        out = L.ring.zero()
        for m in rng.sample(monos, 3):
            out = out + m * rnd()
        return out

    def element(deg):
        return L._clean({i: poly() for i in range(g.dim) if g.degrees[i] == deg})

    flat = all(d == 0 for d in g.degrees)
    bad_action = bad_mc = bad_hol = 0
    for _ in range(instances):
        theta = gauge(L, element(0), {})
        a, b = element(0), element(0)
        lhs = gauge(L, a, gauge(L, b, theta))
        rhs = gauge(L, bch(L, a, b), theta)
        if not L.equal(lhs, rhs):
            bad_action += 1
        if not (is_mc(L, theta) and is_mc(L, lhs)):
            bad_mc += 1
        if not flat:
            continue
        h01, h12, h02 = (edge_holonomy(L, lhs, 2, p, q, Q) for p, q in ((0, 1), (1, 2), (0, 2)))
        if not L0.equal(bch(L0, h01, h12), h02):
            bad_hol += 1
    return GaugeLawReport(name or ",".join(g.names), g.nilpotency_class(), instances, bad_action, bad_mc, bad_hol, flat)


# ---------------------------------------------------------------------------
# derivations of a truncated algebra


class DerivationLie:
    """Degree-0 derivations of ``algebra`` that raise a filtration, modulo ``clip``.

    ``depth`` bounds the bracket depth (e.g. the truncation order).
    """

    def __init__(self, algebra: Algebra, clip: Callable[[GcaElement], GcaElement], depth: int):
        self.algebra = algebra
        self.clip = clip
        self.depth = depth

    def make(self, var_images: Mapping[str, GcaElement], gen_images: Mapping[str, GcaElement] | None = None) -> Derivation:
        return Derivation(self.algebra, 0, {k: self.clip(v) for k, v in (gen_images or {}).items()},
                          {k: self.clip(v) for k, v in var_images.items()})

    def zero(self) -> Derivation:
        return Derivation(self.algebra, 0, {}, {})

    def add(self, x, y):
        return self._clipped(x + y)

    def scale(self, x, c):
        return x.scaled(c)

    def bracket(self, x, y):
        return self._clipped(commutator(x, y))

    def d(self, x):
        return self.zero()

    def is_zero(self, x) -> bool:
        return x.is_zero()

    def _clipped(self, D: Derivation) -> Derivation:
        return Derivation(D.algebra, D.degree, {k: self.clip(v) for k, v in D.images.items()},
                          {k: self.clip(v) for k, v in D.var_images.items()})

    def act(self, D: Derivation, f: GcaElement) -> GcaElement:
        return self.clip(apply(D, f))

    def exp_act(self, D: Derivation, f: GcaElement) -> GcaElement:
        out, term = f, f
        for k in range(1, self.depth + 2):
            term = self.act(D, term)
            if not term:
                return out
            out = out + term * Fraction(1, factorial(k))
        raise ValueError("exponential series did not terminate: derivation is not filtration-raising")

    def equal(self, x, y) -> bool:
        return self._clipped(x - y).is_zero()


# ---------------------------------------------------------------------------
# sheaves of nilpotent Lie algebras on the two-chart ℙ¹ cover


@dataclass(frozen=True)
class SheafLie:
    """g ⊗ (line bundles) on the two-chart ℙ¹ cover; basis element i twisted by bundles[i].

    ``ring`` is ℚ[z^{±1}]; a coefficient z^a on x_i is a section over U_I per bundles[i].
    """

    g: NilpotentDgla
    bundles: tuple[LineBundle, ...]
    ring: Algebra

    def __post_init__(self):
        for (i, j), v in self.g._table.items():
            for k in v:
                if self.bundles[k].d != self.bundles[i].d + self.bundles[j].d:
                    raise ValueError(f"bracket [{self.g.names[i]}, {self.g.names[j]}] is not bundle-compatible")

    def lie(self, n: int) -> DglaOver:
        ring = with_simplex(self.ring, n)
        d = Derivation(ring, 1, {}, {t_name(i): ring.gen(dt_name(i)) for i in range(1, n + 1)})
        return DglaOver(self.g, ring, d)

    def is_section(self, I: tuple[int, ...], x: Mapping[int, GcaElement]) -> bool:
        zi = self.ring.base.index("z")
        for i, f in x.items():
            for m in f.terms:
                if not self.bundles[i].on_chart(I, m[0][zi]):
                    return False
        return True


def laurent_ring(name: str = "z") -> Algebra:
    from .gca import Variable
    return Algebra(BaseRing((Variable(name, 1, True),)), ())


@dataclass
class NonabelianCocycle:
    """Logs T_{ij} of the overlap group elements, keyed by increasing chart pairs."""

    T: dict[tuple[int, int], dict]

    def failures(self, lie) -> list[str]:
        out = []
        charts = sorted({i for e in self.T for i in e})
        for i, j, k in ((a, b, c) for a in charts for b in charts for c in charts if a < b < c):
            lhs = bch(lie, self.T[(i, j)], self.T[(j, k)])
            if not lie.equal(lhs, self.T[(i, k)]):
                out.append(f"cocycle condition fails on ({i}, {j}, {k})")
        return out


def mc_to_cocycle(S: SheafLie, theta: Mapping[tuple[int, ...], dict]) -> NonabelianCocycle:
    """Holonomy along each edge of the nerve; θ_I lives in g(U_I) ⊗ Ω(Δ^{|I|−1})."""
    T = {}
    for I, th in theta.items():
        if len(I) == 2:
            T[I] = edge_holonomy(S.lie(1), th, 1, 0, 1, S.ring)
    return NonabelianCocycle(T)


def cocycle_to_mc(S: SheafLie, c: NonabelianCocycle) -> dict[tuple[int, ...], dict]:
    """θ_{01} = T_{01} dt (two-chart covers); vertex components vanish in degree one."""
    if any(len(e) != 2 or e != (0, 1) for e in c.T):
        raise ValueError("cocycle_to_mc is implemented for two-chart covers")
    lie1 = S.lie(1)
    dt = lie1.ring.gen(dt_name(1))
    return {(0, 1): lie1.map_coefficients(c.T.get((0, 1), {}), lambda f: substitute(f, lie1.ring, {}) * dt)}


def cocycle_gauge(lie, b: Mapping[int, dict], c: NonabelianCocycle) -> NonabelianCocycle:
    """Action of a 0-cochain: T_{pq} ↦ log(e^{b_p} e^{T_{pq}} e^{−b_q})."""
    return NonabelianCocycle({(p, q): bch(lie, bch(lie, b.get(p, lie.zero()), T), lie.scale(b.get(q, lie.zero()), -1))
                              for (p, q), T in c.T.items()})


def tw_gauge(S: SheafLie, a: Mapping[tuple[int, ...], dict], theta: Mapping[tuple[int, ...], dict]) -> dict:
    """Level-wise gauge action on TW(g): vertices carry no degree-one part."""
    out = {}
    for I in set(a) | set(theta):
        n = len(I) - 1
        lie = S.lie(n)
        ai = a.get(I, lie.zero())
        ti = theta.get(I, lie.zero())
        v = gauge(lie, ai, ti)
        if not lie.is_zero(v):
            out[I] = v
    return out


def interpolating_gauge(S: SheafLie, b: Mapping[int, dict]) -> dict:
    """The TW degree-0 element with vertex values b_0, b_1 and (1−t)b_0 + t b_1 on the edge."""
    lie1 = S.lie(1)
    t = lie1.ring.var(t_name(1))
    lift = lambda f: substitute(f, lie1.ring, {})
    edge = lie1.add(lie1.map_coefficients(b.get(0, {}), lambda f: lift(f) * (1 - t)),
                    lie1.map_coefficients(b.get(1, {}), lambda f: lift(f) * t))
    out = {(0,): b.get(0, {}), (1,): b.get(1, {}), (0, 1): edge}
    return {I: v for I, v in out.items() if v}


def gauge_connect(S: SheafLie, theta, theta2) -> dict | None:
    """A TW degree-0 element a with zero vertex values and e^a * θ = θ2, or None.

    Exists iff the two holonomies agree; a(s) = log(e^{−Ω2(s)} e^{Ω(s)}) from the transports.
    """
    lie1 = S.lie(1)
    om = transport_log(lie1, theta.get((0, 1), {}))
    om2 = transport_log(lie1, theta2.get((0, 1), {}))
    a = bch(lie1, lie1.scale(om2, -1), om)
    if not lie1.is_zero(evaluate_at_end(lie1, a, S.ring)):
        return None
    a_tw = {(0, 1): a} if not lie1.is_zero(a) else {}
    if not _theta_equal(S, tw_gauge(S, a_tw, theta), theta2):
        raise AssertionError("gauge connection computed but does not transport θ to θ2")
    return a_tw


def _theta_equal(S: SheafLie, x, y) -> bool:
    for I in set(x) | set(y):
        lie = S.lie(len(I) - 1)
        if not lie.equal(x.get(I, {}), y.get(I, {})):
            return False
    return True


@dataclass
class RoundTripReport:
    samples: int
    cocycle_round_trip: int
    mc_round_trip: int
    gauge_compatible: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def round_trip(S: SheafLie, thetas: Sequence[dict], gauges: Sequence[dict]) -> RoundTripReport:
    """For each MC θ: θ ↦ T ↦ θ' must be gauge-connected to θ, T ↦ θ ↦ T must be the identity,
    and e^a * θ must map to the cocycle transformed by the vertex values of a."""
    lie0 = DglaOver(S.g, S.ring)
    fails = []
    ok_c = ok_m = ok_g = 0
    for k, (th, a) in enumerate(zip(thetas, gauges)):
        if not is_mc(S.lie(1), th.get((0, 1), {})):
            fails.append(f"sample {k}: input is not Maurer-Cartan")
            continue
        c = mc_to_cocycle(S, th)
        th2 = cocycle_to_mc(S, c)
        if gauge_connect(S, th, th2) is None:
            fails.append(f"sample {k}: no gauge connection between θ and its round trip")
        else:
            ok_m += 1
        c2 = mc_to_cocycle(S, th2)
        if lie0.equal(c2.T.get((0, 1), {}), c.T.get((0, 1), {})):
            ok_c += 1
        else:
            fails.append(f"sample {k}: cocycle round trip changes T")
        moved = tw_gauge(S, a, th)
        if not is_mc(S.lie(1), moved.get((0, 1), {})):
            fails.append(f"sample {k}: gauge action left the Maurer-Cartan set")
        expected = cocycle_gauge(lie0, {0: a.get((0,), {}), 1: a.get((1,), {})}, c)
        got = mc_to_cocycle(S, moved)
        if lie0.equal(got.T.get((0, 1), {}), expected.T[(0, 1)]):
            ok_g += 1
        else:
            fails.append(f"sample {k}: gauge-equivalent MC elements give inequivalent cocycles")
    return RoundTripReport(len(thetas), ok_c, ok_m, ok_g, fails)


# ---------------------------------------------------------------------------
# the abelian case against additive Čech cohomology


def _orbit_count(n: int, same: Callable[[int, int], bool]) -> tuple[int, list[int]]:
    label = list(range(n))
    for i in range(n):
        for j in range(i):
            if label[j] == j and same(i, j):
                label[i] = j
                break
    return len(set(label)), label


@dataclass
class AbelianReport:
    bundle: LineBundle
    cech_h1: int
    tw_h1: int
    orbits_cech: int
    orbits_tw: int
    decisions_agree: bool

    @property
    def ok(self) -> bool:
        return self.cech_h1 == self.tw_h1 and self.orbits_cech == self.orbits_tw and self.decisions_agree


def abelian_orbits(bundle: LineBundle, samples: Sequence[Mapping[int, Fraction]], p_max: int = 2) -> AbelianReport:
    """Cocycles for an abelian line-bundle-valued g: T = Σ c_a z^a on U01.

    Two samples are gauge-equivalent in Čech terms iff T − T' = b_1 − b_0; in TW terms
    iff θ − θ' = d(a) for a degree-0 TW element.  Both decisions are made by exact solves.
    """
    from .thomwhitney import laurent_window
    weights = sorted(set(laurent_window(bundle)) | {a for s in samples for a in s})
    cech_h1 = tw_h1 = 0
    slices = {}
    for w in weights:
        V = line_bundle_diagram(bundle, w)
        T = tw(V, p_max)
        slices[w] = T
        tw_h1 += cohomology(T.complex, representatives=False).get(1).dim if 1 in T.complex.dims else 0
        c0 = V.levels[0].dim(0)
        delta = V.coface(1, 0, 0) - V.coface(1, 1, 0)
        cech_h1 += V.levels[1].dim(0) - rank(delta) if c0 else V.levels[1].dim(0)

    def cech_same(i, j):
        for w in weights:
            diff = Fraction(samples[i].get(w, 0)) - Fraction(samples[j].get(w, 0))
            if not diff:
                continue
            V = line_bundle_diagram(bundle, w)
            delta = V.coface(1, 0, 0) - V.coface(1, 1, 0)
            if delta.cols == 0 or solve(delta, [diff]) is None:
                return False
        return True

    def tw_same(i, j):
        for w in weights:
            diff = Fraction(samples[i].get(w, 0)) - Fraction(samples[j].get(w, 0))
            if not diff:
                continue
            T = slices[w]
            alg = with_simplex(Algebra(BaseRing(()), ()), 1)
            dt_mono = next(iter(alg.gen(dt_name(1)).terms))
            theta = {(1, 0, 0, dt_mono): diff}
            coords = [T.to_vector(theta, 1)[f] for f in T.free.get(1, [])]
            D = T.complex.d(0)
            if D.cols == 0 or solve(D, coords) is None:
                return False
        return True

    n = len(samples)
    oc, lc = _orbit_count(n, cech_same)
    ot, lt = _orbit_count(n, tw_same)
    agree = all(cech_same(i, j) == tw_same(i, j) for i in range(n) for j in range(i))
    return AbelianReport(bundle, cech_h1, tw_h1, oc, ot, agree)


# ---------------------------------------------------------------------------
# deformed resolutions


def action_derivation(ca: ChartAlgebra, T: Derivation) -> Derivation:
    """α(T dt) on ambient ⊗ Ω(Δ¹): v ↦ dt·T(v) on ambient generators, zero on t, dt."""
    alg = ca.level_algebra(1)
    dt = alg.gen(dt_name(1))
    var_images = {}
    for v in ca.ambient.base.names:
        img = apply(T, ca.ambient.var(v)) if v in T.var_images else ca.ambient.zero()
        if img:
            var_images[v] = dt * ca.lift(img, 1)
    gen_images = {}
    for g in ca.ambient.gen_names:
        img = T.images.get(g)
        if img:
            gen_images[g] = dt * ca.lift(img, 1)
    return Derivation(alg, 1, gen_images, var_images)


def deformed_operator(ca: ChartAlgebra, Q: Derivation | None):
    def op(x):
        out = tw_d(ca, x)
        if Q is not None and (0, 1) in x:
            extra = ca.clip(apply(Q, x[(0, 1)]))
            if extra:
                out[(0, 1)] = out[(0, 1)] + extra if (0, 1) in out else extra
                if not out[(0, 1)]:
                    del out[(0, 1)]
        return out
    return op


@dataclass
class DeformRow:
    weight: int
    h0: int
    glued: int
    square_zero: bool


@dataclass
class DeformReport:
    rows: list[DeformRow]

    @property
    def ok(self) -> bool:
        return all(r.h0 == r.glued and r.square_zero for r in self.rows)


def glued_dimension(ca: ChartAlgebra, automorphism: Callable[[GcaElement], GcaElement], weight: int) -> int:
    """dim {(f0, f1) : f1 = Φ(f0)} in one weight: f0 over U0 whose image lies over U1."""
    mons = ca.slice_monomials(weight)
    src = [m for m in mons if ca.sections((0,), m)]
    bad = [m for m in mons if not ca.sections((1,), m)]
    bidx = {m: i for i, m in enumerate(bad)}
    cols = []
    for m in src:
        img = ca.clip(automorphism(ca.ambient.monomial(m)))
        col = [Fraction(0)] * len(bad)
        for mm, c in img.terms.items():
            if mm in bidx:
                col[bidx[mm]] += c
            elif mm not in mons:
                raise ValueError("automorphism does not preserve weights")
        cols.append(col)
    if not src:
        return 0
    return len(src) - span_rank(cols, len(bad)) if bad else len(src)


def deform_tw(ca: ChartAlgebra, T: Derivation, weights: Sequence[int], order: int,
              p_max: int = 2) -> DeformReport:
    """H⁰ of (TW(A), d + α(θ)) with θ = T dt, against the algebra glued by exp(−T).

    ``order`` bounds how many times T can act before the truncation kills everything.
    """
    for v, img in T.var_images.items():
        if img and img.weights() != {ca.ambient.var(v).weight}:
            raise ValueError(f"the twist must preserve torus weights; it sends {v} to weights {sorted(img.weights())}")
    Q = action_derivation(ca, T) if not T.is_zero() else None
    op = deformed_operator(ca, Q)
    lie = DerivationLie(ca.ambient, ca.clip, order)
    minus = T.scaled(-1)
    rows = []
    for w in weights:
        sl = algebra_tw_slice(ca, w, p_max)
        cx = sl.operator_complex(op)
        sq = all((cx.d(N + 1) @ cx.d(N)).is_zero() for N in cx.dims if N + 1 in cx.dims)
        h0 = cohomology(cx, representatives=False)[0].dim if 0 in cx.dims else 0
        glued = glued_dimension(ca, lambda f: lie.exp_act(minus, f), w)
        rows.append(DeformRow(w, h0, glued, sq))
    return DeformReport(rows)
