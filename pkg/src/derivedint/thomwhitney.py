"""Polynomial forms on simplices, Thom-Whitney totalization and the Dupont retraction.

Forms on Δ^n live in the graded-commutative engine: variables t1..tn and odd
generators dt1..dtn, with t0 = 1 − Σ t_i and dt0 = −Σ dt_i eliminated.  Any
algebra containing these names (for instance V ⊗ Ω(Δ^n)) can be fed to the
face, integration and homotopy operators below; the remaining factors are
carried along with Koszul signs.

Two layers are provided.  The linear layer takes a (semi-)cosimplicial
complex given slice-wise by matrices and builds Tot, TW (as an equalizer
solved by kernel computation) and the maps I, P, H.  The algebra layer
handles Čech diagrams whose chart algebras are subalgebras of one ambient
algebra, so that every restriction map is an inclusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Callable, Iterable, Mapping, Sequence

from .exactlin import RatMatrix, SlicedComplex, cohomology, rank_kernel, solve
from .gca import (Algebra, BaseRing, Derivation, GcaElement, Generator, Monomial, Variable,
                  apply, enumerate_monomials, substitute)
from .parallel import parallel_map


# ---------------------------------------------------------------------------
# forms on a simplex


def t_name(i: int) -> str:
    return f"t{i}"


def dt_name(i: int) -> str:
    return f"dt{i}"


@lru_cache(maxsize=None)
def simplex_algebra(n: int) -> Algebra:
    """Ω(Δ^n) with t_i and dt_i of weight 1, so weight = polynomial degree + form degree."""
    base = BaseRing(tuple(Variable(t_name(i), 1) for i in range(1, n + 1)))
    return Algebra(base, tuple(Generator(dt_name(i), 1, 1) for i in range(1, n + 1)))


def with_simplex(alg: Algebra, n: int) -> Algebra:
    """alg ⊗ Ω(Δ^n); the simplex coordinates get weight 0 so weights stay those of alg."""
    base = BaseRing(alg.base.variables + tuple(Variable(t_name(i), 0) for i in range(1, n + 1)))
    return Algebra(base, alg.generators + tuple(Generator(dt_name(i), 1, 0) for i in range(1, n + 1)))


def coordinate(alg: Algebra, n: int, i: int) -> GcaElement:
    """Barycentric coordinate t_i on Δ^n (t_0 eliminated)."""
    if not 0 <= i <= n:
        raise IndexError(f"vertex {i} outside Δ^{n}")
    if i == 0:
        out = alg.one()
        for j in range(1, n + 1):
            out = out - alg.var(t_name(j))
        return out
    return alg.var(t_name(i))


def coordinate_differential(alg: Algebra, n: int, i: int) -> GcaElement:
    if not 0 <= i <= n:
        raise IndexError(f"vertex {i} outside Δ^{n}")
    if i == 0:
        out = alg.zero()
        for j in range(1, n + 1):
            out = out - alg.gen(dt_name(j))
        return out
    return alg.gen(dt_name(i))


def de_rham(alg: Algebra, n: int) -> Derivation:
    return Derivation(alg, 1, {}, {t_name(i): alg.gen(dt_name(i)) for i in range(1, n + 1)})


def form_degree(alg: Algebra, m: Monomial, n: int) -> int:
    names = alg.gen_names
    return sum(m[1][names.index(dt_name(i))] for i in range(1, n + 1))


def simplex_face(x: GcaElement, n: int, k: int, target: Algebra | None = None) -> GcaElement:
    """Pull back along the k-th face inclusion Δ^{n−1} → Δ^n (vertex k omitted)."""
    if not 0 <= k <= n:
        raise IndexError(f"face {k} of Δ^{n} does not exist")
    if target is None:
        target = simplex_algebra(n - 1)
    var_images, gen_images = {}, {}
    for j in range(1, n + 1):
        if j < k:
            src = j
        elif j == k:
            var_images[t_name(j)] = target.zero()
            gen_images[dt_name(j)] = target.zero()
            continue
        else:
            src = j - 1
        var_images[t_name(j)] = coordinate(target, n - 1, src)
        gen_images[dt_name(j)] = coordinate_differential(target, n - 1, src)
    return substitute(x, target, gen_images, var_images)


def simplex_inclusion(x: GcaElement, n: int, vertices: Sequence[int], target: Algebra) -> GcaElement:
    """Pull back along the face of Δ^n spanned by the increasing ``vertices``."""
    missing = [v for v in range(n + 1) if v not in vertices]
    out = x
    level = n
    for v in reversed(missing):
        tgt = target if level - 1 == len(vertices) - 1 else _same_family(x.algebra, n, level - 1)
        out = simplex_face(out, level, v, tgt)
        level -= 1
    return out


def _same_family(alg: Algebra, n: int, m: int) -> Algebra:
    """The algebra obtained from alg by replacing Ω(Δ^n) with Ω(Δ^m)."""
    tn = {t_name(i) for i in range(1, n + 1)}
    dn = {dt_name(i) for i in range(1, n + 1)}
    base_vars = [v for v in alg.base.variables if v.name not in tn]
    gens = [g for g in alg.generators if g.name not in dn]
    tw = next((v.weight for v in alg.base.variables if v.name in tn), 1)
    base = BaseRing(tuple(base_vars) + tuple(Variable(t_name(i), tw) for i in range(1, m + 1)))
    return Algebra(base, tuple(gens) + tuple(Generator(dt_name(i), 1, tw) for i in range(1, m + 1)))


def integrate(x: GcaElement, n: int, target: Algebra | None = None) -> GcaElement:
    """∫_{Δ^n} of the top-form part, using ∫ t^α dt_1⋯dt_n = α!/(|α|+n)!.

    Non-simplex factors are kept (to the left of the form), so the result
    lives in ``target`` (ℚ when omitted).
    """
    alg = x.algebra
    tidx = [alg.base.index(t_name(i)) for i in range(1, n + 1)]
    didx = [alg.gen_index(dt_name(i)) for i in range(1, n + 1)]
    if target is None:
        target = Algebra(BaseRing(()), ())
    out = target.zero()
    for (base, gens), c in x.terms.items():
        if not all(gens[j] for j in didx):
            continue
        alpha = [base[j] for j in tidx]
        val = Fraction(1, factorial(sum(alpha) + n))
        for a in alpha:
            val *= factorial(a)
        rest_b = {v.name: e for v, e in zip(alg.base.variables, base) if v.name not in {t_name(i) for i in range(1, n + 1)}}
        rest_g = {g.name: e for g, e in zip(alg.generators, gens) if g.name not in {dt_name(i) for i in range(1, n + 1)}}
        mono = (tuple(rest_b.get(v.name, 0) for v in target.base.variables),
                tuple(rest_g.get(g.name, 0) for g in target.generators))
        if any(e for name, e in rest_b.items() if name not in target.base.names) or \
                any(e for name, e in rest_g.items() if name not in target.gen_names):
            raise ValueError("integration target lacks some coefficient variables")
        out = out + target.monomial(mono, c * val)
    return out


def integrate_top(x: GcaElement, n: int) -> Fraction:
    """Integral of a pure form on Δ^n; raises if a non-top form part is present."""
    alg = x.algebra
    for m in x.terms:
        if form_degree(alg, m, n) != n:
            raise ValueError(f"form has a part of degree {form_degree(alg, m, n)} != {n}")
    val = integrate(x, n)
    return val.coefficient(val.algebra.unit_monomial())


def whitney_form(alg: Algebra, n: int, vertices: Sequence[int]) -> GcaElement:
    """ω_I = k! Σ_r (−1)^r t_{i_r} dt_{i_0}⋯(omit r)⋯dt_{i_k}."""
    k = len(vertices) - 1
    out = alg.zero()
    for r, i in enumerate(vertices):
        term = coordinate(alg, n, i)
        for s, j in enumerate(vertices):
            if s != r:
                term = term * coordinate_differential(alg, n, j)
        out = out + term * ((-1) ** r)
    return out * factorial(k)


@lru_cache(maxsize=None)
def _homotopy_algebra(alg: Algebra) -> Algebra:
    base = BaseRing(alg.base.variables + (Variable("s__", 0),))
    return Algebra(base, (Generator("ds__", 1, 0),) + alg.generators)


def vertex_homotopy(x: GcaElement, n: int, i: int) -> GcaElement:
    """h_i with d h_i + h_i d = id − (evaluation at vertex i), via the straight-line contraction."""
    alg = x.algebra
    ext = _homotopy_algebra(alg)
    s = ext.var("s__")
    ds = ext.gen("ds__")
    var_images, gen_images = {}, {}
    for j in range(1, n + 1):
        delta = 1 if i == j else 0
        tj = ext.var(t_name(j))
        var_images[t_name(j)] = s * tj + (ext.one() - s) * delta
        gen_images[dt_name(j)] = s * ext.gen(dt_name(j)) + (tj - delta) * ds
    pulled = substitute(x, ext, gen_images, var_images)
    sidx = ext.base.index("s__")
    out = alg.zero()
    for (base, gens), c in pulled.terms.items():
        if not gens[0]:
            continue
        a = base[sidx]
        mono = (base[:sidx] + base[sidx + 1:], gens[1:])
        out = out + alg.monomial(mono, c * Fraction(1, a + 1))
    return out


def dupont_homotopy(x: GcaElement, n: int) -> GcaElement:
    """s_n = Σ_{k<n} Σ_{i_0<⋯<i_k} ω_{i_0…i_k} h_{i_0}⋯h_{i_k}; satisfies ds + sd = id − Σ_I ω_I ∫_{Δ_I}."""
    alg = x.algebra
    out = alg.zero()
    for k in range(n):
        for I in combinations(range(n + 1), k + 1):
            y = x
            for i in reversed(I):
                y = vertex_homotopy(y, n, i)
                if not y:
                    break
            if y:
                out = out + whitney_form(alg, n, I) * y
    return out


def whitney_projection(x: GcaElement, n: int) -> GcaElement:
    """Σ_I ω_I ∫_{Δ_I} x: the composite of integration over faces and the Whitney map."""
    alg = x.algebra
    out = alg.zero()
    for k in range(n + 1):
        face_alg = _same_family(alg, n, k)
        coeff_alg = _same_family(alg, n, 0)
        for I in combinations(range(n + 1), k + 1):
            restricted = simplex_inclusion(x, n, I, face_alg) if k < n else x
            val = integrate(restricted, k, coeff_alg)
            if val:
                out = out + whitney_form(alg, n, I) * substitute(val, alg, {})
    return out


@dataclass(frozen=True)
class SimplexForms:
    n: int
    p_max: int

    @property
    def algebra(self) -> Algebra:
        return simplex_algebra(self.n)

    def basis(self, degree: int | None = None) -> list[Monomial]:
        out = []
        for w in range(self.p_max + 1):
            out += enumerate_monomials(self.algebra, w, degree)
        return out

    def d(self, x: GcaElement) -> GcaElement:
        return apply(de_rham(self.algebra, self.n), x)

    def face(self, x: GcaElement, k: int) -> GcaElement:
        return simplex_face(x, self.n, k)


# ---------------------------------------------------------------------------
# linear cosimplicial complexes, slice-wise


@dataclass(frozen=True)
class CosimplicialComplex:
    """Levels V^0..V^L with cofaces d^{n,k}: V^{n−1} → V^n (0 ≤ k ≤ n), degree by degree."""

    levels: tuple[SlicedComplex, ...]
    cofaces: Mapping[tuple[int, int], Mapping[int, RatMatrix]]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def degrees(self) -> list[int]:
        ds = set()
        for lv in self.levels:
            ds |= {q for q, d in lv.dims.items() if d}
        return sorted(ds)

    def coface(self, n: int, k: int, q: int) -> RatMatrix:
        m = self.cofaces.get((n, k), {}).get(q)
        if m is None:
            return RatMatrix.zero(self.levels[n].dim(q), self.levels[n - 1].dim(q))
        return m

    def identity_failures(self) -> list[str]:
        out = []
        for n in range(1, self.depth):
            for j in range(n + 2):
                for i in range(j):
                    for q in self.degrees():
                        lhs = self.coface(n + 1, j, q) @ self.coface(n, i, q)
                        rhs = self.coface(n + 1, i, q) @ self.coface(n, j - 1, q)
                        if not (lhs - rhs).is_zero():
                            out.append(f"cosimplicial identity fails for i={i}, j={j}, level {n + 1}, degree {q}")
        for n in range(1, self.depth + 1):
            for k in range(n + 1):
                for q in self.degrees():
                    lhs = self.levels[n].d(q) @ self.coface(n, k, q)
                    rhs = self.coface(n, k, q + 1) @ self.levels[n - 1].d(q)
                    if not (lhs - rhs).is_zero():
                        out.append(f"coface d^{n},{k} is not a chain map in degree {q}")
        return out

    def coface_composite(self, vertices: Sequence[int], n: int, q: int) -> RatMatrix:
        """The map V^k → V^n induced by the increasing injection [k] → [n] with image ``vertices``."""
        k = len(vertices) - 1
        missing = [v for v in range(n + 1) if v not in vertices]
        m = RatMatrix.identity(self.levels[k].dim(q))
        level = k
        for c in missing:
            level += 1
            m = self.coface(level, c, q) @ m
        return m


Key = tuple  # (level, V-degree, V-index, form monomial)


def _vec_add(acc: dict, key, c) -> None:
    if c:
        v = acc.get(key, Fraction(0)) + c
        if v:
            acc[key] = v
        else:
            acc.pop(key, None)


@dataclass
class TWSlice:
    """TW(V) truncated at form weight p: ambient bases, equalizer kernels and differential."""

    V: CosimplicialComplex
    p_max: int
    ambient: dict[int, list[Key]]
    kernel: dict[int, list[list[Fraction]]]
    free: dict[int, list[int]]
    complex: SlicedComplex

    def index(self, N: int) -> dict[Key, int]:
        return {k: i for i, k in enumerate(self.ambient.get(N, []))}

    def to_vector(self, x: Mapping[Key, Fraction], N: int) -> list[Fraction]:
        idx = self.index(N)
        v = [Fraction(0)] * len(idx)
        for k, c in x.items():
            if k not in idx:
                raise ValueError(f"component {k} outside the truncated ambient space")
            v[idx[k]] += c
        return v

    def from_vector(self, v: Sequence[Fraction], N: int) -> dict[Key, Fraction]:
        return {k: c for k, c in zip(self.ambient.get(N, []), v) if c}

    def kernel_element(self, N: int, j: int) -> dict[Key, Fraction]:
        return self.from_vector(self.kernel[N][j], N)


def _forms(n: int, p: int) -> list[Monomial]:
    return SimplexForms(n, p).basis()


def _poly_capped_forms(n: int, p: int) -> list[Monomial]:
    """Forms whose polynomial degree is ≤ p; stable under d, faces and multiplication by dt."""
    alg = simplex_algebra(n)
    return [m for m in SimplexForms(n, p + n).basis() if sum(m[0]) <= p]


def tw_ambient(V: CosimplicialComplex, p_max: int) -> dict[int, list[Key]]:
    out: dict[int, list[Key]] = {}
    for n, lv in enumerate(V.levels):
        alg = simplex_algebra(n)
        for m in _forms(n, p_max):
            fd = form_degree(alg, m, n)
            for q in sorted(lv.dims):
                for i in range(lv.dim(q)):
                    out.setdefault(q + fd, []).append((n, q, i, m))
    return out


def _form_elem(n: int, m: Monomial, c=1) -> GcaElement:
    return simplex_algebra(n).monomial(m, c)


def equalizer_defect(V: CosimplicialComplex, x: Mapping[Key, Fraction]) -> dict[tuple, Fraction]:
    """(d^{n+1,k}⊗id) x_n − (id⊗∂_{n+1,k}) x_{n+1}, as a sparse vector keyed by (n+1, k, q, i, monomial)."""
    out: dict = {}
    for (n, q, i, m), c in x.items():
        if n + 1 <= V.depth:
            for k in range(n + 2):
                col = V.coface(n + 1, k, q)
                for (r, cc), v in col.entries.items():
                    if cc == i:
                        _vec_add(out, (n + 1, k, q, r, m), c * v)
        if n >= 1:
            for k in range(n + 1):
                face = simplex_face(_form_elem(n, m), n, k)
                for mm, v in face.terms.items():
                    _vec_add(out, (n, k, q, i, mm), -c * v)
    return out


def tw_differential(V: CosimplicialComplex, x: Mapping[Key, Fraction]) -> dict[Key, Fraction]:
    """(d_V ⊗ 1 + (−1)^q 1 ⊗ d_Ω) applied componentwise."""
    out: dict = {}
    for (n, q, i, m), c in x.items():
        dv = V.levels[n].d(q)
        for (r, cc), v in dv.entries.items():
            if cc == i:
                _vec_add(out, (n, q + 1, r, m), c * v)
        df = apply(de_rham(simplex_algebra(n), n), _form_elem(n, m))
        sign = -1 if q % 2 else 1
        for mm, v in df.terms.items():
            _vec_add(out, (n, q, i, mm), sign * c * v)
    return out


def tw(V: CosimplicialComplex, p_max: int) -> TWSlice:
    """Solve the equalizer equations degree by degree and restrict the differential."""
    amb = tw_ambient(V, p_max)
    kernels, frees = {}, {}
    for N, keys in amb.items():
        cols = [equalizer_defect(V, {key: Fraction(1)}) for key in keys]
        row_keys = sorted({r for col in cols for r in col}, key=repr)
        ridx = {r: i for i, r in enumerate(row_keys)}
        ent = {(ridx[r], j): v for j, col in enumerate(cols) for r, v in col.items()}
        E = RatMatrix(len(row_keys), len(keys), ent)
        _, ker = rank_kernel(E)
        kernels[N] = ker
        frees[N] = _free_columns(ker)
    dims = {N: len(kernels.get(N, [])) for N in sorted(amb)}
    lo, hi = min(dims), max(dims)
    diffs = {}
    for N in range(lo, hi + 1):
        if N + 1 not in dims or not dims.get(N):
            continue
        tgt_idx = {k: i for i, k in enumerate(amb[N + 1])}
        free_rows = frees[N + 1]
        pos = {r: i for i, r in enumerate(free_rows)}
        ent = {}
        for j, vec in enumerate(kernels[N]):
            x = {k: c for k, c in zip(amb[N], vec) if c}
            dx = tw_differential(V, x)
            for k, c in dx.items():
                r = tgt_idx.get(k)
                if r is None:
                    raise ValueError(f"differential leaves the truncated space at {k}")
                if r in pos:
                    ent[(pos[r], j)] = c
        diffs[N] = RatMatrix(dims[N + 1], dims[N], ent)
    return TWSlice(V, p_max, amb, kernels, frees, SlicedComplex(dims, diffs))


# ---------------------------------------------------------------------------
# Tot and the retraction


TotKey = tuple  # (level, V-degree, V-index)


def tot_differential(V: CosimplicialComplex, y: Mapping[TotKey, Fraction]) -> dict[TotKey, Fraction]:
    """d_V + (−1)^q δ with δ = Σ_k (−1)^k d^{n+1,k}; total degree of (n, q, i) is n + q."""
    out: dict = {}
    for (n, q, i), c in y.items():
        for (r, cc), v in V.levels[n].d(q).entries.items():
            if cc == i:
                _vec_add(out, (n, q + 1, r), c * v)
        if n + 1 <= V.depth:
            sign = -1 if q % 2 else 1
            for k in range(n + 2):
                for (r, cc), v in V.coface(n + 1, k, q).entries.items():
                    if cc == i:
                        _vec_add(out, (n + 1, q, r), sign * (-1) ** k * c * v)
    return out


def tot(V: CosimplicialComplex) -> tuple[SlicedComplex, dict[int, list[TotKey]]]:
    bases: dict[int, list[TotKey]] = {}
    for n, lv in enumerate(V.levels):
        for q in sorted(lv.dims):
            for i in range(lv.dim(q)):
                bases.setdefault(n + q, []).append((n, q, i))
    dims = {N: len(b) for N, b in bases.items()}
    diffs = {}
    for N, b in bases.items():
        if N + 1 not in bases:
            continue
        idx = {k: i for i, k in enumerate(bases[N + 1])}
        ent = {}
        for j, key in enumerate(b):
            for k, c in tot_differential(V, {key: Fraction(1)}).items():
                ent[(idx[k], j)] = c
        diffs[N] = RatMatrix(dims[N + 1], dims[N], ent)
    lo, hi = (min(dims), max(dims)) if dims else (0, 0)
    for N in range(lo, hi + 1):
        dims.setdefault(N, 0)
    return SlicedComplex(dims, diffs), bases


def whitney_map(V: CosimplicialComplex, y: Mapping[TotKey, Fraction]) -> dict[Key, Fraction]:
    """I(v) = Σ_{n ≥ k} Σ_{|J| = k+1} (d_J v) ⊗ ω_J for v at level k."""
    out: dict = {}
    for (k, q, i), c in y.items():
        for n in range(k, V.depth + 1):
            alg = simplex_algebra(n)
            for J in combinations(range(n + 1), k + 1):
                dj = V.coface_composite(J, n, q)
                w = whitney_form(alg, n, J)
                for (r, cc), v in dj.entries.items():
                    if cc != i:
                        continue
                    for m, wc in w.terms.items():
                        _vec_add(out, (n, q, r, m), c * v * wc)
    return out


def integration_map(V: CosimplicialComplex, x: Mapping[Key, Fraction]) -> dict[TotKey, Fraction]:
    """P(x) = ∫_{Δ^n} x_n on top-degree form parts."""
    out: dict = {}
    for (n, q, i, m), c in x.items():
        alg = simplex_algebra(n)
        if form_degree(alg, m, n) != n:
            continue
        _vec_add(out, (n, q, i), c * integrate_top(alg.monomial(m), n))
    return out


def homotopy_map(V: CosimplicialComplex, x: Mapping[Key, Fraction]) -> dict[Key, Fraction]:
    """H = −(−1)^q (1 ⊗ s_n), so that I∘P − id = dH + Hd."""
    out: dict = {}
    for (n, q, i, m), c in x.items():
        s = dupont_homotopy(_form_elem(n, m), n)
        sign = 1 if q % 2 else -1
        for mm, v in s.terms.items():
            _vec_add(out, (n, q, i, mm), sign * c * v)
    return out


def _sub(a: Mapping, b: Mapping) -> dict:
    out = dict(a)
    for k, v in b.items():
        _vec_add(out, k, -v)
    return out


def _add(a: Mapping, b: Mapping) -> dict:
    out = dict(a)
    for k, v in b.items():
        _vec_add(out, k, v)
    return out


@dataclass
class RetractionReport:
    tw_dims: dict[int, int]
    tot_dims: dict[int, int]
    i_chain_map: bool
    p_chain_map: bool
    p_after_i: bool
    homotopy_law: bool
    h_preserves_equalizer: bool
    failures: list[str] = field(default_factory=list)

    @property
    def dims_agree(self) -> bool:
        keys = set(self.tw_dims) | set(self.tot_dims)
        return all(self.tw_dims.get(k, 0) == self.tot_dims.get(k, 0) for k in keys)

    @property
    def ok(self) -> bool:
        return (self.dims_agree and self.i_chain_map and self.p_chain_map and self.p_after_i
                and self.homotopy_law and self.h_preserves_equalizer)


def check_retraction(V: CosimplicialComplex, p_max: int) -> RetractionReport:
    """Compare H(TW) with H(Tot) and verify P∘I = id, I∘P − id = [d, H] on the slice."""
    if p_max < V.depth + 1:
        raise ValueError("p_max must be at least depth + 1 so Whitney forms fit")
    T = tw(V, p_max)
    totc, tbases = tot(V)
    tw_dims = {N: h.dim for N, h in cohomology(T.complex, representatives=False).items()}
    tot_dims = {N: h.dim for N, h in cohomology(totc, representatives=False).items()}
    failures = []
    i_chain = p_chain = p_i = law = h_eq = True
    for N, keys in tbases.items():
        for key in keys:
            y = {key: Fraction(1)}
            Iy = whitney_map(V, y)
            if equalizer_defect(V, Iy):
                i_chain = False
                failures.append(f"I{key} is not in the equalizer")
            if _sub(tw_differential(V, Iy), whitney_map(V, tot_differential(V, y))):
                i_chain = False
                failures.append(f"I fails to commute with d on {key}")
            if _sub(integration_map(V, Iy), y):
                p_i = False
                failures.append(f"P∘I != id on {key}")
    for N in T.kernel:
        for j in range(len(T.kernel[N])):
            x = T.kernel_element(N, j)
            dx = tw_differential(V, x)
            if _sub(integration_map(V, dx), tot_differential(V, integration_map(V, x))):
                p_chain = False
                failures.append(f"P fails to commute with d in degree {N}")
            Hx = homotopy_map(V, x)
            if equalizer_defect(V, Hx):
                h_eq = False
                failures.append(f"H leaves the equalizer in degree {N}")
            lhs = _sub(whitney_map(V, integration_map(V, x)), x)
            rhs = _add(tw_differential(V, Hx), homotopy_map(V, dx))
            if _sub(lhs, rhs):
                law = False
                failures.append(f"I∘P − id != dH + Hd in degree {N}")
    return RetractionReport(tw_dims, tot_dims, i_chain, p_chain, p_i, law, h_eq, failures[:10])


def tw_stabilization(V: CosimplicialComplex, p_values: Iterable[int]) -> dict[int, dict[int, int]]:
    """H(TW) dims for each form-weight cap, to show independence of p_max."""
    return {p: {N: h.dim for N, h in cohomology(tw(V, p).complex, representatives=False).items()}
            for p in p_values}


# ---------------------------------------------------------------------------
# Čech diagrams


def nerve(charts: int, depth: int) -> list[list[tuple[int, ...]]]:
    """Strictly increasing index tuples, level by level."""
    return [list(combinations(range(charts), n + 1)) for n in range(min(depth, charts - 1) + 1)]


def cech_diagram(charts: int, depth: int, space: Callable[[tuple[int, ...]], SlicedComplex],
                 restriction: Callable[[tuple[int, ...], tuple[int, ...], int], RatMatrix]) -> CosimplicialComplex:
    """Cosimplicial complex of a cover: V^n = ⊕_{|I|=n+1} space(I), cofaces by restriction.

    ``restriction(I_small, I_big, q)`` maps space(I_small)_q → space(I_big)_q.
    """
    simplices = nerve(charts, depth)
    spaces = {I: space(I) for lvl in simplices for I in lvl}
    degs = sorted({q for sp in spaces.values() for q in sp.dims})
    levels, offsets = [], []
    for lvl in simplices:
        off, dims, pos = {}, {}, {}
        for q in degs:
            total = 0
            for I in lvl:
                pos[(I, q)] = total
                total += spaces[I].dim(q)
            dims[q] = total
        diffs = {}
        for q in degs:
            ent = {}
            for I in lvl:
                for (r, c), v in spaces[I].d(q).entries.items():
                    ent[(pos[(I, q + 1)] + r, pos[(I, q)] + c)] = v
            if dims.get(q + 1) is not None:
                diffs[q] = RatMatrix(dims[q + 1], dims[q], ent)
        levels.append(SlicedComplex(dims, diffs))
        offsets.append(pos)
    cofaces = {}
    for n in range(1, len(simplices)):
        for k in range(n + 1):
            per_q = {}
            for q in degs:
                ent = {}
                for I in simplices[n]:
                    small = I[:k] + I[k + 1:]
                    R = restriction(small, I, q)
                    for (r, c), v in R.entries.items():
                        ent[(offsets[n][(I, q)] + r, offsets[n - 1][(small, q)] + c)] = v
                per_q[q] = RatMatrix(levels[n].dim(q), levels[n - 1].dim(q), ent)
            cofaces[(n, k)] = per_q
    return CosimplicialComplex(tuple(levels), cofaces)


def constant_diagram(V: SlicedComplex, charts: int = 2) -> CosimplicialComplex:
    """The Čech diagram of ``charts`` copies of one open set with constant coefficients V.

    Its nerve is a full simplex, hence contractible, and all cofaces are identities
    on the summands.
    """
    return cech_diagram(charts, charts - 1, lambda I: V,
                        lambda small, big, q: RatMatrix.identity(V.dim(q)))


@dataclass(frozen=True)
class LineBundle:
    """O(d) on the two-chart ℙ¹ cover: frame on U1 = scale · z^d · frame on U0.

    In the U0 frame a section z^a lies over U0 iff a ≥ 0 and over U1 iff a ≤ d.
    """

    d: int
    scale: Fraction = Fraction(1)

    def on_chart(self, chart: tuple[int, ...], a: int) -> bool:
        if chart == (0,):
            return a >= 0
        if chart == (1,):
            return a <= self.d
        return True

    def tensor(self, other: "LineBundle") -> "LineBundle":
        return LineBundle(self.d + other.d, self.scale * other.scale)

    def dual(self) -> "LineBundle":
        return LineBundle(-self.d, 1 / self.scale)


def line_bundle_diagram(bundle: LineBundle, weight: int) -> CosimplicialComplex:
    """Weight-``weight`` slice of the Čech diagram of a line bundle (z has weight 1)."""

    def space(I):
        return SlicedComplex({0: 1 if bundle.on_chart(I, weight) else 0}, {})

    def restriction(small, big, q):
        return RatMatrix(space(big).dim(q), space(small).dim(q),
                         {(0, 0): 1} if space(small).dim(q) and space(big).dim(q) else {})

    return cech_diagram(2, 1, space, restriction)


def laurent_window(bundle: LineBundle, margin: int = 2) -> range:
    return range(min(0, bundle.d) - margin, max(0, bundle.d) + margin + 1)


@dataclass
class LineBundleRow:
    weight: int
    tw: dict[int, int]
    tot: dict[int, int]
    retraction_ok: bool


def line_bundle_tw(bundle: LineBundle, p_max: int = 3, jobs: int = 1) -> list[LineBundleRow]:
    ws = list(laurent_window(bundle))
    reports = parallel_map(_lb_row, [(bundle, w, p_max) for w in ws], jobs)
    return reports


def _lb_row(args) -> LineBundleRow:
    bundle, w, p = args
    r = check_retraction(line_bundle_diagram(bundle, w), p)
    return LineBundleRow(w, r.tw_dims, r.tot_dims, r.ok and r.dims_agree)


# ---------------------------------------------------------------------------
# algebra-valued Čech diagrams with inclusion restrictions


@dataclass(frozen=True)
class ChartAlgebra:
    """A sheaf of graded-commutative algebras on a cover, all charts inside one ambient algebra.

    ``sections(I, m)`` says whether monomial m of the ambient algebra is a section over U_I;
    ``truncate`` (optional) discards monomials outside a quotient (e.g. n-degree > m).
    ``differential`` is the internal differential of the ambient algebra (None for 0).
    """

    ambient: Algebra
    charts: int
    sections: Callable[[tuple[int, ...], Monomial], bool]
    slice_monomials: Callable[[int], list[Monomial]]
    truncate: Callable[[Monomial], bool] | None = None
    differential: Derivation | None = None

    def simplices(self) -> list[list[tuple[int, ...]]]:
        return nerve(self.charts, self.charts - 1)

    @property
    def depth(self) -> int:
        return self.charts - 1

    def level_algebra(self, n: int) -> Algebra:
        return with_simplex(self.ambient, n)

    def lift(self, a: GcaElement, n: int) -> GcaElement:
        return substitute(a, self.level_algebra(n), {})

    def clip(self, x: GcaElement) -> GcaElement:
        if self.truncate is None:
            return x
        k = len(self.ambient.base.variables)
        kg = len(self.ambient.generators)
        return x.filter(lambda m: self.truncate((m[0][:k], m[1][:kg])))

    def total_differential(self, n: int) -> Derivation:
        alg = self.level_algebra(n)
        d = de_rham(alg, n)
        if self.differential is not None and not self.differential.is_zero():
            lifted = Derivation(alg, 1, {g: self.lift(v, n) for g, v in self.differential.images.items()},
                                {v: self.lift(e, n) for v, e in self.differential.var_images.items()})
            d = d + lifted
        return d


TWElement = dict  # nerve simplex -> element of ambient ⊗ Ω(Δ^{|I|-1})


def _ambient_part(alg: Algebra, m: Monomial, nv: int, ng: int) -> Monomial:
    return (m[0][:nv], m[1][:ng])


@dataclass
class AlgebraTWSlice:
    """Weight slice of TW of a ChartAlgebra, truncated at polynomial degree p_max in the t's."""

    chart_algebra: ChartAlgebra
    weight: int
    p_max: int
    ambient: dict[int, list[tuple[tuple[int, ...], Monomial]]]
    kernel: dict[int, list[list[Fraction]]]
    free: dict[int, list[int]]

    def dims(self) -> dict[int, int]:
        return {N: len(k) for N, k in self.kernel.items()}

    def element(self, N: int, vec: Sequence[Fraction]) -> TWElement:
        ca = self.chart_algebra
        out: TWElement = {}
        for (I, m), c in zip(self.ambient[N], vec):
            if c:
                alg = ca.level_algebra(len(I) - 1)
                out[I] = out.get(I, alg.zero()) + alg.monomial(m, c)
        return out

    def basis_elements(self, N: int) -> list[TWElement]:
        return [self.element(N, v) for v in self.kernel.get(N, [])]

    def vector(self, x: TWElement, N: int) -> list[Fraction]:
        idx = {k: i for i, k in enumerate(self.ambient.get(N, []))}
        v = [Fraction(0)] * len(idx)
        for I, val in x.items():
            for m, c in val.terms.items():
                key = (I, m)
                if key not in idx:
                    raise ValueError(f"term {key} outside the slice ambient space")
                v[idx[key]] += c
        return v

    def coordinates(self, x: TWElement, N: int) -> list[Fraction]:
        """Coordinates of an equalizer element in the kernel basis (values at free columns)."""
        v = self.vector(x, N)
        return [v[f] for f in self.free.get(N, [])]

    def operator_complex(self, op: Callable[[TWElement], TWElement]) -> SlicedComplex:
        """Matrix of a degree-one operator on the slice, in kernel coordinates."""
        dims = self.dims()
        diffs = {}
        for N in sorted(dims):
            if N + 1 not in dims:
                continue
            ent = {}
            for j, vec in enumerate(self.kernel[N]):
                img = op(self.element(N, vec))
                coords = self.coordinates(img, N + 1)
                full = self.vector(img, N + 1)
                recon = [Fraction(0)] * len(full)
                for c, kv in zip(coords, self.kernel[N + 1]):
                    if c:
                        for i, x in enumerate(kv):
                            if x:
                                recon[i] += c * x
                if recon != full:
                    raise ValueError("operator image is not in the equalizer")
                for r, c in enumerate(coords):
                    if c:
                        ent[(r, j)] = c
            diffs[N] = RatMatrix(dims[N + 1], dims[N], ent)
        return SlicedComplex(dims, diffs)


def algebra_equalizer_defect(ca: ChartAlgebra, x: TWElement) -> dict:
    """Terms of (restriction ⊗ id) x_small − (id ⊗ face) x_big over all faces."""
    out: dict = {}
    for lvl in ca.simplices()[1:]:
        for I in lvl:
            n = len(I) - 1
            for k in range(n + 1):
                small = I[:k] + I[k + 1:]
                tgt = ca.level_algebra(n - 1)
                lhs = x.get(small, tgt.zero())
                rhs = simplex_face(x[I], n, k, tgt) if I in x else tgt.zero()
                diff = ca.clip(lhs - rhs)
                for m, c in diff.terms.items():
                    out[(I, k, m)] = c
    return out


def algebra_tw_slice(ca: ChartAlgebra, weight: int, p_max: int) -> AlgebraTWSlice:
    nv, ng = len(ca.ambient.base.variables), len(ca.ambient.generators)
    amb: dict[int, list] = {}
    mons = ca.slice_monomials(weight)
    for lvl in ca.simplices():
        for I in lvl:
            n = len(I) - 1
            alg = ca.level_algebra(n)
            forms = _poly_capped_forms(n, p_max)
            for a in mons:
                if not ca.sections(I, a):
                    continue
                for f in forms:
                    m = (a[0] + f[0], a[1] + f[1])
                    deg = alg.mono_degree(m)
                    amb.setdefault(deg, []).append((I, m))
    kernels, frees = {}, {}
    for N, keys in amb.items():
        cols = [algebra_equalizer_defect(ca, {I: ca.level_algebra(len(I) - 1).monomial(m)}) for I, m in keys]
        rows = sorted({r for col in cols for r in col}, key=repr)
        ridx = {r: i for i, r in enumerate(rows)}
        E = RatMatrix(len(rows), len(keys), {(ridx[r], j): v for j, col in enumerate(cols) for r, v in col.items()})
        _, ker = rank_kernel(E)
        kernels[N] = ker
        frees[N] = _free_columns(ker)
    return AlgebraTWSlice(ca, weight, p_max, amb, kernels, frees)


def _free_columns(ker: list[list[Fraction]]) -> list[int]:
    """For kernel vectors from rank_kernel: the unique column where each has its unit entry."""
    out = []
    for j, vec in enumerate(ker):
        for i, v in enumerate(vec):
            if v == 1 and all(other[i] == 0 for jj, other in enumerate(ker) if jj != j):
                out.append(i)
                break
        else:
            raise ValueError("kernel basis is not in reduced form")
    return out


def tw_apply(ca: ChartAlgebra, op_per_level: Callable[[int, GcaElement], GcaElement], x: TWElement) -> TWElement:
    out = {}
    for I, v in x.items():
        img = ca.clip(op_per_level(len(I) - 1, v))
        if img:
            out[I] = img
    return out


def tw_d(ca: ChartAlgebra, x: TWElement) -> TWElement:
    return tw_apply(ca, lambda n, v: apply(ca.total_differential(n), v), x)


def tw_product(ca: ChartAlgebra, a: TWElement, b: TWElement) -> TWElement:
    """Componentwise product in ambient ⊗ Ω(Δ^n); stays in the equalizer because restrictions are inclusions."""
    out = {}
    for I in set(a) & set(b):
        v = ca.clip(a[I] * b[I])
        if v:
            out[I] = v
    return out


def tw_unit(ca: ChartAlgebra) -> TWElement:
    return {I: ca.level_algebra(len(I) - 1).one() for lvl in ca.simplices() for I in lvl}


def tw_sub(a: TWElement, b: TWElement) -> TWElement:
    out = dict(a)
    for I, v in b.items():
        out[I] = out[I] - v if I in out else -v
    return {I: v for I, v in out.items() if v}


def tw_add(a: TWElement, b: TWElement) -> TWElement:
    out = dict(a)
    for I, v in b.items():
        out[I] = out[I] + v if I in out else v
    return {I: v for I, v in out.items() if v}


def symmetric_algebra_sheaf(conormal: LineBundle, order: int, normal_weight: int = 0,
                            coordinate: str = "z", normal: str = "n") -> ChartAlgebra:
    """S^{≤order}(N∨) on the two-chart ℙ¹ cover, inside ℚ[z^{±1}][n]/(n^{order+1}).

    z^a n^j is a section over U1 iff a ≤ j·deg(N∨); the torus weight of z is 1 and
    that of n is ``normal_weight``.
    """
    ambient = Algebra(BaseRing((Variable(coordinate, 1, True), Variable(normal, normal_weight))), ())
    zi, ni = 0, 1

    def sections(I, m):
        a, j = m[0][zi], m[0][ni]
        if I == (0,):
            return a >= 0
        if I == (1,):
            return a <= j * conormal.d
        return True

    def slice_monomials(w):
        out = []
        for j in range(order + 1):
            a = w - j * normal_weight
            out.append(((a, j), ()))
        return out

    return ChartAlgebra(ambient, 2, sections, slice_monomials, truncate=lambda m: m[0][ni] <= order)
