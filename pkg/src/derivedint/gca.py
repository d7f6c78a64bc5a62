"""Free graded-commutative algebras over (Laurent) polynomial rings.

An element is a finite map from monomials to rationals.  A monomial is a pair
``(base_exponents, generator_exponents)``; generators are multiplied in their
declared order, so the Koszul sign of a product comes from reordering the odd
generators.  Odd generators square to zero.

Derivations are given by their values on generators (and optionally on base
variables) and extended with the graded Leibniz rule.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as cartesian
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .exactlin import RatMatrix, SlicedComplex

Monomial = tuple[tuple[int, ...], tuple[int, ...]]


class AlgebraMismatch(ValueError):
    pass


class SliceError(ValueError):
    """A requested weight slice would be infinite."""


class MissingImage(KeyError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, column: int, line: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.column = column
        self.line = line


@dataclass(frozen=True)
class Variable:
    name: str
    weight: int = 1
    invertible: bool = False


@dataclass(frozen=True)
class BaseRing:
    variables: tuple[Variable, ...] = ()

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")

    @classmethod
    def polynomial(cls, *names: str, weight: int = 1) -> "BaseRing":
        return cls(tuple(Variable(n, weight) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class Generator:
    name: str
    degree: int
    weight: int = 1

    @property
    def odd(self) -> bool:
        return self.degree % 2 == 1


@dataclass(frozen=True)
class Algebra:
    base: BaseRing
    generators: tuple[Generator, ...] = ()

    def __post_init__(self):
        names = list(self.base.names) + [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate names in algebra: {names}")

    @property
    def gen_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.generators)

    def gen_index(self, name: str) -> int:
        return self.gen_names.index(name)

    def nvars(self) -> int:
        return len(self.base.variables)

    def ngens(self) -> int:
        return len(self.generators)

    # -- constructors -----------------------------------------------------
    def zero(self) -> "GcaElement":
        return GcaElement(self, {})

    def one(self) -> "GcaElement":
        return self.const(1)

    def const(self, c) -> "GcaElement":
        return GcaElement(self, {self.unit_monomial(): Fraction(c)})

    def unit_monomial(self) -> Monomial:
        return ((0,) * self.nvars(), (0,) * self.ngens())

    def var(self, name: str, power: int = 1) -> "GcaElement":
        i = self.base.index(name)
        v = self.base.variables[i]
        if power < 0 and not v.invertible:
            raise ValueError(f"{name} is not invertible")
        exps = [0] * self.nvars()
        exps[i] = power
        return GcaElement(self, {(tuple(exps), (0,) * self.ngens()): Fraction(1)})

    def gen(self, name: str) -> "GcaElement":
        i = self.gen_index(name)
        exps = [0] * self.ngens()
        exps[i] = 1
        return GcaElement(self, {((0,) * self.nvars(), tuple(exps)): Fraction(1)})

    def monomial(self, m: Monomial, c=1) -> "GcaElement":
        return GcaElement(self, {m: Fraction(c)})

    def element(self, text: str) -> "GcaElement":
        return parse_element(self, text)

    # -- gradings -------------------------------------------------------------
    def mono_degree(self, m: Monomial) -> int:
        return sum(e * g.degree for e, g in zip(m[1], self.generators))

    def mono_weight(self, m: Monomial) -> int:
        return (sum(e * v.weight for e, v in zip(m[0], self.base.variables))
                + sum(e * g.weight for e, g in zip(m[1], self.generators)))

    def mono_parity(self, m: Monomial) -> int:
        return sum(e for e, g in zip(m[1], self.generators) if g.odd) % 2

    def mono_product(self, a: Monomial, b: Monomial) -> tuple[int, Monomial | None]:
        return _mono_product(self._odd_mask(), a, b)

    def _odd_mask(self) -> tuple[bool, ...]:
        return tuple(g.odd for g in self.generators)

    # -- extension ------------------------------------------------------------
    def extend(self, generators: Sequence[Generator]) -> "Algebra":
        return Algebra(self.base, self.generators + tuple(generators))

    def with_base(self, base: BaseRing) -> "Algebra":
        return Algebra(base, self.generators)


@lru_cache(maxsize=1 << 18)
def _mono_product(odd: tuple[bool, ...], a: Monomial, b: Monomial) -> tuple[int, Monomial | None]:
    ga, gb = a[1], b[1]
    sign = 0
    odd_b_before = 0
    # count pairs (i in a, j in b) with i > j, both odd
    for i in range(len(ga)):
        if not odd[i]:
            continue
        if ga[i] and gb[i]:
            return 0, None
        if ga[i]:
            sign += odd_b_before
        if gb[i]:
            odd_b_before += 1
    base = tuple(x + y for x, y in zip(a[0], b[0]))
    gens = tuple(x + y for x, y in zip(ga, gb))
    return (-1 if sign % 2 else 1), (base, gens)


def _term_key(m: Monomial):
    base, gens = m
    return (sum(gens), tuple(-g for g in gens), sum(base), tuple(-b for b in base))


class GcaElement:
    """Element of a free graded-commutative algebra."""

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: Algebra, terms: Mapping[Monomial, Fraction]):
        self.algebra = algebra
        self.terms = {m: Fraction(c) for m, c in terms.items() if c}

    # -- basic protocol -----------------------------------------------------------
    def __repr__(self):
        return f"GcaElement({format_element(self)!r})"

    def __str__(self):
        return format_element(self)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.algebra.const(other)
        if not isinstance(other, GcaElement):
            return NotImplemented
        return self.algebra == other.algebra and self.terms == other.terms

    def __hash__(self):
        return hash((self.algebra, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def _check(self, other: "GcaElement"):
        if self.algebra != other.algebra:
            raise AlgebraMismatch("elements live in different algebras")

    def _coerce(self, other) -> "GcaElement":
        if isinstance(other, GcaElement):
            self._check(other)
            return other
        return self.algebra.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, Fraction(0)) + c
        return GcaElement(self.algebra, acc)

    __radd__ = __add__

    def __neg__(self):
        return GcaElement(self.algebra, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            return GcaElement(self.algebra, {m: c * v for m, v in self.terms.items()})
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def __pow__(self, n: int):
        """Non-negative powers of anything; negative powers of invertible monomials."""
        base = self
        if n < 0:
            base, n = _invert_monomial(self), -n
        out = self.algebra.one()
        for _ in range(n):
            out = out * base
        return out

    # -- gradings ---------------------------------------------------------------------
    def degrees(self) -> set[int]:
        return {self.algebra.mono_degree(m) for m in self.terms}

    def weights(self) -> set[int]:
        return {self.algebra.mono_weight(m) for m in self.terms}

    @property
    def degree(self) -> int | None:
        ds = self.degrees()
        return ds.pop() if len(ds) == 1 else (0 if not ds else None)

    @property
    def weight(self) -> int | None:
        ws = self.weights()
        return ws.pop() if len(ws) == 1 else (0 if not ws else None)

    def coefficient(self, m: Monomial) -> Fraction:
        return self.terms.get(m, Fraction(0))

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: _term_key(t[0]))

    def filter(self, keep: Callable[[Monomial], bool]) -> "GcaElement":
        return GcaElement(self.algebra, {m: c for m, c in self.terms.items() if keep(m)})

    def is_scalar(self) -> bool:
        return all(m == self.algebra.unit_monomial() for m in self.terms)


def multiply(a: GcaElement, b: GcaElement) -> GcaElement:
    a._check(b)
    alg = a.algebra
    odd = alg._odd_mask()
    acc: dict[Monomial, Fraction] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            s, m = _mono_product(odd, ma, mb)
            if m is None:
                continue
            acc[m] = acc.get(m, Fraction(0)) + s * ca * cb
    return GcaElement(alg, acc)


# ---------------------------------------------------------------------------
# derivations


@dataclass(frozen=True)
class Derivation:
    """Degree-``degree`` derivation; unlisted generators and variables map to zero
    only when ``strict`` is False."""

    algebra: Algebra
    degree: int
    images: Mapping[str, GcaElement]
    var_images: Mapping[str, GcaElement] = field(default_factory=dict)
    strict: bool = False

    def __hash__(self):
        return id(self)

    def image_of_generator(self, i: int) -> GcaElement:
        name = self.algebra.generators[i].name
        if name in self.images:
            return self.images[name]
        if self.strict:
            raise MissingImage(f"derivation has no image for generator {name}")
        return self.algebra.zero()

    def __call__(self, a: GcaElement) -> GcaElement:
        return apply(self, a)

    def __add__(self, other: "Derivation") -> "Derivation":
        return _combine(self, other, 1)

    def __sub__(self, other: "Derivation") -> "Derivation":
        return _combine(self, other, -1)

    def scaled(self, c) -> "Derivation":
        c = Fraction(c)
        return Derivation(self.algebra, self.degree,
                          {k: v * c for k, v in self.images.items()},
                          {k: v * c for k, v in self.var_images.items()}, self.strict)

    def is_zero(self) -> bool:
        return not any(self.images.values()) and not any(self.var_images.values())

    def on_generators(self) -> dict[str, GcaElement]:
        return {g.name: self.image_of_generator(i) for i, g in enumerate(self.algebra.generators)}


def _combine(d1: Derivation, d2: Derivation, sign: int) -> Derivation:
    if d1.algebra != d2.algebra:
        raise AlgebraMismatch("derivations on different algebras")
    if d1.degree != d2.degree and not (d1.is_zero() or d2.is_zero()):
        raise ValueError("cannot add derivations of different degrees")
    deg = d1.degree if not d1.is_zero() else d2.degree
    alg = d1.algebra
    images = {g.name: d1.image_of_generator(i) + d2.image_of_generator(i) * sign
              for i, g in enumerate(alg.generators)}
    var_images = {}
    for n in set(d1.var_images) | set(d2.var_images):
        var_images[n] = d1.var_images.get(n, alg.zero()) + d2.var_images.get(n, alg.zero()) * sign
    return Derivation(alg, deg, images, var_images)


def apply(D: Derivation, a: GcaElement) -> GcaElement:
    """Evaluate D on a, extending by the graded Leibniz rule."""
    if a.algebra != D.algebra:
        raise AlgebraMismatch("derivation and element in different algebras")
    alg = a.algebra
    acc = alg.zero()
    for m, c in a.terms.items():
        acc = acc + _apply_monomial(D, m) * c
    return acc


def _apply_monomial(D: Derivation, m: Monomial) -> GcaElement:
    alg = D.algebra
    base, gens = m
    nv, ng = alg.nvars(), alg.ngens()
    zero_g = (0,) * ng
    zero_b = (0,) * nv
    total = alg.zero()
    gen_part = alg.monomial((zero_b, gens))
    # base variables have degree 0, so no signs appear here
    if D.var_images:
        for i, e in enumerate(base):
            if not e:
                continue
            img = D.var_images.get(alg.base.variables[i].name)
            if not img:
                continue
            rest = list(base)
            rest[i] -= 1
            total = total + alg.monomial((tuple(rest), zero_g), e) * img * gen_part
    base_part = alg.monomial((base, zero_g))
    parity_before = 0
    for i, e in enumerate(gens):
        if not e:
            continue
        g = alg.generators[i]
        img = D.image_of_generator(i)
        if img:
            left = list(gens)
            left[i:] = [0] * (ng - i)
            right = [0] * ng
            right[i + 1:] = gens[i + 1:]
            lower = [0] * ng
            lower[i] = e - 1
            sign = -1 if (D.degree * parity_before) % 2 else 1
            piece = (alg.monomial((zero_b, tuple(left)))
                     * alg.monomial((zero_b, tuple(lower)), e)
                     * img
                     * alg.monomial((zero_b, tuple(right))))
            total = total + base_part * piece * sign
        parity_before += e * g.degree
    return total


def commutator(D1: Derivation, D2: Derivation) -> Derivation:
    """Graded commutator D1∘D2 − (−1)^{|D1||D2|} D2∘D1."""
    if D1.algebra != D2.algebra:
        raise AlgebraMismatch("derivations on different algebras")
    alg = D1.algebra
    sign = -1 if (D1.degree * D2.degree) % 2 else 1
    images = {}
    for i, g in enumerate(alg.generators):
        images[g.name] = apply(D1, D2.image_of_generator(i)) - apply(D2, D1.image_of_generator(i)) * sign
    var_images = {}
    for v in alg.base.variables:
        a = D2.var_images.get(v.name)
        b = D1.var_images.get(v.name)
        val = alg.zero()
        if a:
            val = val + apply(D1, a)
        if b:
            val = val - apply(D2, b) * sign
        if val:
            var_images[v.name] = val
    return Derivation(alg, D1.degree + D2.degree, images, var_images)


def square_vanishes_on_generators(D: Derivation) -> list[str]:
    """Names of generators g with D(D(g)) != 0; empty list means D² = 0."""
    alg = D.algebra
    bad = [g.name for i, g in enumerate(alg.generators) if apply(D, D.image_of_generator(i))]
    bad += [n for n, img in D.var_images.items() if apply(D, img)]
    return bad


def derivations_agree(D1: Derivation, D2: Derivation) -> list[str]:
    """Generators (and variables) on which D1 and D2 differ."""
    alg = D1.algebra
    bad = [g.name for i, g in enumerate(alg.generators)
           if D1.image_of_generator(i) != D2.image_of_generator(i)]
    for v in alg.base.variables:
        a = D1.var_images.get(v.name, alg.zero())
        b = D2.var_images.get(v.name, alg.zero())
        if a != b:
            bad.append(v.name)
    return bad


# ---------------------------------------------------------------------------
# algebra morphisms


def substitute(a: GcaElement, target: Algebra, gen_images: Mapping[str, GcaElement],
               var_images: Mapping[str, GcaElement] | None = None) -> GcaElement:
    """Apply the algebra morphism determined by images of generators/variables.

    Unlisted variables map to the same-named variable of ``target``; negative
    powers require the image to be a single monomial over an invertible variable.
    """
    src = a.algebra
    var_images = dict(var_images or {})
    vimgs = []
    for v in src.base.variables:
        if v.name in var_images:
            vimgs.append(var_images[v.name])
        else:
            vimgs.append(target.var(v.name))
    gimgs = []
    for g in src.generators:
        if g.name in gen_images:
            gimgs.append(gen_images[g.name])
        else:
            gimgs.append(target.gen(g.name))
    out = target.zero()
    for (base, gens), c in a.terms.items():
        term = target.const(c)
        for e, img in zip(base, vimgs):
            if e >= 0:
                term = term * img ** e
            else:
                term = term * _invert_monomial(img) ** (-e)
        for e, img in zip(gens, gimgs):
            if e:
                term = term * img ** e
        out = out + term
    return out


def _invert_monomial(x: GcaElement) -> GcaElement:
    if len(x.terms) != 1:
        raise ValueError(f"cannot invert non-monomial {x}")
    (m, c), = x.terms.items()
    if any(m[1]):
        raise ValueError("cannot invert a generator monomial")
    alg = x.algebra
    for e, v in zip(m[0], alg.base.variables):
        if e and not v.invertible:
            raise ValueError(f"variable {v.name} is not invertible")
    return GcaElement(alg, {(tuple(-e for e in m[0]), m[1]): 1 / c})


# ---------------------------------------------------------------------------
# slicing


def enumerate_monomials(alg: Algebra, weight: int, degree: int | None = None,
                        window: int | None = None,
                        keep: Callable[[Monomial], bool] | None = None) -> list[Monomial]:
    """All monomials of the given weight (and degree), in deterministic order.

    Invertible variables need a finite ``window`` bounding their exponents.
    """
    for v in alg.base.variables:
        if v.invertible and window is None:
            raise SliceError(f"Laurent variable {v.name} makes the slice infinite; give a window")
        if not v.invertible and v.weight <= 0:
            raise SliceError(f"variable {v.name} has weight {v.weight}; slice would be infinite")
    for g in alg.generators:
        if not g.odd and g.weight <= 0:
            raise SliceError(f"even generator {g.name} has weight {g.weight}; slice would be infinite")
    odd_idx = [i for i, g in enumerate(alg.generators) if g.odd]
    even_idx = [i for i, g in enumerate(alg.generators) if not g.odd]
    out: list[Monomial] = []
    ng = alg.ngens()
    for odd_choice in cartesian((0, 1), repeat=len(odd_idx)):
        gens = [0] * ng
        w_odd = 0
        for i, e in zip(odd_idx, odd_choice):
            gens[i] = e
            w_odd += e * alg.generators[i].weight
        rem = weight - w_odd
        for even_exps in _bounded_exponents([alg.generators[i].weight for i in even_idx], rem, exact=False):
            g2 = list(gens)
            w_even = 0
            for i, e in zip(even_idx, even_exps):
                g2[i] = e
                w_even += e * alg.generators[i].weight
            for base in _base_exponents(alg.base, rem - w_even, window):
                m = (base, tuple(g2))
                if degree is not None and alg.mono_degree(m) != degree:
                    continue
                if keep is not None and not keep(m):
                    continue
                out.append(m)
    out.sort(key=_term_key)
    return out


def _bounded_exponents(weights: Sequence[int], budget: int, exact: bool) -> Iterator[tuple[int, ...]]:
    if not weights:
        if not exact or budget == 0:
            yield ()
        return
    w0, rest = weights[0], weights[1:]
    e = 0
    while e * w0 <= budget if w0 > 0 else e == 0:
        for tail in _bounded_exponents(rest, budget - e * w0, exact):
            yield (e,) + tail
        e += 1
        if w0 <= 0:
            break


def _base_exponents(base: BaseRing, weight: int, window: int | None) -> Iterator[tuple[int, ...]]:
    vs = base.variables
    ordinary = [i for i, v in enumerate(vs) if not v.invertible]
    laurent = [i for i, v in enumerate(vs) if v.invertible]
    ranges = [range(-window, window + 1) for _ in laurent] if laurent else []
    for lexps in cartesian(*ranges):
        used = sum(e * vs[i].weight for i, e in zip(laurent, lexps))
        for oexps in _bounded_exponents([vs[i].weight for i in ordinary], weight - used, exact=True):
            exps = [0] * len(vs)
            for i, e in zip(laurent, lexps):
                exps[i] = e
            for i, e in zip(ordinary, oexps):
                exps[i] = e
            yield tuple(exps)


def slice_basis(alg: Algebra, degrees: Iterable[int], weight: int, window: int | None = None,
                keep: Callable[[Monomial], bool] | None = None) -> dict[int, list[Monomial]]:
    mons = enumerate_monomials(alg, weight, None, window, keep)
    wanted = set(degrees)
    out: dict[int, list[Monomial]] = {n: [] for n in sorted(wanted)}
    for m in mons:
        d = alg.mono_degree(m)
        if d in wanted:
            out[d].append(m)
    return out


def operator_matrix(op: Callable[[GcaElement], GcaElement], alg: Algebra,
                    source: Sequence[Monomial], target: Sequence[Monomial],
                    strict: bool = True,
                    keep: Callable[[Monomial], bool] | None = None) -> RatMatrix:
    """Matrix of a linear operator between two monomial bases.

    Terms rejected by ``keep`` are discarded (quotient); any other term outside
    ``target`` raises when ``strict``.
    """
    index = {m: i for i, m in enumerate(target)}
    ent = {}
    for j, m in enumerate(source):
        img = op(alg.monomial(m))
        for t, c in img.terms.items():
            if t in index:
                ent[(index[t], j)] = c
            elif keep is not None and not keep(t):
                continue
            elif strict:
                raise ValueError(f"operator image term {t} outside target slice")
    return RatMatrix(len(target), len(source), ent)


def slice_complex(D: Derivation | Callable[[GcaElement], GcaElement], alg: Algebra, weight: int,
                  degrees: Iterable[int], window: int | None = None,
                  keep: Callable[[Monomial], bool] | None = None) -> SlicedComplex:
    """The weight-``weight`` slice of (alg, D), optionally modulo a monomial ideal.

    ``keep`` selects the surviving monomials of a quotient by a D-stable
    monomial ideal.
    """
    degs = sorted(set(degrees))
    basis = slice_basis(alg, degs, weight, window, keep)
    op = D if callable(D) and not isinstance(D, Derivation) else (lambda a: apply(D, a))
    diffs = {}
    for n in degs:
        if n + 1 in basis:
            diffs[n] = operator_matrix(op, alg, basis[n], basis[n + 1], keep=keep)
    return SlicedComplex({n: len(b) for n, b in basis.items()}, diffs,
                         {n: [format_monomial(alg, m) for m in b] for n, b in basis.items()})


def vector_to_element(alg: Algebra, basis: Sequence[Monomial], v: Sequence) -> GcaElement:
    return GcaElement(alg, {m: c for m, c in zip(basis, v) if c})


def element_to_vector(a: GcaElement, basis: Sequence[Monomial]) -> list[Fraction]:
    index = {m: i for i, m in enumerate(basis)}
    out = [Fraction(0)] * len(basis)
    for m, c in a.terms.items():
        if m not in index:
            raise ValueError(f"term {m} outside basis")
        out[index[m]] = c
    return out


# ---------------------------------------------------------------------------
# text format


def format_monomial(alg: Algebra, m: Monomial) -> str:
    parts = []
    for e, v in zip(m[0], alg.base.variables):
        if e == 1:
            parts.append(v.name)
        elif e:
            parts.append(f"{v.name}^{e}")
    for e, g in zip(m[1], alg.generators):
        if e == 1:
            parts.append(g.name)
        elif e:
            parts.append(f"{g.name}^{e}")
    return "*".join(parts) if parts else "1"


def format_element(a: GcaElement) -> str:
    if not a.terms:
        return "0"
    out = []
    for i, (m, c) in enumerate(a.sorted_terms()):
        mono = format_monomial(a.algebra, m)
        neg = c < 0
        mag = -c if neg else c
        if mono == "1":
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9']*)|(?P<op>[-+*^()]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", col)
        kind = mt.lastgroup
        start = mt.start(kind) + 1
        toks.append((kind, mt.group(kind), start))
        pos = mt.end()
    return toks


def parse_element(alg: Algebra, text: str) -> GcaElement:
    """Parse a sum of signed terms such as ``3/2 * x^2*e1*e2 - y*e1``."""
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty expression", 1)
    i = 0
    total = alg.zero()
    names_var = set(alg.base.names)
    names_gen = set(alg.gen_names)
    first = True
    while i < len(toks):
        sign = 1
        if toks[i][0] == "op" and toks[i][1] in "+-":
            sign = -1 if toks[i][1] == "-" else 1
            i += 1
        elif not first:
            raise ParseError(f"expected + or - but found {toks[i][1]!r}", toks[i][2])
        first = False
        if i >= len(toks):
            raise ParseError("dangling sign at end of expression", len(text) + 1)
        term = alg.const(sign)
        expect_factor = True
        while i < len(toks):
            kind, val, col = toks[i]
            if expect_factor:
                if kind == "num":
                    term = term * Fraction(val)
                    i += 1
                elif kind == "name":
                    i += 1
                    power = 1
                    if i < len(toks) and toks[i][1] == "^":
                        i += 1
                        power, i = _parse_power(toks, i, text)
                    if val in names_var:
                        term = term * alg.var(val, power) if power >= 0 else term * _checked_inverse(alg, val, power, col)
                    elif val in names_gen:
                        if power < 0:
                            raise ParseError(f"generator {val} cannot be inverted", col)
                        term = term * alg.gen(val) ** power
                    else:
                        raise ParseError(f"unknown symbol {val!r}", col)
                else:
                    raise ParseError(f"expected a number or symbol, found {val!r}", col)
                expect_factor = False
            else:
                if kind == "op" and val == "*":
                    expect_factor = True
                    i += 1
                else:
                    break
        if expect_factor:
            raise ParseError("expression ends after '*'", len(text) + 1)
        total = total + term
    return total


def _checked_inverse(alg: Algebra, name: str, power: int, col: int) -> GcaElement:
    try:
        return alg.var(name, power)
    except ValueError as exc:
        raise ParseError(str(exc), col) from None


def _parse_power(toks, i, text) -> tuple[int, int]:
    paren = False
    if i < len(toks) and toks[i][1] == "(":
        paren = True
        i += 1
    neg = False
    if i < len(toks) and toks[i][1] == "-":
        neg = True
        i += 1
    if i >= len(toks) or toks[i][0] != "num" or "/" in toks[i][1]:
        col = toks[i][2] if i < len(toks) else len(text) + 1
        raise ParseError("exponent must be an integer", col)
    p = int(toks[i][1])
    i += 1
    if paren:
        if i >= len(toks) or toks[i][1] != ")":
            col = toks[i][2] if i < len(toks) else len(text) + 1
            raise ParseError("missing ')'", col)
        i += 1
    return (-p if neg else p), i
