from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from derivedint.exactlin import RatMatrix, SlicedComplex, cohomology_dims
from derivedint.thomwhitney import (LineBundle, check_retraction, constant_diagram, de_rham, dupont_homotopy,
                                    integrate, integrate_top, line_bundle_diagram, line_bundle_tw,
                                    simplex_algebra, simplex_face, simplex_inclusion, tw_stabilization,
                                    whitney_form, whitney_projection)
from derivedint.gca import apply


@st.composite
def forms(draw, n, degree=None, max_power=2):
    alg = simplex_algebra(n)
    out = alg.zero()
    for _ in range(draw(st.integers(1, 3))):
        base = tuple(draw(st.integers(0, max_power)) for _ in range(n))
        if degree is None:
            gens = tuple(draw(st.integers(0, 1)) for _ in range(n))
        else:
            chosen = draw(st.sets(st.integers(0, n - 1), min_size=degree, max_size=degree))
            gens = tuple(int(i in chosen) for i in range(n))
        out = out + alg.monomial((base, gens), Fraction(draw(st.integers(-3, 3)), draw(st.integers(1, 2))))
    return out


@given(st.integers(0, 6))
def test_interval_integral_matches_calculus(a):
    alg = simplex_algebra(1)
    assert integrate_top(alg.var("t1", a) * alg.gen("dt1"), 1) == Fraction(1, a + 1)


@given(st.integers(1, 3), st.data())
def test_stokes_on_simplices(n, data):
    x = data.draw(forms(n, n - 1))
    lhs = integrate_top(apply(de_rham(simplex_algebra(n), n), x), n)
    rhs = sum((-1) ** k * integrate_top(simplex_face(x, n, k), n - 1) for k in range(n + 1))
    assert lhs == rhs


@pytest.mark.parametrize("n", [1, 2])
def test_whitney_forms_are_dual_to_faces(n):
    alg = simplex_algebra(n)
    for k in range(n + 1):
        for I in combinations(range(n + 1), k + 1):
            w = whitney_form(alg, n, I)
            for J in combinations(range(n + 1), k + 1):
                face = simplex_inclusion(w, n, J, simplex_algebra(k)) if k < n else w
                val = integrate(face, k)
                assert val.coefficient(val.algebra.unit_monomial()) == (1 if I == J else 0)


@given(st.integers(1, 2), st.data())
def test_dupont_homotopy_law(n, data):
    alg = simplex_algebra(n)
    d = de_rham(alg, n)
    x = data.draw(forms(n))
    s = dupont_homotopy
    assert apply(d, s(x, n)) + s(apply(d, x), n) == x - whitney_projection(x, n)


@given(st.integers(1, 2), st.data())
def test_whitney_projection_is_idempotent(n, data):
    x = data.draw(forms(n))
    p = whitney_projection(x, n)
    assert whitney_projection(p, n) == p


def laurent_count(d):
    """Brute force over exponents: sections over both charts, and Čech classes."""
    h0 = sum(1 for a in range(-10, 11) if 0 <= a <= d)
    h1 = sum(1 for a in range(-10, 11) if d < a < 0)
    return h0, h1


@pytest.mark.parametrize("d", range(-3, 4))
def test_line_bundle_tw_matches_tot_and_laurent_count(d):
    rows = line_bundle_tw(LineBundle(d), 3)
    assert all(r.retraction_ok for r in rows)
    for r in rows:
        assert {k: v for k, v in r.tw.items() if v} == {k: v for k, v in r.tot.items() if v}
    h0 = sum(r.tw.get(0, 0) for r in rows)
    h1 = sum(r.tw.get(1, 0) for r in rows)
    assert (h0, h1) == laurent_count(d) == (max(0, d + 1), max(0, -d - 1))


def test_line_bundle_diagram_outside_the_window_is_acyclic():
    r = check_retraction(line_bundle_diagram(LineBundle(2), 7), 2)
    assert r.ok and not any(r.tw_dims.values())


def toy_complex():
    # dims (1,2,1), d0 injective and d1 = 0: cohomology (0,1,1)
    return SlicedComplex({0: 1, 1: 2, 2: 1}, {0: RatMatrix.from_rows([[1], [0]]), 1: RatMatrix.zero(1, 2)})


@pytest.mark.parametrize("copies", [2, 3])
def test_constant_diagram_recovers_the_coefficients(copies):
    V = toy_complex()
    assert cohomology_dims(V) == {0: 0, 1: 1, 2: 1}
    D = constant_diagram(V, copies)
    assert D.identity_failures() == []
    r = check_retraction(D, D.depth + 1)
    assert r.ok, r.failures
    nonzero = {k: v for k, v in r.tw_dims.items() if v}
    assert nonzero == {k: v for k, v in r.tot_dims.items() if v} == {1: 1, 2: 1}
    stab = tw_stabilization(D, [D.depth + 1, D.depth + 2])
    assert len({tuple(sorted((k, v) for k, v in s.items() if v)) for s in stab.values()}) == 1


def test_retraction_requires_room_for_whitney_forms():
    with pytest.raises(ValueError):
        check_retraction(constant_diagram(toy_complex(), 3), 1)
