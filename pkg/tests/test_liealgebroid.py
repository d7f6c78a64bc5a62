from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from derivedint.gca import BaseRing, commutator
from derivedint.liealgebroid import (algebroid_failures, build_tangent, build_uea, ce_consistency, check_uea,
                                     end_complex, jacobi_defect, jet_comparison, tangent_cohomology)
from derivedint.resolve import build_koszul
from conftest import koszul

PLANE = build_tangent(koszul("point-in-plane"))
HYPER = build_tangent(koszul("hypersurface"))


@st.composite
def fields(draw, t, degree):
    """Sums of a·∂_i of the given degree (0 or 1): a carries 1 - degree odd factors."""
    alg = t.algebra
    total = t.coordinate_field(0, alg.zero())
    for _ in range(draw(st.integers(1, 2))):
        odd = [0] * alg.ngens()
        if degree == 0:
            odd[draw(st.integers(0, alg.ngens() - 1))] = 1
        base = tuple(draw(st.integers(0, 2)) for _ in range(alg.nvars()))
        coeff = alg.monomial((base, tuple(odd)), Fraction(draw(st.integers(1, 3))))
        total = total + t.coordinate_field(draw(st.integers(0, t.rank - 1)), coeff)
    return total


@pytest.mark.parametrize("t", [PLANE, HYPER], ids=["point", "hypersurface"])
@given(data=st.data())
def test_bracket_is_a_dg_lie_bracket(t, data):
    degs = [data.draw(st.integers(0, 1)) for _ in range(3)]
    X, Y, Z = (data.draw(fields(t, d)) for d in degs)
    assert jacobi_defect(X, Y, Z).is_zero()
    lhs = t.differential(t.bracket(X, Y))
    rhs = t.bracket(t.differential(X), Y) + t.bracket(X, t.differential(Y)).scaled((-1) ** X.degree)
    assert (lhs - rhs).is_zero()
    assert commutator(t.Q, t.differential(X)).is_zero()


def monomial_quotient_dims(exps, weight):
    count = 0
    for i in range(weight + 1):
        if not any(i >= a and weight - i >= b for a, b in exps):
            count += 1
    return count


@pytest.mark.parametrize("t,exps", [(PLANE, [(1, 0), (0, 1)]), (HYPER, [(1, 1)])], ids=["point", "hypersurface"])
def test_tangent_cohomology_is_the_normal_module(t, exps):
    rep = tangent_cohomology(t, range(-3, 4))
    assert rep.ok and rep.flat_q
    for w, dims in rep.per_weight.items():
        expected = sum(monomial_quotient_dims(exps, w + g.weight) for g in t.algebra.generators
                       if w + g.weight >= 0)
        assert dims.get(1, 0) == expected


@pytest.mark.parametrize("name", ["point-in-plane", "point-in-line", "hypersurface"])
def test_algebroid_axioms_and_ce_consistency(name):
    t = build_tangent(koszul(name))
    assert algebroid_failures(t) == []
    for k in range(3):
        assert ce_consistency(t, k, 3).ok


@pytest.mark.parametrize("order", [0, 1, 2])
def test_enveloping_algebra(order):
    assert check_uea(build_uea(PLANE, order), 3).ok


def test_enveloping_algebra_rejects_high_order():
    with pytest.raises(ValueError):
        build_uea(PLANE, 3)


@pytest.mark.parametrize("name", ["point-in-line", "point-in-plane"])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_jet_comparison_is_an_isomorphism(name, order):
    jr = jet_comparison(koszul(name), order, 3)
    assert jr.isomorphism and jr.ok
    assert all(r.source_dim == r.target_dim == r.rank for r in jr.rows)


@pytest.mark.parametrize("r", [1, 2])
def test_end_complex_of_a_point_is_exterior(r):
    names = ["x", "y"][:r]
    er = end_complex(build_koszul(BaseRing.polynomial(*names), names), 4)
    assert er.ok
    assert er.ext_dims() == tuple(comb(r, i) for i in range(r + 1))


def test_end_complex_of_hypersurface_is_not_stabilized():
    er = end_complex(koszul("hypersurface"), 3)
    assert not er.stabilized
    assert not er.ok
