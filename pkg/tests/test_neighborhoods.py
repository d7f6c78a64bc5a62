from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from derivedint.gca import BaseRing
from derivedint.neighborhoods import (build_de_rham, build_self_intersection, phi, tor_dims, truncate,
                                      verify_completion, verify_phi_quasi_iso)
from derivedint.resolve import build_koszul
from conftest import koszul

KOSZUL_FIXTURES = ["point-in-plane", "point-in-line", "hypersurface", "non-regular"]


@pytest.mark.parametrize("name", KOSZUL_FIXTURES)
def test_cartan_and_square_identities(name):
    dr = build_de_rham(koszul(name))
    assert dr.identity_failures() == {"cartan": [], "D^2": [], "L_Q^2": [], "d_DR^2": []}


def test_contraction_sign_on_the_worked_example():
    dr = build_de_rham(koszul("point-in-plane"))
    alg = dr.algebra
    plain_x = phi(dr, alg.gen("de1"))
    assert str(plain_x) == "-x"
    assert dr.iota_q(alg.gen("de1")) == -alg.var("x")


@st.composite
def de_rham_elements(draw, dr):
    alg = dr.algebra
    out = alg.zero()
    for _ in range(draw(st.integers(1, 3))):
        base = tuple(draw(st.integers(0, 2)) for _ in range(alg.nvars()))
        gens = tuple(draw(st.integers(0, 1 if g.odd else 2)) for g in alg.generators)
        out = out + alg.monomial((base, gens), Fraction(draw(st.integers(-3, 3))))
    return out


DR = build_de_rham(koszul("point-in-plane"))


@given(st.data())
def test_phi_is_multiplicative_and_kills_the_differential(data):
    a = data.draw(de_rham_elements(DR))
    b = data.draw(de_rham_elements(DR))
    assert phi(DR, a * b) == phi(DR, a) * phi(DR, b)
    assert not phi(DR, DR.D(a))


def standard_count(nvars, k, w):
    """Brute force: monomials of degree w in nvars variables, kept when w <= k."""
    return comb(w + nvars - 1, nvars - 1) if w <= k else 0


@pytest.mark.parametrize("k", range(4))
def test_truncations_of_the_point_in_the_plane(k):
    pr = verify_phi_quasi_iso(truncate(DR, k), 4)
    assert pr.ok, pr.diagnostics()
    assert [r.dims.get(0, 0) for r in pr.rows] == [standard_count(2, k, w) for w in range(5)]
    assert pr.total_h0 == [1, 3, 6, 10][k]


def test_truncation_rejects_negative_order():
    with pytest.raises(ValueError):
        truncate(DR, -1)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_tor_of_a_point_is_an_exterior_algebra(r):
    names = ["x", "y", "w"][:r]
    k = build_koszul(BaseRing.polynomial(*names), names)
    tr = tor_dims(build_self_intersection(k), 3)
    assert tr.tor_dims() == tuple(comb(r, i) for i in range(r + 1))
    assert all(v == 0 for w, dims in tr.per_weight.items() if w > r for v in dims.values())


def test_completion_agrees_from_k_two():
    si = build_self_intersection(koszul("point-in-plane"))
    assert si.swap_is_chain_map()
    cr = verify_completion(si, [1, 2, 3], 4)
    assert cr.agreement(2) and cr.agreement(3)
    assert not cr.agreement(1)
    assert cr.failures(1) and cr.smallest_k == 2
