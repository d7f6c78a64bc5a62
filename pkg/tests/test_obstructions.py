import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from derivedint.obstructions import (ConstructionError, FilteredAutomorphism, cech_ext, chart_gauge,
                                     derivation_lie, exp_automorphism, ext_window, gauge_defects,
                                     identity_automorphism, inverse_automorphism, laurent_count,
                                     linearization_obstruction, linfty_from_cocycle, log_cocycle,
                                     neighborhood_h0, neighborhood_ring, obstruction_tower, slice_weights,
                                     tw_class_vanishes, verify_cocycle, verify_three_chart_cocycle)
from derivedint.mcgauge import deform_tw
from derivedint.thomwhitney import LineBundle
from conftest import cover

R3 = neighborhood_ring(3, 1)
Z, N = R3.ambient.var("z"), R3.ambient.var("n")


def test_log_of_a_quadratic_normal_shift():
    phi = FilteredAutomorphism(R3, {"z": Z, "n": N + N ** 2})
    T = log_cocycle(phi)
    assert T.var_images["n"] == N ** 2 - N ** 3
    assert not T.var_images.get("z")


@st.composite
def unipotent(draw):
    """z ↦ z + O(n), n ↦ n + O(n²) with small Laurent coefficients."""
    zimg, nimg = Z, N
    for j in range(1, 4):
        zimg = zimg + Z ** draw(st.integers(-2, 2)) * N ** j * draw(st.integers(-2, 2))
    for j in range(2, 4):
        nimg = nimg + Z ** draw(st.integers(-2, 2)) * N ** j * draw(st.integers(-2, 2))
    return FilteredAutomorphism(R3, {"z": R3.clip(zimg), "n": R3.clip(nimg)})


@given(unipotent(), unipotent())
def test_exp_log_and_composition(phi, psi):
    assert exp_automorphism(R3, log_cocycle(phi)).equals(phi) == []
    inv = inverse_automorphism(phi)
    assert verify_cocycle(phi, inv).ok
    assert phi.compose(inv).equals(identity_automorphism(R3)) == []
    samples = [(Z, N), (Z ** -1 * N, Z ** 2 + N), (N ** 2, Z ** -3)]
    assert phi.compose(psi).multiplicative_defects(samples) == []


def test_non_unipotent_map_is_rejected():
    with pytest.raises(ConstructionError):
        log_cocycle(FilteredAutomorphism(R3, {"z": Z, "n": N * 2}))


def test_corrupted_cocycle_is_located():
    psi = cover("line-in-p2").transition()
    inv = inverse_automorphism(psi)
    bad = FilteredAutomorphism(R3, {"z": inv.images["z"], "n": R3.clip(inv.images["n"] + N ** 2)})
    rep = verify_cocycle(psi, bad)
    assert not rep.ok
    assert rep.failures[0].startswith("Φ10∘Φ01 differs from the identity on")
    assert "at order 2" in rep.failures[0]
    ident = identity_automorphism(R3)
    assert verify_three_chart_cocycle(psi, inv, ident).ok
    assert not verify_three_chart_cocycle(psi, bad, ident).ok


@given(st.integers(-8, 8))
def test_cech_ext_matches_laurent_count(d):
    ext = cech_ext(LineBundle(0), LineBundle(d), ext_window(3))
    assert ext.stabilized
    assert (ext.ext0, ext.ext1) == laurent_count(LineBundle(d))


@given(st.integers(-6, 3), st.dictionaries(st.integers(-7, 4), st.integers(-2, 2), max_size=4))
def test_coboundary_routes_agree_with_brute_force(d, cochain):
    E = LineBundle(d)
    cochain = {a: Fraction(c) for a, c in cochain.items() if c}
    brute = all(not (d < a < 0) for a in cochain)
    assert cech_ext(LineBundle(0), E, ext_window(3)).is_coboundary(cochain) == brute
    assert tw_class_vanishes(E, cochain) == brute


def test_ext_window_refuses_foreign_exponents():
    with pytest.raises(ConstructionError):
        cech_ext(LineBundle(0), LineBundle(-2), range(-3, 4)).is_coboundary({9: Fraction(1)})


def verdicts(tower):
    return [(c.label, c.vanishes) for c in tower.classes]


def test_line_tower(line_tower):
    assert line_tower.ok
    assert line_tower.relations.ok and line_tower.relations.checked
    assert verdicts(line_tower) == [("[a1]", True), ("[a2]", True), ("[a3]", True), ("[l2]", True), ("[l3]", True)]
    a1, a2 = line_tower.classes[:2]
    assert (a1.bundle.d, a1.ext1) == (1, 0)
    assert (a2.bundle.d, a2.ext1) == (0, 0)
    assert all(c.lift_constructed and c.lift_verified for c in line_tower.classes)
    assert not line_tower.stopped


def test_conic_tower(conic_tower):
    a1 = conic_tower.classes[0]
    assert (a1.bundle.d, a1.ext1) == (-2, 1)
    assert a1.routes_agree and a1.cocycle_certified and a1.stabilized
    assert not a1.vanishes and not a1.lift_constructed
    assert conic_tower.stopped == "[a1] does not vanish"
    assert conic_tower.relations.ok


def test_diagonal_tower(diagonal_tower):
    assert verdicts(diagonal_tower) == [("[a1]", True), ("[a2]", True), ("[a3]", True), ("[l2]", False)]
    l2 = diagonal_tower.classes[-1]
    assert (l2.bundle.d, l2.ext1) == (-2, 1)
    assert l2.routes_agree


def test_planted_bracket_obstruction():
    cv = cover("diagonal-p1")
    R = cv.ring
    z, n = R.ambient.var("z"), R.ambient.var("n")
    T = derivation_lie(R).make({"n": n ** 2 * z ** -1 * 7})
    rep = linearization_obstruction(linfty_from_cocycle(cv, T), 2, slice_weights(cv))
    assert rep.representative == "7*z^-1"
    assert rep.routes_agree and not rep.vanishes and not rep.lift_constructed


def random_gauge(cv, chart, rng):
    R = cv.ring
    z, n = R.ambient.var(R.coordinate), R.ambient.var(R.normal)
    images = {}
    for var, first, home in ((R.coordinate, 1, cv.tangent), (R.normal, 2, cv.normal)):
        acc = R.ambient.zero()
        for j in range(first, R.order + 1):
            E = home.tensor(LineBundle(cv.conormal.d * j))
            allowed = [a for a in range(-3, 4) if E.on_chart((chart,), a)]
            for a in rng.sample(allowed, min(2, len(allowed))):
                acc = acc + z ** a * n ** j * rng.randint(-2, 2)
        images[var] = acc
    return derivation_lie(R).make(images)


@pytest.mark.parametrize("name,seed", [("line-in-p2", 0), ("line-in-p2", 1), ("diagonal-p1", 0), ("diagonal-p1", 1)])
def test_first_verdict_is_gauge_invariant(name, seed, line_tower, diagonal_tower):
    cv = cover(name)
    base = line_tower if name == "line-in-p2" else diagonal_tower
    rng = random.Random(seed)
    b0, b1 = random_gauge(cv, 0, rng), random_gauge(cv, 1, rng)
    assert gauge_defects(cv, b0, 0) == gauge_defects(cv, b1, 1) == []
    tower = obstruction_tower(cv, chart_gauge(cv, log_cocycle(cv.transition()), b0, b1))
    assert tower.ok
    assert verdicts(tower)[0] == verdicts(base)[0]


def test_later_verdicts_depend_on_the_lower_lift(diagonal_tower):
    cv = cover("diagonal-p1")
    R = cv.ring
    b = derivation_lie(R).make({"z": R.ambient.var("n")})
    tower = obstruction_tower(cv, chart_gauge(cv, log_cocycle(cv.transition()), b, b))
    assert verdicts(tower)[0] == verdicts(diagonal_tower)[0]
    assert verdicts(tower)[1] == ("[a2]", False)


def test_gauges_must_be_sections():
    cv = cover("diagonal-p1")
    R = cv.ring
    b = derivation_lie(R).make({"z": R.ambient.var("n") ** 2 * -1})
    assert gauge_defects(cv, b, 0) == []
    assert gauge_defects(cv, b, 1)
    with pytest.raises(ConstructionError):
        chart_gauge(cv, log_cocycle(cv.transition()), b, b)


def test_deformed_resolution_matches_glued_algebra():
    cv = cover("neighborhood-order2", order=2)
    rep = neighborhood_h0(cv, range(-3, 4))
    assert rep.ok
    assert any(r.h0 for r in rep.rows)


def test_deformed_resolution_trivial_and_gauged_twists():
    cv = cover("neighborhood-order2", order=2)
    R = cv.ring
    ca = cv.chart_algebra()
    weights = range(-2, 3)
    plain = deform_tw(ca, derivation_lie(R).make({}), weights, 2)
    assert plain.ok
    T = log_cocycle(cv.transition())
    b0 = derivation_lie(R).make({"z": R.ambient.var("n")})
    b1 = derivation_lie(R).make({"n": R.ambient.var("n") ** 2 * R.ambient.var("z") ** -1})
    assert gauge_defects(cv, b0, 0) == gauge_defects(cv, b1, 1) == []
    twisted = deform_tw(ca, T, weights, 2)
    gauged = deform_tw(ca, chart_gauge(cv, T, b0, b1), weights, 2)
    assert twisted.ok and gauged.ok
    assert [r.h0 for r in twisted.rows] == [r.h0 for r in gauged.rows]
    with pytest.raises(ValueError):
        deform_tw(ca, derivation_lie(R).make({"z": R.ambient.var("n") * R.ambient.var("z")}), weights, 2)
