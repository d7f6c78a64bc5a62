"""Acceptance criteria, one test each; the terminal summary prints a PASS/FAIL line per criterion.

Every number asserted here is either a closed form (binomials, Laurent exponent
counts) or an independent brute-force count defined in this file.
"""
import random
import time
from fractions import Fraction
from math import comb

import pytest

from derivedint import mcgauge as mc
from derivedint.config import AcceptanceLimits
from derivedint.exactlin import RatMatrix, SlicedComplex, cohomology_dims
from derivedint.gca import BaseRing
from derivedint.liealgebroid import end_complex, jet_comparison
from derivedint.neighborhoods import (build_de_rham, build_self_intersection, tor_dims, truncate,
                                      verify_completion, verify_phi_quasi_iso)
from derivedint.obstructions import (FilteredAutomorphism, inverse_automorphism, neighborhood_h0,
                                     obstruction_tower, verify_cocycle)
from derivedint.resolve import build_koszul, check_resolution
from derivedint.thomwhitney import (LineBundle, check_retraction, constant_diagram, line_bundle_tw,
                                    tw_stabilization)
from conftest import cover, koszul

LIMITS = AcceptanceLimits()
PLANE = BaseRing.polynomial("x", "y")


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def within(clock, limit):
    assert clock.seconds < limit, f"took {clock.seconds:.1f}s, limit {limit}s"


def monomials_up_to(nvars, k, w):
    """Brute force: monomials of degree w in nvars variables, nonzero modulo the (k+1)-st power."""
    return comb(w + nvars - 1, nvars - 1) if w <= k else 0


def nonzero(dims):
    return {n: v for n, v in dims.items() if v}


@pytest.mark.criterion(1, "Koszul resolution of the origin in the plane, weights 0..6")
def test_koszul_resolution():
    with Clock() as c:
        rep = check_resolution(build_koszul(PLANE, ["x", "y"]), 6)
    assert rep.ok, rep.diagnostics
    assert rep.h0_dims() == (1, 0, 0, 0, 0, 0, 0)
    assert all(v == 0 for r in rep.rows for n, v in r.dims.items() if n < 0)
    within(c, LIMITS.koszul)


@pytest.mark.criterion(2, "truncated de Rham algebras k=0..3 resolve the infinitesimal neighborhoods")
def test_truncations():
    with Clock() as c:
        dr = build_de_rham(koszul("point-in-plane"))
        reports = [verify_phi_quasi_iso(truncate(dr, k), 4) for k in range(4)]
    for k, pr in enumerate(reports):
        assert pr.ok, pr.diagnostics()
        assert [r.dims.get(0, 0) for r in pr.rows] == [monomials_up_to(2, k, w) for w in range(5)]
        assert all(v == 0 for r in pr.rows for n, v in r.dims.items() if n != 0)
    assert [pr.total_h0 for pr in reports] == [1, 3, 6, 10]
    within(c, LIMITS.truncations)


@pytest.mark.criterion(3, "Cartan calculus and square-zero identities on every Koszul fixture")
def test_cartan_identities():
    for name in ["point-in-plane", "point-in-line", "hypersurface", "non-regular"]:
        fails = build_de_rham(koszul(name)).identity_failures()
        assert not any(fails.values()), (name, fails)


@pytest.mark.criterion(4, "derived self-intersection of a point: Tor and completion")
def test_self_intersection():
    with Clock() as c:
        si = build_self_intersection(koszul("point-in-plane"))
        tr = tor_dims(si, 4)
        cr = verify_completion(si, [2, 3], 4)
    assert tr.tor_dims() == (1, 2, 1)
    assert cr.agreement(2) and cr.agreement(3)
    within(c, LIMITS.self_intersection)


@pytest.mark.criterion(5, "jets of the enveloping algebra match the truncations for k <= 2")
def test_jets():
    for name in ["point-in-line", "point-in-plane"]:
        for k in range(3):
            jr = jet_comparison(koszul(name), k, 3)
            assert jr.ok and jr.isomorphism, (name, k)


@pytest.mark.criterion(6, "derived endomorphisms of a point are exterior")
def test_end_complex():
    with Clock() as c:
        dims = []
        for names in (["x"], ["x", "y"]):
            er = end_complex(build_koszul(BaseRing.polynomial(*names), names), 4)
            assert er.ok
            dims.append(er.ext_dims())
    assert dims == [(1, 1), (1, 2, 1)]
    within(c, LIMITS.end_complex)


def laurent_count(d):
    """Brute force over exponents -10..10: h0 from a in [0, d], h1 from d < a < 0."""
    return (sum(1 for a in range(-10, 11) if 0 <= a <= d), sum(1 for a in range(-10, 11) if d < a < 0))


@pytest.mark.criterion(7, "Thom-Whitney totalization agrees with Tot and the Čech count")
def test_thom_whitney():
    with Clock() as c:
        V = SlicedComplex({0: 1, 1: 2, 2: 1}, {0: RatMatrix.from_rows([[1], [0]]), 1: RatMatrix.zero(1, 2)})
        assert nonzero(cohomology_dims(V)) == {1: 1, 2: 1}
        for copies in (2, 3):
            D = constant_diagram(V, copies)
            assert D.identity_failures() == []
            r = check_retraction(D, D.depth + 1)
            assert r.ok and nonzero(r.tw_dims) == nonzero(r.tot_dims) == {1: 1, 2: 1}
            stab = tw_stabilization(D, [D.depth + 1, D.depth + 2])
            assert len({tuple(sorted(nonzero(s).items())) for s in stab.values()}) == 1
        for d in range(-3, 4):
            rows = line_bundle_tw(LineBundle(d), 3)
            assert all(r.retraction_ok and nonzero(r.tw) == nonzero(r.tot) for r in rows)
            h = (sum(r.tw.get(0, 0) for r in rows), sum(r.tw.get(1, 0) for r in rows))
            assert h == laurent_count(d), d
    within(c, LIMITS.tw_tot)


@pytest.mark.criterion(8, "gauge action, Maurer-Cartan and holonomy on nilpotent algebras of class 1..3")
def test_gauge_laws():
    for g, cls in [(mc.abelian(1), 1), (mc.heisenberg(), 2), (mc.upper_triangular(4), 3)]:
        assert g.invariant_failures() == []
        assert g.nilpotency_class() == cls
        rep = mc.gauge_laws(g, 50, seed=cls)
        assert rep.ok and rep.holonomy_checked, rep


def random_round_trip(S, rng, samples, extra=()):
    L1 = S.lie(1)
    z, t, dt = L1.ring.var("z"), L1.ring.var("t1"), L1.ring.gen("dt1")
    zq = S.ring.var("z")
    dim = len(S.bundles)

    def q():
        return Fraction(rng.randint(-5, 5), rng.randint(1, 3))

    thetas = list(extra)
    for _ in range(samples):
        th = {i: (z ** rng.randint(-4, 2) * q() + t * z ** rng.randint(-4, 2) * q()) * dt for i in range(dim)}
        thetas.append({(0, 1): L1._clean(th)})
    gauges = []
    for _ in thetas:
        b0 = {i: zq ** rng.randint(0, 2) * q() for i in range(dim)}
        b1 = {i: zq ** (S.bundles[i].d - rng.randint(0, 2)) * q() for i in range(dim)}
        gauges.append(mc.interpolating_gauge(S, {0: b0, 1: b1}))
    return mc.round_trip(S, thetas, gauges)


def brute_force_orbits(d, samples):
    return len({tuple(s.get(a, Fraction(0)) for a in range(d + 1, 0)) for s in samples})


@pytest.mark.criterion(9, "non-abelian cocycles and MC elements round-trip on two-chart sheaves")
def test_round_trips():
    rng = random.Random(7)
    ring = mc.laurent_ring()
    z = ring.var("z")
    ab = mc.SheafLie(mc.abelian(1), (LineBundle(-3),), ring)
    planted = mc.cocycle_to_mc(ab, mc.NonabelianCocycle({(0, 1): {0: z ** -1 + z ** -2 * 3}}))
    rt = random_round_trip(ab, rng, 4, [planted])
    assert rt.ok, rt.failures
    heis = mc.SheafLie(mc.heisenberg(), (LineBundle(-2), LineBundle(-2), LineBundle(-4)), ring)
    rt = random_round_trip(heis, rng, 4)
    assert rt.ok, rt.failures
    for d in (-4, -3, -1, 1):
        samples = [{a: Fraction(rng.randint(-1, 1)) for a in range(min(d, 0) - 1, 2)} for _ in range(6)]
        rep = mc.abelian_orbits(LineBundle(d), samples)
        assert rep.ok
        assert rep.orbits_cech == rep.orbits_tw == brute_force_orbits(d, samples)


@pytest.mark.criterion(10, "deformed resolution of the order-2 neighborhood computes the glued algebra")
def test_deformed_resolution():
    rep = neighborhood_h0(cover("neighborhood-order2", order=2), range(-3, 4))
    assert rep.ok
    assert any(r.h0 for r in rep.rows)


@pytest.mark.criterion(11, "obstruction towers: line in the plane splits, conic obstructed at first order")
def test_obstruction_towers():
    with Clock() as c:
        line = obstruction_tower(cover("line-in-p2"))
        conic = obstruction_tower(cover("conic-in-p2"))
    assert line.cocycle.ok and line.relations.ok and line.relations.checked
    a1, a2 = line.classes[:2]
    assert (a1.label, a1.bundle.d, a1.ext1) == ("[a1]", 1, 0)
    assert (a2.label, a2.bundle.d, a2.ext1) == ("[a2]", 0, 0)
    for cl in (a1, a2):
        assert cl.vanishes and cl.routes_agree and cl.lift_constructed and cl.lift_verified
    first = conic.classes[0]
    assert (first.label, first.bundle.d, first.ext1) == ("[a1]", -2, 1)
    assert first.cocycle_certified and first.routes_agree and first.stabilized
    assert not first.vanishes
    assert conic.stopped == "[a1] does not vanish"
    within(c, LIMITS.obstructions)


@pytest.mark.criterion(12, "failures are located: corrupted cocycle and non-regular section")
def test_located_failures():
    psi = cover("line-in-p2").transition()
    inv = inverse_automorphism(psi)
    ring = psi.ring
    n = ring.ambient.var("n")
    bad = FilteredAutomorphism(ring, {"z": inv.images["z"], "n": ring.clip(inv.images["n"] + n ** 2)})
    rep = verify_cocycle(psi, bad)
    assert not rep.ok
    assert "differs from the identity on" in rep.failures[0] and "at order 2" in rep.failures[0]
    res = check_resolution(koszul("non-regular"), 4)
    assert not res.ok
    assert any("H^-1 has dim 1 (representative" in d for d in res.diagnostics), res.diagnostics
