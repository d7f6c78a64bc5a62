from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, strategies as st

from derivedint.gca import Algebra, BaseRing
from derivedint.mcgauge import (DglaOver, NonabelianCocycle, SheafLie, abelian, abelian_orbits, bch,
                                cocycle_to_mc, edge_holonomy, forms_lie, gauge, gauge_laws, heisenberg,
                                holonomy, interpolating_gauge, is_mc, laurent_ring, mc_to_cocycle, round_trip,
                                suspended_heisenberg, upper_triangular)
from derivedint.thomwhitney import LineBundle

QQ = Algebra(BaseRing(()), ())
rational = st.fractions(min_value=-4, max_value=4, max_denominator=3)


@pytest.mark.parametrize("g,cls", [(abelian(2), 1), (heisenberg(), 2), (upper_triangular(3), 2),
                                   (upper_triangular(4), 3), (suspended_heisenberg(), 2)])
def test_structure_invariants_and_class(g, cls):
    assert g.invariant_failures() == []
    assert g.nilpotency_class() == cls


def test_inconsistent_brackets_are_rejected():
    from derivedint.mcgauge import NilpotentDgla
    with pytest.raises(ValueError):
        NilpotentDgla(("x", "y"), (0, 0), {(0, 1): {0: 1}, (1, 0): {0: 1}})
    with pytest.raises(ValueError):
        NilpotentDgla(("x", "y"), (0, 1), {(0, 0): {1: 1}})


# -- BCH against matrix exponentials ---------------------------------------

def mat_mul(A, B):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def mat_add(A, B, c=1):
    return [[a + c * b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_exp(N):
    n = len(N)
    out = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    power = out
    for k in range(1, n):
        power = mat_mul(power, N)
        out = mat_add(out, power, Fraction(1, factorial(k)))
    return out


def mat_log(U):
    n = len(U)
    N = mat_add(U, [[Fraction(int(i == j)) for j in range(n)] for i in range(n)], -1)
    out = [[Fraction(0)] * n for _ in range(n)]
    power = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in range(1, n):
        power = mat_mul(power, N)
        out = mat_add(out, power, Fraction((-1) ** (k + 1), k))
    return out


def to_matrix(n, v):
    idx = [(i, j) for i in range(n) for j in range(i + 1, n)]
    M = [[Fraction(0)] * n for _ in range(n)]
    for k, (i, j) in enumerate(idx):
        M[i][j] = v.get(k, QQ.zero()).coefficient(QQ.unit_monomial())
    return M


@pytest.mark.parametrize("n", [3, 4])
@given(st.data())
def test_bch_matches_matrix_log_of_exponentials(n, data):
    g = upper_triangular(n)
    L = DglaOver(g, QQ)
    a = L.from_scalars({k: data.draw(rational) for k in range(g.dim)})
    b = L.from_scalars({k: data.draw(rational) for k in range(g.dim)})
    expected = mat_log(mat_mul(mat_exp(to_matrix(n, a)), mat_exp(to_matrix(n, b))))
    assert to_matrix(n, bch(L, a, b)) == expected


@given(st.data())
def test_bch_group_laws(data):
    g = upper_triangular(4)
    L = DglaOver(g, QQ)
    a, b, c = (L.from_scalars({k: data.draw(rational) for k in range(g.dim)}) for _ in range(3))
    assert L.is_zero(bch(L, a, L.scale(a, -1)))
    assert L.equal(bch(L, bch(L, a, b), c), bch(L, a, bch(L, b, c)))
    assert L.equal(bch(L, a, {}), a)


@given(rational, rational, rational, rational)
def test_bch_closed_forms(a1, a2, b1, b2):
    A = DglaOver(abelian(2), QQ)
    a, b = A.from_scalars({0: a1, 1: a2}), A.from_scalars({0: b1, 1: b2})
    assert A.equal(bch(A, a, b), A.add(a, b))
    H = DglaOver(heisenberg(), QQ)
    a, b = H.from_scalars({0: a1, 1: a2}), H.from_scalars({0: b1, 1: b2})
    assert H.equal(bch(H, a, b), H.add(H.add(a, b), H.scale(H.bracket(a, b), Fraction(1, 2))))


# -- gauge action and holonomy ---------------------------------------------

def test_gauge_trivial_cases():
    L = forms_lie(abelian(1), 1)
    t, dt = L.ring.var("t1"), L.ring.gen("dt1")
    theta = {0: t * dt * 3}
    a = {0: t * t + 2}
    assert L.equal(gauge(L, {}, theta), theta)
    assert L.equal(gauge(L, a, theta), L.sub(theta, L.d(a)))


@given(rational)
def test_abelian_holonomy_is_the_integral(c):
    L = forms_lie(abelian(1), 1)
    theta = {0: L.ring.gen("dt1") * c}
    hol = holonomy(L, theta, 1)[0]
    assert hol.get(0, QQ.zero()) == QQ.const(c)
    assert holonomy(L, {}, 1) == [{}]


@given(st.lists(rational, min_size=6, max_size=6))
def test_pure_gauge_holonomy_is_the_vertex_increment(cs):
    g = heisenberg()
    L = forms_lie(g, 1)
    L0 = DglaOver(g, QQ)
    t = L.ring.var("t1")
    a = L._clean({i: cs[2 * i] + t * cs[2 * i + 1] for i in range(3)})
    a0 = L0.from_scalars({i: cs[2 * i] for i in range(3)})
    a1 = L0.from_scalars({i: cs[2 * i] + cs[2 * i + 1] for i in range(3)})
    hol = holonomy(L, gauge(L, a, {}), 1)[0]
    assert L0.equal(hol, bch(L0, a0, L0.scale(a1, -1)))


def test_holonomy_rejects_non_mc_input():
    L = forms_lie(heisenberg(), 2)
    t1, t2 = L.ring.var("t1"), L.ring.var("t2")
    theta = {0: t2 * L.ring.gen("dt1")}
    assert not is_mc(L, theta)
    with pytest.raises(ValueError):
        holonomy(L, theta, 2)


@pytest.mark.parametrize("g", [abelian(2), heisenberg(), upper_triangular(4), suspended_heisenberg()],
                         ids=["abelian", "heisenberg", "upper4", "suspended"])
def test_gauge_laws_on_random_instances(g):
    rep = gauge_laws(g, 8, seed=3)
    assert rep.ok
    assert rep.holonomy_checked == all(d == 0 for d in g.degrees)


# -- two-chart sheaves: cocycles versus MC elements -------------------------

def heisenberg_sheaf():
    return SheafLie(heisenberg(), (LineBundle(-2), LineBundle(-2), LineBundle(-4)), laurent_ring())


def test_bundle_compatibility_is_enforced():
    with pytest.raises(ValueError):
        SheafLie(heisenberg(), (LineBundle(-1), LineBundle(-1), LineBundle(-1)), laurent_ring())


@given(st.data())
def test_round_trips_gauge_connect(data):
    S = heisenberg_sheaf()
    L1 = S.lie(1)
    z, t, dt = L1.ring.var("z"), L1.ring.var("t1"), L1.ring.gen("dt1")
    zq = S.ring.var("z")
    exps = st.integers(-4, 2)
    theta = {i: (z ** data.draw(exps) * data.draw(rational) + t * z ** data.draw(exps) * data.draw(rational)) * dt
             for i in range(3)}
    b0 = {i: zq ** data.draw(st.integers(0, 2)) * data.draw(rational) for i in range(3)}
    b1 = {i: zq ** (S.bundles[i].d - data.draw(st.integers(0, 2))) * data.draw(rational) for i in range(3)}
    rep = round_trip(S, [{(0, 1): L1._clean(theta)}], [interpolating_gauge(S, {0: b0, 1: b1})])
    assert rep.ok, rep.failures


def test_trivial_cocycle_gives_zero_mc_element():
    S = heisenberg_sheaf()
    th = cocycle_to_mc(S, NonabelianCocycle({(0, 1): {}}))
    assert S.lie(1).is_zero(th[(0, 1)])
    assert mc_to_cocycle(S, th).T[(0, 1)] == {}


def test_cocycle_to_mc_is_two_chart_only():
    with pytest.raises(ValueError):
        cocycle_to_mc(heisenberg_sheaf(), NonabelianCocycle({(0, 2): {}}))


def brute_force_orbits(d, samples):
    """Abelian Čech classes on O(d): only the exponents d < a < 0 survive."""
    return len({tuple(Fraction(s.get(a, 0)) for a in range(d + 1, 0)) for s in samples})


@pytest.mark.parametrize("d", [-4, -3, -1, 1])
@given(st.data())
def test_abelian_orbit_counts(d, data):
    exps = list(range(min(d, 0) - 1, 2))
    coeff = st.sampled_from([Fraction(0), Fraction(1), Fraction(-1)])
    samples = [{a: data.draw(coeff) for a in exps} for _ in range(data.draw(st.integers(2, 5)))]
    rep = abelian_orbits(LineBundle(d), samples)
    assert rep.ok
    assert rep.cech_h1 == rep.tw_h1 == max(0, -d - 1)
    assert rep.orbits_cech == rep.orbits_tw == brute_force_orbits(d, samples)
