from fractions import Fraction

import pytest
import sympy
from hypothesis import given, strategies as st

from derivedint.exactlin import (ComplexError, RatMatrix, SlicedComplex, cohomology, cohomology_dims,
                                 induced_rank, rank, rank_kernel, solve, span_rank)

small = st.integers(-3, 3)


@st.composite
def matrices(draw, max_dim=5):
    r = draw(st.integers(0, max_dim))
    c = draw(st.integers(0, max_dim))
    rows = [[Fraction(draw(small), draw(st.integers(1, 3))) for _ in range(c)] for _ in range(r)]
    return RatMatrix.from_rows(rows, c)


def sympy_rank(m: RatMatrix) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    return sympy.Matrix(m.rows, m.cols, lambda i, j: sympy.Rational(str(m.to_dense()[i][j]))).rank()


@given(matrices())
def test_rank_matches_independent_oracle(m):
    assert rank(m) == sympy_rank(m)


@given(matrices())
def test_kernel_is_annihilated_and_complementary(m):
    r, ker = rank_kernel(m)
    assert r + len(ker) == m.cols
    for v in ker:
        assert not any(m.matvec(v))
    assert span_rank(ker, m.cols) == len(ker)


@given(matrices(), st.data())
def test_solve_recovers_consistent_systems(m, data):
    x = [Fraction(data.draw(small)) for _ in range(m.cols)]
    b = m.matvec(x)
    y = solve(m, b)
    assert y is not None and m.matvec(y) == b


def test_solve_rejects_inconsistent_system():
    m = RatMatrix.from_rows([[1, 1], [2, 2]])
    assert solve(m, [1, 3]) is None


def test_dense_and_sparse_paths_agree():
    dense = RatMatrix.from_rows([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    sparse = RatMatrix.from_rows([[1, 0, 0, 0, 0, 0, 0, 0, 0, 0], [0] * 10, [0, 0, 0, 0, 0, 0, 0, 0, 0, 5]])
    assert rank(dense) == 2
    assert rank(sparse) == 2


@given(matrices(max_dim=4), st.data())
def test_cohomology_of_two_step_complex(m, data):
    # 0 -> Q^c --m--> Q^r -> 0 : h^0 = nullity, h^1 = corank
    c = SlicedComplex({0: m.cols, 1: m.rows}, {0: m})
    h = cohomology_dims(c)
    r = sympy_rank(m)
    assert h.get(0, 0) == m.cols - r
    assert h.get(1, 0) == m.rows - r
    assert sum((-1) ** n * v for n, v in h.items()) == c.euler_characteristic()


def test_cohomology_representatives_and_square_check():
    # circle: two vertices, two edges
    d0 = RatMatrix.from_rows([[-1, 1], [-1, 1]])
    c = SlicedComplex({0: 2, 1: 2}, {0: d0})
    h = cohomology(c)
    assert (h[0].dim, h[1].dim) == (1, 1)
    assert not any(d0.matvec(h[0].representatives[0]))
    bad = SlicedComplex({0: 1, 1: 1, 2: 1}, {0: RatMatrix.identity(1), 1: RatMatrix.identity(1)})
    with pytest.raises(ComplexError):
        cohomology(bad)


def test_induced_rank_of_identity_and_zero():
    c = SlicedComplex({0: 2, 1: 1}, {0: RatMatrix.from_rows([[1, -1]])})
    ident = {0: RatMatrix.identity(2), 1: RatMatrix.identity(1)}
    zero = {0: RatMatrix.zero(2, 2), 1: RatMatrix.zero(1, 1)}
    assert induced_rank(ident, c, c, 0) == 1
    assert induced_rank(zero, c, c, 0) == 0


def test_matrix_shape_is_checked():
    with pytest.raises(ValueError):
        SlicedComplex({0: 2, 1: 2}, {0: RatMatrix.zero(3, 2)})
    with pytest.raises(IndexError):
        RatMatrix(1, 1, {(1, 0): 1})
