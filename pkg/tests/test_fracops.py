import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stochfrac.errors import DomainError
from stochfrac.fracops import TimeGrid, frac_integral_matrix, frac_integral_series, l1_weights


def test_grid_basics():
    g = TimeGrid(1.0, 1000)
    assert len(g) == 1001
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert g.nodes[500] == 0.5 and g.nodes[300] == 0.3
    assert np.all(np.diff(g.nodes) > 0)
    assert g.dt * g.N == pytest.approx(g.T, rel=1e-15)


@pytest.mark.parametrize("T,N", [(0.0, 10), (-1.0, 10), (1.0, 1), (1.0, 2.5)])
def test_grid_rejects(T, N):
    with pytest.raises(DomainError):
        TimeGrid(T, N)


def test_l1_first_weight():
    g = TimeGrid(1.0, 1000)
    w = l1_weights(0.8, g)
    # 10^2.4 / Gamma(1.2) from 20-digit arithmetic
    assert w.b(1, 0) == pytest.approx(273.57568554821617745, rel=1e-13)
    assert w.leading == w.b(1, 0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 0.3])
def test_l1_rejects_order(alpha):
    with pytest.raises(DomainError):
        l1_weights(alpha, TimeGrid(1.0, 10))


def test_l1_weight_invariants():
    g = TimeGrid(1.0, 200)
    w = l1_weights(0.7, g)
    for n in (1, 5, 200):
        row = w.row(n)
        assert np.all(row > 0)
        assert np.all(np.diff(row) > 0)
        assert row[-1] == pytest.approx(w.leading)
        # telescoping sum
        assert row.sum() == pytest.approx(w.scale * n**0.3, rel=1e-12)
    with pytest.raises(IndexError):
        w.b(3, 3)


def test_integral_of_constant():
    g = TimeGrid(1.0, 1000)
    out = frac_integral_series(0.5, np.ones(1001), g)
    assert out[0] == 0.0
    assert out[-1] == pytest.approx(1 / math.gamma(1.5), abs=1e-12)


def test_linear_input_exact():
    g = TimeGrid(1.0, 1000)
    out = frac_integral_series(0.8, g.nodes, g)
    exact = g.nodes**1.8 / math.gamma(2.8)
    assert np.max(np.abs(out - exact)) <= 1e-14


def test_quadratic_second_order():
    errs = []
    for N in (250, 500, 1000):
        g = TimeGrid(1.0, N)
        errs.append(abs(frac_integral_series(0.8, g.nodes**2, g)[-1] - 2 / math.gamma(3.8)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) <= 0.3)


def test_semigroup_on_monomials():
    g = TimeGrid(1.0, 1000)
    u = g.nodes**2
    lhs = frac_integral_series(0.3, frac_integral_series(0.5, u, g), g)
    rhs = frac_integral_series(0.8, u, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-5


def test_batch_and_errors():
    g = TimeGrid(1.0, 50)
    paths = np.random.default_rng(0).normal(size=(3, 51))
    batch = frac_integral_series(0.4, paths, g)
    for i in range(3):
        np.testing.assert_allclose(batch[i], frac_integral_series(0.4, paths[i], g), rtol=0, atol=1e-15)
    with pytest.raises(DomainError):
        frac_integral_series(0.4, np.ones(50), g)
    with pytest.raises(DomainError):
        frac_integral_matrix(1.0, g)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 41, elements=st.floats(-10, 10)), arrays(np.float64, 41, elements=st.floats(-10, 10)),
       st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(u, w, a, b):
    g = TimeGrid(2.0, 40)
    lhs = frac_integral_series(0.6, a * u + b * w, g)
    rhs = a * frac_integral_series(0.6, u, g) + b * frac_integral_series(0.6, w, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(u)) + np.max(np.abs(w))) * 10


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 31, elements=st.floats(0, 5)), st.floats(0.05, 0.95))
def test_positivity(u, a):
    g = TimeGrid(1.0, 30)
    assert np.all(frac_integral_series(a, u, g) >= 0)
