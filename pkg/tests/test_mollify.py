import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stochfrac.errors import DomainError
from stochfrac.fracops import TimeGrid
from stochfrac.mollify import MollifierParams, bump_normalization, mollifier_value, mollify_series, periodic_extend

G = TimeGrid(1.0, 1000)


def test_normalization_constant():
    # 1 / int_{-1}^{1} exp(-1/(1-t^2)) dt at 20 digits
    assert bump_normalization() == pytest.approx(2.2522836210435810105, rel=1e-12)


@pytest.mark.parametrize("eps", [0.001, 0.05, 0.5])
def test_unit_mass(eps):
    p = MollifierParams(eps)
    mass, _ = integrate.quad(lambda s: mollifier_value(s, p), -eps, eps, epsabs=1e-13, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_shape():
    p = MollifierParams(0.05)
    assert mollifier_value(0.05, p) == 0.0 and mollifier_value(-0.07, p) == 0.0
    assert mollifier_value(0.0, p) > mollifier_value(0.025, p) > 0
    assert mollifier_value(0.01, p) == mollifier_value(-0.01, p)
    with pytest.raises(DomainError):
        MollifierParams(0.0)


def test_periodic_extension():
    series = G.nodes**2 + 1
    ext = periodic_extend(series, G)
    assert ext(-0.1) == pytest.approx(ext(0.1))
    assert ext(1.1) == pytest.approx(ext(0.9))
    assert ext(2.3) == pytest.approx(ext(0.3))
    assert ext(0.3) == pytest.approx(0.09 + 1)


def test_constant_preserved():
    out = mollify_series(np.full(G.N + 1, 3.7), MollifierParams(0.05), G)
    np.testing.assert_allclose(out, 3.7, rtol=1e-14)


def test_linear_interior():
    out = mollify_series(G.nodes, MollifierParams(0.05), G)
    assert out[500] == pytest.approx(0.5, abs=1e-6)


def test_rejects_wide_kernel():
    with pytest.raises(DomainError):
        mollify_series(G.nodes, MollifierParams(1.0), G)


def test_noise_reduction():
    rng = np.random.default_rng(2)
    noisy = 2.0 + rng.normal(0, 0.1, G.N + 1)
    out = mollify_series(noisy, MollifierParams(0.05), G)
    assert np.sqrt(np.mean((noisy - 2) ** 2)) >= 3 * np.sqrt(np.mean((out - 2) ** 2))


def test_total_variation_nonincreasing_in_eps():
    rng = np.random.default_rng(3)
    noisy = np.sin(2 * np.pi * G.nodes) + rng.normal(0, 0.05, G.N + 1)
    tv = [np.abs(np.diff(mollify_series(noisy, MollifierParams(e), G))).sum() for e in (0.001, 0.005, 0.05, 0.5)]
    assert all(a >= b for a, b in zip(tv, tv[1:]))


def test_convergence_as_eps_shrinks():
    phi = np.cos(np.pi * G.nodes)  # smooth with even reflections at 0 and 1
    errs = [np.sqrt(np.mean((mollify_series(phi, MollifierParams(e), G) - phi) ** 2)) for e in (0.5, 0.05, 0.005)]
    assert errs[0] > errs[1] > errs[2]


@settings(max_examples=20, deadline=None)
@given(st.floats(-100, 100), st.floats(0.002, 0.9))
def test_constant_property(c, eps):
    g = TimeGrid(1.0, 100)
    out = mollify_series(np.full(101, c), MollifierParams(eps), g)
    assert np.max(np.abs(out - c)) <= 1e-12 * (1 + abs(c))
