import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fkdv.kernel import SymbolSpec, multiplier
from fkdv.operators import (
    GridFunction,
    Parity,
    PeriodicGrid,
    apply_lambda,
    apply_lambda_values,
    convolve_direct,
    discrete_kernel,
    even_lambda_matrix,
    even_to_full,
    full_to_half,
    trig_interpolate,
)


def test_grid_layout():
    g = PeriodicGrid(2 * math.pi, 8)
    assert g.nodes[0] == pytest.approx(-math.pi)
    assert g.nodes[4] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(g.half_nodes, g.dx * np.arange(5))


@pytest.mark.parametrize("P,N", [(0.0, 8), (-1.0, 8), (1.0, 7), (1.0, 0)])
def test_grid_validation(P, N):
    with pytest.raises(ValueError):
        PeriodicGrid(P, N)


def test_even_parity_is_enforced():
    g = PeriodicGrid(4.0, 8)
    f = GridFunction(g, np.arange(8.0), Parity.EVEN)
    mirror = f.values[(-np.arange(8)) % 8]
    np.testing.assert_array_equal(f.values, mirror)


def test_half_full_round_trip():
    half = np.arange(9.0)
    full = even_to_full(half, 16)
    np.testing.assert_array_equal(full_to_half(full), half)
    assert full[8] == 0.0 and full[0] == 8.0 and full[7] == full[9]


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_cosines_are_eigenfunctions(s, k):
    P = 10.0
    spec = SymbolSpec(s)
    f = GridFunction.from_callable(PeriodicGrid(P, 32), lambda x: np.cos(2 * math.pi * k * x / P))
    out = apply_lambda(spec, f)
    np.testing.assert_allclose(out.values, multiplier(spec, 2 * math.pi * k / P) * f.values, atol=1e-14)


@given(
    st.floats(0.2, 3.0),
    hnp.arrays(np.float64, 16, elements=st.floats(-1, 1)),
    hnp.arrays(np.float64, 16, elements=st.floats(-1, 1)),
    st.floats(-2, 2),
)
def test_property_linear(s, a, b, c):
    spec = SymbolSpec(s)
    g = PeriodicGrid(7.0, 16)
    lhs = apply_lambda_values(spec, g, a + c * b)
    rhs = apply_lambda_values(spec, g, a) + c * apply_lambda_values(spec, g, b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


@given(st.floats(0.2, 3.0), hnp.arrays(np.float64, 16, elements=st.floats(-1, 1)))
def test_property_mean_and_evenness_preserved(s, a):
    spec = SymbolSpec(s)
    f = GridFunction(PeriodicGrid(5.0, 16), a, Parity.EVEN)
    out = apply_lambda(spec, f)
    assert out.parity is Parity.EVEN
    assert out.mean() == pytest.approx(f.mean(), abs=1e-13)
    np.testing.assert_allclose(out.values, out.values[(-np.arange(16)) % 16], atol=1e-14)


@given(st.floats(0.2, 3.0), hnp.arrays(np.float64, 16, elements=st.floats(-1, 1)))
def test_property_contraction_in_sup_of_coefficients(s, a):
    # 0 < m <= 1: the l2 norm never grows
    spec = SymbolSpec(s)
    out = apply_lambda_values(spec, PeriodicGrid(5.0, 16), a)
    assert np.linalg.norm(out) <= np.linalg.norm(a) * (1 + 1e-12) + 1e-15


def test_even_matrix_matches_operator():
    spec = SymbolSpec(0.7)
    g = PeriodicGrid(6.0, 32)
    rng = np.random.default_rng(3)
    half = rng.standard_normal(17)
    full = even_to_full(half, 32)
    direct = full_to_half(apply_lambda_values(spec, g, full))
    np.testing.assert_allclose(even_lambda_matrix(spec, g) @ half, direct, atol=1e-14)


def test_discrete_kernel_sums_to_one():
    spec = SymbolSpec(1.3)
    assert discrete_kernel(spec, PeriodicGrid(9.0, 64)).sum() == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_direct_convolution_matches_spectral(s):
    spec = SymbolSpec(s)
    g = PeriodicGrid(2 * math.pi, 16)
    f = GridFunction(g, np.random.default_rng(11).standard_normal(16), Parity.EVEN)
    diff = np.max(np.abs(apply_lambda(spec, f).values - convolve_direct(spec, f).values))
    assert diff < 1e-9


def test_direct_convolution_refuses_large_grids():
    with pytest.raises(ValueError):
        convolve_direct(SymbolSpec(1.0), GridFunction(PeriodicGrid(1.0, 1024), np.zeros(1024)))


def test_trig_interpolate_reproduces_band_limited_data():
    P = 7.0
    g = PeriodicGrid(P, 16)
    fn = lambda x: 1 + np.cos(2 * np.pi * x / P) - 0.2 * np.sin(6 * np.pi * x / P)
    f = GridFunction.from_callable(g, fn)
    x = np.linspace(-4.0, 4.0, 13)
    np.testing.assert_allclose(trig_interpolate(f, x), fn(x), atol=1e-13)
    np.testing.assert_allclose(trig_interpolate(f, g.nodes), f.values, atol=1e-13)


def test_integral_and_shift_invariance():
    g = PeriodicGrid(3.0, 12)
    f = GridFunction.from_callable(g, lambda x: 2 + np.cos(2 * np.pi * x / 3))
    assert f.integral() == pytest.approx(6.0, rel=1e-14)
    shifted = GridFunction(g, np.roll(f.values, 5))
    assert shifted.integral() == pytest.approx(f.integral(), rel=1e-14)
