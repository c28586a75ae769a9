import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkdv.errors import BranchStalled, ConstraintInfeasible
from fkdv.kernel import SymbolSpec, multiplier
from fkdv.operators import GridFunction, Parity, PeriodicGrid
from fkdv.solver import (
    SolverOptions,
    bifurcation_speed,
    continue_branch,
    jacobian_apply,
    refine_solution,
    residual,
    solve_at_lambda,
)

TWO_PI = 2 * math.pi


def const(grid, c):
    return GridFunction(grid, np.full(grid.N, c), Parity.EVEN)


def test_residual_of_constant_states():
    spec, g, mu = SymbolSpec(1.0), PeriodicGrid(TWO_PI, 16), 0.8
    assert residual(spec, const(g, 0.0), mu).sup_norm() == 0.0
    assert residual(spec, const(g, mu - 1.0), mu).sup_norm() < 1e-15
    c = 0.3
    np.testing.assert_allclose(residual(spec, const(g, c), mu).values, c * (c - mu + 1.0), rtol=1e-14)


def test_linearisation_about_zero_has_cosine_eigenfunction():
    spec, P, mu = SymbolSpec(1.5), 9.0, 0.4
    g = PeriodicGrid(P, 32)
    v = GridFunction.from_callable(g, lambda x: np.cos(2 * np.pi * x / P))
    out = jacobian_apply(spec, const(g, 0.0), mu, v)
    np.testing.assert_allclose(out.values, (multiplier(spec, 2 * np.pi / P) - mu) * v.values, atol=1e-14)
    zero = jacobian_apply(spec, const(g, 0.2), mu, const(g, 0.0))
    assert zero.sup_norm() == 0.0


def test_bifurcation_speed_values():
    assert bifurcation_speed(SymbolSpec(1.0), TWO_PI) == pytest.approx(2**-0.5, rel=1e-15)
    assert bifurcation_speed(SymbolSpec(2.0), TWO_PI) == pytest.approx(0.5, rel=1e-15)
    assert bifurcation_speed(SymbolSpec(0.7), 1e8) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        bifurcation_speed(SymbolSpec(1.0), 0.0)


def test_jacobian_against_central_differences():
    # the residual is quadratic, so central differences are exact up to rounding
    spec = SymbolSpec(0.8)
    g = PeriodicGrid(TWO_PI, 64)
    rng = np.random.default_rng(0)
    phi = GridFunction(g, 0.3 * rng.standard_normal(64))
    v = GridFunction(g, rng.standard_normal(64))
    mu = 0.7
    jv = jacobian_apply(spec, phi, mu, v).values
    for h in (1e-3, 1e-4, 1e-5):
        plus = residual(spec, GridFunction(g, phi.values + h * v.values), mu).values
        minus = residual(spec, GridFunction(g, phi.values - h * v.values), mu).values
        assert np.max(np.abs((plus - minus) / (2 * h) - jv)) < 1e-9


@pytest.mark.parametrize("lam", [0.0, -0.1, 1.2])
def test_infeasible_height(lam):
    with pytest.raises(ConstraintInfeasible):
        solve_at_lambda(SymbolSpec(1.0), TWO_PI, lam, N=64)


def test_small_wave_near_bifurcation():
    spec = SymbolSpec(1.0)
    sols = continue_branch(spec, TWO_PI, [0.025, 0.05, 0.1], N=256)
    m1 = 2**-0.5
    mus = [w.mu for w in sols]
    for w in sols:
        assert 0.0 < w.mu <= 1.0
        assert w.crest == pytest.approx(0.5 * w.lam * w.mu, abs=1e-12)
        assert w.amplitude < 0.1
    # the speed leaves m(1) from below, quadratically in the height
    assert mus[0] > mus[1] > mus[2]
    assert abs(mus[0] - m1) < 1e-3
    assert (m1 - mus[2]) / (m1 - mus[1]) == pytest.approx(4.0, rel=0.05)


def test_moderate_wave_s_half_period_ten():
    w = continue_branch(SymbolSpec(0.5), 10.0, [0.5], N=512)[-1]
    assert 0.0 < w.mu <= 1.0
    v = w.phi.values
    assert v.min() >= w.mu - 1.0 - 1e-8
    assert v.max() <= 0.5 * w.lam * w.mu + 1e-12


def test_cold_start_solve_matches_continuation():
    spec = SymbolSpec(2.0)
    cold = solve_at_lambda(spec, TWO_PI, 0.2, N=128)
    warm = continue_branch(spec, TWO_PI, [0.2], N=128)[-1]
    assert cold.mu == pytest.approx(warm.mu, abs=1e-12)


def test_branch_amplitude_increases():
    sols = continue_branch(SymbolSpec(2.0), TWO_PI, [0.2, 0.4, 0.6, 0.8], N=256)
    amps = [w.amplitude for w in sols]
    assert len(sols) == 4 and all(b > a for a, b in zip(amps, amps[1:]))
    assert all(w.branch_point is not None and w.branch_point.amplitude > 0 for w in sols)


def test_empty_and_invalid_targets():
    assert continue_branch(SymbolSpec(1.0), TWO_PI, []) == []
    with pytest.raises(ValueError):
        continue_branch(SymbolSpec(1.0), TWO_PI, [0.5, 0.3])
    with pytest.raises(ConstraintInfeasible):
        continue_branch(SymbolSpec(1.0), TWO_PI, [0.5, 1.5])


def test_stall_is_reported():
    opts = SolverOptions(max_iter=0)
    with pytest.raises(BranchStalled):
        continue_branch(SymbolSpec(1.0), TWO_PI, [0.5], opts, N=64)


def test_warm_start_grid_mismatch():
    w = solve_at_lambda(SymbolSpec(1.0), TWO_PI, 0.1, N=64)
    with pytest.raises(ValueError):
        solve_at_lambda(SymbolSpec(1.0), 7.0, 0.1, initial=w)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_regression_branch_invariants(branch, s):
    for w in branch(s):
        v = w.phi.values
        assert w.converged
        assert w.residual_norm <= 1e-10 * (1 + w.phi.sup_norm())
        assert w.crest == pytest.approx(0.5 * w.lam * w.mu, abs=1e-12)
        assert 0.0 < w.mu <= 1.0
        assert v.min() >= w.mu - 1.0 - 1e-8
        assert v.max() <= 0.5 * w.lam * w.mu + 1e-12
        assert np.diff(v[: w.grid.N // 2 + 1]).min() >= -1e-10 * w.phi.sup_norm()
        # negative mean at subcritical speed
        assert w.mu < 1 - 1e-8 and w.phi.mean() < 0.0
        lhs = (w.mu - 1.0) * w.phi.integral()
        rhs = float(np.dot(v, v)) * w.grid.dx
        assert abs(lhs - rhs) <= 1e-6 * rhs


@pytest.mark.parametrize("s", [1.0, 2.0])
@pytest.mark.parametrize("lam", [0.5, 0.9])
def test_grid_convergence(s, lam):
    spec = SymbolSpec(s)
    coarse = continue_branch(spec, TWO_PI, [lam], N=256)[-1]
    fine = continue_branch(spec, TWO_PI, [lam], N=512)[-1]
    assert abs(coarse.mu - fine.mu) < 1e-8


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_spectral_decay_below_highest_wave(branch, s):
    w = branch(s)[2]  # lambda = 0.75
    c = np.abs(np.fft.rfft(w.phi.values)) / w.grid.N
    assert np.any(c[: w.grid.N // 2] < 1e-12)


def test_refine_preserves_solution():
    spec = SymbolSpec(1.5)
    w = continue_branch(spec, TWO_PI, [0.6], N=128)[-1]
    r = refine_solution(spec, w, 256)
    assert r.grid.N == 256
    assert r.mu == pytest.approx(w.mu, abs=1e-10)
    np.testing.assert_allclose(r.phi.values[::2], w.phi.values, atol=1e-9)


@settings(max_examples=12)
@given(st.floats(0.4, 2.5), st.floats(0.05, 0.7), st.floats(4.0, 12.0))
def test_property_solutions_satisfy_invariants(s, lam, P):
    w = continue_branch(SymbolSpec(s), P, [lam], N=256)[-1]
    v = w.phi.values
    assert 0.0 < w.mu <= 1.0
    assert v.min() >= w.mu - 1.0 - 1e-8
    assert v.max() <= 0.5 * lam * w.mu + 1e-12
    lhs = (w.mu - 1.0) * w.phi.integral()
    rhs = float(np.dot(v, v)) * w.grid.dx
    assert abs(lhs - rhs) <= 1e-6 * rhs
