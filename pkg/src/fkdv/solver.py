"""Periodic traveling waves of -mu phi + phi^2 + Lambda^{-s} phi = 0.

Waves are parameterised by the relative wave height lambda through the
crest constraint phi(0) = lambda * mu / 2.  The unknowns are the even
samples of phi on [0, P/2] together with mu; the resulting bordered system
is solved by damped Newton with a dense LU factorisation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .errors import BranchStalled, ConstraintInfeasible, NewtonDiverged
from .kernel import SymbolSpec, multiplier
from .operators import (
    GridFunction,
    Parity,
    PeriodicGrid,
    apply_lambda_values,
    even_lambda_matrix,
    even_to_full,
    full_to_half,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "WaveSolution",
    "BranchPoint",
    "residual",
    "jacobian_apply",
    "bifurcation_speed",
    "solve_at_lambda",
    "continue_branch",
    "refine_solution",
    "solve_highest_wave",
]

MIN_LAMBDA_STEP = 1e-4


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-12
    constraint_tol: float = 1e-12
    max_iter: int = 40
    min_damping: float = 2.0**-10
    N: int = 1024


@dataclass
class BranchPoint:
    lam: float
    mu: float
    amplitude: float
    from_lambda: float


@dataclass
class WaveSolution:
    phi: GridFunction
    mu: float
    lam: float
    P: float
    s: float
    residual_norm: float
    newton_iterations: int
    converged: bool
    rcond: float = math.nan
    branch_point: BranchPoint | None = None

    @property
    def grid(self) -> PeriodicGrid:
        return self.phi.grid

    @property
    def crest(self) -> float:
        return self.phi.at_origin()

    @property
    def trough(self) -> float:
        return self.phi.at_edge()

    @property
    def amplitude(self) -> float:
        return self.crest - self.trough


def residual(spec: SymbolSpec, phi: GridFunction, mu: float) -> GridFunction:
    v = phi.values
    r = -mu * v + v * v + apply_lambda_values(spec, phi.grid, v)
    return GridFunction(phi.grid, r, phi.parity)


def jacobian_apply(spec: SymbolSpec, phi: GridFunction, mu: float, v: GridFunction) -> GridFunction:
    out = (2.0 * phi.values - mu) * v.values + apply_lambda_values(spec, v.grid, v.values)
    return GridFunction(v.grid, out, v.parity)


def bifurcation_speed(spec: SymbolSpec, P: float) -> float:
    """Speed at which the first cosine mode becomes a kernel of the linearisation."""
    if not P > 0:
        raise ValueError("period P must be positive")
    return multiplier(spec, 2.0 * math.pi / P)


# --------------------------------------------------------------------------
# Newton on the even subspace


def _system(spec, grid, lam, half, mu):
    full = even_to_full(half, grid.N)
    r = -mu * full + full * full + apply_lambda_values(spec, grid, full)
    return full_to_half(r), half[0] - 0.5 * lam * mu


def _merit(res, con, half):
    return max(float(np.max(np.abs(res))) / (1.0 + float(np.max(np.abs(half)))), abs(con))


def _newton(spec, grid, lam, half, mu, opts: SolverOptions):
    Lmat = even_lambda_matrix(spec, grid)
    n = half.size
    res, con = _system(spec, grid, lam, half, mu)
    merit = _merit(res, con, half)
    rcond = math.nan
    for it in range(opts.max_iter + 1):
        scale = 1.0 + float(np.max(np.abs(half)))
        if np.max(np.abs(res)) <= opts.newton_tol * scale and abs(con) <= opts.constraint_tol:
            return half, mu, it, float(np.max(np.abs(res))), rcond
        if it == opts.max_iter:
            break
        J = np.empty((n + 1, n + 1))
        J[:n, :n] = Lmat
        J[np.arange(n), np.arange(n)] += 2.0 * half - mu
        J[:n, n] = -half
        J[n, :] = 0.0
        J[n, 0] = 1.0
        J[n, n] = -0.5 * lam
        lu, piv = linalg.lu_factor(J, check_finite=False)
        anorm = np.linalg.norm(J, 1)
        rcond = float(linalg.lapack.dgecon(lu, anorm, norm="1")[0])
        step = linalg.lu_solve((lu, piv), -np.append(res, con), check_finite=False)

        t = 1.0
        while True:
            trial_half = half + t * step[:n]
            trial_mu = mu + t * step[n]
            tres, tcon = _system(spec, grid, lam, trial_half, trial_mu)
            tmerit = _merit(tres, tcon, trial_half)
            if np.isfinite(tmerit) and tmerit < merit:
                break
            t *= 0.5
            if t < opts.min_damping:
                # stagnation at round-off is not divergence
                if merit <= 10.0 * opts.newton_tol:
                    return half, mu, it, float(np.max(np.abs(res))), rcond
                raise NewtonDiverged(
                    f"no decrease of the residual (merit {merit:.3e}) at lambda={lam} after damping"
                )
        half, mu, res, con, merit = trial_half, trial_mu, tres, tcon, tmerit
    raise NewtonDiverged(f"Newton did not converge in {opts.max_iter} iterations (merit {merit:.3e})")


def _cold_start(spec, grid, lam):
    mu0 = bifurcation_speed(spec, grid.P)
    x = grid.half_nodes
    return 0.5 * lam * mu0 * np.cos(2.0 * math.pi * x / grid.P), mu0


def _check_invariants(spec, sol: WaveSolution, tol: float = 1e-8) -> str | None:
    v = sol.phi.values
    M = sol.grid.N // 2
    if not (0.0 < sol.mu <= 1.0 + tol):
        return f"speed {sol.mu} outside (0, 1]"
    if np.min(v) < sol.mu - 1.0 - tol:
        return "profile dips below mu - 1"
    rising = np.diff(v[: M + 1])
    if np.min(rising) < -1e-10 * max(1.0, sol.phi.sup_norm()):
        return "profile not monotone on (-P/2, 0)"
    return None


def solve_at_lambda(
    spec: SymbolSpec,
    P: float,
    lam: float,
    initial: WaveSolution | None = None,
    options: SolverOptions | None = None,
    N: int | None = None,
) -> WaveSolution:
    """Solve for the even P-periodic wave with relative height ``lam``.

    ``initial`` supplies a warm start on the same grid; otherwise the first
    cosine mode at the bifurcation speed is used, scaled so the crest
    constraint already holds.
    """
    opts = options or SolverOptions()
    if not (0.0 < lam <= 1.0):
        raise ConstraintInfeasible(f"relative wave height must lie in (0, 1], got {lam}")
    if initial is not None:
        grid = initial.grid
        if not math.isclose(grid.P, P, rel_tol=1e-14) or (N is not None and N != grid.N):
            raise ValueError("initial guess lives on a different grid")
        half, mu = full_to_half(initial.phi.values).copy(), initial.mu
    else:
        grid = PeriodicGrid(P, N or opts.N)
        half, mu = _cold_start(spec, grid, lam)

    half, mu, its, res_norm, rcond = _newton(spec, grid, lam, half, mu, opts)
    phi = GridFunction(grid, even_to_full(half, grid.N), Parity.EVEN)
    sol = WaveSolution(
        phi=phi, mu=float(mu), lam=float(lam), P=float(P), s=spec.s,
        residual_norm=res_norm, newton_iterations=its, converged=True, rcond=rcond,
    )
    problem = _check_invariants(spec, sol)
    if problem is not None:
        raise NewtonDiverged(f"Newton converged off the wave branch at lambda={lam}: {problem}")
    return sol


def _predict(history: list[WaveSolution], lam: float) -> WaveSolution | None:
    if not history:
        return None
    last = history[-1]
    if len(history) < 2:
        return last
    prev = history[-2]
    dl = last.lam - prev.lam
    if dl <= 0:
        return last
    w = (lam - last.lam) / dl
    values = last.phi.values + w * (last.phi.values - prev.phi.values)
    return replace(
        last,
        phi=GridFunction(last.grid, values, Parity.EVEN),
        mu=last.mu + w * (last.mu - prev.mu),
        lam=lam,
    )


def continue_branch(
    spec: SymbolSpec,
    P: float,
    lambda_targets,
    options: SolverOptions | None = None,
    N: int | None = None,
    start: WaveSolution | None = None,
    max_step: float = 0.1,
) -> list[WaveSolution]:
    """Follow the branch from the zero state through increasing ``lambda_targets``.

    Intermediate heights are inserted (step halving) whenever Newton fails;
    the step grows again after successes.  Only the targets are returned.
    """
    opts = options or SolverOptions()
    targets = [float(t) for t in lambda_targets]
    if not targets:
        return []
    if any(not (0.0 < t <= 1.0) for t in targets):
        raise ConstraintInfeasible("lambda targets must lie in (0, 1]")
    if any(b <= a for a, b in zip(targets[:-1], targets[1:])):
        raise ValueError("lambda targets must be strictly increasing")

    history: list[WaveSolution] = [start] if start is not None else []
    lam_cur = start.lam if start is not None else 0.0
    grid_N = start.grid.N if start is not None else (N or opts.N)
    step = min(max_step, targets[0] - lam_cur)
    out = []
    for target in targets:
        while lam_cur < target:
            trial = min(lam_cur + step, target)
            guess = _predict(history, trial)
            try:
                sol = solve_at_lambda(spec, P, trial, guess, opts, N=None if guess else grid_N)
            except NewtonDiverged as exc:
                step *= 0.5
                log.debug("step rejected at lambda=%.6g: %s", trial, exc)
                if step < MIN_LAMBDA_STEP:
                    raise BranchStalled(
                        f"continuation stalled at lambda={lam_cur:.6g} (step < {MIN_LAMBDA_STEP})"
                    ) from exc
                continue
            sol.branch_point = BranchPoint(
                lam=trial, mu=sol.mu, amplitude=sol.amplitude, from_lambda=lam_cur
            )
            history = (history + [sol])[-2:]
            lam_cur = trial
            step = min(max_step, 1.5 * step)
        out.append(history[-1])
    return out


def refine_solution(
    spec: SymbolSpec, sol: WaveSolution, N: int, options: SolverOptions | None = None
) -> WaveSolution:
    """Re-solve ``sol`` on an N-point grid, starting from its trigonometric interpolant."""
    old = sol.grid
    coeffs = np.fft.rfft(sol.phi.values)
    new = np.zeros(N // 2 + 1, dtype=complex)
    m = min(coeffs.size, new.size) - 1
    new[:m] = coeffs[:m]
    # shift from the old node origin (-P/2) to the new one is identical; only rescale
    values = np.fft.irfft(new, n=N) * (N / old.N)
    guess = replace(sol, phi=GridFunction(PeriodicGrid(old.P, N), values, Parity.EVEN))
    return solve_at_lambda(spec, sol.P, sol.lam, guess, options)


def solve_highest_wave(
    spec: SymbolSpec,
    P: float,
    lam: float = 1.0 - 1e-3,
    N: int = 4096,
    coarse_N: int = 1024,
    coarse_lambda: float = 0.9,
    options: SolverOptions | None = None,
) -> WaveSolution:
    """Near-highest wave: coarse continuation, refinement, then short steps to ``lam``.

    The crest steepens as lam -> 1, so the last stretch uses steps of at
    most 0.02 on the fine grid.
    """
    if not coarse_lambda < lam:
        raise ValueError("coarse_lambda must lie below the target height")
    coarse = continue_branch(spec, P, [coarse_lambda], options, N=min(coarse_N, N))[-1]
    fine = refine_solution(spec, coarse, N, options) if N != coarse.grid.N else coarse
    return continue_branch(spec, P, [lam], options, start=fine, max_step=0.02)[-1]
