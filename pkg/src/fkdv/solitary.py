"""Solitary waves as large-period limits of the periodic branch.

The period is escalated geometrically at fixed relative height until the
profiles agree near the crest.  The limit has a negative tail mu - 1, and
the Galilean shift Phi = phi + 1 - mu, mu_new = 2 - mu turns it into a
wave decaying to zero with supercritical speed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import (
    InvalidSpeed,
    NewtonDiverged,
    NoConvergenceInP,
    NonConvergedQuadrature,
    TailNotSettled,
)
from .kernel import SymbolSpec, kernel_values, multiplier
from .operators import GridFunction, Parity, PeriodicGrid, trig_interpolate
from .solver import SolverOptions, WaveSolution, continue_branch, residual, solve_at_lambda

log = logging.getLogger(__name__)

__all__ = [
    "SolitaryWave",
    "Escalation",
    "default_schedule",
    "escalate_period",
    "galilean_transform",
    "construct_solitary",
    "compute_decay_rate",
    "compute_Hmu_kernel",
]

DEFAULT_P0 = 2.0 * math.pi
DEFAULT_CAP = 256.0 * math.pi
DEFAULT_WINDOW = 10.0
DEFAULT_LIMIT_TOL = 1e-8
DEFAULT_N_CAP = 4096
TAIL_REL_TOL = 1e-6


@dataclass
class SolitaryWave:
    Phi: GridFunction
    mu_lambda: float
    lam: float
    tail_level: float
    P_final: float
    s: float
    residual_norm: float
    source_residual_norm: float
    escalation_history: list[tuple[float, float]] = field(default_factory=list)

    @property
    def grid(self) -> PeriodicGrid:
        return self.Phi.grid

    @property
    def x(self) -> np.ndarray:
        return self.Phi.x

    @property
    def crest(self) -> float:
        return self.Phi.at_origin()

    @property
    def height_bound(self) -> float:
        """Upper bound mu - 1 + lam (1 - mu/2) on the transformed profile."""
        mu = self.mu_lambda
        return mu - 1.0 + self.lam * (1.0 - 0.5 * mu)


@dataclass
class Escalation:
    """Solutions at each period tried, plus (P, window difference) records.

    The first record has difference ``nan``: there is nothing to compare.
    Iterating over an Escalation yields the wave solutions.
    """

    solutions: list[WaveSolution]
    history: list[tuple[float, float]]
    converged: bool
    window: float

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]

    @property
    def final(self) -> WaveSolution:
        return self.solutions[-1]


def default_schedule(P0: float = DEFAULT_P0, cap: float = DEFAULT_CAP) -> list[float]:
    if not (P0 > 0 and cap >= P0):
        raise ValueError("need 0 < P0 <= cap")
    out = [float(P0)]
    while out[-1] * 2.0 <= cap * (1.0 + 1e-12):
        out.append(out[-1] * 2.0)
    return out


def _node_indices(grid: PeriodicGrid, x: np.ndarray) -> np.ndarray | None:
    """Indices of ``x`` among the grid nodes, or None if any point is off-grid."""
    j = (x - grid.nodes[0]) / grid.dx
    jr = np.rint(j)
    if np.any(np.abs(j - jr) > 1e-9):
        return None
    return jr.astype(int) % grid.N


def _sample(sol: WaveSolution, x: np.ndarray) -> np.ndarray:
    idx = _node_indices(sol.grid, x)
    if idx is not None:
        return sol.phi.values[idx]
    return trig_interpolate(sol.phi, x)


def window_difference(a: WaveSolution, b: WaveSolution, window: float) -> float:
    """Sup-norm difference on |x| < window, sampled on the coarser node set."""
    coarse = a if a.grid.dx >= b.grid.dx else b
    half = 0.5 * min(a.P, b.P)
    x = coarse.grid.nodes
    x = x[np.abs(x) < min(window, half)]
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(_sample(a, x) - _sample(b, x))))


def _extend(sol: WaveSolution, grid: PeriodicGrid) -> WaveSolution:
    """Warm start on a longer period: old profile inside, its trough outside."""
    x = grid.nodes
    values = np.full(grid.N, sol.trough)
    inside = np.abs(x) <= 0.5 * sol.P
    values[inside] = _sample(sol, x[inside])
    return replace(sol, phi=GridFunction(grid, values, Parity.EVEN), P=grid.P)


def _solve_period(spec, lam, grid, prev, opts):
    if prev is not None:
        try:
            return solve_at_lambda(spec, grid.P, lam, _extend(prev, grid), opts)
        except NewtonDiverged as exc:
            log.info("warm start failed at P=%.6g (%s); continuing from zero", grid.P, exc)
    return continue_branch(spec, grid.P, [lam], opts, N=grid.N)[-1]


def escalate_period(
    spec: SymbolSpec,
    lam: float,
    P_schedule=None,
    window: float = DEFAULT_WINDOW,
    limit_tol: float = DEFAULT_LIMIT_TOL,
    options: SolverOptions | None = None,
    N0: int = 1024,
    N_cap: int = DEFAULT_N_CAP,
) -> Escalation:
    """Solve at each period in ``P_schedule`` until the crest region settles.

    The grid has N = N0 at the first period.  N grows in proportion to P
    up to ``N_cap``, after which the spacing grows instead.  Consecutive
    solutions are compared on |x| < min(window, P_prev/2), and the loop
    stops once the difference drops below ``limit_tol``.
    """
    schedule = default_schedule() if P_schedule is None else [float(p) for p in P_schedule]
    if not schedule:
        raise ValueError("empty period schedule")
    if any(b <= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise ValueError("period schedule must be strictly increasing")
    if window < 0:
        raise ValueError("window must be non-negative")
    opts = options or SolverOptions()

    sols: list[WaveSolution] = []
    history: list[tuple[float, float]] = []
    prev = None
    for P in schedule:
        N = N0 if prev is None else min(N_cap, 2 * int(round(0.5 * N0 * P / schedule[0])))
        N = max(N, 2)
        sol = _solve_period(spec, lam, PeriodicGrid(P, N), prev, opts)
        diff = math.nan if prev is None else window_difference(prev, sol, window)
        sols.append(sol)
        history.append((P, diff))
        log.info("P=%.6g N=%d mu=%.15g window difference %.3e", P, N, sol.mu, diff)
        if prev is not None and diff < limit_tol:
            return Escalation(sols, history, True, window)
        prev = sol
    exc = NoConvergenceInP(
        f"window differences {[d for _, d in history[1:]]} never fell below {limit_tol}"
    )
    # keep the partial run for inspection
    exc.escalation = Escalation(sols, history, False, window)
    raise exc


def galilean_transform(w: WaveSolution, tail_tol: float = TAIL_REL_TOL) -> SolitaryWave:
    """Shift a settled large-period wave to a solitary wave decaying to zero."""
    mu = w.mu
    tail = w.trough
    if abs(tail - (mu - 1.0)) > tail_tol * (1.0 + abs(mu - 1.0)):
        raise TailNotSettled(
            f"trough {tail:.12g} has not reached mu - 1 = {mu - 1.0:.12g}; enlarge the period"
        )
    mu_new = 2.0 - mu
    if mu_new <= 1.0:
        raise InvalidSpeed("unit speed is reached only by the zero wave; no solitary wave")
    spec = SymbolSpec(w.s)
    Phi = GridFunction(w.grid, w.phi.values + 1.0 - mu, Parity.EVEN)
    res = residual(spec, Phi, mu_new).sup_norm()
    src = residual(spec, w.phi, mu).sup_norm()
    return SolitaryWave(
        Phi=Phi, mu_lambda=mu_new, lam=w.lam, tail_level=tail, P_final=w.P, s=w.s,
        residual_norm=res, source_residual_norm=src,
    )


def construct_solitary(
    spec: SymbolSpec,
    lam: float,
    P_schedule=None,
    window: float = DEFAULT_WINDOW,
    limit_tol: float = DEFAULT_LIMIT_TOL,
    options: SolverOptions | None = None,
    N0: int = 1024,
    N_cap: int = DEFAULT_N_CAP,
) -> tuple[SolitaryWave, Escalation]:
    esc = escalate_period(spec, lam, P_schedule, window, limit_tol, options, N0, N_cap)
    sw = galilean_transform(esc.final)
    sw.escalation_history = list(esc.history)
    return sw, esc


def compute_decay_rate(spec: SymbolSpec, mu_lambda: float) -> float:
    """Root delta of (1 - delta^2)^(-s/2) = mu, i.e. sqrt(1 - mu^(-2/s))."""
    mu = float(mu_lambda)
    if not (math.isfinite(mu) and mu > 1.0):
        raise InvalidSpeed(f"decay rate needs a supercritical speed mu > 1, got {mu_lambda}")
    return math.sqrt(-math.expm1(-2.0 / spec.s * math.log(mu)))


def compute_Hmu_kernel(spec: SymbolSpec, mu: float, x_grid, tol: float = 1e-12) -> np.ndarray:
    """Inverse Fourier transform of m / (mu - m) for mu > 1.

    Since m / (mu - m) = sum_j (m / mu)^j and m^j is the symbol of K_{js},
    the first J terms are summed in physical space.  The remainder
    m^{J+1} / (mu^J (mu - m)) decays like |xi|^{-(J+1)s}, which makes it a
    tame Fourier-cosine integral.
    """
    mu = float(mu)
    if not (math.isfinite(mu) and mu > 1.0):
        raise InvalidSpeed(f"H_mu needs mu > 1, got {mu}")
    s = spec.s
    x = np.abs(np.atleast_1d(np.asarray(x_grid, dtype=float)))
    J = max(1, math.ceil(3.0 / s) - 1)

    out = np.zeros_like(x)
    for j in range(1, J + 1):
        out += kernel_values(SymbolSpec(j * s), x) / mu**j

    def rem(xi):
        m = multiplier(spec, xi)
        return m ** (J + 1) / (mu**J * (mu - m)) / math.pi

    # the remainder varies on the scale xi ~ 1; keep that range out of the
    # Fourier-integral routine, whose cycles have length 2 pi / x
    split = 200.0
    for i, xv in enumerate(x):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                if xv == 0.0:
                    val, _ = integrate.quad(rem, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=500)
                else:
                    head, _ = integrate.quad(
                        rem, 0.0, split, weight="cos", wvar=xv, epsabs=tol, epsrel=tol, limit=500
                    )
                    tail, _ = integrate.quad(
                        rem, split, np.inf, weight="cos", wvar=xv, epsabs=tol, limlst=200
                    )
                    val = head + tail
            except integrate.IntegrationWarning as exc:
                raise NonConvergedQuadrature(f"H_mu remainder at x={xv}: {exc}") from exc
        out[i] += val
    return out
