"""Checks of structural identities, bounds and crest/tail asymptotics.

Every function here is pure: it reads a solution and returns numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InsufficientResolution
from .kernel import SymbolSpec
from .solitary import SolitaryWave, compute_decay_rate
from .solver import WaveSolution

__all__ = [
    "CrestModel",
    "CrestFitReport",
    "DiagnosticsReport",
    "DecayFit",
    "check_mean_identity",
    "check_bounds",
    "check_monotonicity",
    "fit_crest",
    "fit_crest_profile",
    "check_speed_windows",
    "fit_decay",
    "fit_decay_profile",
    "diagnose",
]

MIN_CREST_POINTS = 8
MIN_DECAY_POINTS = 16
RELIABLE_R2 = 0.99


class CrestModel(str, Enum):
    POWER = "power"
    X_LOG = "x_log"


@dataclass(frozen=True)
class CrestFitReport:
    sigma_fit: float
    prefactor_fit: float
    fit_window: tuple[float, float]
    model: CrestModel
    r_squared: float
    n_points: int

    @property
    def reliable(self) -> bool:
        return self.r_squared >= RELIABLE_R2


@dataclass(frozen=True)
class DecayFit:
    rate: float
    predicted: float
    window: tuple[float, float]
    n_points: int


@dataclass(frozen=True)
class DiagnosticsReport:
    mean_identity_relerr: float
    bound_violation: float
    monotonicity_violation: float
    speed_window_ok: bool
    crest: CrestFitReport | None = None
    decay_rate_fit: float | None = None
    decay_rate_predicted: float | None = None


def check_mean_identity(w: WaveSolution | SolitaryWave) -> float:
    """Relative defect in (mu - 1) * int(phi) = ||phi||^2 over one period.

    Solitary waves satisfy the same identity on the line; their cell is
    long enough for the periodic sums to stand in for the integrals.
    """
    if isinstance(w, SolitaryWave):
        v, mu = w.Phi.values, w.mu_lambda
    else:
        v, mu = w.phi.values, w.mu
    dx = w.grid.dx
    lhs = (mu - 1.0) * float(v.sum()) * dx
    rhs = float(np.dot(v, v)) * dx
    if rhs == 0.0 and lhs == 0.0:
        return 0.0
    return abs(lhs - rhs) / max(rhs, 1e-30)


def check_bounds(w: WaveSolution) -> float:
    """Violation of mu - 1 <= phi <= lam mu / 2; zero when both hold."""
    v = w.phi.values
    return max(0.0, (w.mu - 1.0) - float(v.min()), float(v.max()) - 0.5 * w.lam * w.mu)


def check_monotonicity(w: WaveSolution) -> float:
    """Largest decrease of phi between consecutive nodes on [-P/2, 0]."""
    rising = np.diff(w.phi.values[: w.grid.N // 2 + 1])
    return max(0.0, -float(rising.min())) if rising.size else 0.0


def _r_squared(y, fit):
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def fit_crest_profile(x, omega, model: CrestModel, x_lo: float, x_hi: float) -> CrestFitReport:
    """Fit the crest deficit ``omega`` on x_lo <= x <= x_hi.

    ``power``: least-squares line through (log x, log omega); slope is sigma.
    ``x_log``: one-parameter least squares omega = c x log(1/x).
    """
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if not x_lo > 0:
        raise ValueError("crest fit window must exclude the origin")
    sel = (x >= x_lo * (1 - 1e-12)) & (x <= x_hi * (1 + 1e-12)) & (omega > 0)
    n = int(sel.sum())
    if n < MIN_CREST_POINTS:
        raise InsufficientResolution(
            f"{n} points in crest window [{x_lo:.3g}, {x_hi:.3g}]; need {MIN_CREST_POINTS}"
        )
    xs, om = x[sel], omega[sel]
    model = CrestModel(model)
    if model is CrestModel.POWER:
        lx, ly = np.log(xs), np.log(om)
        slope, icpt = np.polyfit(lx, ly, 1)
        r2 = _r_squared(ly, slope * lx + icpt)
        return CrestFitReport(float(slope), float(math.exp(icpt)), (x_lo, x_hi), model, r2, n)
    basis = xs * np.log(1.0 / xs)
    c = float(np.dot(basis, om) / np.dot(basis, basis))
    r2 = _r_squared(om, c * basis)
    return CrestFitReport(1.0, c, (x_lo, x_hi), model, r2, n)


def fit_crest(w: WaveSolution, x_lo: float | None = None, x_hi: float | None = None) -> CrestFitReport:
    """Crest-regularity fit of omega = mu/2 - phi on the right half of the crest.

    The default window is [4 dx, min(0.1 P, 0.5)].  For s = 1 the model is
    c x log(1/x); otherwise a power law.
    """
    g = w.grid
    x_lo = 4.0 * g.dx if x_lo is None else x_lo
    x_hi = min(0.1 * g.P, 0.5) if x_hi is None else x_hi
    M = g.N // 2
    x = g.nodes[M:]
    omega = 0.5 * w.mu - w.phi.values[M:]
    model = CrestModel.X_LOG if w.s == 1.0 else CrestModel.POWER
    return fit_crest_profile(x, omega, model, x_lo, x_hi)


def check_speed_windows(w: WaveSolution | SolitaryWave, tol: float = 1e-8) -> bool:
    """Subcritical speed for periodic waves, strictly supercritical for solitary ones."""
    if isinstance(w, SolitaryWave):
        amp = w.crest - float(w.Phi.values.min())
        if amp <= 1e-6:
            raise ValueError("speed windows apply to nontrivial waves only")
        mu = w.mu_lambda
        return 1.0 < mu < 2.0 and abs(mu - 1.0) > 1e-6
    if w.amplitude <= 1e-6:
        raise ValueError("speed windows apply to nontrivial waves only")
    return 0.0 < w.mu <= 1.0 + tol


def fit_decay_profile(x, values, x_min: float = 5.0, floor: float = 1e-10, ceiling: float = 1e-2):
    """Least-squares rate r of values ~ C exp(-r |x|) over the tail window.

    Returns (rate, (x_lo, x_hi), n_points).
    """
    ax = np.abs(np.asarray(x, dtype=float))
    v = np.asarray(values, dtype=float)
    sel = (ax >= x_min) & (v > floor) & (v < ceiling)
    n = int(sel.sum())
    if n < MIN_DECAY_POINTS:
        raise InsufficientResolution(
            f"{n} tail points with {floor:g} < value < {ceiling:g} and |x| >= {x_min:g}; "
            f"need {MIN_DECAY_POINTS}"
        )
    slope, _ = np.polyfit(ax[sel], np.log(v[sel]), 1)
    return float(-slope), (float(ax[sel].min()), float(ax[sel].max())), n


def fit_decay(sw: SolitaryWave, x_min: float = 5.0) -> DecayFit:
    rate, window, n = fit_decay_profile(sw.x, sw.Phi.values, x_min=x_min)
    predicted = compute_decay_rate(SymbolSpec(sw.s), sw.mu_lambda)
    return DecayFit(rate, predicted, window, n)


def diagnose(w: WaveSolution | SolitaryWave, crest: bool = False) -> DiagnosticsReport:
    """Aggregate report; crest fitting is opt-in since it needs lam close to 1."""
    if isinstance(w, SolitaryWave):
        fit = fit_decay(w)
        lower = float(w.Phi.values.min())
        bound = max(0.0, -lower, float(w.Phi.values.max()) - w.height_bound)
        return DiagnosticsReport(
            mean_identity_relerr=check_mean_identity(w),
            bound_violation=bound,
            monotonicity_violation=max(
                0.0, -float(np.diff(w.Phi.values[: w.grid.N // 2 + 1]).min())
            ),
            speed_window_ok=check_speed_windows(w),
            decay_rate_fit=fit.rate,
            decay_rate_predicted=fit.predicted,
        )
    return DiagnosticsReport(
        mean_identity_relerr=check_mean_identity(w),
        bound_violation=check_bounds(w),
        monotonicity_violation=check_monotonicity(w),
        speed_window_ok=check_speed_windows(w),
        crest=fit_crest(w) if crest else None,
    )
