"""Bessel-potential kernel K_s, its periodisation K_{s,P} and the symbol.

The line kernel is evaluated from the Gaussian-mixture representation

    K_s(x) = (4 pi)^(-1/2) / Gamma(s/2) * int_0^inf exp(-t - x^2/(4t)) t^((s-3)/2) dt.

After the substitution t = e^u the integrand is an entire function of u that
decays doubly-exponentially at both ends, so the trapezoidal rule converges
geometrically in the step size.  The rule is refined by step halving until two
successive estimates agree to ``quadrature_rel_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import mpmath
import numpy as np
from scipy import integrate, special
from scipy.optimize import brentq

from .errors import MethodUnavailable, NonConvergedQuadrature, SingularEvaluation

__all__ = [
    "SymbolSpec",
    "KernelMethod",
    "KernelSample",
    "KernelSplit",
    "MassEstimate",
    "multiplier",
    "kernel_values",
    "eval_kernel",
    "kernel_mass",
    "periodized_kernel_values",
    "eval_kernel_periodized",
    "singular_coefficient",
    "kernel_split",
    "regular_bound_bracket",
    "regular_second_derivative_integrand",
    "check_regular_second_derivative_bound",
]

# the log-integrand is cut where it has dropped by this much below its peak
_LOG_DROP = 52.0
_MAX_TRAPEZOID_INTERVALS = 2**15
_CHUNK = 2048


@dataclass(frozen=True)
class SymbolSpec:
    """Dispersion order ``s`` of the symbol (1 + xi^2)^(-s/2)."""

    s: float
    quadrature_rel_tol: float = 1e-10

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise ValueError(f"dispersion order s must be positive, got {self.s!r}")
        if not (self.quadrature_rel_tol > 0):
            raise ValueError("quadrature_rel_tol must be positive")


class KernelMethod(str, Enum):
    QUADRATURE = "quadrature"
    SERIES_TRANSLATES = "series_translates"
    FOURIER_SERIES = "fourier_series"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class KernelSample:
    x: float
    value: float
    method: KernelMethod
    error: float = 0.0


@dataclass(frozen=True)
class KernelSplit:
    """K_{s,P} = regular_part + singular model near the origin.

    The singular model is ``coefficient * |x|^exponent`` (``power``),
    ``coefficient * log(1/|x|)`` (``log``, s = 1) or
    ``coefficient * |x|^exponent * log(1/|x|)`` (``power_log``, odd s >= 3).
    """

    regular_part: Callable[[np.ndarray], np.ndarray]
    singular_exponent: float
    singular_form: str
    coefficient: float
    P: float

    def singular_part(self, x):
        return _singular_model(self.singular_form, self.singular_exponent, self.coefficient, x)


@dataclass(frozen=True)
class MassEstimate:
    value: float
    error: float


def multiplier(spec: SymbolSpec, xi):
    """Symbol m(xi) = (1 + xi^2)^(-s/2); works on scalars and arrays."""
    xi = np.asarray(xi, dtype=float)
    out = np.power(1.0 + xi * xi, -0.5 * spec.s)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# line kernel


def _peak(x2, a):
    """Location u* = log t* of the maximum of the log-integrand."""
    root = np.sqrt(a * a + x2)
    if a >= 0:
        t_star = 0.5 * (a + root)
    else:
        # stable form of the positive root of t^2 - a t - x^2/4 = 0
        t_star = 0.5 * x2 / (root - a)
    return np.log(t_star)


def _log_integrand(u, x2, a):
    with np.errstate(over="ignore"):
        return -np.exp(u) - 0.25 * x2 * np.exp(-u) + a * u


def _bracket(u_star, g_star, x2, a, sign):
    d = np.ones_like(u_star)
    todo = np.ones(u_star.shape, dtype=bool)
    while np.any(todo):
        g = _log_integrand(u_star[todo] + sign * d[todo], x2[todo], a)
        still = g - g_star[todo] > -_LOG_DROP
        idx = np.flatnonzero(todo)
        d[idx[still]] *= 2.0
        todo[idx[~still]] = False
    return u_star + sign * d


def _integral_chunk(ax, s, rtol):
    a = 0.5 * (s - 1.0)
    x2 = ax * ax
    u_star = _peak(x2, a)
    g_star = _log_integrand(u_star, x2, a)
    lo = _bracket(u_star, g_star, x2, a, -1.0)
    hi = _bracket(u_star, g_star, x2, a, +1.0)
    width = (hi - lo)[:, None]

    def f(frac):
        u = lo[:, None] + width * frac[None, :]
        return np.exp(_log_integrand(u, x2[:, None], a) - g_star[:, None])

    n = 64
    frac = np.linspace(0.0, 1.0, n + 1)
    vals = f(frac)
    total = (vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1])) * (width[:, 0] / n)
    while True:
        mids = (np.arange(n) + 0.5) / n
        refined = 0.5 * total + f(mids).sum(axis=1) * (width[:, 0] / (2 * n))
        n *= 2
        diff = np.abs(refined - total)
        total = refined
        if np.all(diff <= rtol * np.abs(total)):
            break
        if n >= _MAX_TRAPEZOID_INTERVALS:
            raise NonConvergedQuadrature(
                f"kernel quadrature did not reach rtol={rtol} within {n} intervals"
            )
    log_norm = -0.5 * math.log(4.0 * math.pi) - special.gammaln(0.5 * s)
    return np.exp(g_star + log_norm) * total


def kernel_values(spec: SymbolSpec, x) -> np.ndarray:
    """Vectorised K_s(x).  ``x == 0`` is allowed only for s > 1."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x).ravel()
    out = np.empty_like(ax)
    zero = ax == 0.0
    if np.any(zero):
        if spec.s <= 1.0:
            raise SingularEvaluation(f"K_s is singular at x = 0 for s = {spec.s} <= 1")
        out[zero] = math.exp(
            special.gammaln(0.5 * (spec.s - 1.0))
            - special.gammaln(0.5 * spec.s)
            - 0.5 * math.log(4.0 * math.pi)
        )
    nz = np.flatnonzero(~zero)
    for start in range(0, nz.size, _CHUNK):
        idx = nz[start : start + _CHUNK]
        out[idx] = _integral_chunk(ax[idx], spec.s, spec.quadrature_rel_tol)
    return out.reshape(x.shape)


def eval_kernel(spec: SymbolSpec, x: float) -> KernelSample:
    value = float(kernel_values(spec, np.array([x]))[0])
    return KernelSample(
        x=float(x),
        value=value,
        method=KernelMethod.QUADRATURE,
        error=spec.quadrature_rel_tol * value,
    )


def kernel_mass(spec: SymbolSpec, x_max: float | None = None) -> MassEstimate:
    """Integral of K_s over the real line.

    Computed as 2 * int_0^X K_s(x) dx with a trapezoidal rule in v = log x,
    plus the leading-order head contribution on (0, x_lo) and an exponential
    tail bound past X.
    """
    s = spec.s
    if x_max is None:
        x_max = 40.0 + 2.0 * s
    x_lo = max(10.0 ** (-15.0 / min(s, 1.0)), 1e-150)
    v_lo, v_hi = math.log(x_lo), math.log(x_max)

    def f(v):
        x = np.exp(v)
        return kernel_values(spec, x) * x

    n = 128
    h = (v_hi - v_lo) / n
    vals = f(np.linspace(v_lo, v_hi, n + 1))
    total = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    diff = math.inf
    while n < 2**14:
        mids = v_lo + (np.arange(n) + 0.5) * h
        refined = 0.5 * total + 0.5 * h * f(mids).sum()
        diff = abs(refined - total)
        total = refined
        n *= 2
        h *= 0.5
        if diff <= spec.quadrature_rel_tol * abs(total):
            break
    else:
        raise NonConvergedQuadrature("kernel mass quadrature did not converge")
    # head: K ~ A x^(s-1) for s < 1, ~ log for s = 1, ~ K(0) for s > 1
    k_lo = float(kernel_values(spec, x_lo))
    head = k_lo * x_lo / min(s, 1.0)
    # K_s(x) <~ x^((s-2)/2) e^{-x}; the tail integral is bounded by a few K(X)
    tail = float(kernel_values(spec, x_max)) * (1.0 + abs(s - 2.0) / x_max)
    value = 2.0 * (total + head)
    error = 2.0 * (diff + tail + head * 1e-2) + spec.quadrature_rel_tol * value
    return MassEstimate(value=value, error=error)


# --------------------------------------------------------------------------
# periodised kernel


def _reduce(x, P):
    x = np.asarray(x, dtype=float)
    # leave in-range points alone so tiny |x| is not rounded to 0
    return np.where(np.abs(x) <= 0.5 * P, x, np.mod(x + 0.5 * P, P) - 0.5 * P)


def _translate_sum(spec: SymbolSpec, P: float, x: np.ndarray) -> np.ndarray:
    r = _reduce(x, P)
    if spec.s <= 1.0 and np.any(r == 0.0):
        raise SingularEvaluation("K_{s,P} is singular at multiples of P for s <= 1")
    x_cut = 40.0 + 2.0 * spec.s
    n_max = int(math.ceil((x_cut + 0.5 * P) / P))
    n = np.arange(-n_max, n_max + 1)
    pts = r.ravel()[:, None] + n[None, :] * P
    vals = kernel_values(spec, pts)
    # sum smallest terms first
    order = np.argsort(np.abs(n))[::-1]
    return vals[:, order].sum(axis=1).reshape(r.shape)


def _polylog_real(p: float, theta: float) -> float:
    if theta == 0.0:
        return float(mpmath.zeta(p))
    return float(mpmath.re(mpmath.polylog(p, mpmath.expj(theta))))


def _gen_binom(a: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (a - i) / (i + 1)
    return out


def _fourier_series(spec: SymbolSpec, P: float, x: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Fourier series of K_{s,P} with an analytic tail.

    Modes |k| <= K are summed directly.  Beyond K the symbol is expanded as
    m(xi) = sum_j binom(-s/2, j) xi^(-s-2j), and each power contributes a
    periodic zeta tail Re Li_p(e^{i theta}) - sum_{k<=K} k^-p cos(k theta).
    For s <= 1 this is the Abel sum of a conditionally convergent series and is
    undefined at theta = 0.
    """
    s = spec.s
    r = _reduce(x, P).ravel()
    theta = np.mod(2.0 * math.pi * r / P, 2.0 * math.pi)
    if s <= 1.0 and np.any(theta == 0.0):
        raise MethodUnavailable(
            "Fourier series of K_{s,P} diverges at the origin for s <= 1"
        )
    K = max(4096, int(math.ceil(64.0 * P)))
    k = np.arange(1, K + 1, dtype=float)
    coef = multiplier(spec, 2.0 * math.pi * k / P)
    cos = np.cos(np.outer(theta, k))
    partial = (1.0 + 2.0 * cos @ coef) / P

    scale = P / (2.0 * math.pi)
    sin_half = np.maximum(np.abs(np.sin(0.5 * theta)), 1e-300)
    tails = np.zeros_like(theta)
    j = 0
    while True:
        p = s + 2.0 * j
        b = _gen_binom(-0.5 * s, j) * scale**p
        # bound on the j-th tail from summation by parts / integral comparison
        if p > 1.0:
            bound = np.minimum(K ** (1.0 - p) / (p - 1.0), (K + 1.0) ** (-p) / sin_half)
        else:
            bound = (K + 1.0) ** (-p) / sin_half
        bound = 2.0 / P * abs(b) * bound
        if np.all(bound < tol) and j > 0:
            break
        if j > 12:
            raise MethodUnavailable("Fourier tail expansion did not reach tolerance")
        kp = k ** (-p)
        head = cos @ kp
        li = np.array([_polylog_real(p, float(t)) for t in theta])
        tails += b * (li - head)
        j += 1
    return (partial + 2.0 / P * tails).reshape(np.shape(x))


def periodized_kernel_values(
    spec: SymbolSpec, P: float, x, method: KernelMethod | str = KernelMethod.SERIES_TRANSLATES
) -> np.ndarray:
    if not P > 0:
        raise ValueError("period P must be positive")
    method = KernelMethod(method)
    x = np.asarray(x, dtype=float)
    if method is KernelMethod.SERIES_TRANSLATES:
        return _translate_sum(spec, P, x)
    if method is KernelMethod.FOURIER_SERIES:
        return _fourier_series(spec, P, x)
    raise MethodUnavailable(f"method {method.value!r} does not evaluate K_(s,P)")


def eval_kernel_periodized(
    spec: SymbolSpec, P: float, x: float, method: KernelMethod | str = KernelMethod.SERIES_TRANSLATES
) -> KernelSample:
    value = float(periodized_kernel_values(spec, P, np.array([x]), method)[0])
    return KernelSample(x=float(x), value=value, method=KernelMethod(method))


# --------------------------------------------------------------------------
# singular structure near the origin


def _is_odd_integer(s: float) -> bool:
    return abs(s - round(s)) < 1e-12 and int(round(s)) % 2 == 1


def singular_coefficient(spec: SymbolSpec) -> tuple[str, float]:
    """Leading non-analytic term of K_s at 0 as ``(form, coefficient)``.

    For s not an odd integer the term is A |x|^(s-1) with
    A = Gamma((1-s)/2) / (2^s sqrt(pi) Gamma(s/2)); for s = 2n+1 it is
    B |x|^(2n) log(1/|x|) with B = (-1)^n / (4^n n! sqrt(pi) Gamma(n+1/2)).
    """
    s = spec.s
    if _is_odd_integer(s):
        n = int(round(s - 1.0)) // 2
        coeff = (-1) ** n / (4.0**n * math.factorial(n) * math.sqrt(math.pi) * math.gamma(n + 0.5))
        return ("log" if n == 0 else "power_log"), coeff
    coeff = special.gamma(0.5 * (1.0 - s)) / (2.0**s * math.sqrt(math.pi) * special.gamma(0.5 * s))
    return "power", float(coeff)


def _singular_model(form, exponent, coeff, x):
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        if form == "power":
            return coeff * ax**exponent
        if form == "log":
            return coeff * np.log(1.0 / ax)
        return coeff * ax**exponent * np.log(1.0 / ax)


def kernel_split(spec: SymbolSpec, P: float) -> KernelSplit:
    if not P > 0:
        raise ValueError("period P must be positive")
    form, coeff = singular_coefficient(spec)
    exponent = spec.s - 1.0

    def regular(x):
        x = np.asarray(x, dtype=float)
        return _translate_sum(spec, P, x) - _singular_model(form, exponent, coeff, x)

    return KernelSplit(
        regular_part=regular,
        singular_exponent=exponent,
        singular_form=form,
        coefficient=coeff,
        P=float(P),
    )


# --------------------------------------------------------------------------
# s = 1: L^1 bound on the second derivative of the regular part

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


def _excess_term(x: float, rtol: float = 1e-13) -> float:
    """int_1^inf e^{-xt} (t^2/sqrt(t^2-1) - t) dt.

    With t = cosh w the integrand becomes cosh(w) exp(-w - x cosh w), which
    is not even in w; the further substitution w = e^y restores geometric
    convergence of the trapezoidal rule on the whole line.
    """
    y_lo = -40.0
    y_hi = math.log(math.acosh(max(1.0, (_LOG_DROP + 60.0) / x)) + 2.0)
    n = 64
    h = (y_hi - y_lo) / n

    def f(y):
        w = np.exp(y)
        return np.exp(-x * np.cosh(w) - w) * np.cosh(w) * w

    vals = f(np.linspace(y_lo, y_hi, n + 1))
    total = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    while n < _MAX_TRAPEZOID_INTERVALS:
        refined = 0.5 * total + 0.5 * h * f(y_lo + (np.arange(n) + 0.5) * h).sum()
        n *= 2
        h *= 0.5
        if abs(refined - total) <= rtol * abs(refined):
            return refined
        total = refined
    raise NonConvergedQuadrature("inner integral for G0'' did not converge")


def _truncated_moment(x: float) -> float:
    """int_0^1 t e^{-xt} dt by Gauss-Legendre."""
    t = 0.5 * (_GL_NODES + 1.0)
    return 0.5 * float(np.sum(_GL_WEIGHTS * t * np.exp(-x * t)))


def regular_second_derivative_integrand(x: float) -> float:
    """G0''(x) - 1/x^2 with G0''(x) = int_1^inf e^{-xt} t^2/sqrt(t^2-1) dt.

    Written as the difference of two cancellation-free pieces, using
    1/x^2 = int_0^inf t e^{-xt} dt.
    """
    return _excess_term(x) - _truncated_moment(x)


def regular_bound_bracket() -> float:
    """int_1^inf (t/sqrt(t^2-1) - 1) dt + int_0^1 1 dt, by adaptive quadrature."""
    near, _ = integrate.quad(
        lambda t: t / math.sqrt(t + 1.0), 1.0, 2.0, weight="alg", wvar=(-0.5, 0.0),
        epsabs=1e-14, epsrel=1e-13,
    )
    far, _ = integrate.quad(
        lambda t: t / math.sqrt(t * t - 1.0) - 1.0, 2.0, math.inf, epsabs=1e-14, epsrel=1e-13
    )
    return (near - 1.0) + far + 1.0


def check_regular_second_derivative_bound(P: float, x_max: float = 50.0) -> float:
    """(2/pi) int_0^inf |G0''(x) - x^-2| dx for the s = 1 kernel.

    The value is independent of P; it bounds int |R''_{1,P}| over a period.
    """
    if not P > 0:
        raise ValueError("period P must be positive")
    x_lo = 1e-14
    v_grid = np.linspace(math.log(x_lo), math.log(x_max), 400)
    f_grid = np.array([regular_second_derivative_integrand(math.exp(v)) for v in v_grid])
    breaks = [v_grid[0]]
    for i in np.flatnonzero(np.sign(f_grid[:-1]) != np.sign(f_grid[1:])):
        root = brentq(
            lambda v: regular_second_derivative_integrand(math.exp(v)),
            v_grid[i], v_grid[i + 1], xtol=1e-14,
        )
        breaks.append(root)
    breaks.append(v_grid[-1])

    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        piece, err = integrate.quad(
            lambda v: abs(regular_second_derivative_integrand(math.exp(v))) * math.exp(v),
            a, b, epsabs=1e-12, epsrel=1e-10, limit=200,
        )
        if err > 1e-6:
            raise NonConvergedQuadrature("outer integral for the R'' bound did not converge")
        total += piece
    # tail past x_max: only the -int_0^1 t e^{-xt} dt term survives
    total += (1.0 - math.exp(-x_max)) / x_max
    # head on (0, x_lo): |f| ~ log(2/x)/2
    total += x_lo * (math.log(2.0 / x_lo) + 1.0)
    return 2.0 / math.pi * total
