"""Scalar special functions: gamma, normalized Bessel, Dunkl kernel, Mittag-Leffler.

All functions accept scalars or numpy arrays and return the same shape.
They are pure and hold no mutable state beyond ``functools`` caches, so they
are safe to call from several threads at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.integrate import IntegrationWarning, quad

__all__ = [
    "MLParams",
    "ConvergenceError",
    "ALPHA_MAX",
    "BESSEL_ARG_MAX",
    "gamma_fn",
    "bessel_j_normalized",
    "dunkl_kernel",
    "mittag_leffler",
]

#: Largest Dunkl parameter accepted. ``j_{alpha+1}`` then needs order <= 11.
ALPHA_MAX = 10.0
#: Largest ``|z|`` accepted by :func:`bessel_j_normalized` (outside half-integer orders).
BESSEL_ARG_MAX = 200.0

# Largest admissible |term| in the Taylor series of E_{g,b}(-x); the summation
# error is then about _MAX_TERM * eps, well below the 1e-10 target.
_MAX_TERM = 1.0e3
_SERIES_TOL = 1.0e-18
_MAX_TERMS = 10_000


class ConvergenceError(ArithmeticError):
    """A series or quadrature failed to reach its accuracy target."""


@dataclass(frozen=True)
class MLParams:
    """Parameters of the two-parameter Mittag-Leffler function ``E_{gamma_order, beta}``."""

    gamma_order: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma_order <= 1.0:
            raise ValueError(f"gamma_order must lie in (0, 1], got {self.gamma_order}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def gamma_fn(x):
    """Gamma function on the positive half-line.

    Raises ``ValueError`` for ``x <= 0``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise ValueError("gamma_fn is only defined here for x > 0")
    if arr.ndim == 0:
        return math.gamma(float(arr))
    return special.gamma(arr)


def _bessel_series(alpha: float, z: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k Gamma(a+1) / (k! Gamma(k+a+1)) (z/2)^(2k); used only for |z| < 1
    w = -(z * z) / 4.0
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 40):
        term = term * w / (k * (k + alpha))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def bessel_j_normalized(alpha: float, z):
    """Normalized Bessel function ``j_alpha(z) = Gamma(alpha+1) (z/2)^(-alpha) J_alpha(z)``.

    Even in ``z`` and equal to 1 at the origin. Orders ``-1/2`` and ``1/2``
    reduce to ``cos z`` and ``sin z / z``; other orders accept ``|z| <= 200``.
    """
    if alpha < -0.5:
        raise ValueError(f"alpha must be >= -1/2, got {alpha}")
    za = np.abs(np.asarray(z, dtype=float))
    if alpha == -0.5:
        out = np.cos(za)
    elif alpha == 0.5:
        out = np.sinc(za / np.pi)
    else:
        if np.any(za > BESSEL_ARG_MAX):
            raise ValueError(f"|z| > {BESSEL_ARG_MAX} is outside the supported range")
        out = np.empty_like(za)
        small = za < 1.0
        out[small] = _bessel_series(alpha, za[small])
        big = ~small
        zb = za[big]
        out[big] = special.gamma(alpha + 1.0) * (zb / 2.0) ** (-alpha) * special.jv(alpha, zb)
    return out[()] if out.ndim == 0 else out


def dunkl_kernel(alpha: float, x, lam):
    """Dunkl kernel ``D_alpha(i x lam)``, the eigenfunction of the Dunkl operator.

    ``D_alpha(i x lam) = j_alpha(x lam) + i x lam / (2 (alpha+1)) j_{alpha+1}(x lam)``.
    Broadcasts ``x`` against ``lam``; for ``alpha = -1/2`` this is ``exp(i x lam)``.
    """
    if not -0.5 <= alpha <= ALPHA_MAX:
        raise ValueError(f"alpha must lie in [-1/2, {ALPHA_MAX}], got {alpha}")
    xl = np.multiply(np.asarray(x, dtype=float), np.asarray(lam, dtype=float))
    re = bessel_j_normalized(alpha, xl)
    im = xl / (2.0 * (alpha + 1.0)) * bessel_j_normalized(alpha + 1.0, xl)
    return re + 1j * im


@lru_cache(maxsize=64)
def _series_plan(g: float, b: float) -> tuple[float, np.ndarray]:
    """Largest |z| where the Taylor series is cancellation-safe, and its coefficients."""
    k = np.arange(_MAX_TERMS, dtype=float)
    lg = special.gammaln(g * k + b)

    def log_max_term(x: float) -> float:
        return float(np.max(k * math.log(x) - lg))

    lo, hi = 1e-3, 64.0
    if log_max_term(hi) <= math.log(_MAX_TERM):
        x_safe = hi
    else:
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            if log_max_term(mid) <= math.log(_MAX_TERM):
                lo = mid
            else:
                hi = mid
        x_safe = lo
    logs = k * math.log(x_safe) - lg
    big = np.nonzero(logs > math.log(_SERIES_TOL))[0]
    n_terms = int(big[-1]) + 2
    if n_terms >= _MAX_TERMS:
        raise ConvergenceError(f"Mittag-Leffler series for ({g}, {b}) needs too many terms")
    # 1/Gamma(g k + b), computed in log space so large k does not overflow
    sign = special.gammasgn(g * k[:n_terms] + b)
    coeffs = sign * np.exp(-lg[:n_terms])
    coeffs[0] = 1.0 / math.gamma(b)
    return x_safe, coeffs


def _ml_integral(g: float, b: float, x: float) -> float:
    """E_{g,b}(-x) for 0 < g < 1, b in {1, g}, x > 0 via the Laplace-type representation.

    With theta = g*pi and c = cos(theta),
        E_{g,1}(-x) = sin(theta)/(g pi) int_0^inf x exp(-v^(1/g)) / (v^2 + 2 x c v + x^2) dv
        E_{g,g}(-x) = sin(theta)/(g pi) int_0^inf v^(1/g) exp(-v^(1/g)) / (v^2 + 2 x c v + x^2) dv
    """
    theta = g * math.pi
    c = math.cos(theta)
    p = 1.0 / g
    v_max = 45.0**g  # exp(-45) ~ 3e-20
    if b == 1.0:
        def integrand(v):
            return x * math.exp(-(v**p)) / (v * v + 2.0 * x * c * v + x * x)
    else:
        def integrand(v):
            return v**p * math.exp(-(v**p)) / (v * v + 2.0 * x * c * v + x * x)
    points = [v_max * r for r in (1e-4, 1e-3, 1e-2, 0.1, 0.3)]
    if c < 0.0 and -x * c < v_max:
        points.append(-x * c)  # near-pole of the rational factor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, 0.0, v_max, points=sorted(points),
                        epsabs=1e-15, epsrel=1e-13, limit=400)
    if err > 1e-11:
        raise ConvergenceError(f"Mittag-Leffler quadrature error {err:.2e} at x={x}")
    return math.sin(theta) / (g * math.pi) * val


def mittag_leffler(params: MLParams, z):
    """Two-parameter Mittag-Leffler function ``E_{gamma,beta}(z)`` on ``z <= 0``.

    Absolute accuracy is about 1e-12. ``beta`` must be 1 or ``gamma_order``
    whenever the integral branch is needed (large ``|z|``, ``gamma < 1``).
    Positive arguments raise ``ValueError``.
    """
    g, b = float(params.gamma_order), float(params.beta)
    za = np.asarray(z, dtype=float)
    if np.any(~(za <= 0.0)):
        raise ValueError("mittag_leffler supports only z <= 0")
    if g == 1.0 and b == 1.0:
        out = np.exp(za)
        return out[()] if out.ndim == 0 else out

    x_safe, coeffs = _series_plan(g, b)
    x = -za
    out = np.empty_like(za)
    near = x <= x_safe
    if np.any(near):
        zn = za[near]
        acc = np.full_like(zn, coeffs[-1])
        for ck in coeffs[-2::-1]:
            acc = acc * zn + ck
        out[near] = acc
    far = ~near
    if np.any(far):
        if g == 1.0:
            if b != 1.0:
                raise ValueError("only beta = 1 is supported for gamma = 1")
            out[far] = np.exp(za[far])
        else:
            if b not in (1.0, g):
                raise ValueError(f"beta must be 1 or gamma for |z| > {x_safe:.3g}")
            xs, inv = np.unique(x[far], return_inverse=True)
            vals = np.array([_ml_integral(g, b, float(v)) for v in xs])
            out[far] = vals[inv.ravel()]
    return out[()] if out.ndim == 0 else out
