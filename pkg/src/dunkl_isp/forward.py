"""Direct problem: ``D^gamma (u - a Lambda^2 u) - Lambda^2 u + m u = f`` with ``u(0) = g``.

In the Dunkl-transform variable the equation decouples into one fractional
relaxation ODE per frequency, solved in closed form with Mittag-Leffler
kernels. The Duhamel convolution is evaluated by product integration against
a cubic spline of the source in time.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .dunkl import (
    DECAY_TOL,
    PhysicalFunction,
    PhysicalGrid,
    ProblemParams,
    SpectralFunction,
    SpectralGrid,
    TruncationWarning,
    forward_matrix,
    inverse_matrix,
    l2_norm,
)
from .fractional import TimeGrid, spectral_ode_residual
from .specfun import MLParams, mittag_leffler

__all__ = [
    "Grids",
    "SpectralField",
    "SolutionField",
    "spectral_symbol",
    "relaxation",
    "solve_forward_spectral",
    "solve_forward_spectral_ibp",
    "solve_forward",
    "residual_diagnostics",
]

_GL_NODES = 16
_GRADING_LEVELS = 12
_GRADING_RATIO = 4.0


@dataclass(frozen=True, eq=False)
class Grids:
    """The physical, spectral and time grids of one run."""

    physical: PhysicalGrid
    spectral: SpectralGrid
    time: TimeGrid

    @classmethod
    def default(cls, params: ProblemParams, *, extent: float = 12.0, n_half: int = 96,
                spectral_extent: float = 12.0, spectral_n_half: int = 96,
                n_steps: int = 256) -> "Grids":
        return cls(
            PhysicalGrid.gauss_legendre(extent, n_half),
            SpectralGrid.gauss_legendre(params.alpha, spectral_extent, spectral_n_half),
            TimeGrid.uniform(params.T, n_steps),
        )


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Samples ``u_hat(t_i, lam_k)``, stored as ``values[i, k]``."""

    tgrid: TimeGrid
    sgrid: SpectralGrid
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.shape != (self.tgrid.size, self.sgrid.size):
            raise ValueError(f"expected shape {(self.tgrid.size, self.sgrid.size)}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, tgrid: TimeGrid, fhat: SpectralFunction) -> "SpectralField":
        return cls(tgrid, fhat.grid, np.broadcast_to(fhat.values, (tgrid.size, fhat.grid.size)))

    def at(self, i: int) -> SpectralFunction:
        return SpectralFunction(self.sgrid, self.values[i])


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Samples ``u(t_i, x_j)``, stored as ``values[i, j]``; also used for sources ``f(t, x)``."""

    tgrid: TimeGrid
    pgrid: PhysicalGrid
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.shape != (self.tgrid.size, self.pgrid.size):
            raise ValueError(f"expected shape {(self.tgrid.size, self.pgrid.size)}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, tgrid: TimeGrid, f: PhysicalFunction) -> "SolutionField":
        return cls(tgrid, f.grid, np.broadcast_to(f.values, (tgrid.size, f.grid.size)))

    def at(self, i: int) -> PhysicalFunction:
        return PhysicalFunction(self.pgrid, self.values[i])


def spectral_symbol(params: ProblemParams, lam):
    """Decay rate ``(m + lam^2) / (1 + a lam^2)`` of each frequency."""
    lam2 = np.asarray(lam, dtype=float) ** 2
    out = (params.m + lam2) / (1 + params.a * lam2)
    return float(out) if out.ndim == 0 else out


def relaxation(params: ProblemParams, lam, t):
    """``E_gamma(-sigma(lam) t^gamma)`` on the outer product ``t x lam``."""
    sigma = np.atleast_1d(spectral_symbol(params, lam))
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    arg = -np.outer(tt**params.gamma, sigma)
    return mittag_leffler(MLParams(params.gamma, 1.0), arg)


# -- product integration -----------------------------------------------------

def _graded_panels(width: float) -> list[tuple[float, float]]:
    # geometric refinement towards 0, where the integrand is only Hoelder continuous
    panels = [(0.0, width * _GRADING_RATIO ** -_GRADING_LEVELS)]
    for level in range(_GRADING_LEVELS - 1, -1, -1):
        panels.append((width * _GRADING_RATIO ** -(level + 1), width * _GRADING_RATIO ** -level))
    return panels


def _gl_on(lo: float, hi: float, t: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (hi - lo) * t + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _lag_rules(gamma: float, dt: float, n_lags: int, variable: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Quadrature (points, weights) in ``s = t - tau`` for each lag panel ``[l dt, (l+1) dt]``.

    With ``variable == "power"`` the rule integrates ``s^(gamma-1) h(s) ds`` by the
    change of variables ``v = s^gamma``: the weights already contain ``1/gamma``
    and the Jacobian, and the points are returned in ``s``.
    """
    t, w = leggauss(_GL_NODES)
    rules = []
    for lag in range(n_lags):
        if variable == "power":
            lo, hi = (lag * dt) ** gamma, ((lag + 1) * dt) ** gamma
            pieces = _graded_panels(hi) if lag == 0 else [(lo, hi)]
            v = np.concatenate([_gl_on(a, b, t, w)[0] for a, b in pieces])
            wv = np.concatenate([_gl_on(a, b, t, w)[1] for a, b in pieces])
            rules.append((v ** (1.0 / gamma), wv / gamma))
        else:
            lo, hi = lag * dt, (lag + 1) * dt
            pieces = _graded_panels(hi) if lag == 0 else [(lo, hi)]
            s = np.concatenate([_gl_on(a, b, t, w)[0] for a, b in pieces])
            ws = np.concatenate([_gl_on(a, b, t, w)[1] for a, b in pieces])
            rules.append((s, ws))
    return rules


def _moments(params: ProblemParams, sigma: np.ndarray, dt: float, n_lags: int,
             kernel: str) -> np.ndarray:
    """``M[p, lag, k] = int_{lag dt}^{(lag+1) dt} K_k(s) ((lag+1) dt - s)^p ds`` for p = 0..3.

    ``kernel == "duhamel"``: ``K(s) = s^(gamma-1) E_{gamma,gamma}(-sigma s^gamma)``;
    ``kernel == "relaxation"``: ``K(s) = E_{gamma,1}(-sigma s^gamma)``.
    """
    # sigma is even in lambda, so most columns repeat
    distinct, back = np.unique(sigma, return_inverse=True)
    if distinct.size < sigma.size:
        return _moments(params, distinct, dt, n_lags, kernel)[:, :, back.ravel()]
    g = params.gamma
    if kernel == "duhamel":
        rules = _lag_rules(g, dt, n_lags, "power")
        ml = MLParams(g, g)
    else:
        rules = _lag_rules(g, dt, n_lags, "plain")
        ml = MLParams(g, 1.0)
    sizes = [r[0].size for r in rules]
    s_all = np.concatenate([r[0] for r in rules])
    w_all = np.concatenate([r[1] for r in rules])
    lag_of = np.repeat(np.arange(n_lags), sizes)
    offset = (lag_of + 1) * dt - s_all
    kern = mittag_leffler(ml, -np.outer(s_all**g, sigma))  # [node, lam]
    out = np.zeros((4, n_lags, sigma.size))
    for p in range(4):
        weighted = (w_all * offset**p)[:, None] * kern
        out[p] = np.add.reduceat(weighted, np.cumsum([0] + sizes[:-1]), axis=0)
    return out


def _spline_coeffs(tgrid: TimeGrid, samples: np.ndarray) -> np.ndarray:
    """Cubic-spline coefficients ``c[p, j, k]`` of ``(tau - t_j)^p`` on panel j."""
    spline = CubicSpline(tgrid.nodes, samples, axis=0)
    return spline.c[::-1]  # scipy stores the highest power first


def _causal_sum(moments: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``out[i] = sum_{j < i} sum_p moments[p, i-1-j] coeffs[p, j]``, with ``out[0] = 0``."""
    n = coeffs.shape[1]
    conv = fftconvolve(moments, coeffs, axes=1)[:, :n, :].sum(axis=0)
    out = np.zeros((n + 1, coeffs.shape[2]), dtype=complex)
    out[1:] = conv
    return out


def _by_chunks(n: int, workers: int, task) -> np.ndarray:
    if workers <= 1 or n < 2 * workers:
        return task(slice(0, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    slices = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(task, slices))
    return np.concatenate(parts, axis=-1)


def _check_same_grid(ghat: SpectralFunction, fhat_t: SpectralField, tgrid: TimeGrid) -> None:
    if ghat.grid is not fhat_t.sgrid and ghat.grid.key != fhat_t.sgrid.key:
        raise ValueError("initial data and source live on different spectral grids")
    if fhat_t.tgrid != tgrid:
        raise ValueError("source samples are not on the requested time grid")


def solve_forward_spectral(params: ProblemParams, ghat: SpectralFunction, fhat_t: SpectralField,
                           tgrid: TimeGrid, *, workers: int = 1) -> SpectralField:
    """``u_hat(t) = g_hat E_gamma(-sigma t^gamma)
    + int_0^t (t-tau)^(gamma-1) E_{gamma,gamma}(-sigma (t-tau)^gamma) f_hat(tau) / (1 + a lam^2) dtau``.

    The source is replaced by its cubic spline in ``tau``; the weakly singular
    kernel is integrated exactly against each spline piece by Gauss-Legendre
    in ``v = (t - tau)^gamma`` (16 nodes per step, graded on the first step).
    Frequencies are independent and may be split across ``workers`` threads.
    """
    _check_same_grid(ghat, fhat_t, tgrid)
    lam = ghat.grid.nodes
    sigma = np.asarray(spectral_symbol(params, lam))
    scaled = fhat_t.values / (1 + params.a * lam**2)

    def task(cols: slice) -> np.ndarray:
        free = relaxation(params, lam[cols], tgrid.nodes) * ghat.values[cols]
        if not np.any(scaled[:, cols]):
            return free
        moments = _moments(params, sigma[cols], tgrid.dt, tgrid.n_steps, "duhamel")
        return free + _causal_sum(moments, _spline_coeffs(tgrid, scaled[:, cols]))

    values = _by_chunks(lam.size, workers, task)
    return SpectralField(tgrid, ghat.grid, values)


def solve_forward_spectral_ibp(params: ProblemParams, ghat: SpectralFunction, fhat_t: SpectralField,
                               dfhat_dt: SpectralField, tgrid: TimeGrid, *,
                               workers: int = 1) -> SpectralField:
    """The same solution written after integrating the Duhamel term by parts::

        u_hat(t) = g_hat E(t) + (f_hat(t) - E(t) f_hat(0)) / (m + lam^2)
                   - 1/(m + lam^2) int_0^t E_gamma(-sigma (t-tau)^gamma) f_hat'(tau) dtau

    with ``E(t) = E_gamma(-sigma t^gamma)``. Needs the time derivative of the
    source as samples; it is never inferred by differencing.
    """
    _check_same_grid(ghat, fhat_t, tgrid)
    _check_same_grid(ghat, dfhat_dt, tgrid)
    lam = ghat.grid.nodes
    sigma = np.asarray(spectral_symbol(params, lam))
    denom = params.m + lam**2

    def task(cols: slice) -> np.ndarray:
        relax = relaxation(params, lam[cols], tgrid.nodes)
        f = fhat_t.values[:, cols]
        out = relax * ghat.values[cols] + (f - relax * f[0]) / denom[cols]
        df = dfhat_dt.values[:, cols]
        if np.any(df):
            moments = _moments(params, sigma[cols], tgrid.dt, tgrid.n_steps, "relaxation")
            out = out - _causal_sum(moments, _spline_coeffs(tgrid, df)) / denom[cols]
        return out

    values = _by_chunks(lam.size, workers, task)
    return SpectralField(tgrid, ghat.grid, values)


def _transform_rows(alpha: float, values: np.ndarray, pgrid: PhysicalGrid,
                    sgrid: SpectralGrid, what: str) -> np.ndarray:
    rows = np.atleast_2d(values)
    peak = np.max(np.abs(rows))
    edge = np.max(np.abs(rows[:, [0, -1]]))
    if peak > 0 and edge > DECAY_TOL * peak:
        warnings.warn(f"{what} does not decay at the grid ends", TruncationWarning, stacklevel=3)
    return rows @ forward_matrix(alpha, pgrid, sgrid).T


def residual_diagnostics(params: ProblemParams, uhat: SpectralField, fhat_t: SpectralField,
                         n_samples: int = 10) -> dict:
    """Spectral-ODE residual at ``n_samples`` frequencies spread over ``lam >= 0``."""
    lam = uhat.sgrid.nodes
    positive = np.nonzero(lam >= 0)[0]
    idx = positive[np.unique(np.linspace(0, positive.size - 1, n_samples).round().astype(int))]
    res = spectral_ode_residual(params, lam[idx], uhat.values[:, idx], fhat_t.values[:, idx], uhat.tgrid)
    scale = max(float(np.max(np.abs(uhat.values[:, idx]))), 1e-300)
    return {
        "residual_lambda": [float(v) for v in lam[idx]],
        "residual": [float(v) for v in np.atleast_1d(res)],
        "residual_max": float(np.max(res)),
        "residual_max_relative": float(np.max(res)) / scale,
    }


def solve_forward(params: ProblemParams, g: PhysicalFunction, f_t, grids: Grids, *,
                  workers: int = 1) -> SolutionField:
    """Transform the data, solve every frequency, transform back.

    ``f_t`` is a :class:`SolutionField` of source samples or a time-independent
    :class:`PhysicalFunction`.
    """
    pgrid, sgrid, tgrid = grids.physical, grids.spectral, grids.time
    if g.grid.key != pgrid.key:
        raise ValueError("initial data must be sampled on the physical grid")
    if isinstance(f_t, PhysicalFunction):
        f_t = SolutionField.constant(tgrid, f_t)
    if f_t.tgrid != tgrid or f_t.pgrid.key != pgrid.key:
        raise ValueError("source samples must live on the run's time and physical grids")
    ghat = SpectralFunction(sgrid, _transform_rows(params.alpha, g.values, pgrid, sgrid, "initial data")[0])
    fhat_t = SpectralField(tgrid, sgrid, _transform_rows(params.alpha, f_t.values, pgrid, sgrid, "source"))
    uhat = solve_forward_spectral(params, ghat, fhat_t, tgrid, workers=workers)
    u = uhat.values @ inverse_matrix(params.alpha, sgrid, pgrid).T
    diagnostics = residual_diagnostics(params, uhat, fhat_t)
    initial = l2_norm(params.alpha, PhysicalFunction(pgrid, u[0] - g.values))
    norm_g = l2_norm(params.alpha, g)
    diagnostics["initial_condition_error"] = float(initial / norm_g) if norm_g > 0 else float(initial)
    return SolutionField(tgrid, pgrid, u, {"diagnostics": diagnostics, "spectral": uhat})
