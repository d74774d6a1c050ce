"""L1 discretization of the Caputo derivative and the spectral-ODE residual check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .dunkl import ProblemParams
from .specfun import gamma_fn

__all__ = ["TimeGrid", "caputo_l1", "spectral_ode_residual"]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform nodes ``0 = t_0 < ... < t_N = T``."""

    T: float
    n_steps: int = 256

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n_steps < 2:
            raise ValueError("a time grid needs at least 3 nodes")
        nodes = np.linspace(0.0, self.T, self.n_steps + 1)
        nodes.flags.writeable = False
        object.__setattr__(self, "_nodes", nodes)

    @classmethod
    def uniform(cls, T: float, n_steps: int = 256) -> "TimeGrid":
        return cls(float(T), int(n_steps))

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def size(self) -> int:
        return self.n_steps + 1

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and (self.T, self.n_steps) == (other.T, other.n_steps)

    def __hash__(self) -> int:
        return hash((self.T, self.n_steps))


def _l1_weights(gamma: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return (k + 1) ** (1 - gamma) - k ** (1 - gamma)


def caputo_l1(gamma: float, series, dt: float) -> np.ndarray:
    """L1 approximation of the Caputo derivative of order ``gamma`` at every node.

    ``series`` holds samples on a uniform grid along axis 0 (extra axes are
    treated as independent series). The value at ``t_0`` is 0.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"caputo_l1 needs 0 < gamma < 1, got {gamma}")
    g = np.asarray(series)
    if g.shape[0] < 3:
        raise ValueError("caputo_l1 needs at least 3 samples")
    n = g.shape[0] - 1
    b = _l1_weights(gamma, n)
    lower = toeplitz(b, np.zeros(n))
    increments = np.diff(g, axis=0)
    out = np.zeros_like(g, dtype=np.result_type(g, float))
    out[1:] = np.tensordot(lower, increments, axes=(1, 0))
    return out * (dt ** (-gamma) / gamma_fn(2 - gamma))


def _time_derivative(params: ProblemParams, series: np.ndarray, dt: float) -> np.ndarray:
    if params.gamma == 1:
        return np.gradient(series, dt, axis=0, edge_order=2)
    return caputo_l1(params.gamma, series, dt)


def spectral_ode_residual(params: ProblemParams, lam, uhat_series, fhat_series, tgrid: TimeGrid,
                          t_min: float | None = None):
    """Max of ``|D^gamma u + sigma u - f / (1 + a lam^2)|`` over nodes with ``t >= t_min``.

    ``t_min`` defaults to ``T / 4``. The L1 error near ``t = 0`` is O(1) for
    solutions that behave like ``t^gamma``, so early nodes would hide the
    convergence in ``dt``. For ``gamma = 1`` a second-order central difference
    replaces the Caputo derivative. Series are indexed ``[time, lambda]`` when
    ``lam`` is an array; the result then has one entry per ``lam``.
    """
    lam_arr = np.asarray(lam, dtype=float)
    u = np.asarray(uhat_series)
    f = np.asarray(fhat_series)
    if u.shape != f.shape or u.shape[0] != tgrid.size:
        raise ValueError("series must share the time grid")
    sigma = (params.m + lam_arr**2) / (1 + params.a * lam_arr**2)
    resid = _time_derivative(params, u, tgrid.dt) + sigma * u - f / (1 + params.a * lam_arr**2)
    cutoff = tgrid.T / 4 if t_min is None else t_min
    keep = tgrid.nodes >= cutoff
    keep[0] = False
    if not keep.any():
        raise ValueError("no time nodes at or after t_min")
    out = np.max(np.abs(resid[keep]), axis=0)
    return float(out) if np.ndim(out) == 0 else out
