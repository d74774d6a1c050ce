"""Dunkl harmonic analysis on sampled functions.

The measure ``d mu_alpha(x) = |x|^(2 alpha + 1) / (2^(alpha+1) Gamma(alpha+1)) dx``,
the Dunkl operator and its square on symmetric grids, the Dunkl transform and
its inverse by Gauss-Legendre quadrature, and the weighted L2 / H2 norms.

Grids and functions are immutable after construction (their arrays are
read-only), so transforms may safely run on node partitions in parallel.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .specfun import ALPHA_MAX, dunkl_kernel, gamma_fn

__all__ = [
    "ProblemParams",
    "PhysicalGrid",
    "SpectralGrid",
    "PhysicalFunction",
    "SpectralFunction",
    "AsymmetricGridError",
    "GridTooCoarseError",
    "TruncationWarning",
    "measure_weight",
    "dunkl_apply",
    "dunkl_apply_sq",
    "dunkl_transform",
    "inverse_dunkl_transform",
    "l2_norm",
    "sobolev_h2_norm",
    "quadrature_error_estimate",
]

DECAY_TOL = 1e-10
H2_DECAY_TOL = 1e-8


class AsymmetricGridError(ValueError):
    """Grid nodes are not symmetric about the origin."""


class GridTooCoarseError(ArithmeticError):
    """Estimated quadrature error exceeds the requested tolerance."""


class TruncationWarning(UserWarning):
    """Samples do not decay at the ends of the grid; the truncated integral is inexact."""


@dataclass(frozen=True)
class ProblemParams:
    """Model constants of the Dunkl pseudo-parabolic equation."""

    alpha: float = -0.5
    a: float = 1.0
    m: float = 1.0
    gamma: float = 1.0
    T: float = 1.0

    def __post_init__(self) -> None:
        if not -0.5 <= self.alpha <= ALPHA_MAX:
            raise ValueError(f"alpha must lie in [-1/2, {ALPHA_MAX}], got {self.alpha}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _check_symmetric(nodes: np.ndarray) -> None:
    if nodes.ndim != 1 or nodes.size < 2:
        raise AsymmetricGridError("a grid needs at least two nodes")
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("grid nodes must be strictly increasing")
    scale = max(1.0, float(np.max(np.abs(nodes))))
    if np.max(np.abs(nodes + nodes[::-1])) > 1e-12 * scale:
        raise AsymmetricGridError("grid nodes must be symmetric about 0")


def _gl_half_axis(extent: float, n_half: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    if extent <= 0:
        raise ValueError("extent must be positive")
    if n_half < 1 or panels < 1 or n_half % panels:
        raise ValueError("n_half must be a positive multiple of panels")
    t, w = leggauss(n_half // panels)
    edges = np.linspace(0.0, extent, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w])


@dataclass(frozen=True, eq=False)
class PhysicalGrid:
    """Symmetric sample grid in x with plain ``dx`` quadrature weights.

    The measure density is folded in at transform time, since it depends on alpha.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self) -> None:
        nodes = _frozen(self.nodes, float)
        weights = _frozen(self.weights, float)
        _check_symmetric(nodes)
        if weights.shape != nodes.shape or np.any(weights <= 0):
            raise ValueError("weights must be positive and match the nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def gauss_legendre(cls, extent: float = 12.0, n_half: int = 96, panels: int = 1) -> "PhysicalGrid":
        """Gauss-Legendre panels on ``[-extent, 0]`` and ``[0, extent]``."""
        x, w = _gl_half_axis(extent, n_half, panels)
        return cls(x, w, kind="gauss-legendre")

    @classmethod
    def uniform(cls, extent: float, n: int) -> "PhysicalGrid":
        """``n`` equispaced nodes on ``[-extent, extent]`` with trapezoid weights."""
        if n < 2:
            raise ValueError("need at least two nodes")
        x = np.linspace(-extent, extent, n)
        w = np.full(n, x[1] - x[0])
        w[[0, -1]] *= 0.5
        return cls(x, w, kind="uniform")

    def __repr__(self) -> str:
        return f"PhysicalGrid(kind={self.kind!r}, size={self.size}, extent={self.nodes[-1]:.6g})"

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def key(self) -> str:
        return _digest(self.nodes, self.weights)

    def mirror_index(self) -> np.ndarray:
        """Index of ``-x_j`` for every node ``x_j``."""
        return np.arange(self.size)[::-1]


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Symmetric lambda-grid whose weights already include the ``mu_alpha`` density."""

    alpha: float
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self) -> None:
        nodes = _frozen(self.nodes, float)
        weights = _frozen(self.weights, float)
        _check_symmetric(nodes)
        if weights.shape != nodes.shape or np.any(weights <= 0):
            raise ValueError("weights must be positive and match the nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def gauss_legendre(cls, alpha: float, extent: float = 12.0, n_half: int = 96,
                       panels: int = 1) -> "SpectralGrid":
        lam, w = _gl_half_axis(extent, n_half, panels)
        return cls(alpha, lam, w * measure_weight(alpha, lam), kind="gauss-legendre")

    def __repr__(self) -> str:
        return (f"SpectralGrid(alpha={self.alpha}, kind={self.kind!r}, size={self.size}, "
                f"extent={self.extent:.6g})")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def extent(self) -> float:
        return float(self.nodes[-1])

    @property
    def key(self) -> str:
        return _digest(self.nodes, self.weights)


def _digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha1()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class PhysicalFunction:
    """Complex samples ``f(x_j)`` on a :class:`PhysicalGrid`."""

    grid: PhysicalGrid
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = _frozen(self.values, complex)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(f"expected {self.grid.size} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def __repr__(self) -> str:
        return f"PhysicalFunction(grid={self.grid!r}, info={self.info!r})"

    @classmethod
    def from_callable(cls, grid: PhysicalGrid, fn) -> "PhysicalFunction":
        return cls(grid, fn(grid.nodes))

    @property
    def truncated(self) -> bool:
        return bool(self.info.get("truncated", False))


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex samples ``f_hat(lambda_k)`` on a :class:`SpectralGrid`."""

    grid: SpectralGrid
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = _frozen(self.values, complex)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(f"expected {self.grid.size} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def __repr__(self) -> str:
        return f"SpectralFunction(grid={self.grid!r}, info={self.info!r})"

    @classmethod
    def from_callable(cls, grid: SpectralGrid, fn) -> "SpectralFunction":
        return cls(grid, fn(grid.nodes))

    @property
    def truncated(self) -> bool:
        return bool(self.info.get("truncated", False))


AnyFunction = Union[PhysicalFunction, SpectralFunction]


def measure_weight(alpha: float, x):
    """Density of ``mu_alpha`` at ``x``."""
    if alpha < -0.5:
        raise ValueError(f"alpha must be >= -1/2, got {alpha}")
    return np.abs(x) ** (2 * alpha + 1) / (2 ** (alpha + 1) * gamma_fn(alpha + 1))


# -- finite differences ------------------------------------------------------

def _fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at ``z`` on the stencil ``x``."""
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@lru_cache(maxsize=32)
def _derivative_stencils(key: str, nodes_bytes: bytes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # 5-point stencils: centred in the interior, one-sided near the ends.
    nodes = np.frombuffer(nodes_bytes, dtype=float)
    n = nodes.size
    idx = np.clip(np.arange(n) - 2, 0, n - 5)[:, None] + np.arange(5)[None, :]
    d1 = np.empty((n, 5))
    d2 = np.empty((n, 5))
    for j in range(n):
        c = _fd_weights(nodes[j], nodes[idx[j]], 2)
        d1[j] = c[:, 1]
        d2[j] = c[:, 2]
    return idx, d1, d2


def _derivatives(grid: PhysicalGrid, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if grid.size < 5:
        raise ValueError("the Dunkl operator needs at least 5 grid nodes")
    idx, d1, d2 = _derivative_stencils(grid.key, grid.nodes.tobytes())
    stencil = values[idx]
    return np.sum(d1 * stencil, axis=1), np.sum(d2 * stencil, axis=1)


def _even_limit_at_origin(x: np.ndarray, values: np.ndarray) -> complex:
    """Value at 0 of a smooth even function, by quadratic extrapolation in ``x^2``."""
    pos = np.flatnonzero(x > 0)[:3]
    s = x[pos] ** 2
    total = 0.0
    for i in range(len(pos)):
        others = np.delete(s, i)
        total = total + values[pos[i]] * np.prod(others / (others - s[i]))
    return total


def _even_odd(f: PhysicalFunction) -> tuple[np.ndarray, np.ndarray]:
    reflected = f.values[f.grid.mirror_index()]
    return 0.5 * (f.values + reflected), 0.5 * (f.values - reflected)


def dunkl_apply(alpha: float, f: PhysicalFunction) -> PhysicalFunction:
    """``Lambda_alpha f = f' + (alpha + 1/2) (f(x) - f(-x)) / x`` on the grid.

    Derivatives use 5-point stencils (4th order on uniform grids). At ``x = 0``
    the limit ``(2 alpha + 2) f'(0)`` is used.
    """
    x = f.grid.nodes
    df, _ = _derivatives(f.grid, f.values)
    _, odd = _even_odd(f)
    zero = x == 0.0
    safe_x = np.where(zero, 1.0, x)
    out = df + (2 * alpha + 1) * odd / safe_x
    out[zero] = (2 * alpha + 2) * df[zero]
    return PhysicalFunction(f.grid, out)


def dunkl_apply_sq(alpha: float, f: PhysicalFunction) -> PhysicalFunction:
    """``Lambda_alpha^2 f = f'' + (2 alpha + 1) f'/x - (alpha + 1/2) (f(x) - f(-x)) / x^2``.

    Evaluated on the even and odd parts separately,
    ``e'' + (2 alpha + 1) e'/x`` and ``o'' + (2 alpha + 1) (o/x)'``. Differencing
    the smooth quotient ``o/x`` avoids dividing stencil error by ``x`` near the
    origin. At ``x = 0`` the limit ``(2 alpha + 2) f''(0)`` is used, with
    ``f''(0)`` from the centred 5-point stencil.
    """
    x = f.grid.nodes
    even, odd = _even_odd(f)
    de1, de2 = _derivatives(f.grid, even)
    do1, do2 = _derivatives(f.grid, odd)
    zero = x == 0.0
    safe_x = np.where(zero, 1.0, x)
    quotient = odd / safe_x
    if zero.any():
        quotient[zero] = _even_limit_at_origin(x, quotient)
    dq, _ = _derivatives(f.grid, quotient)
    k = 2 * alpha + 1
    out = de2 + k * de1 / safe_x + do2 + k * dq
    out[zero] = (2 * alpha + 2) * de2[zero]
    return PhysicalFunction(f.grid, out)


# -- transforms --------------------------------------------------------------

def _kernel_rows(alpha: float, x: np.ndarray, lam: np.ndarray, workers: int) -> np.ndarray:
    """Matrix ``D_alpha(i x_j lam_k)`` with rows indexed by ``lam``."""
    if workers <= 1 or lam.size < 2 * workers:
        return dunkl_kernel(alpha, x[None, :], lam[:, None])
    chunks = np.array_split(lam, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda c: dunkl_kernel(alpha, x[None, :], c[:, None]), chunks)
        return np.vstack(list(parts))


@lru_cache(maxsize=16)
def _kernel_cached(alpha: float, pkey: str, skey: str, x_bytes: bytes, lam_bytes: bytes) -> np.ndarray:
    x = np.frombuffer(x_bytes, dtype=float)
    lam = np.frombuffer(lam_bytes, dtype=float)
    kern = _kernel_rows(alpha, x, lam, 1)
    kern.flags.writeable = False
    return kern


def _kernel(alpha: float, pgrid: PhysicalGrid, sgrid: SpectralGrid, workers: int = 1) -> np.ndarray:
    if workers > 1:
        return _kernel_rows(alpha, pgrid.nodes, sgrid.nodes, workers)
    return _kernel_cached(float(alpha), pgrid.key, sgrid.key,
                          pgrid.nodes.tobytes(), sgrid.nodes.tobytes())


def _check_alpha(alpha: float, sgrid: SpectralGrid) -> None:
    if not math.isclose(alpha, sgrid.alpha, rel_tol=0, abs_tol=1e-14):
        raise ValueError(f"spectral grid was built for alpha={sgrid.alpha}, not {alpha}")


def _decays(values: np.ndarray, tol: float) -> bool:
    peak = np.max(np.abs(values), axis=-1)
    ends = np.maximum(np.abs(values[..., 0]), np.abs(values[..., -1]))
    return bool(np.all(ends <= tol * peak))


def forward_matrix(alpha: float, pgrid: PhysicalGrid, sgrid: SpectralGrid) -> np.ndarray:
    """Matrix ``A`` with ``f_hat = A @ f`` for samples on ``pgrid``."""
    _check_alpha(alpha, sgrid)
    w = pgrid.weights * measure_weight(alpha, pgrid.nodes)
    return np.conj(_kernel(alpha, pgrid, sgrid)) * w[None, :]


def inverse_matrix(alpha: float, sgrid: SpectralGrid, pgrid: PhysicalGrid) -> np.ndarray:
    """Matrix ``B`` with ``f = B @ f_hat`` for samples on ``sgrid``."""
    _check_alpha(alpha, sgrid)
    return _kernel(alpha, pgrid, sgrid).T * sgrid.weights[None, :]


def quadrature_error_estimate(alpha: float, pgrid: PhysicalGrid, sgrid: SpectralGrid,
                              width: float = 1.0, direction: str = "forward") -> float:
    """Max error of the quadrature on a Gaussian of the given width, relative to its peak.

    Uses ``F_alpha(exp(-x^2 / (2 s^2)))(lam) = s^(2 alpha + 2) exp(-s^2 lam^2 / 2)``.
    """
    s = float(width)
    x, lam = pgrid.nodes, sgrid.nodes
    if direction == "forward":
        approx = forward_matrix(alpha, pgrid, sgrid) @ np.exp(-x**2 / (2 * s * s))
        exact = s ** (2 * alpha + 2) * np.exp(-(s * lam) ** 2 / 2)
    else:
        approx = inverse_matrix(alpha, sgrid, pgrid) @ np.exp(-(s * lam) ** 2 / 2)
        exact = s ** (-(2 * alpha + 2)) * np.exp(-x**2 / (2 * s * s))
    return float(np.max(np.abs(approx - exact)) / np.max(np.abs(exact)))


def _rms_width(alpha: float, x: np.ndarray, w: np.ndarray, values: np.ndarray) -> float:
    mass = np.sum(w * np.abs(values) ** 2)
    if mass == 0:
        return 1.0
    # exp(-x^2 / s^2) has second moment (alpha + 1) s^2 against |x|^(2 alpha + 1)
    return float(np.sqrt(np.sum(w * x**2 * np.abs(values) ** 2) / (mass * (alpha + 1)))) or 1.0


def _flag_truncation(values: np.ndarray, tol: float, what: str) -> dict:
    if np.any(values != 0) and not _decays(values, tol):
        warnings.warn(f"{what} does not decay at the grid ends", TruncationWarning, stacklevel=3)
        return {"truncated": True}
    return {}


def dunkl_transform(alpha: float, f: PhysicalFunction, sgrid: SpectralGrid, *,
                    tol: float | None = None, workers: int = 1) -> SpectralFunction:
    """Dunkl transform ``f_hat(lam) = int f(x) D_alpha(-i x lam) d mu_alpha(x)``.

    With ``tol`` given, raises :class:`GridTooCoarseError` when the quadrature
    error estimate on a Gaussian of the data's width exceeds it.
    """
    info = _flag_truncation(f.values, DECAY_TOL, "input function")
    if tol is not None:
        w = f.grid.weights * measure_weight(alpha, f.grid.nodes)
        width = _rms_width(alpha, f.grid.nodes, w, f.values)
        est = quadrature_error_estimate(alpha, f.grid, sgrid, width, "forward")
        if est > tol:
            raise GridTooCoarseError(f"estimated quadrature error {est:.2e} > {tol:.2e}")
        info["quadrature_error"] = est
    if workers > 1:
        _check_alpha(alpha, sgrid)
        w = f.grid.weights * measure_weight(alpha, f.grid.nodes)
        kern = _kernel(alpha, f.grid, sgrid, workers)
        values = np.conj(kern) @ (w * f.values)
    else:
        values = forward_matrix(alpha, f.grid, sgrid) @ f.values
    return SpectralFunction(sgrid, values, info)


def inverse_dunkl_transform(alpha: float, fhat: SpectralFunction, pgrid: PhysicalGrid, *,
                            tol: float | None = None, workers: int = 1) -> PhysicalFunction:
    """Inverse transform ``f(x) = int f_hat(lam) D_alpha(i x lam) d mu_alpha(lam)``."""
    info = _flag_truncation(fhat.values, DECAY_TOL, "spectral function")
    if tol is not None:
        # a spectral Gaussian of width w is the transform of a physical one of width 1/w
        width = _rms_width(alpha, fhat.grid.nodes, fhat.grid.weights, fhat.values)
        est = quadrature_error_estimate(alpha, pgrid, fhat.grid, 1.0 / max(width, 1e-12), "inverse")
        if est > tol:
            raise GridTooCoarseError(f"estimated quadrature error {est:.2e} > {tol:.2e}")
        info["quadrature_error"] = est
    if workers > 1:
        _check_alpha(alpha, fhat.grid)
        kern = _kernel(alpha, pgrid, fhat.grid, workers)
        values = kern.T @ (fhat.grid.weights * fhat.values)
    else:
        values = inverse_matrix(alpha, fhat.grid, pgrid) @ fhat.values
    return PhysicalFunction(pgrid, values, info)


# -- norms -------------------------------------------------------------------

def l2_norm(alpha: float, f: AnyFunction) -> float:
    """``||f||_{2,alpha}`` by weighted quadrature."""
    if isinstance(f, SpectralFunction):
        _check_alpha(alpha, f.grid)
        w = f.grid.weights
    else:
        w = f.grid.weights * measure_weight(alpha, f.grid.nodes)
    return float(np.sqrt(np.sum(w * np.abs(f.values) ** 2)))


def sobolev_h2_norm(alpha: float, fhat: SpectralFunction) -> float:
    """``||f||_{H^2_alpha} = ( int |(1 + lam^2) f_hat(lam)|^2 d mu_alpha(lam) )^(1/2)``."""
    _check_alpha(alpha, fhat.grid)
    lam = fhat.grid.nodes
    weighted = (1 + lam**2) * fhat.values
    _flag_truncation(weighted, H2_DECAY_TOL, "(1 + lam^2) f_hat")
    return float(np.sqrt(np.sum(fhat.grid.weights * np.abs(weighted) ** 2)))
