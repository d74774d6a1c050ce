"""Recovery of a space-dependent source from initial and final data.

Given ``u(0) = phi`` and ``u(T) = psi``, each frequency obeys

    u_hat(t) = f_hat / (m + lam^2) + (phi_hat - f_hat / (m + lam^2)) E(t),
    E(t) = E_gamma(-sigma(lam) t^gamma),

which is solved for ``f_hat`` at ``t = T`` and then back-substituted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dunkl import (
    PhysicalFunction,
    ProblemParams,
    SpectralFunction,
    dunkl_transform,
    inverse_dunkl_transform,
    inverse_matrix,
    l2_norm,
    sobolev_h2_norm,
)
from .forward import Grids, SolutionField, SpectralField, relaxation, residual_diagnostics
from .fractional import TimeGrid
from .specfun import MLParams, mittag_leffler

__all__ = [
    "DegenerateHorizonError",
    "SourcePair",
    "StabilityRecord",
    "recover_source_spectral",
    "recover_state_spectral",
    "solve_isp",
    "stability_report",
]


class DegenerateHorizonError(ValueError):
    """The final time is not positive, so the data cannot determine the source."""


def _final_relaxation(params: ProblemParams, lam: np.ndarray) -> np.ndarray:
    if not params.T > 0:
        raise DegenerateHorizonError("T must be positive")
    return relaxation(params, lam, [params.T])[0]


def conditioning(params: ProblemParams) -> float:
    """Smallest possible denominator ``1 - E_gamma(-min(m, 1/a) T^gamma)`` over all frequencies."""
    lowest = min(params.m, 1.0 / params.a)
    return 1.0 - float(mittag_leffler(MLParams(params.gamma), -lowest * params.T**params.gamma))


def recover_source_spectral(params: ProblemParams, phihat: SpectralFunction,
                            psihat: SpectralFunction) -> SpectralFunction:
    """``f_hat = (m + lam^2) (psi_hat - phi_hat E_T) / (1 - E_T)`` with ``E_T = E(T)``.

    ``info`` carries the smallest denominator on the grid and its a-priori lower bound.
    """
    lam = phihat.grid.nodes
    e_final = _final_relaxation(params, lam)
    denom = 1.0 - e_final
    values = (params.m + lam**2) * (psihat.values - phihat.values * e_final) / denom
    info = {"min_denominator": float(np.min(denom)), "denominator_bound": conditioning(params)}
    return SpectralFunction(phihat.grid, values, info)


def recover_state_spectral(params: ProblemParams, phihat: SpectralFunction, psihat: SpectralFunction,
                           tgrid: TimeGrid) -> SpectralField:
    """``u_hat(t) = (1 - E(t)) / (1 - E_T) psi_hat - (E_T - E(t)) / (1 - E_T) phi_hat``.

    ``E`` is evaluated once on all of ``tgrid`` and ``E_T`` is taken from its last
    row, so the coefficients are exactly 0 and 1 at both ends.
    """
    if not params.T > 0:
        raise DegenerateHorizonError("T must be positive")
    if not np.isclose(tgrid.T, params.T, rtol=0, atol=1e-14 * params.T):
        raise ValueError("the time grid must end at T")
    lam = phihat.grid.nodes
    relax = relaxation(params, lam, tgrid.nodes)
    e_final = relax[-1]
    denom = 1.0 - e_final
    values = ((1.0 - relax) / denom) * psihat.values - ((e_final - relax) / denom) * phihat.values
    return SpectralField(tgrid, phihat.grid, values)


@dataclass(frozen=True, eq=False)
class SourcePair:
    """Recovered state ``u(t, x)`` and source ``f(x)``, with diagnostics."""

    u: SolutionField
    f: PhysicalFunction
    diagnostics: dict = field(default_factory=dict)
    uhat: SpectralField | None = None
    fhat: SpectralFunction | None = None


def solve_isp(params: ProblemParams, phi: PhysicalFunction, psi: PhysicalFunction, grids: Grids) -> SourcePair:
    pgrid, sgrid, tgrid = grids.physical, grids.spectral, grids.time
    phihat = dunkl_transform(params.alpha, phi, sgrid)
    psihat = dunkl_transform(params.alpha, psi, sgrid)
    fhat = recover_source_spectral(params, phihat, psihat)
    uhat = recover_state_spectral(params, phihat, psihat, tgrid)
    f = inverse_dunkl_transform(params.alpha, fhat, pgrid)
    u = uhat.values @ inverse_matrix(params.alpha, sgrid, pgrid).T

    def rel(diff: np.ndarray, ref: PhysicalFunction) -> float:
        scale = l2_norm(params.alpha, ref)
        err = l2_norm(params.alpha, PhysicalFunction(pgrid, diff))
        return err / scale if scale > 0 else err

    diagnostics = residual_diagnostics(params, uhat, SpectralField.constant(tgrid, fhat))
    diagnostics.update({
        "initial_condition_error": rel(u[0] - phi.values, phi),
        "final_condition_error": rel(u[-1] - psi.values, psi),
        "min_denominator": fhat.info["min_denominator"],
        "denominator_bound": fhat.info["denominator_bound"],
        "truncated": bool(phihat.truncated or psihat.truncated or f.truncated),
    })
    return SourcePair(SolutionField(tgrid, pgrid, u), f, diagnostics, uhat, fhat)


@dataclass(frozen=True)
class StabilityRecord:
    psi_diff: float
    phi_diff: float
    f_diff: float
    u_diff: float
    source_ratio: float
    state_ratio: float


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num == 0 else float("inf")


def stability_report(params: ProblemParams, data: tuple[PhysicalFunction, PhysicalFunction],
                     perturbed: tuple[PhysicalFunction, PhysicalFunction], grids: Grids) -> StabilityRecord:
    """Data and solution differences between two ISP runs.

    ``u_diff`` is the max over the time grid of the H2 norm. The ratios divide
    the source and state differences by ``sqrt(psi_diff^2 + phi_diff^2)``.
    """
    alpha, sgrid = params.alpha, grids.spectral
    (phi, psi), (phi_d, psi_d) = data, perturbed
    exact = solve_isp(params, phi, psi, grids)
    pert = solve_isp(params, phi_d, psi_d, grids)

    def h2_of_difference(a: PhysicalFunction, b: PhysicalFunction) -> float:
        diff = PhysicalFunction(a.grid, a.values - b.values)
        return sobolev_h2_norm(alpha, dunkl_transform(alpha, diff, sgrid))

    psi_diff = h2_of_difference(psi, psi_d)
    phi_diff = h2_of_difference(phi, phi_d)
    f_diff = l2_norm(alpha, PhysicalFunction(grids.physical, exact.f.values - pert.f.values))
    du = exact.uhat.values - pert.uhat.values
    u_diff = max(sobolev_h2_norm(alpha, SpectralFunction(sgrid, row)) for row in du)
    data_size = float(np.hypot(psi_diff, phi_diff))
    return StabilityRecord(psi_diff, phi_diff, f_diff, u_diff,
                           _ratio(f_diff, data_size), _ratio(u_diff, data_size))
