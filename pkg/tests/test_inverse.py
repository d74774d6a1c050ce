import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dunkl_isp.dunkl import PhysicalFunction, ProblemParams, SpectralFunction, SpectralGrid, l2_norm
from dunkl_isp.forward import Grids, SolutionField, SpectralField, relaxation, solve_forward, \
    solve_forward_spectral
from dunkl_isp.fractional import TimeGrid
from dunkl_isp.inverse import (
    DegenerateHorizonError,
    conditioning,
    recover_source_spectral,
    recover_state_spectral,
    solve_isp,
    stability_report,
)
from oracles import E1, INV_ONE_MINUS_E1, closed_form_source, closed_form_state

# calibrated once on the sweep below: worst source ratio 2.27, worst state ratio 0.85
SOURCE_RATIO_BOUND = 3.0
STATE_RATIO_BOUND = 1.2

SQRT2 = math.sqrt(2.0)


def small_grid(alpha=-0.5):
    return SpectralGrid.gauss_legendre(alpha, 10.0, 32)


class TestSourceFormula:
    def test_zero_data(self):
        params = ProblemParams(gamma=0.5)
        sg = small_grid()
        zero = SpectralFunction(sg, np.zeros(sg.size))
        assert not np.any(recover_source_spectral(params, zero, zero).values)

    @pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
    def test_exponential_case(self, eps):
        params = ProblemParams(alpha=-0.5, a=1, m=1, gamma=1, T=1)
        sg = small_grid()
        lam = sg.nodes
        zero = SpectralFunction(sg, np.zeros(sg.size))
        psihat = SpectralFunction(sg, eps / SQRT2 * np.exp(-lam**2 / 4))
        got = recover_source_spectral(params, zero, psihat).values
        expected = eps * (1 + lam**2) * np.exp(-lam**2 / 4) / (SQRT2 * (1 - E1))
        assert np.max(np.abs(got - expected)) < 1e-13 * eps * 100

    @pytest.mark.parametrize("gamma, a, m", [(0.3, 0.5, 2.0), (0.7, 2.0, 0.5), (1.0, 1.0, 1.0)])
    def test_free_decay_needs_no_source(self, gamma, a, m):
        params = ProblemParams(alpha=0.0, a=a, m=m, gamma=gamma, T=1.3)
        sg = small_grid(0.0)
        phihat = SpectralFunction(sg, np.exp(-sg.nodes**2 / 3))
        e_final = relaxation(params, sg.nodes, [params.T])[0]
        psihat = SpectralFunction(sg, phihat.values * e_final)
        fhat = recover_source_spectral(params, phihat, psihat)
        assert np.max(np.abs(fhat.values)) < 1e-13
        # and the forward solver with that source carries phi to psi
        tg = TimeGrid.uniform(params.T, 16)
        zero = SpectralField(tg, sg, np.zeros((tg.size, sg.size)))
        uhat = solve_forward_spectral(params, phihat, zero, tg)
        assert np.max(np.abs(uhat.values[-1] - psihat.values)) < 1e-13

    @given(st.sampled_from([0.2, 0.5, 0.9, 1.0]), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.05, 5))
    @settings(max_examples=30, deadline=None)
    def test_denominator_in_unit_interval(self, gamma, a, m, T):
        params = ProblemParams(a=a, m=m, gamma=gamma, T=T)
        sg = small_grid()
        ones = SpectralFunction(sg, np.ones(sg.size))
        info = recover_source_spectral(params, ones, ones).info
        denom = 1 - relaxation(params, sg.nodes, [T])[0]
        assert np.all((denom > 0) & (denom < 1))
        assert info["min_denominator"] >= info["denominator_bound"] * (1 - 1e-12)
        assert 0 < conditioning(params) < 1

    def test_degenerate_horizon(self):
        from dunkl_isp.inverse import _final_relaxation

        params = ProblemParams()
        object.__setattr__(params, "T", 0.0)
        with pytest.raises(DegenerateHorizonError):
            _final_relaxation(params, np.zeros(3))
        assert issubclass(DegenerateHorizonError, ValueError)


class TestStateFormula:
    @pytest.mark.parametrize("gamma", [0.25, 0.6, 1.0])
    def test_interpolates_both_ends(self, gamma):
        params = ProblemParams(alpha=0.5, a=0.5, m=2.0, gamma=gamma, T=2.0)
        sg = small_grid(0.5)
        rng = np.random.default_rng(3)
        phihat = SpectralFunction(sg, rng.normal(size=sg.size) + 1j * rng.normal(size=sg.size))
        psihat = SpectralFunction(sg, rng.normal(size=sg.size))
        uhat = recover_state_spectral(params, phihat, psihat, TimeGrid.uniform(2.0, 16))
        assert np.all(np.abs(uhat.values[0] - phihat.values) <= 1e-13 * np.abs(phihat.values))
        assert np.all(np.abs(uhat.values[-1] - psihat.values) <= 1e-13 * np.abs(psihat.values))

    def test_exponential_case(self):
        params = ProblemParams(gamma=1.0)
        sg = small_grid()
        tg = TimeGrid.uniform(1.0, 20)
        psihat = SpectralFunction(sg, np.exp(-sg.nodes**2 / 4) / SQRT2)
        zero = SpectralFunction(sg, np.zeros(sg.size))
        uhat = recover_state_spectral(params, zero, psihat, tg)
        expected = np.outer((1 - np.exp(-tg.nodes)) * INV_ONE_MINUS_E1, psihat.values)
        assert np.max(np.abs(uhat.values - expected)) < 1e-14

    def test_time_grid_must_end_at_horizon(self):
        params = ProblemParams(T=1.0)
        sg = small_grid()
        ones = SpectralFunction(sg, np.ones(sg.size))
        with pytest.raises(ValueError):
            recover_state_spectral(params, ones, ones, TimeGrid.uniform(2.0, 8))


class TestSolveIsp:
    def test_zero(self):
        params = ProblemParams()
        grids = Grids.default(params, n_steps=16)
        zero = PhysicalFunction(grids.physical, np.zeros(grids.physical.size))
        pair = solve_isp(params, zero, zero, grids)
        assert not np.any(pair.f.values) and not np.any(pair.u.values)

    @pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
    def test_closed_forms(self, eps):
        params = ProblemParams(alpha=-0.5, a=1, m=1, gamma=1, T=1)
        grids = Grids.default(params, n_steps=32)
        x, t = grids.physical.nodes, grids.time.nodes
        zero = PhysicalFunction(grids.physical, np.zeros(x.size))
        psi = PhysicalFunction(grids.physical, eps * np.exp(-x**2))
        pair = solve_isp(params, zero, psi, grids)
        assert np.max(np.abs(pair.f.values - closed_form_source(eps, x))) < 1e-10 * eps
        assert np.max(np.abs(pair.u.values - closed_form_state(eps, t, x))) < 1e-12 * eps
        d = pair.diagnostics
        assert d["initial_condition_error"] == 0.0
        assert d["final_condition_error"] < 1e-12
        assert d["residual_max_relative"] < 1e-2
        assert not d["truncated"]

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), st.sampled_from([0.4, 1.0]))
    def test_linear(self, c, gamma):
        params = ProblemParams(alpha=0.0, gamma=gamma)
        grids = Grids.default(params, n_steps=8)
        x = grids.physical.nodes
        phi = PhysicalFunction(grids.physical, np.exp(-(x - 0.5) ** 2))
        psi = PhysicalFunction(grids.physical, 0.3 * np.exp(-x**2))
        base = solve_isp(params, phi, psi, grids)
        scaled = solve_isp(params, PhysicalFunction(grids.physical, c * phi.values),
                           PhysicalFunction(grids.physical, c * psi.values), grids)
        for a, b in ((scaled.f.values, base.f.values), (scaled.u.values, base.u.values)):
            assert np.max(np.abs(a - c * b)) <= 1e-12 * abs(c) * np.max(np.abs(b))

    def test_forward_consistency(self):
        params = ProblemParams(alpha=0.0, a=0.5, m=2.0, gamma=0.6)
        grids = Grids.default(params, n_steps=64)
        x = grids.physical.nodes
        phi = PhysicalFunction(grids.physical, np.exp(-x**2))
        psi = PhysicalFunction(grids.physical, 0.4 * np.exp(-(x - 0.5) ** 2))
        pair = solve_isp(params, phi, psi, grids)
        u = solve_forward(params, phi, pair.f, grids)
        err = l2_norm(0.0, PhysicalFunction(grids.physical, u.values[-1] - psi.values))
        assert err / l2_norm(0.0, psi) < 1e-4

    def test_recovers_forward_source(self):
        params = ProblemParams(alpha=0.5, a=1.0, m=4.0, gamma=0.5)
        # u(T) decays only like exp(-sqrt(m) |x|); extent * spectral extent stays within the Bessel range
        grids = Grids.default(params, extent=16.5, n_half=192, spectral_n_half=192, n_steps=128)
        x = grids.physical.nodes
        phi = PhysicalFunction(grids.physical, np.exp(-x**2))
        f_star = PhysicalFunction(grids.physical, np.exp(-x**2 / 2) * (1 - x**2 / 3))
        psi = solve_forward(params, phi, SolutionField.constant(grids.time, f_star), grids).at(-1)
        pair = solve_isp(params, phi, psi, grids)
        err = l2_norm(0.5, PhysicalFunction(grids.physical, pair.f.values - f_star.values))
        assert err / l2_norm(0.5, f_star) < 1e-4


class TestStability:
    def test_identical_data(self):
        params = ProblemParams()
        grids = Grids.default(params, n_steps=8)
        x = grids.physical.nodes
        phi = PhysicalFunction(grids.physical, np.exp(-x**2))
        rec = stability_report(params, (phi, phi), (phi, phi), grids)
        assert rec.psi_diff == rec.phi_diff == rec.f_diff == rec.u_diff == 0.0
        assert rec.source_ratio == 0.0 and rec.state_ratio == 0.0

    def test_unit_perturbation(self):
        params = ProblemParams()
        grids = Grids.default(params, n_steps=16)
        x = grids.physical.nodes
        zero = PhysicalFunction(grids.physical, np.zeros(x.size))
        psi_d = PhysicalFunction(grids.physical, np.exp(-x**2))
        rec = stability_report(params, (zero, zero), (zero, psi_d), grids)
        assert rec.psi_diff == pytest.approx(math.sqrt(3), rel=1e-10)
        assert rec.f_diff == pytest.approx(math.sqrt(3) * math.e / (math.e - 1), rel=1e-10)
        assert rec.u_diff == pytest.approx(math.sqrt(3), rel=1e-10)

    @pytest.mark.parametrize("gamma, a, m", list(itertools.product([0.3, 0.6, 0.9, 1.0], [0.5, 1.0, 2.0],
                                                                    [0.5, 1.0, 2.0])))
    def test_ratios_bounded(self, gamma, a, m):
        params = ProblemParams(alpha=0.0, a=a, m=m, gamma=gamma)
        grids = Grids.default(params, n_steps=32)
        x = grids.physical.nodes
        phi = PhysicalFunction(grids.physical, np.exp(-x**2))
        psi = PhysicalFunction(grids.physical, 0.5 * np.exp(-(x - 0.5) ** 2))
        phi_d = PhysicalFunction(grids.physical, phi.values + 0.1 * np.exp(-(x - 0.3) ** 2))
        psi_d = PhysicalFunction(grids.physical, psi.values + 0.05 * np.exp(-(x + 1) ** 2))
        rec = stability_report(params, (phi, psi), (phi_d, psi_d), grids)
        assert 0 < rec.source_ratio <= SOURCE_RATIO_BOUND
        assert 0 < rec.state_ratio <= STATE_RATIO_BOUND
