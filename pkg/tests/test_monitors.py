"""Estimate audits: rate bounds, obliqueness, Hessian bounds, convexity
cone, evolution identity."""

import dataclasses
import math

import numpy as np
import pytest

from gaussflow import domains as dom
from gaussflow import flow, monitors, oracles
from gaussflow.geometry import EUCLIDEAN, MINKOWSKI


def interval_state(n_cells=201):
    return flow.initialize(dom.ConvexDomain.interval(0, 1),
                           dom.ConvexDomain.interval(-0.5, 0.5),
                           n_cells, MINKOWSKI)


def refresh_rate(state):
    g = flow.g_value_many(state.grid.gradient(state.u),
                          state.grid.hessian(state.u), state.sig)
    return dataclasses.replace(state, u_dot=g)


def steady_state(n_cells=201):
    state = interval_state(n_cells)
    _, prof = oracles.translator_1d_closed_form(0, 1, -0.5, 0.5, MINKOWSKI)
    u = prof.height(state.grid.nodes[:, 0])
    return refresh_rate(dataclasses.replace(state, u=u))


def run_with_monitor(n_cells=201, cadence=1):
    state = interval_state(n_cells)
    mon = monitors.RunMonitor(state, cadence=cadence)
    result = flow.run_to_translator(state, on_accept=mon.observe)
    return state, mon, result


class TestRateBounds:
    def test_initial_rate_range_and_final_speed(self):
        state, mon, result = run_with_monitor()
        # G0 = 1/(1 - (x - 1/2)^2) over (0,1) ranges over [1, 4/3]
        assert state.g0_range[0] == pytest.approx(1.0, abs=1e-4)
        assert state.g0_range[1] == pytest.approx(4.0 / 3.0, abs=1e-4)
        assert state.g0_range[0] < result.c_inf < state.g0_range[1]
        assert result.c_inf == pytest.approx(math.log(3.0), abs=1e-4)
        ok, worst, _ = mon.udot_ok()
        assert ok
        assert worst <= 0.0  # no violation at all along this run

    def test_steady_translator_trivially_inside(self):
        state = steady_state()
        rec_range = (float(np.min(state.u_dot)), float(np.max(state.u_dot)))
        mon = monitors.RunMonitor(state)
        ok, _, _ = monitors.udot_bounds_check(mon.records, rec_range,
                                              mon.tol_mon)
        assert ok

    def test_dual_rates_audited_through_legendre(self):
        state, mon, _ = run_with_monitor()
        dual = monitors.dual_rate_range(state)
        # the dual range is the negated primal range
        assert dual[0] == pytest.approx(-state.g0_range[1], abs=1e-10)
        assert dual[1] == pytest.approx(-state.g0_range[0], abs=1e-10)
        ok, _, _ = monitors.dual_udot_bounds_check(mon.records, dual,
                                                   mon.tol_mon)
        assert ok

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            monitors.udot_bounds_check([], (0.0, 1.0), 0.1)


class TestObliqueness:
    def test_steady_1d_symmetric_is_one(self):
        # beta at the left end: h'(p) = -2p at p = -1/2 gives 1; nu = +1
        assert monitors.obliqueness(steady_state()) == pytest.approx(1.0,
                                                                     abs=1e-6)

    def test_radial_ball_pair_is_one(self):
        state = flow.initialize(dom.ConvexDomain.ball([0, 0], 1.0),
                                dom.ConvexDomain.ball([0, 0], 0.5),
                                (8, 16), MINKOWSKI)
        assert monitors.obliqueness(state) == pytest.approx(1.0, abs=1e-10)

    def test_nonnegative_for_convex_fields(self):
        rng = np.random.default_rng(2)
        state = interval_state(101)
        x = state.grid.nodes[:, 0]
        for _ in range(10):
            a = rng.uniform(0.3, 0.9)
            u = 0.5 * a * (x - 0.5) ** 2
            probe = refresh_rate(dataclasses.replace(state, u=u))
            assert monitors.obliqueness(probe) >= 0.0

    def test_above_floor_along_reference_run(self):
        _, mon, _ = run_with_monitor()
        assert mon.obliq_run_min() >= monitors.OBLIQUENESS_FLOOR

    def test_ellipse_target_against_analytic_gradient(self):
        """Non-radial pairing cross-checked by hand through Du0 = A x."""
        q_mat = np.diag([6.25, 16.0])
        state = flow.initialize(dom.ConvexDomain.ball([0, 0], 1.0),
                                dom.ConvexDomain.ellipse([0, 0], q_mat),
                                (12, 24), MINKOWSKI)
        a_map = np.diag([0.4, 0.25])
        scale = 8.0  # 2 sqrt(max eigenvalue of Q)
        vals = []
        for theta in np.arange(24) * 2 * np.pi / 24:
            x = np.array([np.cos(theta), np.sin(theta)])
            beta = -2.0 * q_mat @ (a_map @ x) / scale
            vals.append(beta @ (-x) / np.linalg.norm(beta))
        analytic = min(vals)
        assert analytic == pytest.approx(0.97439, abs=1e-4)
        assert monitors.obliqueness(state) == pytest.approx(
            analytic, abs=state.grid.h_ref**2)


class TestHessianBounds:
    def test_initial_quadratic(self):
        lo, hi = monitors.hessian_bounds(interval_state())
        assert lo == pytest.approx(1.0, abs=1e-9)
        assert hi == pytest.approx(1.0, abs=1e-9)

    def test_steady_translator_range(self):
        # u'' = C (1 - u'^2) ranges over [0.75 ln 3, ln 3]
        lo, hi = monitors.hessian_bounds(steady_state(401))
        assert lo == pytest.approx(0.75 * math.log(3.0), abs=1e-3)
        assert hi == pytest.approx(math.log(3.0), abs=1e-3)

    def test_regression_floor_along_run(self):
        # empirical bound frozen after the first verified run
        _, mon, _ = run_with_monitor()
        assert mon.hessian_run_range()[0] >= 0.5


class TestConvexityCone:
    def test_isotropic_point_margin(self):
        """u = |x|^2/2 at the pole: h = g = I, H = n, margin 1 - eps0 n."""
        state = flow.initialize(dom.ConvexDomain.ball([0, 0], 1.0),
                                dom.ConvexDomain.ball([0, 0], 1.0),
                                (8, 16), EUCLIDEAN)
        u = 0.5 * np.sum(state.grid.nodes**2, axis=1)
        state = refresh_rate(dataclasses.replace(state, u=u))
        eps0 = monitors.eps0_candidate(state, [state.grid.anchor])
        assert eps0 == pytest.approx(0.5, abs=1e-10)  # 1/n at the pole
        # margin restricted to the pole vanishes at eps0 = 1/n
        pole_margin = monitors.convexity_margin(
            dataclasses.replace(state), eps0)
        assert pole_margin <= 1e-10

    def test_1d_reduction_formula(self):
        # margin = min h11 (1 - eps0) in one dimension
        state = steady_state(201)
        p = state.grid.gradient(state.u)[state.grid.interior, 0]
        r = state.grid.hessian(state.u)[state.grid.interior, 0, 0]
        v = np.sqrt(1 - p**2)
        for eps0 in (0.3, 0.7, 1.0):
            expect = np.min(r / v) * (1 - eps0)
            got = monitors.convexity_margin(state, eps0)
            assert got == pytest.approx(expect, abs=1e-12)

    def test_eps0_in_1d_is_one(self):
        state = steady_state(201)
        assert monitors.eps0_candidate(state) == pytest.approx(1.0, abs=1e-10)

    def test_margin_preserved_along_run(self):
        _, mon, _ = run_with_monitor()
        assert mon.convex_margin_ok()

    def test_steady_margin_constant_in_time(self):
        state = steady_state(201)
        mon = monitors.RunMonitor(state)
        st = dataclasses.replace(state, tau=0.05)
        from gaussflow.flow import StepControls, step_implicit
        vals = [monitors.convexity_margin(state, mon.eps0)]
        for _ in range(5):
            st = step_implicit(st, StepControls(tau_max=0.05))
            vals.append(monitors.convexity_margin(st, mon.eps0))
        assert np.max(np.abs(np.diff(vals))) < 5 * state.grid.h**2


class TestEvolutionResidual:
    def test_planar_graph_vanishes(self):
        # identically zero in exact arithmetic; the discrete H picks up
        # roundoff of the linear field amplified by 1/h^2
        state = interval_state(101)
        x = state.grid.nodes[:, 0]
        flat = dataclasses.replace(state, u=0.3 * x)
        window = [flat,
                  dataclasses.replace(flat, t=0.1),
                  dataclasses.replace(flat, t=0.2)]
        assert monitors.evolution_residual(window, MINKOWSKI) < 1e-6

    def test_needs_three_snapshots(self):
        state = interval_state(101)
        with pytest.raises(ValueError):
            monitors.evolution_residual([state, state])

    def test_steady_state_residual_second_order(self):
        _, prof = oracles.translator_1d_closed_form(0, 1, -0.5, 0.5, MINKOWSKI)

        def sampled_residual(n_cells):
            state = interval_state(n_cells)
            u = prof.height(state.grid.nodes[:, 0])
            frozen = refresh_rate(dataclasses.replace(state, u=u))
            window = [frozen,
                      dataclasses.replace(frozen, t=0.1),
                      dataclasses.replace(frozen, t=0.2)]
            return monitors.evolution_residual(window, MINKOWSKI)

        res = {n: sampled_residual(n) for n in (51, 101, 201)}
        assert res[201] < 1e-3
        assert res[51] / res[101] >= 2.0 ** 1.5
        assert res[101] / res[201] >= 2.0 ** 1.5

    def test_along_run_stays_moderate(self):
        _, mon, _ = run_with_monitor(201)
        final = mon.records[-1].evo_residual
        assert final < 1e-3

    def test_radial_shooting_profile_cross_check(self):
        """The identity audited against the independent radial oracle."""
        prof = oracles.translator_radial_shooting(1.0, 0.5, 2, MINKOWSKI,
                                                  tol=1e-10)
        res = []
        for spec in ((16, 32), (32, 64)):
            state = flow.initialize(dom.ConvexDomain.ball([0, 0], 1.0),
                                    dom.ConvexDomain.ball([0, 0], 0.5),
                                    spec, MINKOWSKI)
            rr = np.linalg.norm(state.grid.nodes, axis=1)
            u = prof.height_at(rr)
            frozen = refresh_rate(dataclasses.replace(state, u=u))
            window = [frozen, dataclasses.replace(frozen, t=0.1),
                      dataclasses.replace(frozen, t=0.2)]
            res.append(monitors.evolution_residual(window, MINKOWSKI))
        assert res[1] < 5e-5
        assert res[0] / res[1] > 2.0 ** 1.5


class TestSpacelikeMargin:
    def test_confined_gradient_image(self):
        _, mon, _ = run_with_monitor(101)
        # omega_tilde = (-1/2, 1/2) keeps the margin at 1/2
        assert all(rec.grad_max <= 0.5 + 1e-6 for rec in mon.records)

    def test_flat_field(self):
        state = interval_state(101)
        flat = refresh_rate(dataclasses.replace(
            state, u=np.full(state.grid.n_nodes, 0.7)))
        assert monitors.spacelike_margin(flat) == pytest.approx(1.0)

    def test_euclidean_reports_gradient_magnitude(self):
        state = flow.initialize(dom.ConvexDomain.interval(0, 1),
                                dom.ConvexDomain.interval(-1, 1),
                                101, EUCLIDEAN)
        val = monitors.spacelike_margin(state)
        assert val == pytest.approx(1.0, abs=1e-4)  # max |Du0| = 1, not fatal


class TestRunMonitor:
    def test_record_count_matches_cadence(self):
        for cadence in (1, 2, 5):
            _, mon, result = run_with_monitor(101, cadence=cadence)
            assert len(mon.records) == 1 + result.steps // cadence

    def test_records_are_finite(self):
        _, mon, _ = run_with_monitor(101)
        for rec in mon.records:
            for name in monitors.CSV_COLUMNS:
                val = getattr(rec, name)
                if name == "evo_residual" and math.isnan(val):
                    continue  # defined only once the window fills
                assert math.isfinite(val)

    def test_duality_rate_defect_small_at_steady_state(self):
        state = steady_state(201)
        defect = monitors.duality_rate_defect(state)
        assert defect < 50 * state.grid.h**2
