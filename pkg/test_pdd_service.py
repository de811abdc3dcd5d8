import numpy as np
import pytest

from conftest import make_scenario
from services.baseline_service import BaselineKind, run_baseline
from services.pdd_service import (
    VERDICT_INFEASIBLE,
    PddOptimizerService,
    PddResult,
    PddState,
    sinr_slacks_db,
)
from utils.channel_metrics import steering_vector, synthesize_channels
from utils.geometry import compact_ula, is_feasible

SMALL = dict(k_users=2, n_antennas=4, aperture_lambda=4, sinr_target_db=5, max_outer=8, max_inner=5,
             pgd_max_iters=30, seed=7)


def small(**overrides):
    return make_scenario(**{**SMALL, **overrides})


@pytest.fixture(scope="module")
def small_result():
    scenario = small()
    return scenario, PddOptimizerService(scenario.config).run_pdd(scenario)


class TestRunPdd:
    def test_penalty_schedule_is_exact(self, small_result):
        scenario, result = small_result
        cfg = scenario.config
        assert result.rho_history == [cfg.rho0 * cfg.c0 ** j for j in range(result.outer_iters)]

    def test_histories_match_iteration_counts(self, small_result):
        _, result = small_result
        assert len(result.violation_history) == result.outer_iters
        assert len(result.f_history) == result.outer_iters
        assert len(result.trace) == result.inner_iters_total
        assert result.objective_history == [-f for f in result.f_history]

    def test_inner_f_non_increasing(self, small_result):
        _, result = small_result
        for j in range(result.outer_iters):
            values = [r.F for r in result.trace if r.outer == j]
            for before, after in zip(values, values[1:]):
                assert after <= before + 1e-6 * max(1.0, abs(before))

    def test_result_is_feasible_geometry(self, small_result):
        scenario, result = small_result
        cfg = scenario.config
        assert is_feasible(result.t, cfg.aperture, cfg.wavelength)
        assert result.W_D.shape == (4, 2)
        assert np.sum(np.abs(result.W_D) ** 2) <= cfg.transmit_power * (1 + 1e-5)

    def test_violation_exit(self, small_result):
        scenario, result = small_result
        if result.outer_iters < scenario.config.max_outer:
            assert result.violation_history[-1] < scenario.config.delta_out

    def test_feasible_verdict_implies_targets_met(self, small_result):
        scenario, result = small_result
        service = PddOptimizerService(scenario.config)
        if result.feasible:
            assert min(service.audit_feasibility(result, scenario)) >= -0.01

    def test_gain_within_bound(self, small_result):
        _, result = small_result
        assert result.gain_db <= 10 * np.log10(4) + 1e-9

    def test_single_inner_pass(self):
        scenario = small(max_inner=1, max_outer=3)
        result = PddOptimizerService(scenario.config).run_pdd(scenario)
        assert result.inner_iters_total == result.outer_iters
        assert all(r.inner == 1 for r in result.trace)

    def test_fixed_positions_inner_loop_stops_at_second_pass(self):
        scenario = small(optimize_positions="false", max_outer=2)
        result = PddOptimizerService(scenario.config).run_pdd(scenario)
        assert max(r.inner for r in result.trace if r.outer == 0) == 2

    def test_fixed_compact_ula_collapses_to_fa(self):
        scenario = small(optimize_positions="false", init_scheme="ula_compact", max_outer=3)
        pdd = PddOptimizerService(scenario.config).run_pdd(scenario)
        fa = run_baseline(BaselineKind.FIXED_ULA, scenario)
        assert np.allclose(pdd.t, compact_ula(4, scenario.config.wavelength))
        assert 10 ** (pdd.gain_db / 10) == pytest.approx(10 ** (fa.gain_db / 10), rel=1e-4)

    def test_infeasible_targets_get_verdict(self):
        scenario = small(sinr_target_db=40, max_outer=2, max_inner=2)
        result = PddOptimizerService(scenario.config).run_pdd(scenario)
        assert not result.feasible
        assert result.status == "infeasible"
        assert result.verdict == VERDICT_INFEASIBLE

    def test_restart_points(self):
        scenario = small(restarts=3)
        service = PddOptimizerService(scenario.config)
        starts = service.starting_points(scenario)
        assert len(starts) == 3
        for t in starts:
            assert is_feasible(t, scenario.config.aperture, scenario.config.wavelength)
        assert all(np.array_equal(a, b) for a, b in zip(starts, service.starting_points(scenario)))


class TestInnerBcd:
    def test_warm_state_is_updated(self):
        scenario = small()
        cfg = scenario.config
        t0 = compact_ula(4, cfg.wavelength)
        state = PddState(t=t0, h_all=synthesize_channels(scenario.paths, t0, cfg.wavelength),
                         xi=np.zeros((2, 2)), rho=cfg.rho0)
        state = PddOptimizerService(cfg).run_inner_bcd(state, scenario)
        assert state.Q.shape == (2, 2)
        assert state.lifted.shape == (2, 4, 4)
        assert 1 <= state.i <= cfg.max_inner
        assert state.F == state.trace[-1].F


class TestAudit:
    def test_zero_beamformer_is_no_service(self):
        scenario = small()
        result = PddResult(scheme="pdd", t=compact_ula(4, 0.1), W_D=np.zeros((4, 2), dtype=complex),
                           sinr_db=np.zeros(2), gain_db=-np.inf)
        slacks = PddOptimizerService(scenario.config).audit_feasibility(result, scenario)
        assert slacks == [-np.inf, -np.inf]

    def test_mrt_at_threshold_has_zero_slack(self, rng):
        t = compact_ula(4, 0.1)
        h = rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4))
        w = steering_vector(0.0, t, 0.1)[:, None] / 2.0
        threshold = abs(np.vdot(h[0], w[:, 0])) ** 2
        assert sinr_slacks_db(h, w, np.array([threshold]))[0] == pytest.approx(0.0, abs=1e-3)

    def test_zero_target_is_unbounded_slack(self, rng):
        h = rng.standard_normal((1, 2)) + 0j
        assert sinr_slacks_db(h, np.ones((2, 1)), np.array([0.0]))[0] == np.inf
