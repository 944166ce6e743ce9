import math

import numpy as np
import pytest

from dfrcsim import (
    PathLossModel,
    RadarScene,
    SystemConfig,
    generate_channel,
    scnr_full,
    solve,
    sum_rate,
)
from dfrcsim.metrics import check_switched_structure
from dfrcsim.pdd import solve_best


GAMMA_10DB = 10.0


@pytest.fixture(scope="module")
def instance():
    cfg = SystemConfig()
    scene = RadarScene(theta_0=0.0, theta_j=np.deg2rad([-30.0, 30.0]),
                       sigma0_sq=10.0, sigmaC_sq=100.0)
    channels = generate_channel(cfg, PathLossModel(), 80.0, 3,
                                np.random.default_rng(123))
    return cfg, scene, channels


@pytest.fixture(scope="module")
def rs_result(instance):
    cfg, scene, channels = instance
    return solve(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=5)


class TestSolveRs:
    def test_converges_with_small_violation(self, rs_result):
        assert rs_result.converged
        assert rs_result.trace[-1].h < 1e-4

    def test_feasibility_contract(self, instance, rs_result):
        cfg, scene, channels = instance
        assert rs_result.scnr_constraint >= GAMMA_10DB * (1 - 1e-4)
        bf = rs_result.beamformers
        assert np.linalg.norm(bf.T_RF @ bf.T_D) ** 2 <= cfg.P_T * (1 + 1e-6)
        bf.validate(cfg, arch="RS")

    def test_switched_structure(self, rs_result):
        check_switched_structure(rs_result.beamformers.T_RF)
        check_switched_structure(rs_result.beamformers.W_RF)

    def test_objective_monotone_within_sweeps(self, rs_result):
        for rec in rs_result.trace:
            objs = rec.sweep_objectives
            for a, b in zip(objs, objs[1:]):
                assert b <= a + 1e-8 * max(1.0, abs(a))

    def test_rho_positive_nonincreasing(self, rs_result):
        rhos = [rec.rho for rec in rs_result.trace]
        assert all(r > 0 for r in rhos)
        assert all(b <= a for a, b in zip(rhos, rhos[1:]))

    def test_reported_rate_matches_metric(self, instance, rs_result):
        cfg, scene, channels = instance
        assert sum_rate(channels, rs_result.beamformers, cfg) == pytest.approx(
            rs_result.sum_rate, rel=1e-12)

    def test_deterministic_trace(self, instance):
        cfg, scene, channels = instance
        a = solve(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=7)
        b = solve(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=7)
        assert a.sum_rate == b.sum_rate
        assert a.outer_iterations == b.outer_iterations
        for ra, rb in zip(a.trace, b.trace):
            assert ra.sweep_objectives == rb.sweep_objectives
            assert ra.h == rb.h

    def test_physical_scnr_consistent(self, instance, rs_result):
        # full-matrix SCNR of the returned design is positive and finite
        cfg, scene, channels = instance
        g = scnr_full(rs_result.beamformers, scene, cfg)
        assert g > 0 and np.isfinite(g)


class TestSolveFd:
    def test_single_outer_iteration(self, instance):
        cfg, scene, channels = instance
        res = solve(cfg, channels, scene, GAMMA_10DB, arch="FD", rng=1)
        assert res.converged
        assert res.outer_iterations == 1
        assert res.trace[-1].h == 0.0
        bf = res.beamformers
        # identity analog stages, one chain per antenna
        np.testing.assert_allclose(bf.T_RF, np.eye(cfg.M_T), atol=0)
        assert np.linalg.norm(bf.T_RF @ bf.T_D) ** 2 <= cfg.P_T * (1 + 1e-6)
        assert res.scnr_constraint >= GAMMA_10DB * (1 - 1e-4)

    def test_upper_bounds_hybrid_on_average(self, instance, rs_result):
        cfg, scene, channels = instance
        fd = solve(cfg, channels, scene, GAMMA_10DB, arch="FD", rng=1)
        # single instance: allow a tiny slack rather than strict dominance
        assert fd.sum_rate >= rs_result.sum_rate * 0.98


class TestSolvePc:
    def test_block_structure_and_feasibility(self, instance):
        from dfrcsim import PcStructure

        cfg, scene, channels = instance
        res = solve(cfg, channels, scene, GAMMA_10DB, arch="PC", rng=2)
        assert res.converged
        bf = res.beamformers
        PcStructure(cfg.M_T, cfg.N_RF_t).check(bf.T_RF)
        PcStructure(cfg.M_R, cfg.N_RF_r).check(bf.W_RF)
        assert np.linalg.norm(bf.T_RF @ bf.T_D) ** 2 <= cfg.P_T * (1 + 1e-6)
        assert res.scnr_constraint >= GAMMA_10DB * (1 - 1e-4)

    def test_divisibility_required(self, instance):
        cfg, scene, channels = instance
        bad = SystemConfig(M_T=15, M_R=8, N_RF_t=4, N_RF_r=4, K=2, M_U=2, d_s=1)
        bad_ch = generate_channel(bad, PathLossModel(), 80.0, 3,
                                  np.random.default_rng(0))
        with pytest.raises(ValueError):
            solve(bad, bad_ch, scene, GAMMA_10DB, arch="PC")

    def test_rs_objective_dominates_from_shared_start(self, instance):
        # the block wiring is one feasible point of the switched architecture,
        # so starting both from it the switched run ends at least as low
        cfg, scene, channels = instance
        wins = 0
        trials = 6
        for seed in range(trials):
            rs = solve(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=seed,
                       init_style="block")
            pc = solve(cfg, channels, scene, GAMMA_10DB, arch="PC", rng=seed)
            if rs.trace[-1].objective <= pc.trace[-1].objective + 1e-6:
                wins += 1
        assert wins >= trials - 1


class TestSolveValidation:
    def test_bad_arch(self, instance):
        cfg, scene, channels = instance
        with pytest.raises(ValueError):
            solve(cfg, channels, scene, GAMMA_10DB, arch="FC")

    def test_negative_gamma(self, instance):
        cfg, scene, channels = instance
        with pytest.raises(ValueError):
            solve(cfg, channels, scene, -1.0)

    def test_infeasible_gamma_reported(self, instance):
        cfg, scene, channels = instance
        res = solve(cfg, channels, scene, 1e9, arch="RS", rng=0)
        assert not res.converged
        assert res.status == "infeasible_gamma"
        assert math.isnan(res.sum_rate)

    def test_solve_best_multi_start(self, instance):
        cfg, scene, channels = instance
        one = solve_best(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=3,
                         n_starts=1)
        three = solve_best(cfg, channels, scene, GAMMA_10DB, arch="RS", rng=3,
                           n_starts=3)
        assert three.converged
        assert three.sum_rate >= one.sum_rate - 1e-12
