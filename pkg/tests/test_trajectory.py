import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paritytrack.analysis import analytic_parity
from paritytrack.errors import ConfigError
from paritytrack.readout import VoltageModel, default_model, perfect_model
from paritytrack.trajectory import (
    SimConfig,
    TrajectoryRecord,
    derive_seed,
    evolve_interval,
    render_qubit_pattern,
    sample_initial_n,
    simulate_ensemble,
    simulate_trajectory,
    stack,
)

KAPPA = 1 / 49


def z_score(count, n, p):
    return (count - n * p) / math.sqrt(n * p * (1 - p))


def poisson_pmf(k, lam):
    return lam**k * math.exp(-lam) / math.factorial(k)


class TestSimConfig:
    def test_defaults(self):
        c = SimConfig()
        assert c.tau_i == 1.0 and c.n_th == 0.02 and c.n_steps == 500
        assert c.dim == 12

    @pytest.mark.parametrize(
        "kw",
        [
            {"kappa": 0},
            {"tau_i": -1},
            {"duration": 0.5},
            {"n_th": 0.5},
            {"duration": 10.5},
            {"alpha": 2, "dim": 15},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SimConfig(**kw)


class TestInitialN:
    def test_vacuum(self):
        rng = np.random.default_rng(0)
        assert all(sample_initial_n(0, 0, 10, rng) == 0 for _ in range(500))

    def test_poisson(self):
        rng = np.random.default_rng(1)
        n = 100_000
        draws = np.array([sample_initial_n(1.0, 0.0, 12, rng) for _ in range(n)])
        for k in range(6):
            assert abs(z_score(int(np.sum(draws == k)), n, poisson_pmf(k, 1.0))) < 3

    def test_thermal_vacuum(self):
        rng = np.random.default_rng(2)
        n = 100_000
        draws = np.array([sample_initial_n(0.0, 0.02, 10, rng) for _ in range(n)])
        assert abs(z_score(int(np.sum(draws == 1)), n, 0.02)) < 3
        assert draws.max() == 1


class TestEvolveInterval:
    def test_vacuum_absorbing(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n, t = evolve_interval(0, KAPPA, 0.0, 100.0, rng)
            assert n == 0 and t.size == 0

    def test_single_photon_exponential(self):
        rng = np.random.default_rng(3)
        runs = 100_000
        times = np.empty(runs)
        for i in range(runs):
            n, t = evolve_interval(1, KAPPA, 0.0, 5000.0, rng)
            assert n == 0 and t.size == 1
            times[i] = t[0]
        # exponential: mean 1/kappa, standard deviation 1/kappa
        assert abs(times.mean() - 49.0) < 3 * 49.0 / math.sqrt(runs)

    def test_detailed_balance(self):
        # stationary law of the chain is geometric with ratio n_th / (1 + n_th)
        rng = np.random.default_rng(4)
        runs = 100_000
        n_th = 0.02
        finals = np.array([evolve_interval(0, KAPPA, n_th, 500.0, rng)[0] for _ in range(runs)])
        q = n_th / (1 + n_th)
        p1 = (1 - q) * q
        assert abs(z_score(int(np.sum(finals == 1)), runs, p1)) < 3
        ratio = np.sum(finals == 1) / np.sum(finals == 0)
        assert ratio == pytest.approx(n_th, rel=0.1)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            evolve_interval(1, KAPPA, 0.0, 0.0, np.random.default_rng(0))


class TestSimulateTrajectory:
    def test_perfect_vacuum(self):
        rec = simulate_trajectory(SimConfig(alpha=0, n_th=0, duration=100), perfect_model(), 1)
        assert np.all(rec.outcomes == 1)

    def test_record_shapes_and_parity(self):
        rec = simulate_trajectory(SimConfig(alpha=2), default_model(), 9)
        assert len(rec.times) == len(rec.photon_number) == len(rec.outcomes) == 500
        np.testing.assert_array_equal(rec.true_parity, np.where(rec.photon_number % 2 == 0, 1, -1))
        assert np.all(np.diff(rec.jump_times_true) > 0)

    def test_records_are_readonly(self):
        rec = simulate_trajectory(SimConfig(), default_model(), 0)
        with pytest.raises(ValueError):
            rec.outcomes[0] = 0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32), alpha=st.floats(0, 2))
    def test_zero_thermal_conservation(self, seed, alpha):
        cfg = SimConfig(alpha=alpha, n_th=0.0, duration=300)
        rec = simulate_trajectory(cfg, default_model(), seed)
        assert np.all(np.diff(rec.photon_number) <= 0)
        assert np.all(rec.jump_directions == -1)
        # every loss before the last sample is visible in the path
        visible = np.sum(rec.jump_times_true <= rec.times[-1])
        assert rec.photon_number[0] - rec.photon_number[-1] == visible

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32))
    def test_path_matches_events(self, seed):
        cfg = SimConfig(alpha=1.5, n_th=0.1, duration=200)
        rec = simulate_trajectory(cfg, default_model(), seed)
        for k, t in enumerate(rec.times):
            net = int(np.sum(rec.jump_directions[rec.jump_times_true <= t]))
            assert rec.photon_number[k] == rec.photon_number[0] + net

    def test_loss_count_is_thinned_poisson(self):
        # each initial photon is lost before T with probability 1 - e^{-kappa T}
        cfg = SimConfig(alpha=1.0, n_th=0.0)
        recs = simulate_ensemble(cfg, perfect_model(), 100_000, base_seed=5)
        counts = np.array([r.jump_times_true.size for r in recs])
        lam = 1.0 * (1 - math.exp(-KAPPA * cfg.duration))
        for k in range(5):
            assert abs(z_score(int(np.sum(counts == k)), counts.size, poisson_pmf(k, lam))) < 3

    def test_final_parity_thermal_mixture(self):
        cfg = SimConfig(alpha=1.0)
        recs = simulate_ensemble(cfg, default_model(), 10_000, base_seed=6)
        final_even = np.array([r.true_parity[-1] == 1 for r in recs])
        p_even = 0.5 * (1 + analytic_parity(cfg.times[-1], 1.0, KAPPA, 0.02))
        assert p_even == pytest.approx(0.98, abs=0.002)
        assert abs(z_score(int(final_even.sum()), final_even.size, p_even)) < 3

    def test_mean_photon_number(self):
        cfg = SimConfig(alpha=2.0, duration=200)
        n = stack(simulate_ensemble(cfg, default_model(), 10_000, base_seed=7), "photon_number")
        mean, sem = n.mean(axis=0), n.std(axis=0, ddof=1) / math.sqrt(n.shape[0])
        t = cfg.times
        pred = 4.0 * np.exp(-KAPPA * t) + 0.02 * (1 - np.exp(-KAPPA * t))
        # initial state adds n_th(1 + ...) photons from the displaced |1> term
        pred += 0.02 * np.exp(-KAPPA * t)
        z = (mean - pred) / sem
        assert np.all(np.abs(z[::20]) < 3.5)
        assert np.mean(np.abs(z) < 3) > 0.95

    def test_mean_parity(self):
        cfg = SimConfig(alpha=1.0, duration=200)
        p = stack(simulate_ensemble(cfg, default_model(), 10_000, base_seed=8), "true_parity").astype(float)
        mean, sem = p.mean(axis=0), p.std(axis=0, ddof=1) / math.sqrt(p.shape[0])
        pred = analytic_parity(cfg.times, 1.0, KAPPA, 0.02)
        z = (mean - pred) / sem
        assert np.mean(np.abs(z) < 3) > 0.95

    def test_overflow_flagged(self):
        cfg = SimConfig(alpha=0.0, n_th=0.49, dim=5, duration=500)
        recs = simulate_ensemble(cfg, default_model(), 300, base_seed=1)
        flagged = [r for r in recs if r.overflow]
        assert flagged
        for r in recs:
            n_max = r.photon_number[0] + np.max(np.concatenate(([0], np.cumsum(r.jump_directions))))
            assert r.overflow == (n_max >= cfg.dim - 1)


class TestEnsemble:
    def test_single_equals_trajectory(self):
        cfg = SimConfig(alpha=1.5)
        (rec,) = simulate_ensemble(cfg, default_model(), 1, base_seed=42)
        ref = simulate_trajectory(cfg, default_model(), derive_seed(42, 0))
        np.testing.assert_array_equal(rec.outcomes, ref.outcomes)
        np.testing.assert_array_equal(rec.jump_times_true, ref.jump_times_true)

    def test_reproducible(self):
        cfg = SimConfig(alpha=2.0)
        a = simulate_ensemble(cfg, default_model(), 20, base_seed=3)
        b = simulate_ensemble(cfg, default_model(), 20, base_seed=3)
        for x, y in zip(a, b):
            assert x.seed == y.seed
            np.testing.assert_array_equal(x.outcomes, y.outcomes)
            np.testing.assert_array_equal(x.jump_times_true, y.jump_times_true)

    def test_parallel_matches_serial(self):
        cfg = SimConfig(alpha=1.0, duration=100)
        a = simulate_ensemble(cfg, default_model(), 16, base_seed=2)
        b = simulate_ensemble(cfg, default_model(), 16, base_seed=2, workers=2)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.outcomes, y.outcomes)
            np.testing.assert_array_equal(x.photon_number, y.photon_number)

    def test_seeds_distinct(self):
        seeds = {derive_seed(0, k) for k in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(1, 0) != derive_seed(0, 1)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            simulate_ensemble(SimConfig(), default_model(), 0, 0)


def _record(outcomes):
    n = len(outcomes)
    return TrajectoryRecord(
        seed=0,
        times=np.arange(n, dtype=float),
        photon_number=np.zeros(n, int),
        true_parity=np.ones(n, int),
        outcomes=np.array(outcomes),
        jump_times_true=np.zeros(0),
    )


class TestRender:
    def test_constant(self):
        states, volts = render_qubit_pattern(_record([1] * 6), VoltageModel(), np.random.default_rng(0))
        assert states == ["g"] * 6
        assert volts.shape == (6,)

    def test_alternating(self):
        states, _ = render_qubit_pattern(_record([-1] * 6), VoltageModel(), np.random.default_rng(0))
        assert states == ["e", "g", "e", "g", "e", "g"]

    def test_f_then_g(self):
        states, _ = render_qubit_pattern(_record([1, -1, 0, 1, -1]), VoltageModel(), np.random.default_rng(0))
        assert states == ["g", "e", "f", "g", "e"]

    def test_voltages_digitize_back(self):
        m = VoltageModel(sigma=0.0)
        outs = [1, -1, -1, 1, 0, 1, -1]
        states, volts = render_qubit_pattern(_record(outs), m, np.random.default_rng(0))
        assert [m.classify(v) for v in volts] == states
