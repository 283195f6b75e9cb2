import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import filter_bruteforce
from paritytrack.analysis import analytic_parity
from paritytrack.errors import ImpossibleOutcomeError, StepSizeError
from paritytrack.fock import FockDensityMatrix, cat_state, initial_state, parity_expectation, state_fidelity
from paritytrack.quantum_filter import (
    FilterSettings,
    FilterState,
    _lindblad_propagator,
    bayes_update,
    build_kraus,
    free_evolve,
    parity_estimate,
    run_filter,
    run_filter_batch,
)
from paritytrack.readout import ReadoutModel, default_model, perfect_model
from paritytrack.trajectory import SimConfig, simulate_ensemble, simulate_trajectory, stack

KAPPA = 1 / 49


def fock(n, dim):
    v = np.zeros(dim, complex)
    v[n] = 1
    return FockDensityMatrix.from_ket(v)


def random_rho(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    r = g @ g.conj().T
    return FockDensityMatrix(r / np.trace(r).real)


def random_model(rng):
    pe = rng.dirichlet([8, 1, 0.5])
    po = rng.dirichlet([1, 8, 0.5])
    if not (pe[0] > pe[1] and po[1] > po[0]):
        return default_model()
    return ReadoutModel(*pe, *po)


class TestKraus:
    def test_no_thermal_no_up(self):
        k = build_kraus(KAPPA, 0.0, 1.0, 8)
        assert np.all(k.m_up == 0)

    def test_small_dt_identity(self):
        k = build_kraus(KAPPA, 0.02, 1e-12, 8)
        np.testing.assert_allclose(k.m_no, np.eye(8), atol=1e-12)

    def test_completeness_defect(self):
        # sum M^dag M - I = S^2 / 4 with S = m_down^dag m_down + m_up^dag m_up diagonal;
        # the top level has no thermal gain inside the truncation
        kdt, n_th, dim = KAPPA, 0.02, 10
        n = np.arange(dim)
        s = kdt * ((n_th + 1) * n + n_th * np.where(n < dim - 1, n + 1, 0))
        k = build_kraus(kdt, n_th, 1.0, dim)
        assert k.completeness_defect() == pytest.approx(np.max(s**2 / 4), rel=1e-12)
        assert k.completeness_defect() <= kdt**2 * dim**2

    @pytest.mark.xfail(strict=True, reason="first-order defect is 8.8e-3 at the top level, see ledger")
    def test_completeness_defect_example_value(self):
        assert build_kraus(KAPPA, 0.02, 1.0, 10).completeness_defect() <= 1e-3

    def test_operator_definitions(self):
        k = build_kraus(0.05, 0.1, 1.0, 4)
        a = np.diag(np.sqrt([1.0, 2, 3]), 1)
        np.testing.assert_allclose(k.m_down, math.sqrt(1.1 * 0.05) * a, atol=1e-15)
        np.testing.assert_allclose(k.m_up, math.sqrt(0.1 * 0.05) * a.T, atol=1e-15)

    def test_step_guard(self):
        with pytest.raises(StepSizeError):
            build_kraus(0.2, 0.0, 1.0, 5)

    @settings(max_examples=50)
    @given(kdt=st.floats(1e-6, 0.1), n_th=st.floats(0, 0.49), dim=st.integers(2, 15))
    def test_defect_bound(self, kdt, n_th, dim):
        k = build_kraus(kdt, n_th, 1.0, dim)
        assert k.completeness_defect() <= kdt**2 * dim**2


class TestFreeEvolve:
    def test_vacuum_fixed(self):
        k = build_kraus(KAPPA, 0.0, 1.0, 6)
        out = free_evolve(FilterState(fock(0, 6)), k)
        np.testing.assert_allclose(out.data, fock(0, 6).data, atol=1e-15)

    def test_one_photon_step(self):
        # direct 2x2 oracle: M_down moves 0.02 to |0>, M_no keeps (1 - 0.01)^2
        k = build_kraus(0.02, 0.0, 1.0, 2)
        out = free_evolve(fock(1, 2), k)
        p0, p1 = 0.02, 0.99**2
        assert out.data[0, 0].real == pytest.approx(p0 / (p0 + p1), abs=1e-12)
        assert out.data[1, 1].real == pytest.approx(p1 / (p0 + p1), abs=1e-12)
        # 0.0198 = 1 - e^{-0.02}; first order differs from it by O((kappa dt)^2)
        assert out.data[0, 0].real == pytest.approx(0.0198, abs=3e-4)
        assert out.data[1, 1].real == pytest.approx(0.9802, abs=3e-4)

    def test_without_renormalization(self):
        k = build_kraus(0.02, 0.0, 1.0, 2)
        out = free_evolve(fock(1, 2), k, renormalize=False)
        assert out.trace == pytest.approx(0.02 + 0.99**2, abs=1e-15)

    def test_hermitian_exact(self):
        rng = np.random.default_rng(0)
        rho = random_rho(rng, 7)
        out = free_evolve(rho, build_kraus(0.05, 0.1, 1.0, 7))
        assert np.array_equal(out.data, out.data.conj().T)

    @staticmethod
    def _decay_error(alpha, kappa, dt, t_end, dim=20):
        rho = initial_state(alpha, 0.0, dim)
        k = build_kraus(kappa, 0.0, dt, dim)
        worst = 0.0
        for step in range(1, int(round(t_end / dt)) + 1):
            rho = free_evolve(rho, k)
            worst = max(worst, abs(parity_expectation(rho) - analytic_parity(step * dt, alpha, kappa)))
        return worst

    def test_parity_decay_matches_closed_form(self):
        assert self._decay_error(0.5, KAPPA, 1.0, 200) <= 1e-3

    @pytest.mark.xfail(strict=True, reason="first-order Kraus error is 1.4e-2 at alpha=2, see ledger")
    def test_parity_decay_example_alpha_2(self):
        assert self._decay_error(2.0, KAPPA, 1.0, 200) <= 1e-3

    def test_parity_decay_first_order_convergence(self):
        coarse = self._decay_error(2.0, KAPPA, 1.0, 100)
        fine = self._decay_error(2.0, KAPPA, 0.5, 100)
        assert fine < 0.6 * coarse

    def test_parity_decay_exact_propagator(self):
        cfg = SimConfig(alpha=2.0, n_th=0.0, duration=200)
        est = run_filter(np.zeros(200, int), cfg, default_model(), FilterSettings(kraus_order="exact")).parity
        np.testing.assert_allclose(est, analytic_parity(cfg.times, 2.0, KAPPA), atol=1e-6)

    def test_exact_propagator_trace_preserving(self):
        prop = _lindblad_propagator(KAPPA, 0.02, 1.0, 6)
        rho = random_rho(np.random.default_rng(1), 6)
        out = (prop @ rho.data.reshape(-1, order="F")).reshape(6, 6, order="F")
        # only loss from the top level is cut by truncation; thermal gain out of it leaks
        assert np.trace(out).real == pytest.approx(1.0, abs=KAPPA * 0.02 * 6)


class TestBayes:
    def test_projective_limit(self):
        mix = FockDensityMatrix(np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex))
        out = bayes_update(mix, 1, perfect_model())
        assert parity_estimate(out) == pytest.approx(1.0)
        np.testing.assert_allclose(np.diag(out.data).real, [0.5, 0, 0.5, 0])

    def test_zero_is_identity(self):
        rho = random_rho(np.random.default_rng(2), 5)
        assert bayes_update(rho, 0, default_model()) is rho

    def test_scalar_posterior(self):
        rho = FockDensityMatrix(np.diag([0.5, 0.5]).astype(complex))
        out = bayes_update(rho, 1, default_model())
        assert out.data[0, 0].real == pytest.approx(0.873 * 0.5 / (0.873 * 0.5 + 0.097 * 0.5), abs=1e-12)
        assert out.data[0, 0].real == pytest.approx(0.9, abs=1e-12)

    def test_impossible_outcome(self):
        with pytest.raises(ImpossibleOutcomeError):
            bayes_update(fock(0, 4), -1, perfect_model())

    def test_bad_outcome(self):
        with pytest.raises(ValueError):
            bayes_update(fock(0, 4), 2, default_model())

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31), dim=st.integers(2, 8), c=st.sampled_from([1, -1]))
    def test_likelihood_normalization(self, seed, dim, c):
        rng = np.random.default_rng(seed)
        rho = random_rho(rng, dim)
        m = random_model(rng)
        pe = np.diag(np.arange(dim) % 2 == 0).astype(float)
        po = np.eye(dim) - pe
        le, lo = m.likelihood(c, "even"), m.likelihood(c, "odd")
        p_c = le * np.trace(pe @ rho.data @ pe).real + lo * np.trace(po @ rho.data @ po).real
        expected = (le * pe @ rho.data @ pe + lo * po @ rho.data @ po) / p_c
        np.testing.assert_allclose(bayes_update(rho, c, m).data, expected, atol=1e-12)


class TestRunFilter:
    def test_perfect_even_collapse(self):
        cfg = SimConfig(alpha=2.0, n_th=0.0, duration=10)
        out = run_filter(np.ones(10, int), cfg, perfect_model(), keep_states=True)
        assert out.parity.shape == (10,)
        assert np.all(out.parity[:3] >= 0.99)
        target = cat_state(2.0, "even", cfg.dim)
        assert state_fidelity(out.states[0], target) >= 0.99

    def test_quiet_odd_trajectory_pinned(self):
        cfg = SimConfig(alpha=2.0, n_th=0.0, duration=100)
        model = default_model()
        for seed in range(200):
            rec = simulate_trajectory(cfg, model, seed)
            if rec.jump_times_true.size == 0 or rec.jump_times_true[0] > 60:
                if rec.true_parity[0] == -1:
                    break
        else:
            pytest.skip("no quiet odd trajectory found")
        est = run_filter(rec.outcomes, cfg, model).parity
        quiet = rec.times < (rec.jump_times_true[0] if rec.jump_times_true.size else 1e9)
        # after a short burn-in the estimate sits near -1 until the first jump
        assert np.median(est[10:][quiet[10:]]) < -0.9

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_alternating_without_decay_returns_to_prior(self, alpha):
        # symmetric likelihoods: a +1,-1 pair multiplies both parity sectors by the same factor
        cfg = SimConfig(alpha=alpha, n_th=0.02, duration=200)
        frozen = FilterSettings(kappa=1e-12)
        est = run_filter(np.tile([1, -1], 100), cfg, default_model(), frozen).parity
        prior = run_filter(np.zeros(200, int), cfg, default_model(), frozen).parity
        np.testing.assert_allclose(est[1::2], prior[1::2], atol=1e-8)

    @pytest.mark.parametrize("alpha,n_th", [(0.5, 0.0), (1.0, 0.02), (2.0, 0.02)])
    def test_alternating_stays_near_prior(self, alpha, n_th):
        # with decay between the updates the estimate oscillates about the prior
        # and never leaves the band a single update applied to the prior would reach
        m = default_model()
        cfg = SimConfig(alpha=alpha, n_th=n_th, duration=300)
        alt = np.tile([1, -1], 150)
        est = run_filter(alt, cfg, m).parity
        prior = run_filter(np.zeros(300, int), cfg, m).parity
        le = np.where(alt == 1, m.p_plus_even, m.p_minus_even)
        lo = np.where(alt == 1, m.p_plus_odd, m.p_minus_odd)
        reach = (le * (1 + prior) - lo * (1 - prior)) / (le * (1 + prior) + lo * (1 - prior))
        lower, upper = np.minimum(prior, reach), np.maximum(prior, reach)
        assert np.all(est >= lower - 1e-12) and np.all(est <= upper + 1e-12)

    def test_zero_outcomes_track_free_evolution(self):
        cfg = SimConfig(alpha=1.0, n_th=0.0, duration=100)
        est = run_filter(np.zeros(100, int), cfg, default_model()).parity
        np.testing.assert_allclose(est, analytic_parity(cfg.times, 1.0, KAPPA), atol=2e-3)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(1, 60))
    def test_invariants_random_records(self, seed, n):
        rng = np.random.default_rng(seed)
        cfg = SimConfig(alpha=float(rng.uniform(0, 2)), n_th=float(rng.uniform(0, 0.2)), duration=n)
        outcomes = rng.choice([1, -1, 0], size=n)
        out = run_filter(outcomes, cfg, default_model(), keep_states=True)
        assert np.all(np.abs(out.parity) <= 1 + 1e-12)
        for rho in out.states:
            rho.check()

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 7))
        kappa = float(rng.uniform(0.001, 0.1))
        n_th = float(rng.uniform(0, 0.3))
        m = random_model(rng)
        rho0 = random_rho(rng, dim)
        outcomes = rng.choice([1, -1, 0], size=5)
        cfg = SimConfig(alpha=0.0, n_th=n_th, kappa=kappa, duration=5)
        out = run_filter(outcomes, cfg, m, keep_states=True, initial=rho0)
        ref = filter_bruteforce(rho0.data.tolist(), outcomes.tolist(), kappa, n_th, 1.0, m.likelihood)
        for a, b in zip(out.states, ref):
            np.testing.assert_allclose(a.data, b, rtol=0, atol=1e-12)

    def test_rejects_bad_outcome(self):
        with pytest.raises(ValueError):
            run_filter([1, 2], SimConfig(duration=2), default_model())

    def test_deterministic(self):
        cfg = SimConfig(alpha=1.5, duration=50)
        rec = simulate_trajectory(cfg, default_model(), 3)
        a = run_filter(rec.outcomes, cfg, default_model()).parity
        b = run_filter(rec.outcomes, cfg, default_model()).parity
        assert np.array_equal(a, b)

    def test_separate_filter_kappa(self):
        cfg = SimConfig(alpha=1.0, duration=50)
        zeros = np.zeros(50, int)
        a = run_filter(zeros, cfg, default_model(), FilterSettings(kappa=1 / 55)).parity
        np.testing.assert_allclose(a, analytic_parity(cfg.times, 1.0, 1 / 55, 0.02), atol=3e-3)

    def test_first_order_converges_to_exact(self):
        # the first-order gap is O(kappa dt): halving kappa roughly halves it
        cfg = SimConfig(alpha=2.0, duration=100)
        rec = simulate_trajectory(cfg, default_model(), 4)

        def gap(kappa):
            a = run_filter(rec.outcomes, cfg, default_model(), FilterSettings(kappa=kappa)).parity
            b = run_filter(rec.outcomes, cfg, default_model(), FilterSettings(kappa=kappa, kraus_order="exact")).parity
            return np.max(np.abs(a - b))

        assert gap(KAPPA / 2) < 0.6 * gap(KAPPA)


class TestBatch:
    @pytest.mark.parametrize("order", [1, "exact"])
    @pytest.mark.parametrize("renorm", [True, False])
    def test_matches_full_filter(self, order, renorm):
        cfg = SimConfig(alpha=math.sqrt(2), duration=120)
        recs = simulate_ensemble(cfg, default_model(), 12, base_seed=1)
        settings_ = FilterSettings(renormalize=renorm, kraus_order=order)
        batch = run_filter_batch(stack(recs, "outcomes"), cfg, default_model(), settings_)
        for row, rec in zip(batch, recs):
            full = run_filter(rec.outcomes, cfg, default_model(), settings_).parity
            np.testing.assert_allclose(row, full, atol=1e-12)

    def test_rejects_1d(self):
        with pytest.raises(ValueError):
            run_filter_batch(np.ones(5, int), SimConfig(duration=5), default_model())

    def test_impossible_outcome_batch(self):
        cfg = SimConfig(alpha=0.0, n_th=0.0, duration=3)
        with pytest.raises(ImpossibleOutcomeError):
            run_filter_batch(np.array([[1, -1, 1]]), cfg, perfect_model())
