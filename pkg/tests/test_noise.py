import numpy as np
import pytest

from telespin.noise import (
    NoiseParams,
    TelegraphTrajectory,
    kubo_phase,
    propagators,
    sample_trajectory,
    value_at,
)

SLOW = NoiseParams(omega_amp=np.pi, nu=np.pi / 2)     # K = 2
FAST = NoiseParams.from_color(0.2, nu=2.0)


class TestNoiseParams:
    def test_color_and_eta_regimes(self):
        assert SLOW.color == pytest.approx(2.0)
        assert FAST.eta.imag == 0.0 and FAST.eta.real > 0.0
        assert SLOW.eta.real == pytest.approx(0.0)
        assert SLOW.eta.imag > 0.0
        crit = NoiseParams.from_color(0.5, nu=1.0)
        assert abs(crit.eta) == pytest.approx(0.0, abs=1e-12)

    def test_nu_plus_minus(self):
        assert FAST.nu_plus + FAST.nu_minus == pytest.approx(2 * FAST.nu)
        assert FAST.nu_plus * FAST.nu_minus == pytest.approx(4 * FAST.omega_amp**2)

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseParams(omega_amp=-1.0, nu=1.0)
        with pytest.raises(ValueError):
            NoiseParams(omega_amp=1.0, nu=0.0)


class TestTrajectories:
    def test_seed_determinism(self):
        t1 = sample_trajectory(FAST, 50.0, seed=123)
        t2 = sample_trajectory(FAST, 50.0, seed=123)
        assert t1.initial_value == t2.initial_value
        assert np.array_equal(t1.jump_times, t2.jump_times)

    def test_mean_is_zero(self):
        # <alpha(t)> = 0 within the binomial error bar, 1e5 realizations
        n = 100_000
        rng = np.random.default_rng(np.random.SeedSequence(7))
        total = 0
        for _ in range(n):
            t = sample_trajectory(FAST, 1.0, rng)
            total += value_at(t, 0.7)
        assert abs(total / n) < 3.0 / np.sqrt(n)

    def test_autocorrelation_decay(self):
        # <alpha(t) alpha(t + 1/nu)> = exp(-1) within 2%
        p = NoiseParams(omega_amp=1.0, nu=2.0)
        lag = 1.0 / p.nu
        n = 100_000
        rng = np.random.default_rng(np.random.SeedSequence(11))
        acc = 0
        for _ in range(n):
            t = sample_trajectory(p, 2 * lag, rng)
            acc += value_at(t, lag * 0.5) * value_at(t, lag * 1.5)
        assert acc / n == pytest.approx(np.exp(-1.0), rel=0.02)

    def test_invariants(self):
        with pytest.raises(ValueError):
            TelegraphTrajectory(jump_times=np.array([2.0, 1.0]), initial_value=1,
                                horizon=3.0)
        with pytest.raises(ValueError):
            TelegraphTrajectory(jump_times=np.array([1.0]), initial_value=2,
                                horizon=3.0)


class TestValueAt:
    TRAJ = TelegraphTrajectory(jump_times=np.array([1.0, 2.5, 3.0]),
                               initial_value=+1, horizon=4.0)

    def test_before_first_jump(self):
        assert value_at(self.TRAJ, 0.5) == +1

    def test_parity_of_flips(self):
        assert value_at(self.TRAJ, 1.5) == -1
        assert value_at(self.TRAJ, 2.7) == +1
        assert value_at(self.TRAJ, 3.5) == -1

    def test_horizon_included(self):
        assert value_at(self.TRAJ, 4.0) == -1

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            value_at(self.TRAJ, 4.5)
        with pytest.raises(ValueError):
            value_at(self.TRAJ, -0.1)


class TestKuboPhase:
    def test_constant_segment(self):
        traj = TelegraphTrajectory(jump_times=np.array([]), initial_value=+1,
                                   horizon=5.0)
        assert kubo_phase(traj, 1.0, 3.5) == pytest.approx(2.5)

    def test_symmetric_jump_cancels(self):
        traj = TelegraphTrajectory(jump_times=np.array([2.0]), initial_value=+1,
                                   horizon=4.0)
        assert kubo_phase(traj, 1.0, 3.0) == pytest.approx(0.0, abs=1e-14)

    def test_riemann_oracle(self):
        traj = sample_trajectory(NoiseParams(1.0, 3.0), 10.0, seed=5)
        grid = np.arange(0.0, 10.0, 1e-4)
        vals = value_at(traj, grid)
        for t1, t2 in [(0.0, 10.0), (0.3, 7.7), (2.0, 2.3)]:
            sel = (grid >= t1) & (grid < t2)
            riemann = np.sum(vals[sel]) * 1e-4
            assert kubo_phase(traj, t1, t2) == pytest.approx(riemann, abs=1e-3)

    def test_bounded_by_interval(self):
        traj = sample_trajectory(FAST, 20.0, seed=9)
        rng = np.random.default_rng(1)
        for _ in range(50):
            t1, t2 = np.sort(rng.uniform(0, 20, size=2))
            assert abs(kubo_phase(traj, t1, t2)) <= (t2 - t1) + 1e-12

    def test_reversed_interval(self):
        traj = sample_trajectory(FAST, 5.0, seed=2)
        with pytest.raises(ValueError):
            kubo_phase(traj, 3.0, 1.0)


def kubo_monte_carlo(p, ts, n, seed):
    """Empirical samples of S, alpha(t) S, and alpha(0) alpha(t) S."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    horizon = float(ts[-1])
    s = np.empty((n, len(ts)), dtype=complex)
    a_s = np.empty_like(s)
    a0a_s = np.empty_like(s)
    for i in range(n):
        traj = sample_trajectory(p, horizon, rng)
        knots = np.concatenate([[0.0], traj.jump_times, [horizon]])
        segs = np.diff(knots)
        vals = traj.initial_value * (-1.0) ** np.arange(len(segs))
        phi = np.interp(ts, knots, np.concatenate([[0.0], np.cumsum(vals * segs)]))
        sv = np.exp(-1j * p.omega_amp * phi)
        s[i] = sv
        a_s[i] = value_at(traj, ts) * sv
        a0a_s[i] = traj.initial_value * a_s[i]
    return s, a_s, a0a_s


class TestPropagators:
    def test_initial_values(self):
        s0, s1, s2 = propagators(SLOW, 0.0)
        assert (s0, s1, s2) == (1.0, 0.0j, 1.0)

    def test_noise_free_limit(self):
        p = NoiseParams(omega_amp=0.0, nu=1.7)
        ts = np.linspace(0.0, 12.0, 50)
        s0, s1, s2 = propagators(p, ts)
        assert np.allclose(s0, 1.0, atol=1e-14)
        assert np.allclose(s1.imag, 0.0, atol=1e-14)

    def test_degenerate_point_closed_form(self):
        # K = 1/2: S0 = e^{-nu t/2}(1 + nu t/2), S2 = e^{-nu t/2}(1 - nu t/2)
        p = NoiseParams.from_color(0.5, nu=2.0)
        ts = np.linspace(0.0, 6.0, 25)
        s0, _, s2 = propagators(p, ts)
        env = np.exp(-0.5 * p.nu * ts)
        assert np.allclose(s0, env * (1 + 0.5 * p.nu * ts), atol=1e-12)
        assert np.allclose(s2, env * (1 - 0.5 * p.nu * ts), atol=1e-12)

    def test_continuity_across_degeneracy(self):
        lo = NoiseParams.from_color(0.5 - 1e-6, nu=1.0)
        hi = NoiseParams.from_color(0.5 + 1e-6, nu=1.0)
        ts = np.linspace(0.0, 10.0, 101)
        for a, b in zip(propagators(lo, ts), propagators(hi, ts)):
            assert np.max(np.abs(np.asarray(a) - np.asarray(b))) < 1e-4

    def test_s0_bounded_by_one(self):
        for color in (0.1, 0.45, 0.5, 0.8, 3.0):
            for nu in (0.3, 1.0, 4.0):
                p = NoiseParams.from_color(color, nu=nu)
                s0, _, _ = propagators(p, np.linspace(0.0, 40.0 / nu, 400))
                assert np.max(np.abs(s0)) <= 1.0 + 1e-12

    def test_oscillatory_iff_slow(self):
        ts = np.linspace(0.0, 60.0, 4001)
        for color, expect_zeros in ((0.3, False), (0.49, False), (0.51, True), (2.0, True)):
            p = NoiseParams.from_color(color, nu=1.0)
            s0, _, _ = propagators(p, ts)
            has_zero = np.any(s0[:-1] * s0[1:] < 0)
            assert has_zero == expect_zeros, f"K={color}"

    def test_monte_carlo_oracle_s0(self):
        # slow noise: <exp(-i Omega int alpha)> over 2e4 realizations
        ts = np.linspace(0.4, 8.0, 10)
        s, _, _ = kubo_monte_carlo(SLOW, ts, 20_000, seed=42)
        s0, _, _ = propagators(SLOW, ts)
        se = s.real.std(axis=0, ddof=1) / np.sqrt(len(s))
        assert np.all(np.abs(s.real.mean(axis=0) - s0) < 3.5 * se)

    def test_s1_form_discriminates_misprint(self):
        # the empirical <alpha S> decides the amplitude/rate prefactor of the
        # odd propagator: 1/eta (resolved) against the printed 1/nu, which in
        # the slow regime even predicts a real value for an odd average
        p = SLOW
        ts = np.linspace(0.4, 4.0, 6)
        _, a_s, _ = kubo_monte_carlo(p, ts, 20_000, seed=43)
        emp = a_s.imag.mean(axis=0)
        se = a_s.imag.std(axis=0, ddof=1) / np.sqrt(len(a_s))
        _, s1, _ = propagators(p, ts)
        resolved = s1.imag
        printed = (
            1j * (p.omega_amp / p.nu)
            * (np.exp(-0.5 * ts * p.nu_plus) - np.exp(-0.5 * ts * p.nu_minus))
        ).imag
        assert np.all(np.abs(emp - resolved) < 4.0 * se)
        assert np.any(np.abs(emp - printed) > 10.0 * se)

    def test_monte_carlo_oracle_s2(self):
        ts = np.linspace(0.4, 6.0, 8)
        s, _, a0a_s = kubo_monte_carlo(FAST, ts, 20_000, seed=44)
        s0, _, s2 = propagators(FAST, ts)
        se0 = s.real.std(axis=0, ddof=1) / np.sqrt(len(s))
        se2 = a0a_s.real.std(axis=0, ddof=1) / np.sqrt(len(s))
        assert np.all(np.abs(s.real.mean(axis=0) - s0) < 3.5 * se0)
        assert np.all(np.abs(a0a_s.real.mean(axis=0) - s2) < 3.5 * se2)
