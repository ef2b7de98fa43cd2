import numpy as np
import pytest

from telespin.dynamics import BlochState, SystemParams, bloch_to_density
from telespin.errors import RegimeError
from telespin.noise import NoiseParams
from telespin.nonmarkov import (
    DistinguishabilityTrace,
    analytic_blp,
    analytic_blp_published,
    analytic_distinguishability,
    blp_measure,
    numeric_blp_of_s0,
    optimal_initial_pair,
    reduced_limit_solution,
    trace_distance,
)

SLOW = NoiseParams(omega_amp=np.pi, nu=np.pi / 2)


def random_state(rng) -> BlochState:
    p = rng.normal(size=3)
    p *= rng.uniform(0, 1) ** (1 / 3) / np.linalg.norm(p)
    return BlochState(*p)


class TestTraceDistance:
    def test_antipodal_pure_states(self):
        assert trace_distance(BlochState(1, 0, 0), BlochState(-1, 0, 0)) == 1.0

    def test_identical_states(self):
        s = BlochState(0.2, -0.1, 0.4)
        assert trace_distance(s, s) == 0.0

    def test_matrix_norm_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            a, b = random_state(rng), random_state(rng)
            diff = bloch_to_density(a) - bloch_to_density(b)
            oracle = 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum()
            assert trace_distance(a, b) == pytest.approx(oracle, abs=1e-12)

    def test_metric_properties(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            a, b, c = (random_state(rng) for _ in range(3))
            dab = trace_distance(a, b)
            assert dab == pytest.approx(trace_distance(b, a), abs=1e-15)
            assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12

    def test_rejects_unphysical(self):
        with pytest.raises(ValueError):
            trace_distance(BlochState(1.1, 0, 0), BlochState(0, 0, 0))


class TestOptimalPair:
    def test_orthogonal_boundary_pair(self):
        a, b = optimal_initial_pair()
        assert trace_distance(a, b) == 1.0
        assert a.norm() == 1.0 and b.norm() == 1.0

    def test_rank_one_projectors(self):
        for s in optimal_initial_pair():
            rho = bloch_to_density(s)
            assert np.allclose(rho @ rho, rho, atol=1e-15)
            assert np.linalg.matrix_rank(rho) == 1


class TestBlpMeasure:
    def test_monotone_trace_gives_zero(self):
        t = np.linspace(0, 10, 500)
        res = blp_measure(DistinguishabilityTrace(t, np.exp(-t)))
        assert res.measure == 0.0
        assert res.growth_intervals == []

    def test_two_full_revivals(self):
        t = np.linspace(0, 2 * np.pi, 40001)
        res = blp_measure(DistinguishabilityTrace(t, np.abs(np.cos(t))))
        assert res.measure == pytest.approx(2.0, abs=5e-4)
        assert len(res.growth_intervals) == 2

    def test_interval_sum_consistency(self):
        rng = np.random.default_rng(4)
        t = np.linspace(0, 5, 2000)
        d = np.abs(np.cos(3 * t)) * np.exp(-0.3 * t) + 0.01 * np.sin(17 * t)
        res = blp_measure(DistinguishabilityTrace(t, d))
        interval_sum = sum(
            d[np.searchsorted(t, b)] - d[np.searchsorted(t, a)]
            for a, b in res.growth_intervals
        )
        assert res.measure == pytest.approx(interval_sum, abs=1e-10)

    def test_rejects_nonuniform_grid(self):
        t = np.array([0.0, 0.1, 0.3, 0.35, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1])
        with pytest.raises(ValueError):
            blp_measure(DistinguishabilityTrace(t, np.exp(-t)))

    def test_grid_refinement_stability(self):
        # the measure of the analytic trace changes < 1% under halving h
        vals = []
        for n in (20000, 40000):
            t = np.linspace(0, 50 / SLOW.nu, n + 1)
            d = analytic_distinguishability(SLOW, t)
            vals.append(blp_measure(DistinguishabilityTrace(t, d)).measure)
        assert abs(vals[1] - vals[0]) < 0.01 * vals[1]


class TestAnalyticLimits:
    def test_distinguishability_initial_value(self):
        assert analytic_distinguishability(SLOW, 0.0) == 1.0

    def test_fast_noise_monotone(self):
        p = NoiseParams.from_color(0.3, nu=2.0)
        t = np.linspace(0, 30, 5000)
        d = analytic_distinguishability(p, t)
        res = blp_measure(DistinguishabilityTrace(t, d))
        assert res.measure == 0.0

    def test_slow_noise_revivals(self):
        t = np.linspace(0, 20, 5000)
        d = analytic_distinguishability(SLOW, t)
        assert d.min() < 1e-3      # zeros
        res = blp_measure(DistinguishabilityTrace(t, d))
        assert res.measure > 0.5   # substantial revivals

    def test_closed_form_matches_numeric_oracle(self):
        for omega, nu in [(np.pi, np.pi / 2), (2.0, 1.0), (5.0, 0.7)]:
            p = NoiseParams(omega_amp=omega, nu=nu)
            closed = analytic_blp(p)
            numeric = numeric_blp_of_s0(p, horizon=50 / p.nu)
            assert closed == pytest.approx(numeric, abs=1e-6)

    def test_regime_error_for_fast_noise(self):
        with pytest.raises(RegimeError):
            analytic_blp(NoiseParams.from_color(0.4, nu=1.0))

    def test_published_form_is_misprinted(self):
        # the printed closed form disagrees with the numeric oracle (it is
        # negative at the reference point); kept only for documentation
        published = analytic_blp_published(SLOW)
        oracle = numeric_blp_of_s0(SLOW, horizon=50 / SLOW.nu)
        assert published < 0.0
        assert abs(published - oracle) > 0.1

    def test_measure_grows_with_amplitude(self):
        values = [analytic_blp(NoiseParams(omega_amp=om, nu=1.0))
                  for om in (1.0, 2.0, 4.0, 8.0)]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestReducedLimit:
    def test_no_drive_is_pure_precession(self):
        p = NoiseParams(omega_amp=0.0, nu=1.0)
        ts = np.linspace(0, 10, 101)
        sol = reduced_limit_solution(SystemParams(1.3, 0.0), p, ts)
        d = np.hypot(sol[:, 0], sol[:, 1])
        assert np.allclose(d, 1.0, atol=1e-12)
        assert np.allclose(sol[:, 0], np.cos(1.3 * ts), atol=1e-12)

    @pytest.mark.parametrize("eps0", [0.0, 1.0, 5.0])
    def test_distinguishability_equals_s0(self, eps0):
        ts = np.linspace(0, 12, 401)
        sol = reduced_limit_solution(SystemParams(eps0, 1.0), SLOW, ts)
        d = np.hypot(sol[:, 0], sol[:, 1])
        assert np.abs(d - analytic_distinguishability(SLOW, ts)).max() < 1e-10

    def test_bias_independence(self):
        ts = np.linspace(0, 12, 401)
        d_ref = None
        for eps0 in (0.0, 0.7, 3.0, 11.0):
            sol = reduced_limit_solution(SystemParams(eps0, 1.0), SLOW, ts)
            d = np.hypot(sol[:, 0], sol[:, 1])
            if d_ref is None:
                d_ref = d
            assert np.abs(d - d_ref).max() < 1e-10

    def test_degenerate_color_continuity(self):
        ts = np.linspace(0, 8, 101)
        lo = reduced_limit_solution(SystemParams(1.0, 1.0),
                                    NoiseParams.from_color(0.5 - 1e-7, 2.0), ts)
        hi = reduced_limit_solution(SystemParams(1.0, 1.0),
                                    NoiseParams.from_color(0.5 + 1e-7, 2.0), ts)
        assert np.abs(lo - hi).max() < 1e-5
