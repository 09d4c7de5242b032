"""Data generators, metric evaluation, and the scenario runner.

Generator oracles: exact reconstruction from the documented draw order,
plus large-sample moment checks against the target distributions.
"""

import json

import numpy as np
import pytest
from scipy import special

import tlasso.simulate
from tlasso import (Coefficients, DataError, Dataset, FitConfig,
                    InvalidConfigError, PathError, ScenarioError,
                    ScenarioSpec, evaluate, gen_beta0, gen_design, gen_noise,
                    make_rng, run_scenario)
from tlasso.rng import cauchy, normals, student_t, uniforms
from tlasso.simulate import (parse_scenario_file, scenario_to_csv,
                             scenario_to_json)


class TestGenDesign:
    def test_rho_zero_is_plain_normal(self):
        x = gen_design(50, 4, 0.0, make_rng(1))
        want = normals(make_rng(1), (50, 4))
        assert np.array_equal(x, want)

    def test_autoregressive_covariance(self):
        n, p, rho = 100000, 4, 0.5
        x = gen_design(n, p, rho, make_rng(7))
        cov = x.T @ x / n
        for j in range(p):
            for k in range(p):
                assert cov[j, k] == pytest.approx(rho ** abs(j - k),
                                                  abs=0.02)

    def test_rejects_bad_rho(self):
        with pytest.raises(InvalidConfigError):
            gen_design(10, 2, 1.0, make_rng(0))
        with pytest.raises(InvalidConfigError):
            gen_design(10, 2, -0.1, make_rng(0))


class TestGenBeta0:
    def test_sign_pattern(self):
        b = gen_beta0(10, 5).beta
        assert list(b) == [1, 1, 1, -1, -1, 0, 0, 0, 0, 0]

    def test_even_split(self):
        b = gen_beta0(6, 4).beta
        assert list(b) == [1, 1, -1, -1, 0, 0]

    def test_bounds(self):
        assert np.all(gen_beta0(3, 0).beta == 0)
        with pytest.raises(InvalidConfigError):
            gen_beta0(3, 4)


class TestGenNoise:
    def test_exact_reconstruction_gauss(self):
        e = gen_noise(100, "gauss", 5)
        assert np.array_equal(e, normals(make_rng(5), 100))

    def test_exact_reconstruction_wide(self):
        e = gen_noise(100, "gauss_wide", 5)
        assert np.array_equal(e, 3.0 * normals(make_rng(5), 100))

    def test_exact_reconstruction_student(self):
        e = gen_noise(100, "student_t", 5)
        assert np.array_equal(e, student_t(make_rng(5), 3, 100))

    def test_exact_reconstruction_cauchy(self):
        e = gen_noise(100, "cauchy", 5)
        assert np.array_equal(e, cauchy(make_rng(5), 100))

    def test_exact_reconstruction_outlier(self):
        n = 200
        e = gen_noise(n, "gauss_outlier", 5)
        rng = make_rng(5)
        want = normals(rng, n)
        k = round(0.3 * n)
        idx = np.argsort(uniforms(rng, n))[:k]
        sign = np.where(uniforms(rng, k) < 0.5, 1.0, -1.0)
        mag = 5.0 + 5.0 * uniforms(rng, k)
        want[idx] += sign * mag
        assert np.array_equal(e, want)

    def test_outlier_count_and_magnitude(self):
        n = 1000
        base = normals(make_rng(8), n)
        e = gen_noise(n, "gauss_outlier", 8)
        shifted = np.flatnonzero(e != base)
        assert shifted.size == 300
        shifts = np.abs(e[shifted] - base[shifted])
        assert np.all((shifts >= 5.0) & (shifts <= 10.0))

    def test_moments(self):
        n = 200000
        g = gen_noise(n, "gauss", 11)
        assert g.mean() == pytest.approx(0.0, abs=0.02)
        assert g.var() == pytest.approx(1.0, rel=0.03)
        w = gen_noise(n, "gauss_wide", 12)
        assert w.var() == pytest.approx(9.0, rel=0.03)
        t = gen_noise(n, "student_t", 13)
        assert t.var() == pytest.approx(3.0, rel=0.15)
        c = gen_noise(n, "cauchy", 14)
        assert np.median(np.abs(c)) == pytest.approx(1.0, rel=0.05)

    def test_normals_match_inverse_cdf(self):
        # the normal stream is the inverse cdf applied to the uniform stream
        u = uniforms(make_rng(3), 50)
        z = normals(make_rng(3), 50)
        assert np.array_equal(z, special.ndtri(u))

    def test_rejects_unknown_kind(self):
        with pytest.raises(InvalidConfigError):
            gen_noise(10, "laplace", 0)


class TestEvaluate:
    def test_double_loop_oracle(self):
        rng = np.random.default_rng(21)
        n, nt, p = 17, 9, 5
        d_tr = Dataset(x=rng.standard_normal((n, p)),
                       y=rng.standard_normal(n))
        d_te = Dataset(x=rng.standard_normal((nt, p)),
                       y=rng.standard_normal(nt))
        bh = rng.standard_normal(p)
        b0 = rng.standard_normal(p)
        rec = evaluate(bh, b0, d_tr, d_te)
        diff = bh - b0
        assert rec.l2sq == pytest.approx(sum(v * v for v in diff), rel=1e-12)
        assert rec.l1 == pytest.approx(sum(abs(v) for v in diff), rel=1e-12)
        lin = sum((sum(d_tr.x[i, j] * diff[j] for j in range(p))) ** 2
                  for i in range(n)) / n
        assert rec.linpred == pytest.approx(lin, rel=1e-12)
        prd = sum((d_te.y[i] - sum(d_te.x[i, j] * bh[j] for j in range(p))) ** 2
                  for i in range(nt)) / nt
        assert rec.pred == pytest.approx(prd, rel=1e-12)

    def test_intercept_only_affects_pred(self):
        rng = np.random.default_rng(22)
        d_tr = Dataset(x=rng.standard_normal((10, 3)), y=rng.standard_normal(10))
        d_te = Dataset(x=rng.standard_normal((6, 3)), y=rng.standard_normal(6))
        b0 = np.zeros(3)
        flat = evaluate(Coefficients(beta=np.ones(3)), b0, d_tr, d_te)
        lift = evaluate(Coefficients(beta=np.ones(3), intercept=2.0),
                        b0, d_tr, d_te)
        assert lift.l2sq == flat.l2sq and lift.linpred == flat.linpred
        assert lift.pred != flat.pred

    def test_shape_mismatch(self):
        d = Dataset(x=np.ones((4, 2)), y=np.ones(4))
        with pytest.raises(DataError):
            evaluate(np.ones(3), np.ones(3), d, d)


SMALL = ScenarioSpec(n=40, p=20, s=3, rho_x=0.0, noise="gauss", n_test=20,
                     reps=4, seed=99)


class TestRunScenario:
    def test_aggregates_match_values(self):
        res = run_scenario(SMALL, [FitConfig(nu=3.0)], k=30)
        lab = res.method_labels[0]
        v = res.values(lab, "l2sq")
        assert v.shape == (4,)
        assert not np.any(np.isnan(v))
        assert res.mean(lab, "l2sq") == pytest.approx(v.mean(), rel=1e-15)
        assert res.sd(lab, "l2sq") == pytest.approx(v.std(ddof=1), rel=1e-15)
        assert res.reps_used(lab) == 4
        assert res.kkt_max <= 10 * 1e-7

    def test_deterministic_across_runs(self):
        a = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20)
        b = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20)
        lab = a.method_labels[0]
        for m in ("l2sq", "l1", "linpred", "pred"):
            assert np.array_equal(a.values(lab, m), b.values(lab, m))

    def test_threads_do_not_change_results(self):
        a = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20, threads=1)
        b = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20, threads=3)
        lab = a.method_labels[0]
        assert np.array_equal(a.values(lab, "l2sq"), b.values(lab, "l2sq"))
        assert np.array_equal(a.selected_lambda[lab], b.selected_lambda[lab])

    def test_methods_share_data(self):
        res = run_scenario(SMALL, [FitConfig(nu=3.0),
                                   FitConfig(loss_kind="squared")], k=20)
        assert res.method_labels == ["student(nu=3)", "squared"]
        # same replication data: gaussian noise keeps both in the same range
        for lab in res.method_labels:
            assert res.reps_used(lab) == 4

    def test_duplicate_method_labels_disambiguated(self):
        res = run_scenario(SMALL, [FitConfig(nu=3.0), FitConfig(nu=3.0)], k=10)
        assert res.method_labels == ["student(nu=3)", "student(nu=3)#2"]

    def test_failure_budget_enforced(self, monkeypatch):
        def always_fail(*args, **kwargs):
            raise PathError("synthetic path failure")

        monkeypatch.setattr(tlasso.simulate, "fit_path", always_fail)
        with pytest.raises(ScenarioError):
            run_scenario(SMALL, [FitConfig(nu=3.0)], k=10)

    def test_spec_validation(self):
        with pytest.raises(InvalidConfigError):
            ScenarioSpec(n=0, p=5, s=2, noise="gauss", seed=1)
        with pytest.raises(InvalidConfigError):
            ScenarioSpec(n=10, p=5, s=6, noise="gauss", seed=1)
        with pytest.raises(InvalidConfigError):
            ScenarioSpec(n=10, p=5, s=2, noise="gamma", seed=1)
        with pytest.raises(InvalidConfigError):
            ScenarioSpec(n=10, p=5, s=2, noise="gauss", seed=1, reps=0)


class TestSerialization:
    def test_csv_layout(self, tmp_path):
        res = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20)
        out = tmp_path / "t.csv"
        scenario_to_csv(res, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "method,l2sq,l1,linpred,pred"
        assert lines[1].startswith("student(nu=3),")
        cell = lines[1].split('"')[1]
        mean_s, sd_s = cell.split(" (")
        assert float(mean_s) == res.mean("student(nu=3)", "l2sq")
        assert float(sd_s.rstrip(")")) == res.sd("student(nu=3)", "l2sq")

    def test_csv_single_rep_sd_undefined(self, tmp_path):
        spec = ScenarioSpec(n=30, p=10, s=2, noise="gauss", seed=4, reps=1,
                            n_test=10)
        res = run_scenario(spec, [FitConfig(nu=3.0)], k=10)
        out = tmp_path / "one.csv"
        scenario_to_csv(res, out)
        assert "(undefined)" in out.read_text()

    def test_json_round_trip(self, tmp_path):
        res = run_scenario(SMALL, [FitConfig(nu=3.0)], k=20)
        out = tmp_path / "t.json"
        scenario_to_json(res, out)
        doc = json.loads(out.read_text())
        assert doc["tool"] == "tlasso"
        assert doc["rng_contract"]
        assert doc["scenario"]["n"] == 40
        lab = res.method_labels[0]
        got = doc["replications"][lab]["l2sq"]
        assert got == pytest.approx(list(res.values(lab, "l2sq")))
        assert doc["aggregates"][lab]["l2sq"]["mean"] == res.mean(lab, "l2sq")

    def test_json_bytes_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        scenario_to_json(run_scenario(SMALL, [FitConfig(nu=3.0)], k=20), a)
        scenario_to_json(run_scenario(SMALL, [FitConfig(nu=3.0)], k=20), b)
        assert a.read_bytes() == b.read_bytes()


class TestScenarioFile:
    def test_parse_full_file(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(
            "# benchmark scenario\n"
            "n = 50\n"
            "p = 30        # columns\n"
            "s = 5\n"
            "rho_x = 0.5\n"
            "noise = student_t\n"
            "seed = 42\n"
            "reps = 8\n"
            "methods = student, squared\n"
            "criterion = aic\n"
            "k = 40\n")
        parsed = parse_scenario_file(cfg)
        assert parsed["spec"].n == 50 and parsed["spec"].rho_x == 0.5
        assert parsed["spec"].reps == 8
        assert [m.loss_kind for m in parsed["methods"]] == ["student",
                                                            "squared"]
        assert parsed["criterion"] == "aic"
        assert parsed["k"] == 40 and parsed["threads"] == 1

    def test_unknown_key_names_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("n = 10\np = 5\ns = 2\nnoise = gauss\nseed = 1\n"
                       "bandwidth = 3\n")
        with pytest.raises(DataError, match="6.*bandwidth"):
            parse_scenario_file(cfg)

    def test_missing_required_key(self, tmp_path):
        cfg = tmp_path / "short.cfg"
        cfg.write_text("n = 10\np = 5\nnoise = gauss\nseed = 1\n")
        with pytest.raises(DataError, match="missing.*s"):
            parse_scenario_file(cfg)

    def test_bad_value_type(self, tmp_path):
        cfg = tmp_path / "badval.cfg"
        cfg.write_text("n = ten\np = 5\ns = 2\nnoise = gauss\nseed = 1\n")
        with pytest.raises(DataError, match="ten"):
            parse_scenario_file(cfg)
