import numpy as np
import pytest

from mfctrl import envs, evaluation, nets, rollout, training


def merton_small():
    return envs.merton_problem(d=2, eta=np.array([1.0, 0.0]))


def reference_gibbs(problem):
    """Gibbs vector with a fixed zero control at the single trainable step."""
    gibbs = rollout.GibbsVector(problem.horizon)
    gibbs.set(1, nets.constant_control_ensemble(
        np.zeros(problem.control_dim), problem.state_dim))
    return gibbs


class TestGenEstimate:
    def test_same_sets_give_zero(self, rng):
        problem = merton_small()
        paths = envs.sample_paths(problem.sampler, 20, rng)
        gibbs = reference_gibbs(problem)
        in_s, out_s, gen = evaluation.gen_estimate(problem, gibbs, paths, paths)
        assert in_s == out_s
        assert gen == 0.0

    def test_antisymmetric_in_path_sets(self, rng):
        problem = merton_small()
        a = envs.sample_paths(problem.sampler, 15, rng)
        b = envs.sample_paths(problem.sampler, 25, rng)
        gibbs = reference_gibbs(problem)
        _, _, gen_ab = evaluation.gen_estimate(problem, gibbs, a, b)
        _, _, gen_ba = evaluation.gen_estimate(problem, gibbs, b, a)
        assert gen_ab == -gen_ba

    def test_gen_is_exactly_out_minus_in(self, rng):
        problem = merton_small()
        a = envs.sample_paths(problem.sampler, 10, rng)
        b = envs.sample_paths(problem.sampler, 10, rng)
        gibbs = reference_gibbs(problem)
        in_s, out_s, gen = evaluation.gen_estimate(problem, gibbs, a, b)
        assert gen == out_s - in_s

    def test_data_independent_control_gen_within_mc_error(self, rng):
        # with a fixed (untrained) control the two sample means estimate the
        # same expectation, so gen ~ 0 within Monte-Carlo error
        problem = merton_small()
        gibbs = rollout.GibbsVector(problem.horizon)
        gibbs.set(1, nets.constant_control_ensemble(
            np.array([0.1, 0.0]), problem.state_dim))
        a = envs.sample_paths(problem.sampler, 4000, rng)
        b = envs.sample_paths(problem.sampler, 4000, rng)
        in_s, out_s, gen = evaluation.gen_estimate(problem, gibbs, a, b)
        _, _, losses_a = rollout.simulate(problem, gibbs, a)
        se = losses_a.std(ddof=1) * np.sqrt(2.0 / len(losses_a))
        assert abs(gen) <= 4.0 * se


class TestSlopeFit:
    def _synthetic(self, exponent, ns=(8, 64, 512)):
        return [
            evaluation.GenReport(trial=i, n=n, r=10, regularised=True,
                                 in_sample_loss=0.0,
                                 out_sample_loss=float(n) ** exponent,
                                 gen_estimate=float(n) ** exponent, seed=0)
            for n in ns for i in range(3)
        ]

    def test_exact_inverse_law(self):
        slope, intercept = evaluation.slope_fit(self._synthetic(-1.0))
        assert slope == pytest.approx(-1.0, abs=1e-9)
        assert intercept == pytest.approx(0.0, abs=1e-9)

    def test_flat_and_half_laws(self):
        slope, _ = evaluation.slope_fit(self._synthetic(0.0001))
        assert slope == pytest.approx(0.0001, abs=1e-9)
        slope, _ = evaluation.slope_fit(self._synthetic(-0.5))
        assert slope == pytest.approx(-0.5, abs=1e-9)

    def test_median_ignores_outliers_and_nans(self):
        reports = self._synthetic(-1.0)
        reports.append(evaluation.GenReport(9, 8, 10, True, 0.0, 1e9, 1e9, 0))
        reports.append(evaluation.GenReport(8, 8, 10, True, np.nan, np.nan,
                                            np.nan, 0, failed=True))
        med = evaluation.median_abs_gen(reports)
        assert med[8] == pytest.approx(1.0 / 8.0)

    def test_needs_two_levels(self):
        with pytest.raises(ValueError):
            evaluation.slope_fit(self._synthetic(-1.0, ns=(8,)))


class TestRunGrid:
    CONFIG = training.TrainConfig(epochs=5, lr_max=0.01, lr_min=0.001,
                                  regularised=False)

    def test_single_cell_shape(self):
        reports = evaluation.run_grid(merton_small, ns=[4], rs=[3], trials=1,
                                      config_base=self.CONFIG, master_seed=7,
                                      n_test=8)
        assert len(reports) == 1
        rep = reports[0]
        assert (rep.n, rep.r, rep.trial) == (4, 3, 0)
        assert not rep.failed
        assert np.isfinite(rep.gen_estimate)
        assert rep.wall_time_s == 0.0   # timing off by default

    def test_grid_determinism(self):
        kw = dict(ns=[4, 8], rs=[3], trials=2, config_base=self.CONFIG,
                  master_seed=11, n_test=8)
        r1 = evaluation.run_grid(merton_small, **kw)
        r2 = evaluation.run_grid(merton_small, **kw)
        assert r1 == r2

    def test_cells_are_independent(self):
        # a cell's report is identical whether or not other trials run
        full = evaluation.run_grid(merton_small, ns=[4], rs=[3], trials=3,
                                   config_base=self.CONFIG, master_seed=13,
                                   n_test=8)
        solo = evaluation.run_cell(merton_small(), 4, 3, 2, self.CONFIG,
                                   master_seed=13, n_test=8)
        assert full[2] == solo

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failed_cell_is_reported_not_fatal(self):
        # a huge learning rate blows the Merton exponential loss up to inf
        bad = training.TrainConfig(epochs=50, lr_max=1e6, lr_min=1e5,
                                   regularised=False)
        rep = evaluation.run_cell(merton_small(), 8, 4, 0, bad, master_seed=3,
                                  n_test=8)
        assert rep.failed
        assert np.isnan(rep.gen_estimate)


class TestMertonGap:
    def test_oracle_control_gap_zero_within_se(self, rng):
        problem = envs.merton_problem()
        pi_star, v_star_mc, se = envs.merton_oracle(problem, mc_paths=40000,
                                                    rng=np.random.default_rng(100))
        gibbs = rollout.GibbsVector(problem.horizon)
        gibbs.set(1, nets.constant_control_ensemble(pi_star, problem.state_dim))
        eval_paths = envs.sample_paths(problem.sampler, 40000,
                                       np.random.default_rng(200))
        gap = evaluation.merton_gap(problem, gibbs, v_star_mc, eval_paths)
        # both sides estimate the same optimal value; independent draws
        assert abs(gap) <= 3.0 * se * np.sqrt(2.0)

    def test_zero_control_gap_is_negative(self, rng):
        problem = envs.merton_problem()
        _, v_star_mc, se = envs.merton_oracle(problem, mc_paths=40000,
                                              rng=np.random.default_rng(100))
        gibbs = rollout.GibbsVector(problem.horizon)
        gibbs.set(1, nets.constant_control_ensemble(
            np.zeros(problem.control_dim), problem.state_dim))
        eval_paths = envs.sample_paths(problem.sampler, 40000,
                                       np.random.default_rng(200))
        gap = evaluation.merton_gap(problem, gibbs, v_star_mc, eval_paths)
        # remaining reward comes only through the fixed first-period leg
        assert gap < -3.0 * se * np.sqrt(2.0)
        assert gap == pytest.approx(-0.028, abs=0.01)


class TestCsvOutputs:
    def _reports(self):
        return [
            evaluation.GenReport(0, 8, 50, True, 0.5, 0.625, 0.125, 42),
            evaluation.GenReport(1, 8, 50, True, 0.5, 0.75, 0.25, 43),
        ]

    def test_gen_results_roundtrip_schema(self, tmp_path):
        path = tmp_path / "gen_results.csv"
        evaluation.save_gen_results(self._reports(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# mfctrl gen_results v1"
        assert lines[1] == evaluation.GEN_RESULTS_SCHEMA
        assert lines[2].split(",") == [
            "0", "8", "50", "1", "0.5", "0.625", "0.125", "42", "0"]

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        evaluation.save_gen_results(self._reports(), a)
        evaluation.save_gen_results(self._reports(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_slope_summary(self, tmp_path):
        path = tmp_path / "slope_summary.csv"
        evaluation.save_slope_summary(self._reports(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# mfctrl slope_summary v1"
        assert lines[1] == evaluation.SLOPE_SUMMARY_SCHEMA
        assert lines[2] == "8,0.1875,2"
