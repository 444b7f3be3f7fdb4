"""Generalisation-error estimation, grid orchestration, slope fits, oracles.

The point estimate of the generalisation error of a trained control is the
out-of-sample mean loss minus the in-sample mean loss (positive = worse out
of sample; the loss is the negated reward, so the convention holds for both
benchmark problems).  Slope fits regress log(median |gen| per n) on log n;
medians rather than means, because unregularised runs produce extreme
outliers.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import rollout, training
from .envs import ControlProblem, sample_paths


@dataclass(frozen=True)
class GenReport:
    trial: int
    n: int
    r: int
    regularised: bool
    in_sample_loss: float
    out_sample_loss: float
    gen_estimate: float
    seed: int
    wall_time_s: float = 0.0
    failed: bool = False


def gen_estimate(problem: ControlProblem, gibbs, train_paths, test_paths):
    """(in_sample_loss, out_sample_loss, gen): mean cost-to-go from the
    initial state over each path set; gen = out - in exactly."""
    in_s = rollout.batch_risk(problem, gibbs, train_paths, 0)
    out_s = rollout.batch_risk(problem, gibbs, test_paths, 0)
    return in_s, out_s, out_s - in_s


def _cell_seed(master_seed, n, r, trial) -> int:
    # stable per-cell seed: deleting one trial never shifts another's stream
    ss = np.random.SeedSequence([master_seed, n, r, trial])
    return int(ss.generate_state(1)[0])


def run_cell(problem: ControlProblem, n, r, trial, config_base: training.TrainConfig,
             master_seed, n_test=1000, timing=False) -> GenReport:
    """One grid cell: fresh dataset, fresh training, one report."""
    from dataclasses import replace

    seed = _cell_seed(master_seed, n, r, trial)
    ss = np.random.SeedSequence(seed)
    s_train, s_test, s_opt = ss.spawn(3)
    train = sample_paths(problem.sampler, n, np.random.default_rng(s_train))
    test = sample_paths(problem.sampler, n_test, np.random.default_rng(s_test))
    config = replace(config_base, width=r, seed=int(s_opt.generate_state(1)[0]))

    start = time.perf_counter()
    try:
        gibbs = training.gibbs_train(problem, train, config)
    except training.NonFiniteGradientError:
        return GenReport(trial, n, r, config.regularised,
                         float("nan"), float("nan"), float("nan"), seed,
                         failed=True)
    wall = time.perf_counter() - start if timing else 0.0
    in_s, out_s, gen = gen_estimate(problem, gibbs, train, test)
    return GenReport(trial, n, r, config.regularised, in_s, out_s, gen, seed,
                     wall_time_s=wall)


def run_grid(problem_factory, ns, rs, trials, config_base: training.TrainConfig,
             master_seed, n_test=1000, timing=False, jobs=1) -> list:
    """Reports for every (n, r, trial) cell; deterministic given master_seed.

    Trainer aborts are recorded as failed reports, not fatal to the grid.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cells = [(n, r, trial) for n in ns for r in rs for trial in range(trials)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, problem_factory(), n, r, trial,
                                   config_base, master_seed, n_test, timing)
                       for n, r, trial in cells]
            return [f.result() for f in futures]
    problem = problem_factory()
    return [run_cell(problem, n, r, trial, config_base, master_seed, n_test, timing)
            for n, r, trial in cells]


def median_abs_gen(reports) -> dict:
    """n -> median |gen| over the finite reports at that n."""
    by_n = {}
    for rep in reports:
        if np.isfinite(rep.gen_estimate):
            by_n.setdefault(rep.n, []).append(abs(rep.gen_estimate))
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def slope_fit(reports):
    """OLS of log(median |gen| per n) against log n -> (slope, intercept)."""
    med = median_abs_gen(reports)
    ns = [n for n, m in med.items() if m > 0]
    if len(ns) < 2:
        raise ValueError("need >= 2 distinct n with nonzero median |gen|")
    x = np.log([float(n) for n in ns])
    y = np.log([med[n] for n in ns])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def reward_mean_se(problem: ControlProblem, gibbs, paths):
    """Monte-Carlo mean reward (negated loss from the initial state) and SE."""
    paths = np.asarray(paths, dtype=float)
    _, _, losses = rollout.simulate(problem, gibbs, paths)
    rewards = -losses
    return float(rewards.mean()), float(rewards.std(ddof=1) / np.sqrt(len(rewards)))


def merton_gap(problem: ControlProblem, gibbs, v_star_mc, eval_paths) -> float:
    """Trained-control Monte-Carlo reward minus the oracle's; <= 0 up to
    Monte-Carlo error by optimality of the analytic control."""
    mean, _ = reward_mean_se(problem, gibbs, eval_paths)
    return mean - v_star_mc


# ---------------------------------------------------------------------------
# CSV outputs
# ---------------------------------------------------------------------------

GEN_RESULTS_SCHEMA = "trial,n,r,regularised,in_sample,out_sample,gen,seed,wall_time_s"
SLOPE_SUMMARY_SCHEMA = "n,median_abs_gen,count"


def save_gen_results(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# mfctrl gen_results v1\n")
        writer = csv.writer(fh)
        writer.writerow(GEN_RESULTS_SCHEMA.split(","))
        for rep in reports:
            writer.writerow([
                rep.trial, rep.n, rep.r, int(rep.regularised),
                f"{rep.in_sample_loss:.17g}", f"{rep.out_sample_loss:.17g}",
                f"{rep.gen_estimate:.17g}", rep.seed, f"{rep.wall_time_s:.17g}",
            ])


def save_slope_summary(reports, path) -> None:
    med = median_abs_gen(reports)
    counts = {}
    for rep in reports:
        if np.isfinite(rep.gen_estimate):
            counts[rep.n] = counts.get(rep.n, 0) + 1
    with open(path, "w", newline="") as fh:
        fh.write("# mfctrl slope_summary v1\n")
        writer = csv.writer(fh)
        writer.writerow(SLOPE_SUMMARY_SCHEMA.split(","))
        for n, m in med.items():
            writer.writerow([n, f"{m:.17g}", counts[n]])
