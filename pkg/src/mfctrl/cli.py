"""Experiment entry point.

    mfctrl --config cfg.txt [--out DIR] [--seed N] [--profile paper|desk] [--jobs N]

Experiments: merton_grid (generalisation grid + slope summary),
zermelo_train (single training run with trajectory/loss dumps),
gibbs_sanity (zero-cost stationarity check of the noisy-SGD sampler).
All outputs are CSV files under the output directory and are byte-identical
across reruns with the same config and seed (timing is off by default).
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from . import evaluation, rollout, training
from .config import ConfigError, ExperimentConfig, parse_config
from .envs import (OUSpec, make_dataset, merton_problem, zero_cost_problem,
                   zermelo_problem)


def _train_config(v) -> training.TrainConfig:
    return training.TrainConfig(
        epochs=v["epochs"],
        lr_max=v["lr_max"],
        lr_min=v["lr_min"],
        width=v["width"] if "width" in v.values else v["rs"][0],
        reg=training.RegSpec(sigma=v["sigma"], beta=v["beta"]),
        regularised=v.values.get("regularised", True),
        seed=v["seed"],
    )


def _write_effective_config(cfg: ExperimentConfig, out_dir) -> None:
    with open(os.path.join(out_dir, "effective_config.txt"), "w") as fh:
        fh.write(cfg.to_text())


def run_merton_grid(cfg: ExperimentConfig, out_dir) -> str:
    v = cfg

    def factory():
        return merton_problem(d=v["d"], lam=v["lam"], m_drift=v["m"],
                              s_vol=v["s"], r_rate=v["r_rate"], y0=v["y0"])

    base = _train_config(v)
    reports = evaluation.run_grid(factory, v["ns"], v["rs"], v["trials"], base,
                                  master_seed=v["seed"], n_test=v["n_test"],
                                  timing=v["timing"], jobs=v["jobs"])
    evaluation.save_gen_results(reports, os.path.join(out_dir, "gen_results.csv"))
    evaluation.save_slope_summary(reports, os.path.join(out_dir, "slope_summary.csv"))
    med = evaluation.median_abs_gen(reports)
    return "median |gen|: " + ", ".join(f"n={n}: {m:.3g}" for n, m in med.items())


def run_zermelo_train(cfg: ExperimentConfig, out_dir) -> str:
    v = cfg
    ou = OUSpec(theta=v["ou_theta"], alpha=v["ou_alpha"],
                vartheta=v["ou_vartheta"], tau=v["tau"])
    problem = zermelo_problem(v_s=v["v_s"], M=v["M"], A=v["A"], ou=ou,
                              steps=v["steps"])
    dataset = make_dataset(problem, v["n"], v["n_test"], v["seed"])
    gibbs = training.gibbs_train(
        problem, dataset, _train_config(v),
        telemetry_path=os.path.join(out_dir, "telemetry.csv"),
        checkpoint_dir=os.path.join(out_dir, "checkpoints"))

    rollout.dump_trajectories(problem, gibbs, dataset.train,
                              os.path.join(out_dir, "trajectories.csv"))
    rollout.dump_trajectories(problem, gibbs, dataset.test,
                              os.path.join(out_dir, "trajectories_test.csv"))
    _dump_losses(problem, gibbs, dataset, os.path.join(out_dir, "losses.csv"))
    _, _, train_losses = rollout.simulate(problem, gibbs, dataset.train)
    _, _, test_losses = rollout.simulate(problem, gibbs, dataset.test)
    return (f"mean loss in-sample {train_losses.mean():.4g}, "
            f"out-of-sample {test_losses.mean():.4g}")


def _dump_losses(problem, gibbs, dataset, path) -> None:
    """CSV (path_id, split, total_loss, terminal_sq_dist) for loss histograms."""
    target = problem.params["target"]
    with open(path, "w", newline="") as fh:
        fh.write("# mfctrl losses v1\n")
        fh.write("path_id,split,total_loss,terminal_sq_dist\n")
        for split, paths in (("train", dataset.train), ("test", dataset.test)):
            states, _, losses = rollout.simulate(problem, gibbs, paths)
            sq = ((states[:, -1, 0] - target[0]) ** 2
                  + (states[:, -1, 1] - target[1]) ** 2)
            for i in range(len(losses)):
                fh.write(f"{i},{split},{losses[i]:.17g},{sq[i]:.17g}\n")


def run_gibbs_sanity(cfg: ExperimentConfig, out_dir) -> str:
    v = cfg
    problem = zero_cost_problem(state_dim=v["state_dim"],
                                control_dim=v["control_dim"])
    paths = problem.sampler.sample(1, np.random.default_rng(v["seed"]))
    gibbs = training.gibbs_train(problem, paths, _train_config(v))
    theta = gibbs.get(0).theta()
    variances = theta.var(axis=0)
    means = theta.mean(axis=0)
    analytic = v["sigma"] ** 2 / 2.0
    with open(os.path.join(out_dir, "gibbs_sanity.csv"), "w", newline="") as fh:
        fh.write("# mfctrl gibbs_sanity v1\n")
        fh.write("coordinate,mean,variance,analytic_variance\n")
        for k in range(theta.shape[1]):
            fh.write(f"{k},{means[k]:.17g},{variances[k]:.17g},{analytic:.17g}\n")
    return (f"empirical variance {variances.mean():.4g} "
            f"vs analytic sigma^2/2 = {analytic:.4g}")


_RUNNERS = {
    "merton_grid": run_merton_grid,
    "zermelo_train": run_zermelo_train,
    "gibbs_sanity": run_gibbs_sanity,
}


def run(cfg: ExperimentConfig) -> int:
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    _write_effective_config(cfg, out_dir)
    try:
        summary = _RUNNERS[cfg.experiment](cfg, out_dir)
    except training.NonFiniteGradientError as exc:
        with open(os.path.join(out_dir, "error.txt"), "w") as fh:
            fh.write(f"{exc}\n")
            fh.write(traceback.format_exc())
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfctrl", description=__doc__)
    parser.add_argument("--config", help="config file (key = value lines)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--profile", choices=("paper", "desk"), default="paper")
    parser.add_argument("--jobs", type=int, help="worker pool size")
    args = parser.parse_args(argv)

    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    try:
        cfg = parse_config(text, profile=args.profile)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.values["out"] = args.out
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    if args.jobs is not None:
        cfg.values["jobs"] = args.jobs
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
