"""
Backward-inductive training of a Zermelo navigator in an OU crosswind.

A boat starts at (-20, x0) with x0 ~ U[-1, 1] and steers toward (20, 0)
at fixed speed 0.8 per step, pushed vertically by an Ornstein-Uhlenbeck
wind and penalised for entering the soft unit-circle obstacle at the
origin.  Each of the 50 time steps gets its own particle network; the
Gibbs Vector Algorithm trains them backward from the terminal stage, with
later stages frozen.

The 50-step travel budget (0.8 * 50 = 40) exactly equals the horizontal
gap, and the terminal wind displacement has standard deviation ~22, so no
control can land much closer than mean squared distance ~110; the learned
feedback policy gets within a factor of two of that floor while keeping
obstacle contact negligible.

Takes a few minutes.  Run:  python3 demos/zermelo_navigation.py
"""

import numpy as np

from mfctrl import envs, rollout, training

problem = envs.zermelo_problem(steps=50)
dataset = envs.make_dataset(problem, n=100, n_test=1000, seed=20)

config = training.TrainConfig(
    epochs=2000,
    lr_max=3e-3,
    lr_min=1e-5,
    width=32,
    reg=training.RegSpec(sigma=np.sqrt(0.1) * 100.0, beta=100.0),
    seed=21,
)

gibbs = training.gibbs_train(problem, dataset, config)

states, _, in_losses = rollout.simulate(problem, gibbs, dataset.train)
_, _, out_losses = rollout.simulate(problem, gibbs, dataset.test)

sq = (states[:, -1, 0] - 20.0) ** 2 + states[:, -1, 1] ** 2
penalty = np.zeros(len(sq))
for t in range(states.shape[1]):
    penalty += envs.obstacle_penalty(
        10.0, 2.0, states[:, t, 0] ** 2 + states[:, t, 1] ** 2)

print("Zermelo navigation, 50 steps, width-32 nets per stage")
print(f"  mean terminal squared distance: {sq.mean():8.2f}  "
      f"(wind-imposed floor ~110)")
print(f"  mean cumulative obstacle penalty: {penalty.mean():6.3f}  "
      f"of a possible {51 * envs.obstacle_penalty(10.0, 2.0, 0.0):.1f}")
print(f"  in-sample loss {in_losses.mean():8.2f}   "
      f"out-of-sample loss {out_losses.mean():8.2f}")

# For a picture, dump trajectories and render the fan:
#   rollout.dump_trajectories(problem, gibbs, dataset.train, "trajectories.csv")
#   plot trajectory_fan trajectories.csv fan.png
