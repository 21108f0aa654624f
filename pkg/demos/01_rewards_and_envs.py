"""
Sparse and dense rewards on the toy environments
================================================

The planar reward is 0 inside a 2 cm disc around the goal and -1 outside.
The height reward is dense and punishes being too low twice as hard as
being too high.
"""

import numpy as np

from hershape.envs import make_env, reward_lift, reward_xy, reward_z

# the disc boundary is inclusive
print("xy reward at 1.9 cm:", reward_xy([0.5, 0.5], [0.519, 0.5]))
print("xy reward at 2.1 cm:", reward_xy([0.5, 0.5], [0.521, 0.5]))

# the same 5 cm gap costs twice as much below the goal as above it
print("5 cm below:", reward_z(0.05, 0.10), " 5 cm above:", reward_z(0.15, 0.10))

# the lift reward is their sum; dense_weight=0 leaves only the sparse part
cube, goal = [0.5, 0.5, 0.0], [0.51, 0.5, 0.10]
print("lift reward:", reward_lift(cube, goal), " sparse only:", reward_lift(cube, goal, dense_weight=0.0))

# every environment follows the same reset/step protocol
env = make_env("push2d")
obs, achieved, goal = env.reset(seed=0)
print("push2d obs", obs, "goal", goal)
rng = np.random.default_rng(0)
for _ in range(env.spec.max_episode_steps):
    result = env.step(rng.uniform(-1, 1, env.spec.action_dim))
print("after a random episode: block at", result.achieved_goal, "success", result.episode_success)
