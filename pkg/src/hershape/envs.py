"""Kinematic goal-conditioned tasks: reach, push, lift and in-hand rotation.

None of these simulate rigid-body physics.  Each one is a few lines of
clipped arithmetic that keeps the goal/reward structure of the corresponding
manipulation task, so that an agent can be trained and checked in seconds.

Every environment exposes ``reset(seed) -> (obs, achieved_goal, desired_goal)``,
``step(action) -> StepResult`` and the vectorised ``compute_reward`` /
``is_success`` pair that hindsight relabeling needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hershape.geometry import (
    CONVENTIONS,
    SubgoalPlan,
    UnitQuaternion,
    geodesic_angle,
    plan_subgoals,
    quat_multiply,
    quat_to_matrix,
    random_quaternion,
)

XY_THRESHOLD = 0.02
Z_THRESHOLD = 0.01
STEP_SIZE = 0.05
Z_MAX = 0.3
ROTATE_STEP = 0.1
ROTATE_TOLERANCE = 0.1
MAX_RESET_TRIES = 100

ENV_NAMES = ("reach2d", "push2d", "lift", "rotate-z", "rotate-full", "rotate-decomposed")


class EnvError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    action_dim: int
    goal_dim: int
    max_episode_steps: int
    success: str = ""

    def __post_init__(self):
        if min(self.obs_dim, self.action_dim, self.goal_dim, self.max_episode_steps) < 1:
            raise ValueError("EnvSpec dimensions and max_episode_steps must be >= 1")


@dataclass
class StepResult:
    next_observation: np.ndarray
    achieved_goal: np.ndarray
    reward: float
    success: bool
    terminal: bool  # time limit reached; episodes always run their full horizon
    # goal in force after this step (differs from the step's goal only when a subgoal advances)
    desired_goal: np.ndarray | None = None
    # success of the whole episode, judged on the final step
    episode_success: bool = False


@dataclass(frozen=True)
class NoiseSpec:
    """Domain randomisation: Gaussian noise on observations and executed actions."""

    obs_std: float | tuple = 0.0
    action_std: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.obs_std) < 0) or self.action_std < 0:
            raise ValueError("noise standard deviations must be non-negative")

    @property
    def is_zero(self) -> bool:
        return not np.any(np.asarray(self.obs_std)) and self.action_std == 0


def apply_noise(vector, std, rng: np.random.Generator) -> np.ndarray:
    """Add independent zero-mean Gaussian noise; zero ``std`` returns the input untouched."""
    v = np.asarray(vector, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if np.any(std < 0):
        raise ValueError("noise standard deviation must be non-negative")
    if not np.any(std):
        return v.copy()
    return v + rng.standard_normal(v.shape) * std


# -- rewards ----------------------------------------------------------------


def reward_xy(achieved_xy, goal_xy):
    """Sparse planar reward: 0 within 2 cm of the goal, -1 elsewhere."""
    d = np.linalg.norm(np.asarray(achieved_xy, dtype=np.float64) - np.asarray(goal_xy, dtype=np.float64), axis=-1)
    r = np.where(d <= XY_THRESHOLD, 0.0, -1.0)
    return float(r) if r.ndim == 0 else r


def reward_z(z_cube, z_goal):
    """Dense height penalty, twice as steep below the goal as above it."""
    z_cube = np.asarray(z_cube, dtype=np.float64)
    z_goal = np.asarray(z_goal, dtype=np.float64)
    gap = np.abs(z_cube - z_goal)
    r = np.where(z_cube < z_goal, -20.0 * gap, -10.0 * gap)
    r = r + 0.0
    return float(r) if r.ndim == 0 else r


def reward_lift(achieved, goal, dense_weight: float = 1.0):
    a = np.asarray(achieved, dtype=np.float64)
    g = np.asarray(goal, dtype=np.float64)
    r = reward_xy(a[..., :2], g[..., :2])
    if dense_weight:
        r = r + dense_weight * reward_z(a[..., 2], g[..., 2])
    return r


def quat_distance(a, b):
    """Vectorised geodesic angle between ``(..., 4)`` quaternion arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    s = np.where(np.sum(a * b, axis=-1, keepdims=True) < 0.0, -1.0, 1.0)
    b = b * s
    d = 4.0 * np.arctan2(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))
    return float(d) if d.ndim == 0 else d


# -- pure dynamics ----------------------------------------------------------


def move_point(position, action, step_size=STEP_SIZE):
    return np.clip(np.asarray(position, dtype=np.float64) + step_size * np.asarray(action, dtype=np.float64), 0.0, 1.0)


def push_block(agent_before, agent_after, block, radius=0.03):
    """Quasi-static push: if the agent ends inside ``radius`` of the block, slide the block out to ``radius``."""
    agent_after = np.asarray(agent_after, dtype=np.float64)
    block = np.asarray(block, dtype=np.float64)
    offset = block - agent_after
    dist = float(np.linalg.norm(offset))
    if dist >= radius:
        return block.copy()
    if dist > 0.0:
        direction = offset / dist
    else:
        approach = agent_after - np.asarray(agent_before, dtype=np.float64)
        n = float(np.linalg.norm(approach))
        direction = approach / n if n > 0.0 else np.array([1.0, 0.0])
    return np.clip(agent_after + radius * direction, 0.0, 1.0)


def lift_dynamics(cube, action, step_size=STEP_SIZE, z_max=Z_MAX):
    cube = np.asarray(cube, dtype=np.float64)
    dx, dy, dz, grip = (float(a) for a in action)
    x = min(max(cube[0] + step_size * dx, 0.0), 1.0)
    y = min(max(cube[1] + step_size * dy, 0.0), 1.0)
    if grip > 0.0:
        z = cube[2] + step_size * dz
    else:
        z = cube[2] - step_size
    z = min(max(z, 0.0), z_max)
    return np.array([x, y, z])


def rotate_dynamics(orientation: UnitQuaternion, action, step=ROTATE_STEP) -> UnitQuaternion:
    """World-frame axis-angle increment ``step * action`` applied on the left."""
    return quat_multiply(UnitQuaternion.from_rotvec(step * np.asarray(action, dtype=np.float64)), orientation)


# -- environments -----------------------------------------------------------


class GoalEnv:
    """Shared episode bookkeeping: seeding, time limit, noise, reset resampling."""

    spec: EnvSpec

    def __init__(self, noise: NoiseSpec | None = None, max_episode_steps: int | None = None):
        self.noise = noise or NoiseSpec()
        if max_episode_steps is not None:
            self.spec = EnvSpec(
                self.spec.name, self.spec.obs_dim, self.spec.action_dim, self.spec.goal_dim, int(max_episode_steps), self.spec.success
            )
        self.rng = np.random.default_rng(self.noise.seed)
        self.t = 0

    # subclasses provide these
    def _sample(self):
        raise NotImplementedError

    def _advance(self, action):
        raise NotImplementedError

    def _observe(self) -> np.ndarray:
        raise NotImplementedError

    def achieved_goal(self) -> np.ndarray:
        raise NotImplementedError

    def desired_goal(self) -> np.ndarray:
        return self.goal.copy()

    def compute_reward(self, achieved_goal, desired_goal):
        raise NotImplementedError

    def is_success(self, achieved_goal, desired_goal):
        raise NotImplementedError

    def _already_solved(self) -> bool:
        return bool(self.is_success(self.achieved_goal(), self.desired_goal()))

    def observation(self) -> np.ndarray:
        return apply_noise(self._observe(), self.noise.obs_std, self.rng)

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        for _ in range(MAX_RESET_TRIES):
            self._sample()
            if not self._already_solved():
                return self.observation(), self.achieved_goal(), self.desired_goal()
        raise EnvError(f"{self.spec.name}: every reset sample was already solved; success region covers the space")

    def step(self, action) -> StepResult:
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        if a.shape != (self.spec.action_dim,):
            raise ValueError(f"{self.spec.name}: action must have shape ({self.spec.action_dim},)")
        if self.noise.action_std:
            a = np.clip(apply_noise(a, self.noise.action_std, self.rng), -1.0, 1.0)
        goal = self.desired_goal()
        self._advance(a)
        self.t += 1
        ag = self.achieved_goal()
        reward = float(self.compute_reward(ag, goal))
        success = bool(self.is_success(ag, goal))
        return StepResult(self.observation(), ag, reward, success, self.t >= self.spec.max_episode_steps, goal, success)


class Reach2D(GoalEnv):
    spec = EnvSpec("reach2d", 2, 2, 2, 50, "fingertip within 2 cm of the goal")

    def _sample(self):
        self.position = self.rng.uniform(0.0, 1.0, 2)
        self.goal = self.rng.uniform(0.0, 1.0, 2)

    def set_state(self, position, goal):
        self.position = np.asarray(position, dtype=np.float64).copy()
        self.goal = np.asarray(goal, dtype=np.float64).copy()
        self.t = 0

    def _advance(self, action):
        self.position = move_point(self.position, action)

    def _observe(self):
        return self.position.copy()

    def achieved_goal(self):
        return self.position.copy()

    def compute_reward(self, achieved_goal, desired_goal):
        return reward_xy(achieved_goal, desired_goal)

    def is_success(self, achieved_goal, desired_goal):
        return reward_xy(achieved_goal, desired_goal) == 0.0


class Push2D(GoalEnv):
    spec = EnvSpec("push2d", 4, 2, 2, 50, "block within 2 cm of the goal")
    radius = 0.03

    def _sample(self):
        self.agent = self.rng.uniform(0.0, 1.0, 2)
        while True:
            self.block = self.rng.uniform(0.1, 0.9, 2)
            if np.linalg.norm(self.block - self.agent) >= 2 * self.radius:
                break
        self.goal = self.rng.uniform(0.1, 0.9, 2)

    def set_state(self, agent, block, goal):
        self.agent = np.asarray(agent, dtype=np.float64).copy()
        self.block = np.asarray(block, dtype=np.float64).copy()
        self.goal = np.asarray(goal, dtype=np.float64).copy()
        self.t = 0

    def _advance(self, action):
        before = self.agent
        self.agent = move_point(self.agent, action)
        self.block = push_block(before, self.agent, self.block, self.radius)

    def _observe(self):
        return np.concatenate([self.agent, self.block])

    def achieved_goal(self):
        return self.block.copy()

    def compute_reward(self, achieved_goal, desired_goal):
        return reward_xy(achieved_goal, desired_goal)

    def is_success(self, achieved_goal, desired_goal):
        return reward_xy(achieved_goal, desired_goal) == 0.0


class Lift(GoalEnv):
    """Carry a cube to a 3-D goal.  Height only rises while the grip action is positive."""

    spec = EnvSpec("lift", 3, 4, 3, 50, "cube xy within 2 cm and height within 1 cm of the goal")

    def __init__(self, noise=None, max_episode_steps=None, dense_weight: float = 1.0):
        super().__init__(noise, max_episode_steps)
        self.dense_weight = float(dense_weight)

    def _sample(self):
        self.cube = np.array([*self.rng.uniform(0.0, 1.0, 2), 0.0])
        self.goal = np.array([*self.rng.uniform(0.0, 1.0, 2), self.rng.uniform(0.0, Z_MAX)])

    def set_state(self, cube, goal):
        self.cube = np.asarray(cube, dtype=np.float64).copy()
        self.goal = np.asarray(goal, dtype=np.float64).copy()
        self.t = 0

    def _advance(self, action):
        self.cube = lift_dynamics(self.cube, action)

    def _observe(self):
        return self.cube.copy()

    def achieved_goal(self):
        return self.cube.copy()

    def compute_reward(self, achieved_goal, desired_goal):
        return reward_lift(achieved_goal, desired_goal, self.dense_weight)

    def is_success(self, achieved_goal, desired_goal):
        a = np.asarray(achieved_goal, dtype=np.float64)
        g = np.asarray(desired_goal, dtype=np.float64)
        return (reward_xy(a[..., :2], g[..., :2]) == 0.0) & (np.abs(a[..., 2] - g[..., 2]) <= Z_THRESHOLD)


# rotation taking each elementary axis onto z; used to present subgoals in a common frame
_AXIS_TO_Z = {
    "z": UnitQuaternion.identity(),
    "x": UnitQuaternion.elementary("y", -np.pi / 2),
    "y": UnitQuaternion.elementary("x", np.pi / 2),
}


class Rotate(GoalEnv):
    """Reorient an object by world-frame angular increments.

    ``mode`` picks the goal distribution: ``z`` (rotations about the vertical
    axis), ``full`` (uniform over SO(3)) or ``decomposed`` (a uniform goal
    served as a sequence of single-axis subgoals).  Observations are the
    flattened rotation matrix; goals are canonical quaternions.

    In ``decomposed`` mode every quantity the agent sees is expressed in the
    frame of the served subgoal: orientations are taken relative to the
    orientation the subgoal starts from, and conjugated so the subgoal's axis
    becomes z.  Each elementary subgoal then looks exactly like a ``z`` mode
    episode; actions are mapped back to the world frame before being applied.
    """

    MODES = ("z", "full", "decomposed")

    def __init__(self, mode="z", noise=None, max_episode_steps=None, convention="zxz", tolerance=ROTATE_TOLERANCE):
        if mode not in self.MODES:
            raise ValueError(f"rotate mode must be one of {self.MODES}")
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {convention!r}")
        self.spec = EnvSpec(f"rotate-{mode}", 9, 3, 4, 100, "orientation within 0.1 rad of the goal")
        super().__init__(noise, max_episode_steps)
        self.mode = mode
        self.convention = convention
        self.tolerance = float(tolerance)
        self.plan: SubgoalPlan | None = None
        self.subgoal_index = 0
        self._set_frame(UnitQuaternion.identity(), UnitQuaternion.identity())

    def _sample(self):
        self.orientation = UnitQuaternion.identity()
        if self.mode == "z":
            theta = self.rng.uniform(-np.pi, np.pi)
            self.target = UnitQuaternion.elementary("z", theta)
        else:
            self.target = random_quaternion(self.rng)
        self._replan()

    def _replan(self):
        self.plan = None
        self.subgoal_index = 0
        self.plan_start = self.orientation
        if self.mode == "decomposed":
            self.plan = plan_subgoals(self.orientation, self.target, self.convention)
            self._skip_reached()
        self._update_frame()

    def _skip_reached(self):
        while (
            self.plan is not None
            and self.subgoal_index < len(self.plan) - 1
            and geodesic_angle(self.orientation, self.plan[self.subgoal_index]) <= self.tolerance
        ):
            self.subgoal_index += 1

    def _set_frame(self, axis_map: UnitQuaternion, origin: UnitQuaternion):
        self._axis_map = axis_map
        self._origin_inv = origin.inverse()
        self._to_world = quat_to_matrix(axis_map.inverse())
        self._world_frame = axis_map == UnitQuaternion.identity() and origin == UnitQuaternion.identity()

    def _update_frame(self):
        if self.plan is None or not len(self.plan):
            self._set_frame(UnitQuaternion.identity(), UnitQuaternion.identity())
            return
        i = self.subgoal_index
        origin = self.plan[i - 1] if i > 0 else self.plan_start
        self._set_frame(_AXIS_TO_Z[self.plan.steps[i][0]], origin)

    def to_frame(self, q: UnitQuaternion) -> UnitQuaternion:
        """Express a world orientation in the frame the agent currently sees."""
        if self._world_frame:
            return q
        c = self._axis_map
        return quat_multiply(quat_multiply(c, quat_multiply(q, self._origin_inv)), c.inverse())

    def set_state(self, orientation: UnitQuaternion, target: UnitQuaternion):
        self.orientation = orientation
        self.target = target
        self.t = 0
        self._replan()

    @property
    def served_goal(self) -> UnitQuaternion:
        """The served goal in world coordinates."""
        if self.plan is not None and len(self.plan):
            return self.plan[self.subgoal_index]
        return self.target

    def desired_goal(self):
        return self.to_frame(self.served_goal).as_array()

    def _advance(self, action):
        if not self._world_frame:
            action = self._to_world @ action
        self.orientation = rotate_dynamics(self.orientation, action)

    def _observe(self):
        return quat_to_matrix(self.to_frame(self.orientation)).ravel()

    def achieved_goal(self):
        return self.to_frame(self.orientation).as_array()

    def compute_reward(self, achieved_goal, desired_goal):
        return np.where(quat_distance(achieved_goal, desired_goal) <= self.tolerance, 0.0, -1.0) + 0.0

    def is_success(self, achieved_goal, desired_goal):
        return quat_distance(achieved_goal, desired_goal) <= self.tolerance

    def _already_solved(self):
        return geodesic_angle(self.orientation, self.target) <= self.tolerance

    def step(self, action) -> StepResult:
        result = super().step(action)
        if self.plan is None or not result.success:
            return result
        if self.subgoal_index < len(self.plan) - 1:
            self.subgoal_index += 1
            self._skip_reached()
            self._update_frame()
            result.episode_success = False
        result.desired_goal = self.desired_goal()
        return result


def make_env(name: str, noise: NoiseSpec | None = None, max_episode_steps: int | None = None, **kwargs) -> GoalEnv:
    if name == "reach2d":
        return Reach2D(noise, max_episode_steps)
    if name == "push2d":
        return Push2D(noise, max_episode_steps)
    if name == "lift":
        return Lift(noise, max_episode_steps, **kwargs)
    if name.startswith("rotate-") and name[7:] in Rotate.MODES:
        return Rotate(name[7:], noise, max_episode_steps, **kwargs)
    raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
