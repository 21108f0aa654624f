"""Seeded collect/relabel/store/update loop, greedy evaluation and metrics files."""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from hershape.agent import (
    DdpgAgent,
    Episode,
    HerStrategy,
    ReplayBuffer,
    Transition,
    ddpg_update,
    her_relabel,
    partial_goal_relabel,
    sample_batch,
    save_agent,
    select_action,
    store_episode,
    transfer_init,
)
from hershape.config import RunConfig
from hershape.envs import GoalEnv, NoiseSpec, make_env
from hershape.neuralnet import DivergenceError, load_checkpoint, mlp_forward

log = logging.getLogger(__name__)

METRICS_HEADER = ("env_step", "episodes", "success_rate", "mean_return", "critic_loss", "actor_loss", "buffer_size", "wall_seconds")
CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.csv"


@dataclass
class MetricsRow:
    env_step: int
    episodes: int
    success_rate: float
    mean_return: float
    critic_loss: float
    actor_loss: float
    buffer_size: int
    wall_seconds: float


def _g17(v) -> str:
    return format(float(v), ".17g")


def write_metrics(rows, path) -> str:
    prev = -1
    for r in rows:
        if not 0.0 <= r.success_rate <= 1.0:
            raise ValueError(f"success_rate {r.success_rate} outside [0, 1]")
        if r.env_step <= prev:
            raise ValueError("env_step must increase strictly from row to row")
        prev = r.env_step
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(METRICS_HEADER) + "\n")
        for r in rows:
            fields = [
                str(int(r.env_step)),
                str(int(r.episodes)),
                _g17(r.success_rate),
                _g17(r.mean_return),
                _g17(r.critic_loss),
                _g17(r.actor_loss),
                str(int(r.buffer_size)),
                f"{r.wall_seconds:.3f}",
            ]
            f.write(",".join(fields) + "\n")
    os.replace(tmp, path)
    return path


def read_metrics(path) -> list[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: not a metrics file (bad header)")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(METRICS_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(METRICS_HEADER)} columns, got {len(rec)}")
            try:
                rows.append(
                    MetricsRow(int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3]), float(rec[4]), float(rec[5]), int(rec[6]), float(rec[7]))
                )
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number") from None
    return rows


# -- episodes ---------------------------------------------------------------


def run_episode(env: GoalEnv, policy: Callable, seed: int):
    """Roll out one episode; returns ``(segments, steps, episode_return, success)``.

    ``segments`` splits the transitions wherever the served goal changes
    (decomposed rotation subgoals), so each one has a single desired goal
    and a single observation frame.
    """
    obs, ag, goal = env.reset(seed)
    segments, current = [], []
    total, success = 0.0, False
    steps = 0
    while True:
        action = np.asarray(policy(obs, goal), dtype=np.float64)
        res = env.step(action)
        steps += 1
        total += res.reward
        current.append(Transition(obs, action, res.reward, res.next_observation, ag, res.achieved_goal, goal, res.success))
        obs, ag = res.next_observation, res.achieved_goal
        if res.terminal:
            success = res.episode_success
            break
        if not np.array_equal(res.desired_goal, goal):
            segments.append(Episode(current))
            current = []
            goal = res.desired_goal
            # a new subgoal may come with a new frame, so look again before acting
            obs, ag = env.observation(), env.achieved_goal()
    if current:
        segments.append(Episode(current))
    return segments, steps, total, success


def evaluate_policy(policy: Callable, env: GoalEnv, episodes: int, seed: int):
    """Greedy rollouts on ``episodes`` reset seeds derived from ``seed``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(episodes)
    wins, returns = 0, []
    for s in seeds:
        _, _, ret, ok = run_episode(env, policy, int(s))
        wins += ok
        returns.append(ret)
    return wins / episodes, float(np.mean(returns))


def evaluate(checkpoint_path, env, episodes: int, seed: int = 0, policy: Callable | None = None):
    """Success rate and mean return of a checkpointed actor, run greedily without noise.

    ``env`` is an environment name or instance.  ``policy`` replaces the
    checkpointed actor when given (used to inject scripted policies).
    """
    if isinstance(env, str):
        env = make_env(env)
    if policy is None:
        actor = load_checkpoint(checkpoint_path)["actor"]
        spec = env.spec
        if actor.layer_sizes[0] != spec.obs_dim + spec.goal_dim or actor.layer_sizes[-1] != spec.action_dim:
            raise ValueError(
                f"checkpoint actor {actor.layer_sizes} does not fit {spec.name} "
                f"(obs {spec.obs_dim}, goal {spec.goal_dim}, action {spec.action_dim})"
            )

        def policy(obs, goal):
            return mlp_forward(actor, np.concatenate([obs, goal]))

    return evaluate_policy(policy, env, episodes, seed)


# -- training ---------------------------------------------------------------


def _env_kwargs(config: RunConfig) -> dict:
    if config.env == "lift":
        return {"dense_weight": config.dense_weight}
    if config.env.startswith("rotate-"):
        return {"convention": config.convention}
    return {}


def build_env(config: RunConfig, noise: NoiseSpec | None = None) -> GoalEnv:
    return make_env(config.env, noise, config.max_episode_steps or None, **_env_kwargs(config))


def build_agent(config: RunConfig, env: GoalEnv, seed: int) -> DdpgAgent:
    spec = env.spec
    clip = None
    if config.clip_target:
        # rewards are non-positive and bounded below by the env's worst step reward
        clip = (-_worst_reward(config) / (1.0 - config.gamma), 0.0)
    return DdpgAgent.create(
        spec.obs_dim,
        spec.goal_dim,
        spec.action_dim,
        hidden=config.hidden_sizes,
        seed=seed,
        actor_lr=config.actor_lr,
        critic_lr=config.critic_lr,
        gamma=config.gamma,
        tau=config.tau,
        noise_std=config.explore_noise,
        random_eps=config.random_eps,
        target_clip=clip,
    )


def _worst_reward(config: RunConfig) -> float:
    if config.env == "lift":
        return 1.0 + 6.0 * config.dense_weight
    return 1.0


class Trainer:
    """Holds the state of one run so tests can drive it cycle by cycle."""

    def __init__(self, config: RunConfig, seed: int | None = None):
        self.config = config.validate()
        self.seed = config.seed if seed is None else int(seed)
        ss = np.random.SeedSequence(self.seed)
        agent_ss, env_ss, explore_ss, her_ss, sample_ss, self._eval_ss = ss.spawn(6)
        self.env = build_env(config, NoiseSpec(config.obs_noise_std, config.action_noise_std))
        self.eval_env = build_env(config)
        self.agent = build_agent(config, self.env, int(agent_ss.generate_state(1)[0]))
        if config.transfer_checkpoint:
            transfer_init(self.agent, config.transfer_checkpoint, config.transfer_parts)
        spec = self.env.spec
        self.buffer = ReplayBuffer(config.buffer_capacity, spec.obs_dim, spec.action_dim, spec.goal_dim)
        self.env_rng = np.random.default_rng(env_ss)
        self.explore_rng = np.random.default_rng(explore_ss)
        self.her_rng = np.random.default_rng(her_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        self.strategy = HerStrategy(config.her_strategy, config.her_k)
        self.env_step = 0
        self.episodes = 0
        self.rows: list[MetricsRow] = []
        self._losses: list[tuple[float, float]] = []

    @property
    def eval_seed(self) -> int:
        return int(self._eval_ss.generate_state(1)[0])

    def _explore(self, obs, goal):
        return select_action(self.agent, obs, goal, explore=True, rng=self.explore_rng)

    def _store(self, episode: Episode):
        env = self.env
        if self.config.partial_relabel:
            out = partial_goal_relabel(episode, self.strategy, env.compute_reward, slice(0, 2), self.her_rng, env.is_success)
        else:
            out = her_relabel(episode, self.strategy, env.compute_reward, self.her_rng, env.is_success)
        store_episode(self.buffer, out)

    def collect(self) -> int:
        """Run one exploratory episode and store it; returns its length."""
        seed = int(self.env_rng.integers(0, 2**63))
        segments, steps, _, _ = run_episode(self.env, self._explore, seed)
        for seg in segments:
            self._store(seg)
        self.env_step += steps
        self.episodes += 1
        return steps

    def update(self):
        for _ in range(self.config.updates_per_cycle):
            batch = sample_batch(self.buffer, self.config.batch_size, self.sample_rng)
            _, closs, aloss = ddpg_update(self.agent, batch)
            self._losses.append((closs, aloss))

    def greedy(self, obs, goal):
        return self.agent.policy(obs, goal)

    def evaluate(self, started: float) -> MetricsRow:
        rate, ret = evaluate_policy(self.greedy, self.eval_env, self.config.eval_episodes, self.eval_seed)
        closs, aloss = (float(np.mean(v)) for v in zip(*self._losses)) if self._losses else (math.nan, math.nan)
        self._losses = []
        row = MetricsRow(self.env_step, self.episodes, rate, ret, closs, aloss, len(self.buffer), time.perf_counter() - started)
        self.rows.append(row)
        return row

    def run(self, out_dir=None, evaluate: bool = True):
        cfg = self.config
        out = os.fspath(out_dir if out_dir is not None else cfg.out_dir)
        os.makedirs(out, exist_ok=True)
        ckpt = os.path.join(out, CHECKPOINT_NAME)
        metrics = os.path.join(out, METRICS_NAME)
        horizon = self.env.spec.max_episode_steps
        next_eval = cfg.eval_interval
        started = time.perf_counter()
        write_metrics(self.rows, metrics)
        try:
            while self.env_step + horizon <= cfg.total_steps:
                for _ in range(cfg.episodes_per_cycle):
                    if self.env_step + horizon > cfg.total_steps:
                        break
                    self.collect()
                self.update()
                if evaluate and self.env_step >= next_eval:
                    while next_eval <= self.env_step:
                        next_eval += cfg.eval_interval
                    row = self.evaluate(started)
                    log.info("step %d success %.3f return %.3f", row.env_step, row.success_rate, row.mean_return)
                    write_metrics(self.rows, metrics)
                    save_agent(self.agent, ckpt)
            if evaluate and self.episodes and (not self.rows or self.rows[-1].env_step < self.env_step):
                self.evaluate(started)
        except DivergenceError:
            write_metrics(self.rows, metrics)
            raise
        write_metrics(self.rows, metrics)
        save_agent(self.agent, ckpt)
        return ckpt, metrics


def run_training(config: RunConfig, seed: int | None = None, out_dir=None):
    """Train to the step budget; returns ``(checkpoint_path, metrics_path)``."""
    return Trainer(config, seed).run(out_dir)
