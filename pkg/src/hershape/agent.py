"""Goal-conditioned DDPG with hindsight relabeling.

The replay buffer is a flat ring of transitions.  Relabeled copies are made
when an episode is stored, so sampling is plain uniform sampling and a run is
a deterministic function of its seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from hershape.neuralnet import (
    AdamState,
    CheckpointError,
    DivergenceError,
    Mlp,
    adam_step,
    forward_with_cache,
    load_checkpoint,
    mlp_backward,
    mlp_forward,
    mlp_init,
    polyak_update,
    save_checkpoint,
)

HER_KINDS = ("none", "final", "future", "episode")


@dataclass
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    desired_goal: np.ndarray
    terminal: bool


@dataclass
class Episode:
    transitions: list[Transition]

    def __post_init__(self):
        if not self.transitions:
            raise ValueError("an episode needs at least one transition")

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    @property
    def desired_goal(self) -> np.ndarray:
        return self.transitions[0].desired_goal


@dataclass(frozen=True)
class HerStrategy:
    kind: str = "future"
    k: int = 4

    def __post_init__(self):
        if self.kind not in HER_KINDS:
            raise ValueError(f"HER strategy must be one of {HER_KINDS}, got {self.kind!r}")
        if self.kind in ("future", "episode") and self.k < 1:
            raise ValueError("HER k must be >= 1 for the future and episode strategies")

    @property
    def k_eff(self) -> int:
        return {"none": 0, "final": 1}.get(self.kind, self.k)


@dataclass
class Batch:
    """Stacked transitions, one row per sample."""

    observation: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_observation: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    desired_goal: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return len(self.reward)

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> Batch:
        if not transitions:
            raise ValueError("empty batch")
        return cls(
            np.array([t.observation for t in transitions], dtype=np.float64),
            np.array([t.action for t in transitions], dtype=np.float64),
            np.array([t.reward for t in transitions], dtype=np.float64),
            np.array([t.next_observation for t in transitions], dtype=np.float64),
            np.array([t.achieved_goal for t in transitions], dtype=np.float64),
            np.array([t.next_achieved_goal for t in transitions], dtype=np.float64),
            np.array([t.desired_goal for t in transitions], dtype=np.float64),
            np.array([t.terminal for t in transitions], dtype=np.float64),
        )

    def transitions(self) -> list[Transition]:
        return [
            Transition(
                self.observation[i].copy(),
                self.action[i].copy(),
                float(self.reward[i]),
                self.next_observation[i].copy(),
                self.achieved_goal[i].copy(),
                self.next_achieved_goal[i].copy(),
                self.desired_goal[i].copy(),
                bool(self.terminal[i]),
            )
            for i in range(len(self))
        ]


_FIELDS = ("observation", "action", "reward", "next_observation", "achieved_goal", "next_achieved_goal", "desired_goal", "terminal")


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions backed by preallocated arrays."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, goal_dim: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.capacity = int(capacity)
        shapes = {
            "observation": (obs_dim,),
            "action": (action_dim,),
            "reward": (),
            "next_observation": (obs_dim,),
            "achieved_goal": (goal_dim,),
            "next_achieved_goal": (goal_dim,),
            "desired_goal": (goal_dim,),
            "terminal": (),
        }
        self._data = {k: np.zeros((self.capacity, *s)) for k, s in shapes.items()}
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, t: Transition):
        i = self.inserted % self.capacity
        for k in _FIELDS:
            self._data[k][i] = getattr(t, k)
        self.inserted += 1

    def extend(self, transitions: Sequence[Transition]):
        for t in transitions:
            self.add(t)

    def _ordered_indices(self) -> np.ndarray:
        n = len(self)
        start = self.inserted - n
        return np.arange(start, start + n) % self.capacity

    def contents(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        return self.get(self._ordered_indices()).transitions() if len(self) else []

    def get(self, idx) -> Batch:
        return Batch(*(self._data[k][idx].copy() for k in _FIELDS))

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if len(self) == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return self.get(rng.integers(0, len(self), size=batch_size))


def store_episode(buffer: ReplayBuffer, episode: Episode | Sequence[Transition]) -> ReplayBuffer:
    transitions = list(episode)
    if not transitions:
        raise ValueError("cannot store an empty episode")
    buffer.extend(transitions)
    return buffer


def sample_batch(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> Batch:
    return buffer.sample(batch_size, rng)


# -- hindsight relabeling ---------------------------------------------------


def _relabel(episode, strategy: HerStrategy, reward_fn, success_fn, rng, goal_slice=None):
    transitions = list(episode)
    if strategy.kind == "none":
        return transitions
    T = len(transitions)
    achieved = np.array([t.next_achieved_goal for t in transitions], dtype=np.float64)
    if strategy.kind == "final":
        picks = [[T - 1] for _ in range(T)]
    elif strategy.kind == "future":
        picks = [rng.integers(i, T, size=strategy.k).tolist() for i in range(T)]
    else:
        picks = [rng.integers(0, T, size=strategy.k).tolist() for _ in range(T)]
    src = np.repeat(np.arange(T), [len(c) for c in picks])
    idx = np.concatenate(picks).astype(int)
    goals = np.array([transitions[i].desired_goal for i in src], dtype=np.float64)
    if goal_slice is None:
        goals = achieved[idx].copy()
    else:
        goals[:, goal_slice] = achieved[idx][:, goal_slice]
    # one batched call each for rewards and success flags
    rewards = np.asarray(reward_fn(achieved[src], goals), dtype=np.float64).reshape(-1)
    terminals = np.asarray(success_fn(achieved[src], goals), dtype=bool).reshape(-1) if success_fn else None
    out = list(transitions)
    for n, i in enumerate(src):
        t = transitions[i]
        out.append(
            replace(
                t,
                desired_goal=goals[n],
                reward=float(rewards[n]),
                terminal=bool(terminals[n]) if terminals is not None else t.terminal,
            )
        )
    return out


def her_relabel(episode, strategy: HerStrategy, reward_fn: Callable, rng: np.random.Generator, success_fn: Callable | None = None):
    """Original transitions followed by ``k_eff`` relabeled copies of each.

    ``final`` swaps in the episode's last achieved goal, ``future`` goals
    achieved at the same or a later step, ``episode`` goals achieved anywhere
    in the episode.  Rewards and terminal flags are recomputed against the
    new goal; ``reward_fn`` and ``success_fn`` receive ``(n, goal_dim)``
    arrays of achieved and desired goals.
    """
    return _relabel(episode, strategy, reward_fn, success_fn, rng)


def partial_goal_relabel(
    episode, strategy: HerStrategy, reward_fn: Callable, goal_slice, rng: np.random.Generator, success_fn: Callable | None = None
):
    """Like :func:`her_relabel` but only overwrite ``desired_goal[goal_slice]``.

    With lift goals ``(x, y, z)`` and ``goal_slice = slice(0, 2)`` the height
    target is kept, so the sparse planar term is relabeled while the dense
    height term still measures the original z goal.
    """
    transitions = list(episode)
    if transitions:
        dim = len(transitions[0].desired_goal)
        idx = np.arange(dim)
        try:
            chosen = idx[goal_slice]
        except IndexError:
            raise ValueError(f"goal slice {goal_slice!r} is out of bounds for {dim}-dimensional goals") from None
        if isinstance(goal_slice, slice):
            stop = goal_slice.stop
            if (stop is not None and stop > dim) or (goal_slice.start is not None and goal_slice.start >= dim):
                raise ValueError(f"goal slice {goal_slice!r} is out of bounds for {dim}-dimensional goals")
        if np.size(chosen) == 0:
            raise ValueError("goal slice selects no components")
    return _relabel(transitions, strategy, reward_fn, success_fn, rng, goal_slice)


# -- DDPG -------------------------------------------------------------------


@dataclass
class DdpgAgent:
    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    obs_dim: int
    goal_dim: int
    action_dim: int
    gamma: float = 0.98
    tau: float = 0.05
    noise_std: float = 0.1
    random_eps: float = 0.2
    # optional bootstrap clip, e.g. (-1/(1-gamma), 0) for rewards in [-1, 0]
    target_clip: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.actor.layer_sizes[0] != self.obs_dim + self.goal_dim or self.actor.layer_sizes[-1] != self.action_dim:
            raise ValueError("actor sizes do not match obs/goal/action dims")
        if self.critic.layer_sizes[0] != self.obs_dim + self.goal_dim + self.action_dim or self.critic.layer_sizes[-1] != 1:
            raise ValueError("critic sizes do not match obs/goal/action dims")
        if not (self.target_actor.same_architecture(self.actor) and self.target_critic.same_architecture(self.critic)):
            raise ValueError("target networks must match their online networks")

    @classmethod
    def create(
        cls,
        obs_dim: int,
        goal_dim: int,
        action_dim: int,
        hidden=(64, 64),
        seed=0,
        actor_lr=1e-3,
        critic_lr=1e-3,
        **kwargs,
    ) -> DdpgAgent:
        ss = np.random.SeedSequence(seed)
        actor_seed, critic_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        actor = mlp_init([obs_dim + goal_dim, *hidden, action_dim], "tanh", actor_seed)
        critic = mlp_init([obs_dim + goal_dim + action_dim, *hidden, 1], "linear", critic_seed)
        return cls(
            actor,
            critic,
            actor.copy(),
            critic.copy(),
            AdamState.for_net(actor, lr=actor_lr),
            AdamState.for_net(critic, lr=critic_lr),
            obs_dim,
            goal_dim,
            action_dim,
            **kwargs,
        )

    def networks(self) -> dict[str, Mlp]:
        return {"actor": self.actor, "critic": self.critic, "target_actor": self.target_actor, "target_critic": self.target_critic}

    def policy(self, observation, desired_goal) -> np.ndarray:
        x = np.concatenate([np.asarray(observation, dtype=np.float64), np.asarray(desired_goal, dtype=np.float64)], axis=-1)
        return mlp_forward(self.actor, x)

    def q_value(self, observation, desired_goal, action) -> np.ndarray:
        x = np.concatenate([observation, desired_goal, action], axis=-1)
        return mlp_forward(self.critic, x)[..., 0]


def select_action(agent: DdpgAgent, observation, desired_goal, explore: bool = False, rng: np.random.Generator | None = None):
    observation = np.asarray(observation, dtype=np.float64)
    desired_goal = np.asarray(desired_goal, dtype=np.float64)
    if observation.shape != (agent.obs_dim,) or desired_goal.shape != (agent.goal_dim,):
        raise ValueError("observation/goal dimensions do not match the agent")
    if explore:
        if rng is None:
            raise ValueError("exploration needs an rng")
        if rng.random() < agent.random_eps:
            return rng.uniform(-1.0, 1.0, agent.action_dim)
        a = agent.policy(observation, desired_goal)
        return np.clip(a + agent.noise_std * rng.standard_normal(agent.action_dim), -1.0, 1.0)
    return agent.policy(observation, desired_goal)


def critic_target(agent: DdpgAgent, batch: Batch) -> np.ndarray:
    """``r + gamma * (1 - terminal) * Q'(s', g, pi'(s', g))``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    next_in = np.concatenate([batch.next_observation, batch.desired_goal], axis=1)
    next_action = mlp_forward(agent.target_actor, next_in)
    q_next = mlp_forward(agent.target_critic, np.concatenate([next_in, next_action], axis=1))[:, 0]
    y = batch.reward + agent.gamma * (1.0 - batch.terminal) * q_next
    if agent.target_clip is not None:
        y = np.clip(y, *agent.target_clip)
    return y


def ddpg_update(agent: DdpgAgent, batch: Batch) -> tuple[DdpgAgent, float, float]:
    """One critic step, one actor step, then Polyak-average both targets.

    The returned losses are measured before the parameters move.  A
    non-finite loss raises :class:`DivergenceError` and leaves the agent
    untouched.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    y = critic_target(agent, batch)
    sg = np.concatenate([batch.observation, batch.desired_goal], axis=1)

    critic_in = np.concatenate([sg, batch.action], axis=1)
    cache = forward_with_cache(agent.critic, critic_in)
    err = cache[0][:, 0] - y
    critic_loss = float(np.mean(err * err))

    actor_cache = forward_with_cache(agent.actor, sg)
    pi = actor_cache[0]
    pi_in = np.concatenate([sg, pi], axis=1)
    pi_cache = forward_with_cache(agent.critic, pi_in)
    actor_loss = float(-np.mean(pi_cache[0]))
    if not (np.isfinite(critic_loss) and np.isfinite(actor_loss)):
        raise DivergenceError(f"non-finite loss (critic {critic_loss}, actor {actor_loss})")

    critic_grads = mlp_backward(agent.critic, critic_in, (2.0 / n) * err[:, None], cache)
    # the actor gradient flows through the critic as it was before its update
    dq = mlp_backward(agent.critic, pi_in, np.full((n, 1), -1.0 / n), pi_cache).input
    actor_grads = mlp_backward(agent.actor, sg, dq[:, sg.shape[1] :], actor_cache)

    adam_step(agent.critic, critic_grads, agent.critic_opt)
    adam_step(agent.actor, actor_grads, agent.actor_opt)
    polyak_update(agent.target_critic, agent.critic, agent.tau)
    polyak_update(agent.target_actor, agent.actor, agent.tau)
    return agent, critic_loss, actor_loss


# -- checkpoints and transfer -----------------------------------------------


def save_agent(agent: DdpgAgent, path) -> str:
    return save_checkpoint(path, agent.networks())


def transfer_init(agent: DdpgAgent, checkpoint_path, parts=("actor", "critic")) -> DdpgAgent:
    """Overwrite the named networks (and their targets) with checkpointed weights.

    Optimizer moments of the loaded parts restart from zero.
    """
    parts = set(parts)
    unknown = parts - {"actor", "critic"}
    if unknown:
        raise ValueError(f"unknown transfer parts {sorted(unknown)}")
    if not parts:
        return agent
    nets = load_checkpoint(checkpoint_path)
    for part in sorted(parts):
        for name in (part, f"target_{part}"):
            if not nets[name].same_architecture(getattr(agent, name)):
                raise CheckpointError(
                    f"{checkpoint_path}: {name} is {nets[name].layer_sizes}/{nets[name].output_activation}, "
                    f"agent has {getattr(agent, name).layer_sizes}/{getattr(agent, name).output_activation}"
                )
    for part in sorted(parts):
        setattr(agent, part, nets[part])
        setattr(agent, f"target_{part}", nets[f"target_{part}"])
        getattr(agent, f"{part}_opt").reset()
    return agent
