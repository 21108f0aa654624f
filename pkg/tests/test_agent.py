import collections

import numpy as np
import pytest

from hershape.agent import (
    Batch,
    DdpgAgent,
    Episode,
    HerStrategy,
    ReplayBuffer,
    Transition,
    critic_target,
    ddpg_update,
    her_relabel,
    partial_goal_relabel,
    sample_batch,
    save_agent,
    select_action,
    store_episode,
    transfer_init,
)
from hershape.envs import Lift, Reach2D, reward_lift
from hershape.neuralnet import CheckpointError, DivergenceError, Mlp, mlp_forward


def direct_reward_xy(achieved, goal):
    """Sparse planar reward written out longhand, row by row for batches."""
    if np.ndim(achieved) == 2:
        return np.array([direct_reward_xy(a, g) for a, g in zip(achieved, goal)])
    dx, dy = achieved[0] - goal[0], achieved[1] - goal[1]
    return 0.0 if (dx * dx + dy * dy) ** 0.5 <= 0.02 else -1.0


def make_episode(T=5, goal=(0.9, 0.9), seed=0, dim=2, z=None):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, 1, dim)
    if z is not None:
        pos[2] = z
    goal = np.array(goal, dtype=float)
    out = []
    for _ in range(T):
        action = rng.uniform(-1, 1, 2 if dim == 2 else 4)
        nxt = pos.copy()
        nxt[:2] = np.clip(pos[:2] + 0.05 * action[:2], 0, 1)
        out.append(Transition(pos.copy(), action, direct_reward_xy(nxt, goal), nxt.copy(), pos.copy(), nxt.copy(), goal.copy(), False))
        pos = nxt
    return Episode(out)


def small_agent(seed=0, **kw):
    return DdpgAgent.create(2, 2, 2, hidden=(8, 8), seed=seed, **kw)


# -- buffer -----------------------------------------------------------------


def test_store_and_evict():
    buf = ReplayBuffer(10, 2, 2, 2)
    store_episode(buf, make_episode(5))
    assert len(buf) == 5
    buf = ReplayBuffer(5, 2, 2, 2)
    first, second = make_episode(5, seed=1), make_episode(5, seed=2)
    store_episode(buf, first)
    store_episode(buf, second)
    assert len(buf) == 5
    assert all(np.array_equal(a.observation, b.observation) for a, b in zip(buf.contents(), second))
    with pytest.raises(ValueError):
        store_episode(buf, [])


def test_buffer_matches_fifo_model():
    rng = np.random.default_rng(0)
    buf = ReplayBuffer(7, 2, 2, 2)
    model = collections.deque(maxlen=7)
    for i in range(12):
        ep = make_episode(int(rng.integers(1, 5)), seed=i)
        store_episode(buf, ep)
        model.extend(ep)
        got = buf.contents()
        assert len(got) == len(model)
        assert all(np.array_equal(a.observation, b.observation) and a.reward == b.reward for a, b in zip(got, model))


def test_sample_batch():
    buf = ReplayBuffer(4, 2, 2, 2)
    ep = make_episode(1)
    store_episode(buf, ep)
    batch = sample_batch(buf, 4, np.random.default_rng(0))
    assert len(batch) == 4
    assert all(np.array_equal(t.observation, ep.transitions[0].observation) for t in batch.transitions())

    buf = ReplayBuffer(100, 2, 2, 2)
    store_episode(buf, make_episode(30))
    a = sample_batch(buf, 16, np.random.default_rng(5))
    b = sample_batch(buf, 16, np.random.default_rng(5))
    assert np.array_equal(a.observation, b.observation)
    with pytest.raises(ValueError):
        sample_batch(ReplayBuffer(3, 2, 2, 2), 1, np.random.default_rng(0))


def test_sampling_is_uniform():
    buf = ReplayBuffer(10, 1, 1, 1)
    for i in range(10):
        buf.add(Transition(np.array([i]), np.zeros(1), 0.0, np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), False))
    n = 100_000
    idx = sample_batch(buf, n, np.random.default_rng(0)).observation[:, 0].astype(int)
    counts = np.bincount(idx, minlength=10)
    sigma = np.sqrt(n * 0.1 * 0.9)
    assert np.abs(counts - n / 10).max() < 5 * sigma


# -- relabeling -------------------------------------------------------------


def test_her_none_is_identity():
    ep = make_episode(6)
    out = her_relabel(ep, HerStrategy("none"), direct_reward_xy, np.random.default_rng(0))
    assert out == ep.transitions


def test_her_final():
    ep = make_episode(6)
    G = ep.transitions[-1].next_achieved_goal
    out = her_relabel(ep, HerStrategy("final"), direct_reward_xy, np.random.default_rng(0))
    assert len(out) == 12
    relabeled = out[6:]
    assert all(np.array_equal(t.desired_goal, G) for t in relabeled)
    assert relabeled[-1].reward == 0.0
    for t in relabeled:
        assert t.reward == direct_reward_xy(t.next_achieved_goal, t.desired_goal)


@pytest.mark.parametrize("kind,k", [("none", 1), ("final", 1), ("future", 4), ("episode", 3), ("future", 1)])
def test_relabel_count_law(kind, k):
    T = 7
    ep = make_episode(T)
    out = her_relabel(ep, HerStrategy(kind, k), direct_reward_xy, np.random.default_rng(1))
    assert len(out) == T * (1 + HerStrategy(kind, k).k_eff)


def test_future_causality_and_reward_consistency():
    env = Reach2D()
    ep = make_episode(20, seed=3)
    achieved = [t.next_achieved_goal for t in ep]
    out = her_relabel(ep, HerStrategy("future", 4), env.compute_reward, np.random.default_rng(2), env.is_success)
    relabeled = out[20:]
    for i, t in enumerate(ep):
        for copy in relabeled[4 * i : 4 * i + 4]:
            assert np.array_equal(copy.observation, t.observation)
            later = [j for j in range(i, 20) if np.array_equal(achieved[j], copy.desired_goal)]
            assert later, "future goal must come from the same or a later step"
            assert copy.reward == env.compute_reward(copy.next_achieved_goal, copy.desired_goal)
            assert copy.terminal == bool(env.is_success(copy.next_achieved_goal, copy.desired_goal))


def test_episode_strategy_draws_from_whole_episode():
    ep = make_episode(10, seed=4)
    achieved = [t.next_achieved_goal for t in ep]
    out = her_relabel(ep, HerStrategy("episode", 5), direct_reward_xy, np.random.default_rng(3))
    early_from_later = 0
    for i, t in enumerate(out[10:]):
        src = [j for j, a in enumerate(achieved) if np.array_equal(a, t.desired_goal)]
        assert src
        early_from_later += min(src) < i // 5
    assert early_from_later > 0


def test_her_strategy_validation():
    with pytest.raises(ValueError):
        HerStrategy("sometimes")
    with pytest.raises(ValueError):
        HerStrategy("future", 0)


def lift_episode(T=6, seed=0):
    rng = np.random.default_rng(seed)
    cube = np.array([*rng.uniform(0.2, 0.8, 2), 0.1])
    goal = np.array([0.9, 0.9, 0.25])
    out = []
    for _ in range(T):
        a = np.array([*rng.uniform(-1, 1, 2), 0.0, -1.0])
        nxt = cube.copy()
        nxt[:2] = np.clip(cube[:2] + 0.05 * a[:2], 0, 1)
        out.append(Transition(cube.copy(), a, float(reward_lift(nxt, goal)), nxt.copy(), cube.copy(), nxt.copy(), goal.copy(), False))
        cube = nxt
    return Episode(out)


def test_partial_relabel_keeps_height_goal():
    env = Lift()
    ep = lift_episode()
    out = partial_goal_relabel(ep, HerStrategy("future", 4), env.compute_reward, slice(0, 2), np.random.default_rng(0), env.is_success)
    assert len(out) == 6 * 5
    for t in out:
        assert t.desired_goal[2] == 0.25
        assert t.reward == env.compute_reward(t.next_achieved_goal, t.desired_goal)


def test_partial_relabel_final_and_none():
    env = Lift()
    ep = lift_episode(seed=1)
    last = ep.transitions[-1].next_achieved_goal
    out = partial_goal_relabel(ep, HerStrategy("final"), env.compute_reward, slice(0, 2), np.random.default_rng(0))
    for t in out[6:]:
        np.testing.assert_array_equal(t.desired_goal, [last[0], last[1], 0.25])
    # sparse term satisfied on the final step, dense height term still charged
    assert out[-1].reward == pytest.approx(-20 * (0.25 - last[2]))
    assert partial_goal_relabel(ep, HerStrategy("none"), env.compute_reward, slice(0, 2), np.random.default_rng(0)) == ep.transitions
    with pytest.raises(ValueError):
        partial_goal_relabel(ep, HerStrategy("final"), env.compute_reward, slice(2, 5), np.random.default_rng(0))
    with pytest.raises(ValueError):
        partial_goal_relabel(ep, HerStrategy("final"), env.compute_reward, [0, 7], np.random.default_rng(0))


# -- actor / critic ---------------------------------------------------------


def test_select_action():
    agent = small_agent()
    obs, goal = np.array([0.2, 0.3]), np.array([0.7, 0.1])
    a = select_action(agent, obs, goal)
    assert np.array_equal(a, select_action(agent, obs, goal))
    assert np.all(np.abs(a) <= 1.0)

    def explore_seq(seed):
        rng = np.random.default_rng(seed)
        return np.array([select_action(agent, obs, goal, explore=True, rng=rng) for _ in range(50)])

    seq = explore_seq(3)
    assert np.array_equal(seq, explore_seq(3))
    assert np.all(np.abs(seq) <= 1.0)
    with pytest.raises(ValueError):
        select_action(agent, np.zeros(3), goal)


def _batch(n=8, seed=0, terminal=False):
    rng = np.random.default_rng(seed)
    return Batch(
        rng.uniform(0, 1, (n, 2)),
        rng.uniform(-1, 1, (n, 2)),
        -rng.integers(0, 2, n).astype(float),
        rng.uniform(0, 1, (n, 2)),
        rng.uniform(0, 1, (n, 2)),
        rng.uniform(0, 1, (n, 2)),
        rng.uniform(0, 1, (n, 2)),
        np.full(n, float(terminal)),
    )


def test_critic_target_trivial_cases():
    agent = small_agent()
    b = _batch(terminal=True)
    np.testing.assert_array_equal(critic_target(agent, b), b.reward)
    agent = small_agent(gamma=0.0)
    b = _batch()
    np.testing.assert_array_equal(critic_target(agent, b), b.reward)


def test_critic_target_hand_computed():
    # 1-d observation, goal and action; single-layer networks
    actor = Mlp([2, 1], "tanh", [np.array([[0.5, -0.25]])], [np.array([0.1])])
    critic = Mlp([3, 1], "linear", [np.array([[1.0, 2.0, -3.0]])], [np.array([0.5])])
    from hershape.neuralnet import AdamState

    agent = DdpgAgent(
        actor, critic, actor.copy(), critic.copy(), AdamState.for_net(actor), AdamState.for_net(critic), 1, 1, 1, gamma=0.9, tau=0.1
    )
    b = Batch(*(np.array([[v]]) for v in (0.0, 0.3)), np.array([-1.0]), np.array([[0.4]]), np.array([[0.0]]), np.array([[0.0]]), np.array([[0.8]]), np.array([0.0]))
    a_next = np.tanh(0.5 * 0.4 - 0.25 * 0.8 + 0.1)
    q_next = 1.0 * 0.4 + 2.0 * 0.8 - 3.0 * a_next + 0.5
    assert critic_target(agent, b)[0] == pytest.approx(-1.0 + 0.9 * q_next, rel=1e-14)


def test_update_stationary_critic():
    agent = small_agent(gamma=0.0)
    b = _batch()
    # make rewards equal to the current Q so the critic is already exact
    b.reward = agent.q_value(b.observation, b.desired_goal, b.action)
    before = [p.copy() for p in agent.critic.params()]
    _, closs, _ = ddpg_update(agent, b)
    assert closs == 0.0
    assert all(np.array_equal(x, y) for x, y in zip(before, agent.critic.params()))


def test_actor_gradient_matches_finite_difference():
    agent = small_agent(seed=4)
    b = _batch(n=6, seed=2)
    sg = np.concatenate([b.observation, b.desired_goal], axis=1)

    def mean_q():
        a = mlp_forward(agent.actor, sg)
        return float(np.mean(mlp_forward(agent.critic, np.concatenate([sg, a], axis=1))))

    # finite-difference gradient of mean Q with respect to the actor's parameters
    h = 1e-6
    fd = []
    for p in agent.actor.params():
        g = np.zeros_like(p)
        for i in range(p.size):
            old = p.flat[i]
            p.flat[i] = old + h
            up = mean_q()
            p.flat[i] = old - h
            down = mean_q()
            p.flat[i] = old
            g.flat[i] = (up - down) / (2 * h)
        fd.append(g)
    before = [p.copy() for p in agent.actor.params()]
    agent.actor_opt.lr = 1e-7
    ddpg_update(agent, b)
    # Adam's first step moves each parameter by -lr * sign(grad of the loss) = +lr * sign(dQ)
    for b0, p, g in zip(before, agent.actor.params(), fd):
        moved = p - b0
        mask = np.abs(g) > 1e-6
        assert np.array_equal(np.sign(moved[mask]), np.sign(g[mask]))

    # and the raw backprop gradient agrees with finite differences in value
    from hershape.neuralnet import forward_with_cache, mlp_backward

    agent2 = small_agent(seed=4)
    ac = forward_with_cache(agent2.actor, sg)
    pin = np.concatenate([sg, ac[0]], axis=1)
    dq = mlp_backward(agent2.critic, pin, np.full((6, 1), 1.0 / 6)).input[:, 4:]
    grads = mlp_backward(agent2.actor, sg, dq, ac)
    for g_bp, g_fd in zip(grads.params(), fd):
        err = np.abs(g_bp - g_fd) / np.maximum(1.0, np.abs(g_fd))
        assert err.max() < 1e-4


def test_update_deterministic_and_polyak():
    def run():
        agent = small_agent(seed=1, tau=0.1)
        losses = []
        for i in range(5):
            _, c, a = ddpg_update(agent, _batch(seed=i))
            losses.append((c, a))
        return agent, losses

    a1, l1 = run()
    a2, l2 = run()
    assert l1 == l2
    assert all(np.array_equal(x, y) for x, y in zip(a1.target_actor.params(), a2.target_actor.params()))

    agent = small_agent(seed=2, tau=0.1)
    gap = [np.abs(t - o).max() for t, o in zip(agent.target_critic.params(), agent.critic.params())]
    assert max(gap) == 0.0
    ddpg_update(agent, _batch())
    # targets move exactly a tau fraction toward the updated online nets
    prev_target = [p.copy() for p in agent.target_critic.params()]
    ddpg_update(agent, _batch(seed=1))
    for t_new, t_old, o in zip(agent.target_critic.params(), prev_target, agent.critic.params()):
        np.testing.assert_allclose(t_new, 0.9 * t_old + 0.1 * o, rtol=1e-12, atol=1e-15)


def test_update_divergence():
    agent = small_agent()
    b = _batch()
    b.reward[0] = np.inf
    before = [p.copy() for p in agent.critic.params()]
    with pytest.raises(DivergenceError):
        ddpg_update(agent, b)
    assert all(np.array_equal(x, y) for x, y in zip(before, agent.critic.params()))


# -- transfer ---------------------------------------------------------------


def _params(net):
    return [p.copy() for p in net.params()]


def test_transfer_init(tmp_path):
    src = small_agent(seed=10)
    for i in range(3):
        ddpg_update(src, _batch(seed=i))
    path = save_agent(src, tmp_path / "src.ckpt")

    dst = small_agent(seed=20)
    untouched = {n: _params(net) for n, net in dst.networks().items()}
    transfer_init(dst, path, parts=())
    assert all(all(np.array_equal(a, b) for a, b in zip(untouched[n], net.params())) for n, net in dst.networks().items())

    transfer_init(dst, path, parts=("actor", "critic"))
    for name, net in src.networks().items():
        assert all(np.array_equal(a, b) for a, b in zip(net.params(), dst.networks()[name].params()))

    dst = small_agent(seed=30)
    ddpg_update(dst, _batch())
    critic_before = _params(dst.critic)
    critic_opt_step = dst.critic_opt.step
    transfer_init(dst, path, parts=("actor",))
    assert all(np.array_equal(a, b) for a, b in zip(critic_before, dst.critic.params()))
    assert dst.critic_opt.step == critic_opt_step
    assert dst.actor_opt.step == 0
    assert all(np.array_equal(a, b) for a, b in zip(src.actor.params(), dst.actor.params()))


def test_transfer_errors(tmp_path):
    path = save_agent(small_agent(), tmp_path / "a.ckpt")
    bigger = DdpgAgent.create(2, 2, 2, hidden=(16,), seed=0)
    with pytest.raises(CheckpointError):
        transfer_init(bigger, path, ("actor",))
    with pytest.raises(FileNotFoundError):
        transfer_init(small_agent(), tmp_path / "nope.ckpt", ("actor",))
    (tmp_path / "junk.ckpt").write_text("garbage\n")
    with pytest.raises(CheckpointError):
        transfer_init(small_agent(), tmp_path / "junk.ckpt", ("critic",))
