import math

import numpy as np
import pytest
from scipy.stats import chisquare

from activeevent.controller import (
    Adam,
    Batch,
    DQNConfig,
    QNet,
    ReplayBuffer,
    combined_reward,
    intrinsic_reward,
    policy_input,
    select_action,
    td_loss_and_grads,
    td_update,
)
from activeevent.env import Action
from activeevent.errors import ConfigError, UsageError

SQRT18 = 4.242640687119285146


def peaked(i, j, n=7):
    a = np.full((n, n), 0.01)
    a[i, j] = 1.0
    return a / a.sum()


def toy_net(seed=0, in_dim=3, agg=2, n_actions=3):
    return QNet(in_dim, agg, n_actions, rng=np.random.default_rng(seed), hidden_sizes=(3, 3))


def toy_batch(rng, n=4, in_dim=3, agg=2, n_actions=3, terminal=None):
    return Batch(
        x=rng.normal(size=(n, in_dim)),
        h=rng.normal(size=(n, agg)) * 0.5,
        a=rng.integers(0, n_actions, size=n),
        r=rng.normal(size=n),
        x_next=rng.normal(size=(n, in_dim)),
        h_next=rng.normal(size=(n, agg)) * 0.5,
        terminal=np.zeros(n, bool) if terminal is None else np.asarray(terminal),
    )


def test_reward_center_is_zero():
    r, u = intrinsic_reward(peaked(3, 3))
    assert r == 0.0 and u == (3, 3)


def test_reward_corner():
    r, u = intrinsic_reward(peaked(0, 0))
    assert u == (0, 0) and r == pytest.approx(-SQRT18, abs=1e-12)


def test_reward_uniform_tie_goes_to_first_cell():
    r, u = intrinsic_reward(np.full((7, 7), 1 / 49))
    assert u == (0, 0) and r == pytest.approx(-SQRT18, abs=1e-12)


def test_combined_reward_modes():
    assert combined_reward(-2, 5, "intrinsic") == -2
    assert combined_reward(-2, 4, "hybrid", 0.5) == 1
    assert combined_reward(123.0, 0.25, "extrinsic") == 0.25
    with pytest.raises(ConfigError):
        combined_reward(0, 0, "bogus")


def test_zero_final_layer_gives_zero_q(rng):
    net = QNet(20, 8, rng=np.random.default_rng(1))
    net.params["w3"][:] = 0
    net.params["b3"][:] = 0
    q, _ = net.q_values(rng.normal(size=20), net.zero_hidden())
    assert q.shape == (7,) and not q.any()


def test_forward_is_pure(rng):
    net = QNet(20, 8, rng=np.random.default_rng(1))
    x, h = rng.normal(size=20), rng.normal(size=8)
    (q1, h1), (q2, h2) = net.q_values(x, h), net.q_values(x, h)
    assert np.array_equal(q1, q2) and np.array_equal(h1, h2)


def test_alpha_perturbation_changes_q(rng):
    net = QNet(7 * 7 * 17, 16, rng=np.random.default_rng(2))
    f = rng.normal(size=(7, 7, 16))
    alpha = np.full((7, 7), 1 / 49)
    bumped = alpha.copy()
    bumped[2, 5] += 0.1
    q1, _ = net.q_values(policy_input(f, alpha), net.zero_hidden())
    q2, _ = net.q_values(policy_input(f, bumped), net.zero_hidden())
    assert not np.allclose(q1, q2)


def test_greedy_argmax():
    q = np.array([0, 0, 0, 1, 0, 0, 0], float)
    assert select_action(q, 0.0, np.random.default_rng(0)) == 3 == Action.TURN_LEFT


def test_greedy_tie_goes_to_zero():
    assert select_action(np.zeros(7), 0.0, np.random.default_rng(0)) == 0


def test_eps_one_is_uniform():
    rng = np.random.default_rng(2024)
    q = np.arange(7.0)
    counts = np.bincount([select_action(q, 1.0, rng) for _ in range(70_000)], minlength=7)
    assert chisquare(counts).pvalue > 0.01


def test_epsilon_schedule():
    cfg = DQNConfig(eps_start=1.0, eps_final=0.02, eps_decay_steps=100)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(50) == pytest.approx(0.51)
    assert cfg.epsilon(100) == pytest.approx(0.02) and cfg.epsilon(10**6) == pytest.approx(0.02)


def test_td_loss_reduces_to_reward(rng):
    net = toy_net()
    net.params["w3"][:] = 0
    net.params["b3"][:] = 0
    b = toy_batch(rng)
    b.r = np.full(4, -1.0)
    loss, _, _ = td_loss_and_grads(net, net.copy(), b, gamma=0.0)
    assert loss == 1.0


def test_terminal_masks_next_state(rng):
    net, tgt = toy_net(1), toy_net(2)
    b = toy_batch(rng, terminal=[True] * 4)
    l1, _, _ = td_loss_and_grads(net, tgt, b, 0.99)
    b.x_next = b.x_next + 10.0
    b.h_next = -b.h_next
    l2, _, _ = td_loss_and_grads(net, tgt, b, 0.99)
    assert l1 == l2


def test_nonterminal_depends_on_next_state(rng):
    net, tgt = toy_net(1), toy_net(2)
    b = toy_batch(rng)
    l1, _, _ = td_loss_and_grads(net, tgt, b, 0.99)
    b.x_next = b.x_next + 10.0
    l2, _, _ = td_loss_and_grads(net, tgt, b, 0.99)
    assert l1 != l2


def td_fd_check(net, tgt, b, gamma, rtol, eps=1e-6):
    _, grads, _ = td_loss_and_grads(net, tgt, b, gamma)
    for k, v in net.params.items():
        for idx in np.ndindex(v.shape):
            old = v[idx]
            v[idx] = old + eps
            up, _, _ = td_loss_and_grads(net, tgt, b, gamma)
            v[idx] = old - eps
            dn, _, _ = td_loss_and_grads(net, tgt, b, gamma)
            v[idx] = old
            fd = (up - dn) / (2 * eps)
            assert fd == pytest.approx(grads[k][idx], rel=rtol, abs=1e-8), (k, idx)


def test_single_output_toy_gradient():
    # one action, one hidden unit per layer
    rng = np.random.default_rng(5)
    net = QNet(1, 1, 1, rng=rng, hidden_sizes=(1, 1))
    net.params["b1"][:] = 1.0
    net.params["b2"][:] = 1.0
    net.params["w2"][:] = 0.7
    b = Batch(rng.normal(size=(3, 1)), rng.normal(size=(3, 1)) * 0.3, np.zeros(3, int), rng.normal(size=3),
              rng.normal(size=(3, 1)), rng.normal(size=(3, 1)) * 0.3, np.zeros(3, bool))
    td_fd_check(net, net.copy(), b, 0.9, rtol=1e-4)


def test_toy_batch_gradient(rng):
    net, tgt = toy_net(3), toy_net(4)
    for p in ("b1", "b2"):
        net.params[p][:] = 0.5
    assert sum(v.size for v in net.params.values()) <= 100
    td_fd_check(net, tgt, toy_batch(rng, n=5), 0.9, rtol=1e-4)


def test_td_update_reduces_loss(rng):
    net = toy_net(3)
    tgt = net.copy()
    b = toy_batch(rng, n=8)
    opt = Adam(net.params, 1e-2)
    first = td_update(net, tgt, b, 0.5, opt, 10.0)
    for _ in range(200):
        last = td_update(net, tgt, b, 0.5, opt, 10.0)
    assert last < first


def test_td_update_requires_optimizer(rng):
    with pytest.raises(UsageError):
        td_update(toy_net(), toy_net(), toy_batch(rng), 0.9, None)


def test_ring_buffer_overwrites_oldest():
    buf = ReplayBuffer(5, 2, 1)
    for k in range(6):
        buf.push(np.full(2, k), np.zeros(1), k % 7, float(k), np.zeros(2), np.zeros(1))
    assert len(buf) == 5
    assert 0.0 not in buf.r[: len(buf)]
    assert sorted(buf.r[: len(buf)]) == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_single_item_sample():
    buf = ReplayBuffer(4, 2, 1)
    buf.push(np.array([1.0, 2.0]), np.ones(1), 4, -0.5, np.array([3.0, 4.0]), np.zeros(1), True)
    b = buf.sample(1, np.random.default_rng(0))
    assert b.a[0] == 4 and b.r[0] == -0.5 and b.terminal[0]
    assert np.array_equal(b.x[0], [1.0, 2.0]) and np.array_equal(b.x_next[0], [3.0, 4.0])


def test_every_index_sampled_eventually():
    buf = ReplayBuffer(50, 1, 1)
    for k in range(50):
        buf.push(np.zeros(1), np.zeros(1), 0, float(k), np.zeros(1), np.zeros(1))
    rng = np.random.default_rng(0)
    seen = set()
    # coupon collector: expected ~225 draws for 50 coupons; 40 batches of 50 is plenty
    for _ in range(40):
        seen.update(buf.sample_indices(50, rng).tolist())
    assert seen == set(range(50))


def test_sampling_errors():
    buf = ReplayBuffer(3, 1, 1)
    with pytest.raises(UsageError):
        buf.sample(1, np.random.default_rng(0))
    buf.push(np.zeros(1), np.zeros(1), 0, 0.0, np.zeros(1), np.zeros(1))
    with pytest.raises(UsageError):
        buf.sample(2, np.random.default_rng(0))


def test_policy_input_layout(rng):
    f = rng.normal(size=(7, 7, 16))
    x = policy_input(f, np.full((7, 7), 1 / 49))
    assert x.shape == (7 * 7 * 17,)
    assert np.array_equal(x[: f.size], f.ravel()) and np.allclose(x[f.size :], 1.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        DQNConfig(gamma=1.0).validate()
    with pytest.raises(ConfigError):
        DQNConfig(reward_mode="x").validate()
    DQNConfig().validate()
    assert math.isclose(DQNConfig().epsilon(5000), 0.51)
