import math

import numpy as np
import pytest

from oracles import direct_rewards, random_episode, run_bandit
from sparseids.nn import lognormal_log_density
from sparseids.nn import tensor as T
from sparseids.rl_sampler import (
    DEPLOYMENT,
    TRAINING,
    ActionDistribution,
    EpisodeTrace,
    TradeoffConfig,
    actor_loss,
    actor_loss_tensor,
    compute_classification_reward,
    compute_sparsity_reward,
    compute_terminal_sparsity_reward,
    compute_utility,
    critic_loss,
    critic_loss_tensor,
    discretize,
    sample_batch,
    select_action,
)


def trace(N, label, indices, confidences, actions):
    return EpisodeTrace(N, label, list(indices), list(confidences), list(actions))


def test_classification_reward_examples():
    t = trace(5, 1, [0, 1, 2, 3, 4], [1, 1, 1, 1, 1], [1] * 5)
    assert compute_classification_reward(t, 1, 0) == 1.0
    t = trace(3, 1, [0, 1, 2], [0.5, 0.2, 0.8], [1, 1, 1])
    assert compute_classification_reward(t, 1, 0) == pytest.approx(0.5)
    t = trace(4, 0, [0, 1, 2, 3], [0.5] * 4, [1] * 4)
    assert compute_classification_reward(t, 0, 0) == 0.5
    with pytest.raises(ValueError):
        compute_classification_reward(t, 0, 3)


def test_skipped_packets_inherit_last_confidence():
    t = trace(4, 1, [0, 2], [0.3, 0.9], [2, 5])
    np.testing.assert_array_equal(t.per_packet_confidence(), [0.3, 0.3, 0.9, 0.9])
    assert compute_classification_reward(t, 1, 0) == pytest.approx((0.3 + 0.9 + 0.9) / 3)


def test_sparsity_reward_examples():
    # packets 0..4 processed, then 3 of the remaining 5 chosen
    t = trace(10, 0, [0, 1, 2, 3, 4, 5, 7, 9], [0.5] * 8, [1, 1, 1, 1, 1, 2, 2, 1])
    assert compute_sparsity_reward(t, 4) == pytest.approx(2 / 5)
    full = trace(6, 0, range(6), [0.5] * 6, [1] * 6)
    assert compute_sparsity_reward(full, 1) == 0
    t = trace(6, 0, [0, 1, 5], [0.5] * 3, [1, 4, 1])
    assert compute_sparsity_reward(t, 1) == pytest.approx(3 / 4)
    t = trace(6, 0, [0, 5], [0.5] * 2, [5, 1])
    assert compute_sparsity_reward(t, 0) == pytest.approx(4 / 5)


def test_terminal_reward_examples():
    assert compute_terminal_sparsity_reward(None, 5, 4, 10) == 1.0
    assert compute_terminal_sparsity_reward(None, 5, 10, 10) == pytest.approx(4 / 9)
    with pytest.raises(ValueError, match="no future"):
        compute_terminal_sparsity_reward(None, 9, 1, 10)
    # every remaining packet skipped, landing exactly past the end
    assert compute_terminal_sparsity_reward(None, 0, 6, 6) == 1.0


def test_utility_examples():
    assert compute_utility(0.9, 0.5, 0.8, 0.4, 0.5) == pytest.approx(0.15, abs=1e-12)
    assert compute_utility(0.7, 0.3, 0.7, 0.3, 0.5) == 0
    assert compute_utility(0.9, 0.0, 0.5, 0.0, 0.0) == compute_utility(0.9, 1.0, 0.5, 0.2, 0.0)


def _stepped(rewards, values):
    t = trace(len(rewards) + 1, 1, range(len(rewards)), [0.5] * len(rewards), [1] * len(rewards))
    t.r_cls, t.r_sp = [r[0] for r in rewards], [r[1] for r in rewards]
    t.v_cls, t.v_sp = [v[0] for v in values], [v[1] for v in values]
    t.reward_defined = [True] * len(rewards)
    return t


def test_critic_loss_examples():
    assert critic_loss(_stepped([(0.3, 0.4)], [(0.3, 0.4)])) == 0
    assert critic_loss(_stepped([(1, 1)], [(0, 0)])) == 2
    assert critic_loss(_stepped([(0.5, 0.4)], [(0.7, 0.1)])) == pytest.approx(0.13, abs=1e-12)


def test_actor_loss_examples():
    t = _stepped([(0.5, 0.5)], [(0.5, 0.5)])
    t.log_probs = [-1.2]
    t.dists = [ActionDistribution.continuous(1.0, 1.0)]
    assert actor_loss(t, 0.5, 0.0) == 0

    t = _stepped([(0.9, 0.5)], [(0.8, 0.4)])
    t.log_probs = [-1.2]
    t.dists = [ActionDistribution.continuous(1.0, 1.0)]
    H = t.dists[0].entropy()
    expected = 1.2 * 0.15 - 0.01 * H
    assert actor_loss(t, 0.5, 0.01) == pytest.approx(expected, abs=1e-12)
    # the worked figure uses H = 1.4189
    assert 1.2 * 0.15 - 0.01 * 1.4189 == pytest.approx(0.1658, abs=1e-4)

    uniform = ActionDistribution.discrete(np.full(20, 0.05))
    assert uniform.entropy() == pytest.approx(math.log(20), abs=1e-12)


def test_tensor_losses_match_scalar_versions(rng):
    Tn, B = 3, 2
    values = rng.random((Tn, B, 2))
    r_cls, r_sp = rng.random((Tn, B)), rng.random((Tn, B))
    w = np.array([[1, 1], [1, 0], [0, 0]], dtype=float)
    got = critic_loss_tensor(T.Tensor(values), r_cls, r_sp, w).item()
    want = sum(w[t, b] * ((r_cls[t, b] - values[t, b, 0]) ** 2 + (r_sp[t, b] - values[t, b, 1]) ** 2)
               for t in range(Tn) for b in range(B))
    assert got == pytest.approx(want, abs=1e-12)

    raw = rng.normal(size=(Tn, B, 2))
    draws = rng.normal(size=(Tn, B))
    util = rng.normal(size=(Tn, B))
    got = actor_loss_tensor(T.Tensor(raw), draws, "continuous", util, 0.01, w).item()
    want = 0.0
    for t in range(Tn):
        for b in range(B):
            d = ActionDistribution.from_actor_output(raw[t, b], "continuous")
            x = math.exp(draws[t, b])
            want += w[t, b] * (-lognormal_log_density(x, d.mu, d.sigma) * util[t, b] - 0.01 * d.entropy())
    assert got == pytest.approx(want, abs=1e-10)


def test_discretize_examples():
    assert discretize(np.array([0.3]))[0] == 1
    assert discretize(np.array([2.7]))[0] == 3
    assert discretize(np.array([1e300]))[0] >= 1


def test_select_action_examples(rng):
    peaked = ActionDistribution.discrete([0.9, 0.05, 0.05])
    assert select_action(peaked, DEPLOYMENT)[0] == 1
    tie = ActionDistribution.discrete([0.5, 0.5])
    assert select_action(tie, DEPLOYMENT)[0] == 1
    d = ActionDistribution.continuous(0.5, 0.4)
    a, _ = select_action(d, DEPLOYMENT)
    assert a == math.floor(math.exp(0.5 + 0.08)) + 1
    for _ in range(200):
        assert select_action(d, TRAINING, rng)[0] >= 1
    with pytest.raises(ValueError):
        select_action(d, "eval")
    with pytest.raises(ValueError):
        ActionDistribution.continuous(0.0, 1.0)
    with pytest.raises(ValueError):
        ActionDistribution.discrete([0.5, 0.6])


def test_sample_batch_matches_single_selection(rng):
    raw = rng.normal(size=(5, 2))
    actions, lx, logp = sample_batch(raw, "continuous", DEPLOYMENT, rng)
    for b in range(5):
        d = ActionDistribution.from_actor_output(raw[b], "continuous")
        a, lp = select_action(d, DEPLOYMENT)
        assert actions[b] == a and logp[b] == pytest.approx(lp, abs=1e-10)
    raw = rng.normal(size=(4, 6))
    actions, idx, logp = sample_batch(raw, "discrete", DEPLOYMENT, rng)
    np.testing.assert_array_equal(actions, raw.argmax(axis=1) + 1)


def test_discrete_sampling_frequencies():
    rng = np.random.default_rng(0)
    raw = np.log(np.array([[0.2, 0.5, 0.3]]))
    counts = np.zeros(3)
    for _ in range(4000):
        counts[sample_batch(raw, "discrete", TRAINING, rng)[0][0] - 1] += 1
    np.testing.assert_allclose(counts / 4000, [0.2, 0.5, 0.3], atol=0.03)


def test_tradeoff_config_validation():
    assert TradeoffConfig().beta == 0.01
    with pytest.raises(ValueError):
        TradeoffConfig(alpha=-1)


def test_fill_rewards_matches_direct_definitions():
    rng = np.random.default_rng(11)
    for _ in range(200):
        N, label, pos, conf, a_last = random_episode(rng)
        t = trace(N, label, pos, conf, [1] * (len(pos) - 1) + [a_last]).fill_rewards()
        ref = direct_rewards(N, label, pos, conf, a_last)
        for j, r in enumerate(ref):
            assert t.reward_defined[j] == (r is not None)
            if r is not None:
                assert abs(t.r_cls[j] - r[0]) <= 1e-12 and abs(t.r_sp[j] - r[1]) <= 1e-12


def test_entropy_prevents_early_collapse():
    peaks = {}

    def watch(step, raw):
        if step == 100:
            p = np.exp(raw - raw.max())
            peaks["max"] = float((p / p.sum()).max())

    run_bandit("discrete", updates=100, on_update=watch)
    assert peaks["max"] < 1 - 1e-6


def test_policy_term_is_linear_in_utility(rng):
    raw = T.Tensor(rng.normal(size=(2, 3, 2)))
    draws = rng.normal(size=(2, 3))
    w = np.ones((2, 3))
    u = rng.normal(size=(2, 3))
    at = lambda k: actor_loss_tensor(raw, draws, "continuous", k * u, 0.0, w).item()  # noqa: E731
    assert at(3.0) == pytest.approx(3 * at(1.0), rel=1e-12)
    assert at(0.0) == 0.0


def test_rewards_are_bounded_and_penalty_strict():
    rng = np.random.default_rng(5)
    for _ in range(300):
        N, label, pos, conf, a_last = random_episode(rng)
        t = trace(N, label, pos, conf, [1] * (len(pos) - 1) + [a_last]).fill_rewards()
        for ok, rc, rs in zip(t.reward_defined, t.r_cls, t.r_sp):
            if ok:
                assert 0.0 <= rc <= 1.0 and 0.0 <= rs <= 1.0
    for last, N in ((3, 10), (0, 2)):
        free = compute_terminal_sparsity_reward(None, last, N - last, N)
        assert compute_terminal_sparsity_reward(None, last, N - last + 1, N) < free == 1.0
