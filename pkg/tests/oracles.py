"""Slow, direct reference implementations and a toy environment for tests."""

import numpy as np

from sparseids.nn import ParameterStore, adam_update
from sparseids.nn.adam import AdamState
from sparseids.rl_sampler import TRAINING, actor_loss_tensor, sample_batch


def random_episode(rng, max_n=20):
    """A random consumption pattern obeying the rollout rules.

    Returns ``(N, label, positions, confidences, last_action)``.
    """
    N = int(rng.integers(1, max_n + 1))
    positions = [0]
    while True:
        a = int(rng.integers(1, 8))
        if positions[-1] + a >= N:
            break
        positions.append(positions[-1] + a)
    confidences = list(rng.random(len(positions)))
    label = int(rng.integers(0, 2))
    return N, label, positions, confidences, a


def direct_rewards(N, label, positions, confidences, last_action):
    """Rewards for every consumed packet straight from the definitions.

    Returns a list of ``(r_cls, r_sp)`` or ``None`` where no future exists.
    """
    consumed = set(positions)
    out = []
    for k, n in enumerate(positions):
        F = N - 1 - n
        if F < 1:
            out.append(None)
            continue
        cls_terms = []
        for i in range(n + 1, N):
            owner = max(j for j, p in enumerate(positions) if p <= i)
            cls_terms.append(1.0 - abs(label - confidences[owner]))
        r_cls = sum(cls_terms) / F
        if k == len(positions) - 1:
            o = max(0, n + last_action - N)
            r_sp = F / (F + o)
        else:
            r_sp = sum(1 for i in range(n + 1, N) if i not in consumed) / F
        out.append((r_cls, r_sp))
    return out


def run_bandit(action_space, updates=2000, batch=16, lr=0.01, beta=0.01, seed=0, on_update=None):
    """Single-decision environment paying 1 iff the action is 3.

    Trains free actor parameters with the library's actor loss and Adam,
    using a running-mean reward baseline as the critic. Returns the raw
    actor output; ``on_update(step, raw)`` is called after every update.
    """
    k = 20 if action_space == "discrete" else 2
    store = ParameterStore()
    store.add("raw", np.zeros(k))
    opt = AdamState(lr=lr)
    rng = np.random.default_rng(seed)
    baseline = 0.0
    for step in range(1, updates + 1):
        raw = store["raw"] + np.zeros((1, batch, k))
        actions, draws, _ = sample_batch(raw.data[0], action_space, TRAINING, rng)
        reward = (actions == 3).astype(np.float64)
        utility = (reward - baseline)[None, :]
        baseline += 0.05 * (reward.mean() - baseline)
        loss = actor_loss_tensor(raw, draws[None, :], action_space, utility, beta, np.full((1, batch), 1 / batch))
        loss.backward()
        adam_update(store, opt)
        if on_update is not None:
            on_update(step, store["raw"].data)
    return store["raw"].data
