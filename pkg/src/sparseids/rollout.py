"""Batched episode rollout.

A batch of flows is advanced step-synchronously: at step t every still
active flow consumes its t-th chosen packet. Flows that already left their
packet sequence keep being fed (their rows are masked out everywhere), so
all per-step tensors keep a fixed batch shape and the graph stays simple.
"""

from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from . import kernels
from .baselines import next_index_table
from .flow_data import build_feature_batch
from .nn import tensor as T
from .nn.functions import LOG_2PI, sigmoid, softplus
from .rl_sampler import (
    DEPLOYMENT,
    TRAINING,
    ActionDistribution,
    EpisodeTrace,
    discretize,
    sample_batch,
)


@dataclass
class Rollout:
    positions: np.ndarray  # (B, T) consumed packet indices, padded with N
    counts: np.ndarray  # (B,) consumed packets per flow
    confidences: np.ndarray  # (B, T)
    actions: np.ndarray  # (B, T)
    log_probs: np.ndarray  # (B, T)
    draws: np.ndarray  # (T, B) what the actor loss needs to rebuild log pi
    valid: np.ndarray  # (T, B) bool, step t consumed a packet of flow b
    lengths: np.ndarray
    labels: np.ndarray
    alphas: np.ndarray
    last_actions: np.ndarray
    action_space: str = "continuous"
    actor_raw: np.ndarray = None  # (T, B, k)
    values: np.ndarray = None  # (T, B, 2)
    logits_t: object = None  # Tensor (T, B)
    actor_t: object = None  # Tensor (T, B, k)
    critic_t: object = None  # Tensor (T, B, 2)

    @property
    def n_steps(self):
        return self.valid.shape[0]

    def rewards(self):
        """(r_cls, r_sp, defined), each (T, B)."""
        r_cls, r_sp, defined = kernels.stream_rewards(
            self.positions, self.confidences, self.counts, self.lengths, self.labels, self.last_actions
        )
        return r_cls.T, r_sp.T, defined.T

    def verdicts(self):
        last = self.confidences[np.arange(len(self.counts)), self.counts - 1]
        return (last >= 0.5).astype(np.int64)


def rollout(net, packed, idx, stats, max_len, policy, mode, rng, alphas=None,
            steering=False, record=False, forced_draws=None, forced_actions=None):
    """Roll out the flows ``idx`` of ``packed`` in one batch.

    ``policy`` is a :class:`SamplingPolicy`; for the rl kind actions come
    from the actor (sampled in training mode, mean/mode in deployment),
    otherwise from the policy's packet masks. ``record=True`` builds the
    autodiff graph and evaluates the critic; it is never evaluated
    otherwise. ``forced_draws`` (T, B) replays raw actor draws and
    ``forced_actions`` (T, B) fixes the actions directly (stub policies).
    """
    if mode not in (TRAINING, DEPLOYMENT):
        raise ValueError(f"unknown mode {mode!r}")
    idx = np.asarray(idx, dtype=np.int64)
    B = len(idx)
    raw = packed.raw[idx]
    lengths = packed.lengths[idx]
    labels = packed.labels[idx]
    L = raw.shape[1]
    alphas = np.zeros(B) if alphas is None else np.broadcast_to(np.asarray(alphas, dtype=np.float64), (B,)).copy()
    action_space = net.config.action_space
    use_actor = policy.is_rl and forced_actions is None
    use_critic = record and policy.is_rl
    if not policy.is_rl:
        masks = [policy.mask(int(n), rng) for n in lengths]
        nxt_table = next_index_table(masks, L)

    rows = np.arange(B)
    pos = np.zeros(B, dtype=np.int64)
    skipped = np.zeros(B)
    active = np.ones(B, dtype=bool)
    states = net.initial_state(B)
    steps = []
    logits_l, actor_l, critic_l = [], [], []
    last_actions = np.zeros(B, dtype=np.int64)

    ctx = nullcontext() if record else T.no_grad()
    with ctx:
        t = 0
        while active.any():
            feats = build_feature_batch(
                raw[rows, np.minimum(pos, L - 1)], skipped, stats, max_len,
                alphas if steering else None,
            )
            out, states = net.step(feats, states, actor=use_actor, critic=use_critic)
            logits = out["cls"]
            conf = sigmoid(logits.data)
            actor_raw = out["actor"].data if use_actor else None
            if forced_actions is not None:
                actions = np.asarray(forced_actions[t], dtype=np.int64)
                draws = actions.astype(np.float64) - 1.0
                logp = np.zeros(B)
            elif use_actor:
                actions, draws, logp = sample_batch(actor_raw, action_space, mode, rng)
                if forced_draws is not None:
                    draws = np.asarray(forced_draws[t], dtype=np.float64)
                    actions, draws, logp = _replay(actor_raw, action_space, draws)
            else:
                actions = nxt_table[rows, np.minimum(pos, L - 1)] - pos
                draws = np.zeros(B)
                logp = np.zeros(B)
            actions = np.maximum(actions, 1)
            steps.append((pos.copy(), conf, actions, logp, draws, active.copy(),
                          actor_raw, out["critic"].data if use_critic else None))
            if record:
                logits_l.append(logits)
                if use_actor:
                    actor_l.append(out["actor"])
                if use_critic:
                    critic_l.append(out["critic"])
            last_actions = np.where(active, actions, last_actions)
            new_pos = pos + actions
            skipped = np.where(active, actions - 1, skipped).astype(np.float64)
            still = active & (new_pos < lengths)
            pos = np.where(still, new_pos, pos)
            active = still
            t += 1

    Tn = len(steps)
    valid = np.stack([s[5] for s in steps])
    positions = np.stack([s[0] for s in steps]).T.copy()
    positions[~valid.T] = np.repeat(lengths[:, None], Tn, axis=1)[~valid.T]
    res = Rollout(
        positions=positions,
        counts=valid.sum(axis=0).astype(np.int64),
        confidences=np.stack([s[1] for s in steps]).T.copy(),
        actions=np.stack([s[2] for s in steps]).T.copy(),
        log_probs=np.stack([s[3] for s in steps]).T.copy(),
        draws=np.stack([s[4] for s in steps]),
        valid=valid,
        lengths=lengths,
        labels=labels,
        alphas=alphas,
        last_actions=last_actions,
        action_space=action_space,
        actor_raw=np.stack([s[6] for s in steps]) if use_actor else None,
        values=np.stack([s[7] for s in steps]) if use_critic else None,
    )
    if record:
        res.logits_t = T.stack(logits_l)
        res.actor_t = T.stack(actor_l) if actor_l else None
        res.critic_t = T.stack(critic_l) if critic_l else None
    return res


def _replay(actor_raw, action_space, draws):
    if action_space == "continuous":
        mu = softplus(actor_raw[:, 0])
        sigma = softplus(actor_raw[:, 1])
        actions = discretize(np.exp(np.minimum(draws, 700.0)))
        logp = -draws - np.log(sigma) - 0.5 * LOG_2PI - (draws - mu) ** 2 / (2.0 * sigma**2)
        return actions, draws, logp
    idx = draws.astype(np.int64)
    z = actor_raw - actor_raw.max(axis=1, keepdims=True)
    logsm = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return idx + 1, draws, logsm[np.arange(len(idx)), idx]


def to_traces(res, packed, idx, with_rewards=True):
    """Split a batched rollout into per-flow :class:`EpisodeTrace` objects."""
    idx = np.asarray(idx, dtype=np.int64)
    if with_rewards:
        r_cls, r_sp, defined = (a.T for a in res.rewards())
    traces = []
    for b, k in enumerate(idx):
        K = int(res.counts[b])
        tr = EpisodeTrace(
            n_packets=int(res.lengths[b]),
            label=int(res.labels[b]),
            indices=[int(v) for v in res.positions[b, :K]],
            confidences=[float(v) for v in res.confidences[b, :K]],
            actions=[int(v) for v in res.actions[b, :K]],
            log_probs=[float(v) for v in res.log_probs[b, :K]],
            flow_id=packed.flow_ids[k],
            attack_type=packed.attack_types[k],
            alpha=float(res.alphas[b]),
        )
        if res.actor_raw is not None:
            tr.dists = [ActionDistribution.from_actor_output(res.actor_raw[t, b], res.action_space)
                        for t in range(K)]
        if res.values is not None:
            tr.v_cls = [float(v) for v in res.values[:K, b, 0]]
            tr.v_sp = [float(v) for v in res.values[:K, b, 1]]
        if with_rewards:
            tr.r_cls = [float(v) for v in r_cls[b, :K]]
            tr.r_sp = [float(v) for v in r_sp[b, :K]]
            tr.reward_defined = [bool(v) for v in defined[b, :K]]
        traces.append(tr)
    return traces

