"""Actor/critic side of SparseIDS: action distributions, rewards, utility
and the two losses.

Index convention: packets are 0-based, ``0..N-1``. The future packets of a
consumed packet ``n`` are ``n+1..N-1``, so there are ``F(n) = N-1-n`` of
them; steps with ``F(n) = 0`` carry no reward and are left out of both
losses.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .nn import tensor as T
from .nn.functions import LOG_2PI, lognormal_entropy, lognormal_log_density, softmax, softplus

MAX_ACTION = 10**9
TRAINING = "training"
DEPLOYMENT = "deployment"


@dataclass
class TradeoffConfig:
    alpha: float = 0.0
    beta: float = 0.01

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")


@dataclass
class ActionDistribution:
    """Either categorical over ``k`` skip choices or a log-normal.

    For the discrete kind ``probs[j]`` is the probability of action
    ``j + 1``. For the continuous kind ``mu`` and ``sigma`` parametrize the
    underlying normal of the log-normal.
    """

    kind: str
    probs: np.ndarray = None
    mu: float = None
    sigma: float = None

    @classmethod
    def discrete(cls, probs):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or abs(probs.sum() - 1.0) > 1e-9 or np.any(probs < 0):
            raise ValueError("discrete probabilities must be non-negative and sum to 1")
        return cls("discrete", probs=probs)

    @classmethod
    def continuous(cls, mu, sigma):
        if not (mu > 0 and sigma > 0):
            raise ValueError("log-normal parameters must be strictly positive")
        return cls("continuous", mu=float(mu), sigma=float(sigma))

    @classmethod
    def from_actor_output(cls, raw, action_space):
        raw = np.asarray(raw, dtype=np.float64)
        if action_space == "continuous":
            return cls.continuous(softplus(raw[0]), softplus(raw[1]))
        return cls.discrete(softmax(raw))

    def entropy(self):
        if self.kind == "continuous":
            return lognormal_entropy(self.mu, self.sigma)
        p = self.probs[self.probs > 0]
        return float(-np.sum(p * np.log(p)))


def discretize(x):
    """Map a positive real sample to an action: floor(x) + 1."""
    return np.minimum(np.floor(np.minimum(x, MAX_ACTION)), MAX_ACTION - 1).astype(np.int64) + 1


def select_action(dist, mode, rng=None):
    """Pick an action ``a >= 1``; returns ``(a, log_prob_or_log_density)``.

    Training mode samples; deployment mode uses the distribution mean
    (continuous, then floor + 1) or mode (discrete, ties to the smaller
    action). For continuous samples the log-density is that of the raw,
    undiscretized draw.
    """
    if mode not in (TRAINING, DEPLOYMENT):
        raise ValueError(f"unknown mode {mode!r}")
    if dist.kind == "discrete":
        if mode == DEPLOYMENT:
            j = int(np.argmax(dist.probs))
        else:
            j = int(np.searchsorted(np.cumsum(dist.probs), rng.random(), side="right"))
            j = min(j, len(dist.probs) - 1)
        return j + 1, float(np.log(dist.probs[j])) if dist.probs[j] > 0 else -math.inf
    if mode == DEPLOYMENT:
        x = math.exp(dist.mu + 0.5 * dist.sigma**2)
    else:
        x = math.exp(rng.normal(dist.mu, dist.sigma))
    return int(discretize(x)), lognormal_log_density(x, dist.mu, dist.sigma)


def sample_batch(raw, action_space, mode, rng):
    """Vectorized action selection for (B, k) actor outputs.

    Returns ``(actions, draws, log_probs)``. ``draws`` holds what the loss
    needs to recompute the log-probability: the log of the raw sample for
    continuous actions, the action index (a - 1) for discrete ones.
    """
    B = raw.shape[0]
    if action_space == "continuous":
        mu = softplus(raw[:, 0])
        sigma = softplus(raw[:, 1])
        if mode == DEPLOYMENT:
            lx = mu + 0.5 * sigma**2
        else:
            lx = rng.normal(mu, sigma)
        actions = discretize(np.exp(np.minimum(lx, 700.0)))
        logp = -lx - np.log(sigma) - 0.5 * LOG_2PI - (lx - mu) ** 2 / (2.0 * sigma**2)
        return actions, lx, logp
    z = raw - raw.max(axis=1, keepdims=True)
    logsm = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    if mode == DEPLOYMENT:
        idx = np.argmax(logsm, axis=1)
    else:
        cdf = np.cumsum(np.exp(logsm), axis=1)
        u = rng.random(B)[:, None] * cdf[:, -1:]
        idx = np.minimum((cdf <= u).sum(axis=1), raw.shape[1] - 1)
    return idx.astype(np.int64) + 1, idx.astype(np.float64), logsm[np.arange(B), idx]


@dataclass
class EpisodeTrace:
    """Everything one rollout over one flow produced, per consumed packet."""

    n_packets: int
    label: int
    indices: list = field(default_factory=list)
    confidences: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    dists: list = field(default_factory=list)
    v_cls: list = field(default_factory=list)
    v_sp: list = field(default_factory=list)
    r_cls: list = field(default_factory=list)
    r_sp: list = field(default_factory=list)
    reward_defined: list = field(default_factory=list)
    flow_id: str = ""
    attack_type: str = ""
    alpha: float = 0.0

    @property
    def skip_mask(self):
        """1 where the packet was skipped, 0 where consumed (length N)."""
        mask = np.ones(self.n_packets, dtype=np.int64)
        mask[np.asarray(self.indices, dtype=np.int64)] = 0
        return mask

    @property
    def n_consumed(self):
        return len(self.indices)

    def per_packet_confidence(self):
        """Confidence for every packet; skipped ones inherit the last consumed."""
        conf = np.empty(self.n_packets)
        idx = list(self.indices) + [self.n_packets]
        for j in range(len(self.indices)):
            conf[idx[j] : idx[j + 1]] = self.confidences[j]
        return conf

    def step_of(self, n):
        try:
            return self.indices.index(n)
        except ValueError:
            raise ValueError(f"packet {n} was not consumed in this episode") from None

    def fill_rewards(self):
        """Compute all per-step rewards with the streaming kernel."""
        K = len(self.indices)
        r_cls, r_sp, defined = kernels.stream_rewards(
            np.asarray([self.indices], dtype=np.int64),
            np.asarray([self.confidences], dtype=np.float64),
            np.array([K]),
            np.array([self.n_packets]),
            np.array([float(self.label)]),
            np.array([self.actions[-1]]),
        )
        self.r_cls = list(r_cls[0])
        self.r_sp = list(r_sp[0])
        self.reward_defined = [bool(d) for d in defined[0]]
        return self


def _future(trace, n):
    F = trace.n_packets - 1 - n
    if F < 1:
        raise ValueError(f"packet {n} has no future packets; its reward is undefined")
    return F


def compute_classification_reward(trace, labels, n):
    """Mean of ``1 - |label_i - confidence_i|`` over the future packets of n.

    ``labels`` is the flow label or a per-packet sequence of labels.
    """
    F = _future(trace, n)
    conf = trace.per_packet_confidence()
    lab = np.broadcast_to(np.asarray(labels, dtype=np.float64), (trace.n_packets,))
    fut = slice(n + 1, trace.n_packets)
    return float(np.sum(1.0 - np.abs(lab[fut] - conf[fut])) / F)


def compute_sparsity_reward(trace, n):
    """Fraction of the future packets of n that are skipped."""
    F = _future(trace, n)
    return float(trace.skip_mask[n + 1 :].sum() / F)


def compute_terminal_sparsity_reward(trace, last, a_last, N):
    """Sparsity reward at the last consumed packet with the overshoot penalty.

    Landing at index N (just past the flow) or earlier is free; every
    further position adds one to the denominator.
    """
    F = N - 1 - last
    if F < 1:
        raise ValueError("the final packet has no future packets; its reward is undefined")
    over = max(0, last + a_last - N)
    return F / (F + over)


def compute_utility(r_cls, r_sp, v_cls, v_sp, alpha):
    return (r_cls + alpha * r_sp) - (v_cls + alpha * v_sp)


def critic_loss(trace):
    """Sum of squared reward-prediction errors over steps with rewards."""
    total = 0.0
    for j, ok in enumerate(trace.reward_defined):
        if ok:
            total += (trace.r_cls[j] - trace.v_cls[j]) ** 2 + (trace.r_sp[j] - trace.v_sp[j]) ** 2
    return total


def actor_loss(trace, alpha, beta):
    """Sum over steps with rewards of ``-log pi(a|s) * U - beta * H``."""
    total = 0.0
    for j, ok in enumerate(trace.reward_defined):
        if not ok:
            continue
        u = compute_utility(trace.r_cls[j], trace.r_sp[j], trace.v_cls[j], trace.v_sp[j], alpha)
        total += -trace.log_probs[j] * u - beta * trace.dists[j].entropy()
    return total


# --- differentiable batch losses -------------------------------------------


def critic_loss_tensor(values, r_cls, r_sp, weights):
    """Weighted squared errors; ``values`` is a (T, B, 2) Tensor, targets
    and weights are constants (T, B)."""
    e_cls = T.getitem(values, (Ellipsis, 0)) - r_cls
    e_sp = T.getitem(values, (Ellipsis, 1)) - r_sp
    return T.tsum(T.mul(T.square(e_cls) + T.square(e_sp), weights))


def actor_terms_tensor(actor_raw, draws, action_space):
    """(log_prob, entropy) Tensors of shape (T, B) from raw actor outputs.

    ``draws`` are constants from :func:`sample_batch`.
    """
    if action_space == "continuous":
        mu = T.softplus(T.getitem(actor_raw, (Ellipsis, 0)))
        sigma = T.softplus(T.getitem(actor_raw, (Ellipsis, 1)))
        log_sigma = T.log(sigma)
        inv_var = T.div(1.0, T.square(sigma))
        dev = T.sub(draws, mu)
        logp = T.sub(-draws - 0.5 * LOG_2PI, log_sigma + 0.5 * T.mul(T.square(dev), inv_var))
        entropy = mu + log_sigma + 0.5 * (LOG_2PI + 1.0)
        return logp, entropy
    logsm = T.log_softmax(actor_raw)
    logp = T.take_last(logsm, draws.astype(np.int64))
    entropy = -T.tsum(T.mul(T.exp(logsm), logsm), axis=-1)
    return logp, entropy


def actor_loss_tensor(actor_raw, draws, action_space, utility, beta, weights):
    logp, entropy = actor_terms_tensor(actor_raw, draws, action_space)
    per_step = -(T.mul(logp, utility)) - beta * entropy
    return T.tsum(T.mul(per_step, weights))
