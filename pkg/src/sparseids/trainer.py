"""Training loop: rollouts, loss assembly, Adam steps, progress log."""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import SamplingPolicy
from .checkpoint import Checkpoint
from .classifier import bce_with_logits
from .flow_data import compute_normalization, feature_dim, truncate_flows
from .model import ModelConfig, SparseIDSNet
from .nn import tensor as T
from .nn.adam import AdamState, adam_update
from .rl_sampler import TRAINING, actor_loss_tensor, critic_loss_tensor
from .rollout import rollout, to_traces

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 8
    lr: float = 0.001
    alpha: object = 0.0  # float, or "uniform" for per-flow random tradeoff
    beta: float = 0.01
    action_space: str = "continuous"
    n_actions: int = 20
    topology: str = "shared"
    batch_size: int = 32
    seed: int = 0
    max_len: int = 20
    hidden: int = 128
    layers: int = 3
    sampler: str = "rl"
    rate: float = 1.0
    avg_len: float = None
    clip_norm: float = None
    log_every: int = 100
    tradeoff_max: float = 1.0
    actor_warmup: int = 0

    def __post_init__(self):
        if isinstance(self.alpha, str) and self.alpha != "uniform":
            self.alpha = float(self.alpha)
        self.validate()

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.alpha != "uniform" and self.alpha < 0:
            raise ValueError("alpha must be >= 0 or 'uniform'")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.tradeoff_max <= 0:
            raise ValueError("tradeoff_max must be > 0")
        SamplingPolicy(self.sampler, self.rate if self.sampler != "rl" else 1.0, self.avg_len)
        ModelConfig(feature_dim(self.steering), self.hidden, self.layers, self.topology,
                    self.action_space, self.n_actions).validate()

    @property
    def steering(self):
        return self.alpha == "uniform"

    def model_config(self):
        return ModelConfig(
            input_dim=feature_dim(self.steering),
            hidden=self.hidden,
            layers=self.layers,
            topology=self.topology,
            action_space=self.action_space,
            n_actions=self.n_actions,
            seed=self.seed,
        )

    def to_dict(self):
        return asdict(self)


def draw_alphas(config, batch, rng):
    if config.steering:
        return rng.uniform(0.0, config.tradeoff_max, size=batch)
    return np.full(batch, float(config.alpha))


def combine_losses(res, beta, rl=True, actor=True):
    """Mean over the batch's flows of classifier + critic + actor losses.

    Returns ``(total, parts)`` with ``total`` a scalar Tensor and ``parts``
    the three components as floats. Rewards and utilities enter as
    constants.
    """
    B = len(res.counts)
    labels = res.labels[None, :]
    w_cls = res.valid / res.counts[None, :] / B
    cls = T.tsum(T.mul(bce_with_logits(res.logits_t, labels), w_cls))
    total = cls
    parts = {"classifier": cls.item(), "critic": 0.0, "actor": 0.0}
    if rl:
        r_cls, r_sp, defined = res.rewards()
        w = defined / B
        critic = critic_loss_tensor(res.critic_t, r_cls, r_sp, w)
        a = res.alphas[None, :]
        utility = (r_cls + a * r_sp) - (res.values[..., 0] + a * res.values[..., 1])
        total = total + critic
        parts["critic"] = critic.item()
        if actor:
            actor_l = actor_loss_tensor(res.actor_t, res.draws, res.action_space, utility, beta, w)
            total = total + actor_l
            parts["actor"] = actor_l.item()
    return total, parts


def run_episode(flow_ds_packed, index, net, stats, policy, alpha, mode, rng, max_len=20, steering=False):
    """Roll out a single flow and return its :class:`EpisodeTrace`."""
    res = rollout(net, flow_ds_packed, [index], stats, max_len, policy, mode, rng,
                  alphas=[alpha], steering=steering)
    return to_traces(res, flow_ds_packed, [index])[0]


def train(config, train_ds, stats=None, on_log=None):
    """Train a model; returns ``(checkpoint, log_records)``.

    Log records are dicts with ``flows`` (flows seen), ``epoch``,
    ``accuracy`` and ``sparsity`` over the last interval, and the loss
    components. Deterministic for a fixed ``config.seed``.
    """
    config.validate()
    ds = truncate_flows(train_ds, config.max_len)
    if len(ds) == 0:
        raise TrainingError("empty training set")
    if stats is None:
        stats = compute_normalization(ds)
    avg_len = config.avg_len
    if config.sampler == "first_m" and avg_len is None:
        avg_len = ds.mean_length()
    policy = SamplingPolicy(config.sampler, config.rate if config.sampler != "rl" else 1.0,
                            avg_len, config.seed)
    net = SparseIDSNet(config.model_config())
    opt = AdamState(lr=config.lr)
    rng = np.random.default_rng(config.seed)
    packed = ds.packed()
    F = len(ds)
    records = []
    seen = 0
    acc_n = acc_ok = pk_total = pk_used = 0
    loss_sum = {"classifier": 0.0, "critic": 0.0, "actor": 0.0}
    n_batches = 0
    next_log = config.log_every
    for epoch in range(config.epochs):
        order = rng.permutation(F)
        for start in range(0, F, config.batch_size):
            idx = order[start : start + config.batch_size]
            alphas = draw_alphas(config, len(idx), rng)
            res = rollout(net, packed, idx, stats, config.max_len, policy, TRAINING, rng,
                          alphas=alphas, steering=config.steering, record=True)
            total, parts = combine_losses(res, config.beta, rl=policy.is_rl,
                                          actor=seen >= config.actor_warmup)
            if not np.isfinite(total.item()):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, flows seen {seen}: {parts}"
                )
            total.backward()
            adam_update(net.params, opt, config.clip_norm)

            seen += len(idx)
            acc_n += len(idx)
            acc_ok += int(np.sum(res.verdicts() == res.labels))
            pk_total += int(res.lengths.sum())
            pk_used += int(res.counts.sum())
            for k, v in parts.items():
                loss_sum[k] += v
            n_batches += 1
            if seen >= next_log or (epoch == config.epochs - 1 and start + config.batch_size >= F):
                rec = {
                    "flows": seen,
                    "epoch": epoch,
                    "accuracy": acc_ok / acc_n,
                    "sparsity": 1.0 - pk_used / pk_total,
                    **{f"loss_{k}": v / n_batches for k, v in loss_sum.items()},
                }
                records.append(rec)
                log.info("flows=%d epoch=%d acc=%.4f sparsity=%.4f", seen, epoch,
                         rec["accuracy"], rec["sparsity"])
                if on_log is not None:
                    on_log(rec)
                acc_n = acc_ok = pk_total = pk_used = 0
                loss_sum = dict.fromkeys(loss_sum, 0.0)
                n_batches = 0
                while next_log <= seen:
                    next_log += config.log_every
    cfg = config.to_dict()
    if avg_len is not None:
        cfg["avg_len"] = avg_len
    ckpt = Checkpoint(
        train_config=cfg,
        model_config=net.config.to_dict(),
        params=net.params.copy_arrays(),
        stats=stats,
    )
    return ckpt, records
