"""Deployment-mode evaluation: flow-level metrics and per-position sampling
histograms."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .baselines import SamplingPolicy
from .flow_data import DataError, truncate_flows
from .rl_sampler import DEPLOYMENT
from .rollout import rollout

ALL_TYPES = "All"


class EvaluationError(ValueError):
    pass


def _ratio(num, den):
    """num/den, or (0.0, True) when the denominator is zero."""
    if den == 0:
        return 0.0, True
    return num / den, False


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    consumed: int
    total_packets: int
    per_attack: dict = field(default_factory=dict)

    @property
    def n_flows(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n_flows

    @property
    def precision(self):
        return _ratio(self.tp, self.tp + self.fp)[0]

    @property
    def recall(self):
        return _ratio(self.tp, self.tp + self.fn)[0]

    @property
    def specificity(self):
        return _ratio(self.tn, self.tn + self.fp)[0]

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    @property
    def youden(self):
        return self.recall + self.specificity - 1.0

    @property
    def sparsity(self):
        return 1.0 - self.consumed / self.total_packets

    @property
    def zero_division(self):
        """Names of the ratios whose denominator was zero (reported as 0)."""
        flags = {
            "precision": self.tp + self.fp,
            "recall": self.tp + self.fn,
            "specificity": self.tn + self.fp,
        }
        return sorted(k for k, den in flags.items() if den == 0)

    def as_dict(self):
        out = {
            "flows": self.n_flows,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "youden": self.youden,
            "sparsity": self.sparsity,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "consumed_packets": self.consumed,
            "total_packets": self.total_packets,
            "zero_division": ",".join(self.zero_division) or "none",
        }
        for name, row in sorted(self.per_attack.items()):
            for k, v in row.items():
                out[f"attack.{name}.{k}"] = v
        return out

    def to_keyvalue(self):
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def to_text(self):
        lines = [
            f"flows       {self.n_flows}",
            f"accuracy    {self.accuracy:.4f}",
            f"precision   {self.precision:.4f}",
            f"recall      {self.recall:.4f}",
            f"f1          {self.f1:.4f}",
            f"youden      {self.youden:.4f}",
            f"sparsity    {self.sparsity:.4f}",
            f"confusion   TP={self.tp} FP={self.fp} TN={self.tn} FN={self.fn}",
        ]
        if self.zero_division:
            lines.append("zero-division (reported as 0): " + ", ".join(self.zero_division))
        if self.per_attack:
            lines.append("")
            lines.append(f"{'type':<24}{'flows':>8}{'accuracy':>10}{'sparsity':>10}")
            for name, row in sorted(self.per_attack.items()):
                lines.append(f"{name:<24}{row['flows']:>8}{row['accuracy']:>10.4f}{row['sparsity']:>10.4f}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def metrics_from_counts(labels, verdicts, consumed, lengths, attack_types=None):
    """Build a :class:`MetricsReport` from per-flow arrays."""
    labels = np.asarray(labels).astype(np.int64)
    verdicts = np.asarray(verdicts).astype(np.int64)
    consumed = np.asarray(consumed, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if len(labels) == 0:
        raise EvaluationError("empty test set")
    report = MetricsReport(
        tp=int(np.sum((verdicts == 1) & (labels == 1))),
        fp=int(np.sum((verdicts == 1) & (labels == 0))),
        tn=int(np.sum((verdicts == 0) & (labels == 0))),
        fn=int(np.sum((verdicts == 0) & (labels == 1))),
        consumed=int(consumed.sum()),
        total_packets=int(lengths.sum()),
    )
    if attack_types is not None:
        types = np.asarray(attack_types, dtype=object)
        for name in sorted(set(attack_types)):
            sel = types == name
            report.per_attack[name] = {
                "flows": int(sel.sum()),
                "accuracy": float(np.mean(verdicts[sel] == labels[sel])),
                "sparsity": 1.0 - consumed[sel].sum() / lengths[sel].sum(),
            }
    return report


def _deploy(checkpoint, test_ds, policy, tradeoff=None, batch_size=256):
    """Roll out every flow in deployment mode; returns the prepared dataset,
    its packed view and the list of per-batch rollouts."""
    if len(test_ds) == 0:
        raise EvaluationError("empty test set")
    max_len = int(checkpoint.train_config.get("max_len", 20))
    ds = truncate_flows(test_ds, max_len)
    packed = ds.packed()
    net = checkpoint.build_net()
    steering = checkpoint.steering
    if steering and tradeoff is None:
        tradeoff = float(checkpoint.train_config.get("tradeoff_max", 1.0))
    if not steering and tradeoff is not None:
        raise EvaluationError("a tradeoff input needs a checkpoint trained with uniform alpha")
    if policy.kind == "first_m" and policy.avg_len is None:
        policy = SamplingPolicy(policy.kind, policy.rate, ds.mean_length(), policy.seed)
    rng = np.random.default_rng(policy.seed)
    results = []
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        results.append(
            rollout(net, packed, idx, checkpoint.stats, max_len, policy, DEPLOYMENT, rng,
                    alphas=tradeoff, steering=steering)
        )
    return ds, packed, results


def evaluate(checkpoint, test_ds, policy=None, tradeoff=None, batch_size=256):
    """Deployment-mode metrics over ``test_ds``.

    ``policy`` defaults to the learned (rl) policy; baselines replace the
    actor but still use the checkpoint's classifier. The critic is never
    evaluated. ``tradeoff`` is the injected feature for steering-mode
    checkpoints (defaults to the training maximum).
    """
    policy = policy or SamplingPolicy("rl")
    ds, packed, results = _deploy(checkpoint, test_ds, policy, tradeoff, batch_size)
    verdicts = np.concatenate([r.verdicts() for r in results])
    counts = np.concatenate([r.counts for r in results])
    return metrics_from_counts(packed.labels, verdicts, counts, packed.lengths, packed.attack_types)


@dataclass
class SamplingHistogram:
    alive: np.ndarray  # flows with length > j
    consumed: np.ndarray  # flows that consumed packet j
    conf_sum: np.ndarray  # summed confidence after consuming packet j
    attack_type: str = ALL_TYPES

    @property
    def mean_confidence(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.consumed > 0, self.conf_sum / np.maximum(self.consumed, 1), np.nan)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "alive", "consumed", "mean_confidence"])
        for j, (a, c, m) in enumerate(zip(self.alive, self.consumed, self.mean_confidence)):
            w.writerow([j, int(a), int(c), "" if np.isnan(m) else f"{m:.6f}"])
        return buf.getvalue()


def histogram_from_positions(positions, counts, confidences, lengths, width):
    """Accumulate a histogram from per-flow consumed positions."""
    alive = np.zeros(width, dtype=np.int64)
    consumed = np.zeros(width, dtype=np.int64)
    conf_sum = np.zeros(width)
    for b in range(len(counts)):
        n = int(lengths[b])
        alive[:n] += 1
        k = int(counts[b])
        pos = np.asarray(positions[b][:k], dtype=np.int64)
        consumed[pos] += 1
        conf_sum[pos] += np.asarray(confidences[b][:k], dtype=np.float64)
    return SamplingHistogram(alive, consumed, conf_sum)


def per_attack_histogram(checkpoint, test_ds, attack_type=ALL_TYPES, policy=None, tradeoff=None,
                         batch_size=256):
    """Per-position sampling histogram for one attack type (or ``"All"``)."""
    available = sorted({f.attack_type for f in test_ds})
    if attack_type != ALL_TYPES and attack_type not in available:
        raise DataError(
            f"unknown attack type {attack_type!r}; available: {', '.join([ALL_TYPES] + available)}"
        )
    if attack_type != ALL_TYPES:
        test_ds = test_ds.subset([i for i, f in enumerate(test_ds) if f.attack_type == attack_type])
    policy = policy or SamplingPolicy("rl")
    ds, packed, results = _deploy(checkpoint, test_ds, policy, tradeoff, batch_size)
    width = int(checkpoint.train_config.get("max_len", 20))
    hist = SamplingHistogram(np.zeros(width, np.int64), np.zeros(width, np.int64), np.zeros(width),
                             attack_type)
    for r in results:
        part = histogram_from_positions(r.positions, r.counts, r.confidences, r.lengths, width)
        hist.alive += part.alive
        hist.consumed += part.consumed
        hist.conf_sum += part.conf_sum
    return hist
