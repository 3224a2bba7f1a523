"""Per-packet attack confidence, supervised loss and the flow verdict."""

import numpy as np

from .nn import tensor as T
from .nn.functions import sigmoid
from .nn.tensor import no_grad


def classify_packet(features, state, net):
    """Consume one packet: returns ``(confidence, new_state)``.

    ``features`` is a single feature vector; ``state`` maps stack name to
    :class:`RecurrentState` (see :meth:`SparseIDSNet.initial_state` with
    batch 1). Only the classifier path is evaluated.
    """
    x = np.asarray(features, dtype=np.float64)[None, :]
    with no_grad():
        out, new_state = net.step(x, state, actor=False, critic=False)
    return sigmoid(float(out["cls"].data[0])), new_state


def classifier_loss(confidences, label):
    """Mean binary cross-entropy of the consumed packets' confidences."""
    c = np.asarray(confidences, dtype=np.float64)
    if c.size == 0:
        raise ValueError("classifier_loss needs at least one consumed packet")
    c = np.clip(c, 1e-300, 1.0)
    c1 = np.clip(1.0 - np.asarray(confidences, dtype=np.float64), 1e-300, 1.0)
    return float(-np.mean(label * np.log(c) + (1 - label) * np.log(c1)))


def bce_with_logits(logits, labels):
    """Elementwise BCE from logits as a Tensor: softplus(z) - y * z."""
    return T.softplus(logits) - T.mul(logits, labels)


def flow_verdict(trace):
    """1 (attack) iff the last consumed packet's confidence is >= 0.5."""
    confidences = trace.confidences if hasattr(trace, "confidences") else trace
    return int(confidences[-1] >= 0.5)
