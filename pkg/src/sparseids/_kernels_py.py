"""Pure-Python/numpy versions of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable (or disabled
with ``SPARSEIDS_PURE_PYTHON=1``). Signatures and outputs match the
extension exactly; see ``sparseids.kernels``.
"""

import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_forward(z, c_prev):
    """Pointwise part of an LSTM step.

    ``z`` holds the pre-activations ``[i, f, g, o]`` with shape (B, 4H).
    Returns ``(acts, hc, tanh_c)`` where ``acts`` are the activated gates,
    ``hc`` is ``[h, c]`` of shape (B, 2H).
    """
    H = c_prev.shape[1]
    acts = np.empty_like(z)
    acts[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
    acts[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
    acts[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
    i = acts[:, :H]
    f = acts[:, H : 2 * H]
    g = acts[:, 2 * H : 3 * H]
    o = acts[:, 3 * H :]
    hc = np.empty((z.shape[0], 2 * H))
    c = hc[:, H:]
    np.multiply(f, c_prev, out=c)
    c += i * g
    tanh_c = np.tanh(c)
    np.multiply(o, tanh_c, out=hc[:, :H])
    return acts, hc, tanh_c


def lstm_backward(acts, c_prev, tanh_c, dhc):
    """Backward of :func:`lstm_forward`; returns ``(dz, dc_prev)``."""
    H = c_prev.shape[1]
    i = acts[:, :H]
    f = acts[:, H : 2 * H]
    g = acts[:, 2 * H : 3 * H]
    o = acts[:, 3 * H :]
    dh = dhc[:, :H]
    dc = dhc[:, H:] + dh * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(acts)
    dz[:, :H] = dc * g * i * (1.0 - i)
    dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
    dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
    dz[:, 3 * H :] = dh * tanh_c * o * (1.0 - o)
    return dz, dc * f


def stream_rewards(positions, confidences, counts, lengths, labels, last_actions):
    """Per-step classification/sparsity rewards for a batch of episodes.

    ``positions`` and ``confidences`` are (B, T) arrays; row b holds the
    consumed packet indices of episode b in its first ``counts[b]`` slots.
    Returns ``(r_cls, r_sp, defined)``, each (B, T); ``defined`` is 1.0 where
    the step has at least one future packet.

    Walks each episode backwards once. A skipped packet inherits the
    confidence of the nearest preceding consumed packet, and the final
    consumed step gets the overshoot-penalised sparsity reward.
    """
    B, T = positions.shape
    r_cls = np.zeros((B, T))
    r_sp = np.zeros((B, T))
    defined = np.zeros((B, T))
    for b in range(B):
        K = int(counts[b])
        N = int(lengths[b])
        y = float(labels[b])
        cls_sum = 0.0
        skipped = 0
        nxt = N
        for j in range(K - 1, -1, -1):
            p = int(positions[b, j])
            gap = nxt - p - 1
            score = 1.0 - abs(y - float(confidences[b, j]))
            future = N - 1 - p
            if future >= 1:
                seg_cls = cls_sum + gap * score
                seg_skip = skipped + gap
                r_cls[b, j] = seg_cls / future
                if j == K - 1:
                    over = p + int(last_actions[b]) - N
                    if over < 0:
                        over = 0
                    r_sp[b, j] = future / (future + over)
                else:
                    r_sp[b, j] = seg_skip / future
                defined[b, j] = 1.0
            cls_sum += gap * score + score
            skipped += gap
            nxt = p
    return r_cls, r_sp, defined
