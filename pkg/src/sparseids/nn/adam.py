"""Bias-corrected Adam over a :class:`ParameterStore`."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params, state, clip_norm=None):
    """Apply one Adam step from the gradients in ``params`` and clear them.

    Parameters without a gradient are treated as having a zero gradient.
    If ``clip_norm`` is given, the global gradient norm is rescaled to at
    most that value first. Returns the (pre-clip) global gradient norm.
    """
    grads = {name: params.grad(name) for name in params}
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads[name] * scale if scale != 1.0 else grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.zero_grad()
    return norm
