"""Parameter storage, dense layers and the stacked recurrent cell."""

from dataclasses import dataclass

import numpy as np

from . import tensor as T


class ParameterStore:
    """Named trainable arrays plus a topology descriptor.

    Every entry is a leaf :class:`Tensor` with ``requires_grad=True``; its
    ``.grad`` slot is filled by backward and always matches the shape.
    """

    def __init__(self, topology=None):
        self.topology = dict(topology or {})
        self._params = {}

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def add(self, name, array):
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        self._params[name] = T.Tensor(np.array(array, dtype=np.float64), requires_grad=True, name=name)
        return self._params[name]

    def add_uniform(self, name, shape, fan_in, rng):
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def count(self):
        return int(sum(p.data.size for p in self._params.values()))

    def grad(self, name):
        p = self._params[name]
        return np.zeros_like(p.data) if p.grad is None else p.grad

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def arrays(self):
        return {k: p.data for k, p in self._params.items()}

    def copy_arrays(self):
        return {k: p.data.copy() for k, p in self._params.items()}

    def load_arrays(self, arrays):
        if set(arrays) != set(self._params):
            missing = set(self._params) - set(arrays)
            extra = set(arrays) - set(self._params)
            raise ValueError(f"parameter mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, v in arrays.items():
            p = self._params[k]
            v = np.asarray(v, dtype=np.float64)
            if v.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {v.shape} vs {p.data.shape}")
            p.data = v.copy()


def dense_forward(x, weight, bias):
    """``x @ weight + bias``; weight is stored (in, out).

    Works for a single vector or a (batch, in) matrix; numpy inputs are
    wrapped as constants.
    """
    x, weight, bias = T.as_tensor(x), T.as_tensor(weight), T.as_tensor(bias)
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"dense input has {x.shape[-1]} features, layer expects {weight.shape[0]}")
    if x.data.ndim == 1:
        return T.getitem(T.linear(T.getitem(x, (None, slice(None))), weight, bias), 0)
    return T.linear(x, weight, bias)


def init_dense(store, prefix, n_in, n_out, rng):
    store.add_uniform(f"{prefix}.W", (n_in, n_out), n_in, rng)
    store.add_uniform(f"{prefix}.b", (n_out,), n_in, rng)


def init_recurrent(store, prefix, n_in, hidden, layers, rng):
    for k in range(layers):
        d = n_in if k == 0 else hidden
        fan_in = d + hidden
        store.add_uniform(f"{prefix}.lstm{k}.Wx", (d, 4 * hidden), fan_in, rng)
        store.add_uniform(f"{prefix}.lstm{k}.Wh", (hidden, 4 * hidden), fan_in, rng)
        store.add_uniform(f"{prefix}.lstm{k}.b", (4 * hidden,), fan_in, rng)


@dataclass
class RecurrentState:
    """Per-layer packed ``[h, c]`` blocks, each (batch, 2 * hidden)."""

    layers: list

    @classmethod
    def zeros(cls, batch, n_layers, hidden):
        return cls([T.Tensor(np.zeros((batch, 2 * hidden))) for _ in range(n_layers)])

    def hidden(self, k):
        H = self.layers[k].shape[1] // 2
        return self.layers[k].data[:, :H]

    def cell(self, k):
        H = self.layers[k].shape[1] // 2
        return self.layers[k].data[:, H:]


def recurrent_step(x, state, params, prefix):
    """Advance a stack of gated memory cells by one input.

    Returns the top layer's hidden vector (as a Tensor) and the new state.
    """
    x = T.as_tensor(x)
    n_layers = len(state.layers)
    if x.shape[-1] != params[f"{prefix}.lstm0.Wx"].shape[0]:
        raise ValueError("recurrent input dimension does not match the first layer")
    for hc in state.layers:
        if not np.all(np.isfinite(hc.data)):
            raise FloatingPointError("non-finite recurrent state")
    new_layers = []
    inp = x
    for k in range(n_layers):
        hc = T.lstm_cell(
            inp,
            state.layers[k],
            params[f"{prefix}.lstm{k}.Wx"],
            params[f"{prefix}.lstm{k}.Wh"],
            params[f"{prefix}.lstm{k}.b"],
        )
        new_layers.append(hc)
        H = hc.shape[1] // 2
        inp = T.getitem(hc, (slice(None), slice(0, H)))
    return inp, RecurrentState(new_layers)
