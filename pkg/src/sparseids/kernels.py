"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it is
not built or when ``SPARSEIDS_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""

import os

import numpy as np

from . import _kernels_py

_force_py = os.environ.get("SPARSEIDS_PURE_PYTHON", "") not in ("", "0")

_ext = None
if not _force_py:
    try:
        from . import _kernels as _ext
    except ImportError:  # extension not built
        _ext = None

_impl = _ext if _ext is not None else _kernels_py
BACKEND = "compiled" if _ext is not None else "python"


def available_backends():
    names = ["python"]
    if _ext is not None:
        names.append("compiled")
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _ext is None:
            raise ImportError("compiled kernels are not available")
        return _ext
    raise ValueError(f"unknown kernel backend {name!r}")


def lstm_forward(z, c_prev):
    return _impl.lstm_forward(np.ascontiguousarray(z), np.ascontiguousarray(c_prev))


def lstm_backward(acts, c_prev, tanh_c, dhc):
    return _impl.lstm_backward(
        np.ascontiguousarray(acts),
        np.ascontiguousarray(c_prev),
        np.ascontiguousarray(tanh_c),
        np.ascontiguousarray(dhc),
    )


def stream_rewards(positions, confidences, counts, lengths, labels, last_actions):
    return _impl.stream_rewards(
        np.ascontiguousarray(positions, dtype=np.int64),
        np.ascontiguousarray(confidences, dtype=np.float64),
        np.ascontiguousarray(counts, dtype=np.int64),
        np.ascontiguousarray(lengths, dtype=np.int64),
        np.ascontiguousarray(labels, dtype=np.float64),
        np.ascontiguousarray(last_actions, dtype=np.int64),
    )
