import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import random_episode
from sparseids import kernels
from sparseids.kernels import available_backends, get_backend

compiled = pytest.mark.skipif("compiled" not in available_backends(), reason="extension not built")


def reward_inputs(rng, flows=64):
    eps = [random_episode(rng) for _ in range(flows)]
    T = max(len(e[2]) for e in eps)
    positions = np.zeros((flows, T), dtype=np.int64)
    conf = np.zeros((flows, T))
    for b, (N, _, pos, c, _) in enumerate(eps):
        positions[b] = N
        positions[b, : len(pos)] = pos
        conf[b, : len(c)] = c
    counts = np.array([len(e[2]) for e in eps])
    lengths = np.array([e[0] for e in eps])
    labels = np.array([float(e[1]) for e in eps])
    last = np.array([e[4] for e in eps])
    return positions, conf, counts, lengths, labels, last


def test_fallback_always_available():
    assert "python" in available_backends()
    assert get_backend("python") is not None
    with pytest.raises(ValueError):
        get_backend("fortran")


@compiled
def test_compiled_is_default_when_built():
    assert kernels.BACKEND == "compiled"


@compiled
def test_backends_agree(rng):
    py, cy = get_backend("python"), get_backend("compiled")
    z = rng.normal(size=(7, 4 * 5)) * 3
    c_prev = rng.normal(size=(7, 5))
    fa, fb = py.lstm_forward(z, c_prev), cy.lstm_forward(z, c_prev)
    for a, b in zip(fa, fb):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    dhc = rng.normal(size=(7, 10))
    for a, b in zip(py.lstm_backward(fa[0], c_prev, fa[2], dhc), cy.lstm_backward(fa[0], c_prev, fa[2], dhc)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    args = reward_inputs(rng)
    for a, b in zip(py.stream_rewards(*args), cy.stream_rewards(*args)):
        np.testing.assert_allclose(np.asarray(a, float), np.asarray(b, float), rtol=0, atol=1e-14)


def test_env_var_forces_fallback():
    code = "from sparseids import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SPARSEIDS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
