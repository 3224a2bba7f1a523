"""Scalar/vector nonlinearities and log-normal distribution math.

These accept plain floats or numpy arrays. The differentiable versions used
inside the networks live in :mod:`sparseids.nn.tensor`.
"""

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def softplus(x):
    """log(1 + e^x), stable for large |x|."""
    return np.logaddexp(0.0, x) if isinstance(x, np.ndarray) else float(np.logaddexp(0.0, x))


def sigmoid(x):
    out = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))
    return out if isinstance(x, np.ndarray) else float(out)


def softmax(v):
    v = np.asarray(v, dtype=np.float64)
    z = np.exp(v - v.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _check_sigma(sigma):
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError(f"log-normal sigma must be > 0, got {sigma}")


def lognormal_sample(mu, sigma, rng):
    """Draw exp(Normal(mu, sigma))."""
    _check_sigma(sigma)
    return np.exp(rng.normal(mu, sigma))


def lognormal_log_density(x, mu, sigma):
    _check_sigma(sigma)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("log-normal density needs x > 0")
    lx = np.log(x)
    out = -lx - np.log(sigma) - 0.5 * LOG_2PI - (lx - mu) ** 2 / (2.0 * sigma**2)
    return out if out.ndim else float(out)


def lognormal_entropy(mu, sigma):
    """Differential entropy mu + 0.5 * ln(2 pi e sigma^2)."""
    _check_sigma(sigma)
    out = mu + 0.5 * (LOG_2PI + 1.0) + np.log(sigma)
    return out if isinstance(out, np.ndarray) else float(out)


def lognormal_mean(mu, sigma):
    return np.exp(mu + 0.5 * np.asarray(sigma) ** 2)
