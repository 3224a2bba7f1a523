"""Non-adaptive packet sampling strategies.

Every mask is a 0/1 int array over a flow's packets with packet 0 always
consumed. Counts ``m`` and strides ``i`` use round-half-away-from-zero.
"""

from dataclasses import dataclass

import numpy as np

from .flow_data import round_half_up

KINDS = ("random", "relative_first_m", "first_m", "every_ith", "rl")


def _check_rate(p):
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sampling rate must lie in (0, 1], got {p}")


def _check_len(N):
    if N < 1:
        raise ValueError("flow length must be >= 1")


def random_mask(N, p, rng):
    """Packet 0 plus each later packet with probability (pN - 1)/(N - 1).

    The adjusted probability keeps the expected consumed fraction at p
    despite the forced first packet (clamped to [0, 1]).
    """
    _check_rate(p)
    _check_len(N)
    mask = np.zeros(N, dtype=np.int64)
    mask[0] = 1
    if N > 1:
        q = min(max((p * N - 1.0) / (N - 1.0), 0.0), 1.0)
        mask[1:] = rng.random(N - 1) < q
    return mask


def relative_first_m_mask(N, p):
    _check_rate(p)
    _check_len(N)
    m = max(1, round_half_up(N * p))
    mask = np.zeros(N, dtype=np.int64)
    mask[: min(m, N)] = 1
    return mask


def first_m_mask(N, p, avg_len):
    _check_rate(p)
    _check_len(N)
    if not avg_len > 0:
        raise ValueError("avg_len must be > 0")
    m = max(1, round_half_up(avg_len * p))
    mask = np.zeros(N, dtype=np.int64)
    mask[: min(m, N)] = 1
    return mask


def every_ith_mask(N, p):
    _check_rate(p)
    _check_len(N)
    i = max(1, round_half_up(1.0 / p))
    mask = np.zeros(N, dtype=np.int64)
    mask[::i] = 1
    return mask


@dataclass
class SamplingPolicy:
    kind: str = "rl"
    rate: float = 1.0
    avg_len: float = None
    seed: int = 0

    def __post_init__(self):
        self.kind = self.kind.replace("-", "_")
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampling policy {self.kind!r}; choose from {KINDS}")
        if self.kind != "rl":
            _check_rate(self.rate)
        if self.kind == "first_m" and self.avg_len is not None and not self.avg_len > 0:
            raise ValueError("avg_len must be > 0")

    @property
    def is_rl(self):
        return self.kind == "rl"

    def mask(self, N, rng=None):
        if self.kind == "random":
            return random_mask(N, self.rate, rng)
        if self.kind == "relative_first_m":
            return relative_first_m_mask(N, self.rate)
        if self.kind == "first_m":
            if self.avg_len is None:
                raise ValueError("first_m needs avg_len")
            return first_m_mask(N, self.rate, self.avg_len)
        if self.kind == "every_ith":
            return every_ith_mask(N, self.rate)
        raise ValueError("the rl policy has no fixed mask")


def next_index_table(masks, width):
    """For each flow and position, the next consumed index after it.

    ``masks`` is a list of per-flow masks; returns (F, width) int64 where
    entries past the last consumed packet equal the flow length.
    """
    table = np.zeros((len(masks), width), dtype=np.int64)
    for k, mask in enumerate(masks):
        N = len(mask)
        nxt = N
        row = np.full(width, N, dtype=np.int64)
        for i in range(N - 1, -1, -1):
            row[i] = nxt
            if mask[i]:
                nxt = i
        table[k] = row
    return table


def achieved_fraction(policy, lengths, rng=None):
    """Consumed packets / total packets over a corpus of flow lengths."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if policy.kind == "random":
        consumed = sum(int(policy.mask(int(n), rng).sum()) for n in lengths)
    else:
        values, counts = np.unique(lengths, return_counts=True)
        consumed = sum(int(policy.mask(int(n)).sum()) * int(c) for n, c in zip(values, counts))
    return consumed / float(lengths.sum())


def calibrate_rate(kind, lengths, target, avg_len=None, grid=2000):
    """Pick the rate in (0, 1] whose achieved fraction is closest to target.

    The random policy hits the target in expectation, so it returns the
    target itself; deterministic kinds are scanned on a fine grid.
    """
    kind = kind.replace("-", "_")
    if kind == "random":
        return float(target)
    best, best_err = None, None
    for p in np.linspace(1.0 / grid, 1.0, grid):
        pol = SamplingPolicy(kind, float(p), avg_len)
        err = abs(achieved_fraction(pol, lengths) - target)
        if best_err is None or err < best_err - 1e-15:
            best, best_err = float(p), err
    return best
