"""Closed-loop tradeoff steering at deployment.

The controller starts at the training maximum of the tradeoff feature and
lowers it by a fixed step after every full window of flows whose sparsity
is still above the target. It stops once the target is met, once the
tradeoff hits 0, or when the stream runs out.
"""

import csv
import io
from dataclasses import dataclass, field, replace

from .evaluator import evaluate
from .flow_data import FlowDataset

# Decimal places kept on the tradeoff so repeated 0.1 steps land on 0.5, not 0.49999999999999994.
_TRADEOFF_DIGITS = 12


class SteeringError(ValueError):
    pass


@dataclass(frozen=True)
class SteeringState:
    tradeoff: float
    target: float
    step: float = 0.1
    tradeoff_max: float = 1.0
    window_sparsity: float = None

    def __post_init__(self):
        if not 0.0 < self.target < 1.0:
            raise SteeringError(f"target sparsity must lie in (0, 1), got {self.target}")
        if self.step <= 0:
            raise SteeringError("step must be > 0")
        if not 0.0 <= self.tradeoff <= self.tradeoff_max:
            raise SteeringError(f"tradeoff {self.tradeoff} outside [0, {self.tradeoff_max}]")


def steering_step(state, window_sparsity):
    """Lower the tradeoff by one step if the window was still too sparse."""
    if not 0.0 <= window_sparsity <= 1.0:
        raise SteeringError(f"window sparsity must lie in [0, 1], got {window_sparsity}")
    tradeoff = state.tradeoff
    if window_sparsity > state.target and tradeoff > 0.0:
        tradeoff = max(0.0, round(tradeoff - state.step, _TRADEOFF_DIGITS))
    return replace(state, tradeoff=tradeoff, window_sparsity=window_sparsity)


@dataclass
class SteeringResult:
    rows: list = field(default_factory=list)  # (window, tradeoff, sparsity)
    reason: str = "end of stream"

    @property
    def steps(self):
        """Number of windows after which the tradeoff was lowered."""
        return sum(1 for a, b in zip(self.rows, self.rows[1:]) if b[1] < a[1])

    @property
    def final_tradeoff(self):
        return self.rows[-1][1] if self.rows else None

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "tradeoff", "sparsity"])
        for k, t, s in self.rows:
            w.writerow([k, repr(t), f"{s:.12g}"])
        return buf.getvalue()


def run_steered(runner, stream, target, step=0.1, window=1000, tradeoff_max=1.0):
    """Drive ``runner`` over ``stream`` in tumbling windows of ``window`` flows.

    ``runner(flows, tradeoff)`` evaluates a list of flows at a fixed
    tradeoff and returns ``(consumed_packets, total_packets)``. A trailing
    partial window is never evaluated, so no step is taken on less than a
    full window.
    """
    if window < 1:
        raise SteeringError("window must be >= 1 flow")
    state = SteeringState(tradeoff_max, target, step, tradeoff_max)
    result = SteeringResult()
    flows = list(stream)
    for k in range(len(flows) // window):
        consumed, total = runner(flows[k * window : (k + 1) * window], state.tradeoff)
        sparsity = 1.0 - consumed / total
        result.rows.append((k, state.tradeoff, sparsity))
        if sparsity <= target:
            result.reason = "target reached"
            break
        if state.tradeoff <= 0.0:
            result.reason = "tradeoff at 0"
            break
        state = steering_step(state, sparsity)
    return result


class CheckpointRunner:
    """Runner backed by a checkpoint trained with a per-flow random tradeoff."""

    def __init__(self, checkpoint, batch_size=256):
        if not checkpoint.steering:
            raise SteeringError(
                "checkpoint was trained with a fixed alpha and has no tradeoff input; "
                "steering needs alpha=uniform"
            )
        self.checkpoint = checkpoint
        self.batch_size = batch_size

    @property
    def tradeoff_max(self):
        return float(self.checkpoint.train_config.get("tradeoff_max", 1.0))

    def __call__(self, flows, tradeoff):
        report = evaluate(self.checkpoint, FlowDataset(flows), tradeoff=tradeoff,
                          batch_size=self.batch_size)
        return report.consumed, report.total_packets


def linear_stub(flows, tradeoff):
    """Stand-in model whose sparsity equals its tradeoff input."""
    total = sum(len(f) for f in flows) or 1
    return round((1.0 - tradeoff) * total), total
