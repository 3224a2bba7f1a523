"""The SparseIDS network: classifier, actor and critic heads over recurrent
stacks, with either one shared stack or one stack per head.

Each stack is ``input -> dense(hidden) -> LSTM x layers``; each head is a
final dense layer. In the shared topology the input dense layer and the
LSTM layers are common to all three heads.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .nn import tensor as T
from .nn.layers import ParameterStore, RecurrentState, init_dense, init_recurrent, recurrent_step

TOPOLOGIES = ("shared", "separate")
ACTION_SPACES = ("continuous", "discrete")


@dataclass
class ModelConfig:
    input_dim: int
    hidden: int = 128
    layers: int = 3
    topology: str = "shared"
    action_space: str = "continuous"
    n_actions: int = 20
    seed: int = 0

    def validate(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.action_space not in ACTION_SPACES:
            raise ValueError(f"action space must be one of {ACTION_SPACES}")
        if self.input_dim < 1 or self.hidden < 1 or self.layers < 1:
            raise ValueError("input_dim, hidden and layers must be positive")
        if self.action_space == "discrete" and self.n_actions < 1:
            raise ValueError("n_actions must be >= 1")

    @property
    def actor_width(self):
        return 2 if self.action_space == "continuous" else self.n_actions

    def to_dict(self):
        return asdict(self)


class SparseIDSNet:
    def __init__(self, config):
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.params = ParameterStore(topology=config.to_dict())
        self.stacks = ["trunk"] if config.topology == "shared" else ["cls", "actor", "critic"]
        for s in self.stacks:
            init_dense(self.params, f"{s}.embed", config.input_dim, config.hidden, rng)
            init_recurrent(self.params, s, config.hidden, config.hidden, config.layers, rng)
        for head, width in (("cls", 1), ("actor", config.actor_width), ("critic", 2)):
            init_dense(self.params, f"head.{head}", config.hidden, width, rng)
        self.critic_evaluations = 0

    def stack_for(self, head):
        return "trunk" if self.config.topology == "shared" else head

    def initial_state(self, batch):
        return {
            s: RecurrentState.zeros(batch, self.config.layers, self.config.hidden)
            for s in self.stacks
        }

    def _advance(self, stack, x, states, new_states):
        if stack not in new_states:
            p = self.params
            e = T.linear(x, p[f"{stack}.embed.W"], p[f"{stack}.embed.b"])
            top, new_states[stack] = recurrent_step(e, states[stack], p, stack)
            new_states[f"_top.{stack}"] = top
        return new_states[f"_top.{stack}"]

    def step(self, x, states, actor=True, critic=True):
        """One packet for a batch.

        Returns ``(outputs, new_states)``; outputs maps ``"cls"`` to (B,)
        logits and, when requested, ``"actor"`` to (B, k) raw outputs and
        ``"critic"`` to (B, 2) value estimates. Stacks that are not needed
        (e.g. the critic's own stack at deployment) are not evaluated and
        their state is carried over unchanged.
        """
        x = T.as_tensor(x)
        if x.shape[-1] != self.config.input_dim:
            raise ValueError(f"feature dimension {x.shape[-1]} != model input {self.config.input_dim}")
        p = self.params
        new_states = {}
        wanted = [("cls", True), ("actor", actor), ("critic", critic)]
        out = {}
        for head, on in wanted:
            if not on:
                continue
            top = self._advance(self.stack_for(head), x, states, new_states)
            y = T.linear(top, p[f"head.{head}.W"], p[f"head.{head}.b"])
            out[head] = T.getitem(y, (slice(None), 0)) if head == "cls" else y
        if critic:
            self.critic_evaluations += 1
        result = {s: new_states.get(s, states[s]) for s in self.stacks}
        return out, result

    def parameter_count(self):
        return self.params.count()
