import numpy as np

from conftest import make_flow
from sparseids.baselines import SamplingPolicy
from sparseids.flow_data import FlowDataset, compute_normalization, feature_dim
from sparseids.model import ModelConfig, SparseIDSNet
from sparseids.rl_sampler import DEPLOYMENT, TRAINING
from sparseids.rollout import rollout, to_traces


def setup(lengths, topology="shared"):
    ds = FlowDataset([make_flow(f"f{i}", n, label=i % 2) for i, n in enumerate(lengths)])
    net = SparseIDSNet(ModelConfig(feature_dim(), hidden=4, layers=1, topology=topology))
    return ds, net, compute_normalization(ds)


def test_single_packet_flow():
    ds, net, stats = setup([1])
    res = rollout(net, ds.packed(), [0], stats, 20, SamplingPolicy("rl"), TRAINING, np.random.default_rng(0))
    tr = to_traces(res, ds.packed(), [0])[0]
    assert tr.indices == [0] and tr.reward_defined == [False]


def test_always_one_consumes_everything():
    ds, net, stats = setup([6, 3])
    res = rollout(net, ds.packed(), [0, 1], stats, 20, SamplingPolicy("rl"), TRAINING,
                  np.random.default_rng(0), forced_actions=np.ones((6, 2), dtype=np.int64))
    assert list(res.counts) == [6, 3]


def test_jump_past_end_takes_terminal_path():
    ds, net, stats = setup([7])
    res = rollout(net, ds.packed(), [0], stats, 20, SamplingPolicy("rl"), TRAINING,
                  np.random.default_rng(0), forced_actions=np.array([[7]]))
    tr = to_traces(res, ds.packed(), [0])[0]
    assert tr.indices == [0]
    assert tr.r_sp[0] == 1.0  # lands exactly on N: no overshoot


def test_deployment_never_runs_the_critic():
    for topology in ("shared", "separate"):
        ds, net, stats = setup([9, 4, 12], topology)
        rollout(net, ds.packed(), [0, 1, 2], stats, 20, SamplingPolicy("rl"), DEPLOYMENT, None)
        assert net.critic_evaluations == 0


def test_shared_topology_has_fewer_parameters():
    shared = SparseIDSNet(ModelConfig(feature_dim(), hidden=8, layers=3, topology="shared"))
    separate = SparseIDSNet(ModelConfig(feature_dim(), hidden=8, layers=3, topology="separate"))
    assert shared.parameter_count() < separate.parameter_count()
