import numpy as np
import pytest

from sparseids.flow_data import Flow, FlowDataset, PacketRecord, SyntheticSpec, generate_synthetic


def make_flow(fid="a", n=3, label=0, lengths=None, attack_type=None, protocol=6):
    lengths = lengths or [100 + 10 * i for i in range(n)]
    packets = tuple(
        PacketRecord(0 if i == 0 else 50 * i, int(length), i % 2, (0, int(i == 0), 0, 0, int(i > 0), 0, 0, 0))
        for i, length in enumerate(lengths)
    )
    return Flow(fid, 40000, 443, protocol, packets, label,
                attack_type or ("Normal" if label == 0 else "SignalAttack"))


@pytest.fixture
def small_synth():
    return generate_synthetic(SyntheticSpec(n_flows=60, attack_ratio=0.4), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_ds():
    return FlowDataset([make_flow("a", 3, 0), make_flow("b", 5, 1), make_flow("c", 1, 0)])


def _tiny_train(**extra):
    from sparseids.trainer import TrainConfig, train

    ds = generate_synthetic(SyntheticSpec(n_flows=40, attack_ratio=0.5, max_len=10), seed=9)
    cfg = TrainConfig(epochs=1, max_len=10, hidden=6, layers=1, batch_size=8, log_every=20, **extra)
    return train(cfg, ds)[0], ds


@pytest.fixture(scope="session")
def tiny_ckpt():
    return _tiny_train()


@pytest.fixture(scope="session")
def tiny_steer_ckpt():
    return _tiny_train(alpha="uniform")


# --- acceptance summary ------------------------------------------------------
# Tests named ``test_criterion_<k>_...`` in test_acceptance.py roll up into one
# PASS/FAIL line per criterion at the end of the run.

_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    k = int(name.split("_")[2])
    ok = _criteria.setdefault(k, True)
    if report.failed or hasattr(report, "wasxfail") or report.skipped:
        _criteria[k] = False
    else:
        _criteria[k] = ok


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if _criteria[k] else 'FAIL'}")
