import struct

import numpy as np
import pytest

from sparseids.checkpoint import CheckpointError, from_bytes, load_checkpoint, save_checkpoint, to_bytes


def test_round_trip_is_bitwise(tmp_path, tiny_ckpt):
    ckpt, _ = tiny_ckpt
    p = tmp_path / "m.spid"
    save_checkpoint(ckpt, p)
    back = load_checkpoint(p)
    assert set(back.params) == set(ckpt.params)
    for k in ckpt.params:
        assert back.params[k].tobytes() == np.asarray(ckpt.params[k]).tobytes()
    assert back.stats.mean.tobytes() == ckpt.stats.mean.tobytes()
    assert back.train_config == ckpt.train_config and back.model_config == ckpt.model_config
    assert to_bytes(back) == p.read_bytes()


def test_truncated_file_rejected(tiny_ckpt):
    buf = to_bytes(tiny_ckpt[0])
    for cut in (3, 10, len(buf) // 2, len(buf) - 1):
        with pytest.raises(CheckpointError, match="corrupt"):
            from_bytes(buf[:cut])


def test_flipped_byte_fails_checksum(tiny_ckpt):
    buf = bytearray(to_bytes(tiny_ckpt[0]))
    buf[-20] ^= 0xFF
    with pytest.raises(CheckpointError, match="checksum"):
        from_bytes(bytes(buf))


def test_bad_magic_and_version(tiny_ckpt):
    buf = to_bytes(tiny_ckpt[0])
    with pytest.raises(CheckpointError, match="magic"):
        from_bytes(b"NOPE" + buf[4:])
    with pytest.raises(CheckpointError, match="version 7"):
        from_bytes(buf[:4] + struct.pack("<I", 7) + buf[8:])


def test_topology_guard(tiny_ckpt):
    buf = to_bytes(tiny_ckpt[0])
    assert from_bytes(buf, expect_topology="shared").topology == "shared"
    with pytest.raises(CheckpointError, match="topology"):
        from_bytes(buf, expect_topology="separate")


def test_built_net_reproduces_parameters(tiny_ckpt):
    ckpt = tiny_ckpt[0]
    net = ckpt.build_net()
    assert net.parameter_count() == ckpt.parameter_count()
