"""Binary checkpoint format.

Layout (all integers little-endian u32, floats little-endian f64)::

    b"SPID" | version | config_len | config JSON (utf-8)
    | n_stats | mean[n_stats] | std[n_stats]
    | n_params | { name_len | name | ndim | dims[ndim] | data[prod(dims)] }*
    | crc32 of everything before it
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flow_data import NormalizationStats
from .model import ModelConfig, SparseIDSNet

MAGIC = b"SPID"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    train_config: dict
    model_config: dict
    params: dict
    stats: NormalizationStats
    version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def topology(self):
        return self.model_config["topology"]

    @property
    def steering(self):
        return self.train_config.get("alpha") == "uniform"

    def build_net(self):
        net = SparseIDSNet(ModelConfig(**self.model_config))
        net.params.load_arrays(self.params)
        return net

    def parameter_count(self):
        return int(sum(a.size for a in self.params.values()))


def _u32(n):
    return struct.pack("<I", n)


def to_bytes(ckpt):
    parts = [MAGIC, _u32(ckpt.version)]
    cfg = json.dumps(
        {"train": ckpt.train_config, "model": ckpt.model_config, "extra": ckpt.extra},
        sort_keys=True,
    ).encode()
    parts += [_u32(len(cfg)), cfg]
    mean = np.asarray(ckpt.stats.mean, dtype="<f8")
    std = np.asarray(ckpt.stats.std, dtype="<f8")
    parts += [_u32(mean.size), mean.tobytes(), std.tobytes()]
    parts.append(_u32(len(ckpt.params)))
    for name, arr in ckpt.params.items():
        arr = np.asarray(arr, dtype="<f8")
        key = name.encode()
        parts += [_u32(len(key)), key, _u32(arr.ndim)]
        parts += [_u32(d) for d in arr.shape]
        parts.append(np.ascontiguousarray(arr).tobytes())
    body = b"".join(parts)
    return body + _u32(zlib.crc32(body))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.off = 0

    def take(self, n, what):
        if self.off + n > len(self.buf):
            raise CheckpointError(
                f"corrupt checkpoint: unexpected end of file at offset {self.off} while reading {what}"
            )
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def f64(self, n, what):
        return np.frombuffer(self.take(8 * n, what), dtype="<f8").astype(np.float64)


def from_bytes(buf, expect_topology=None):
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("corrupt checkpoint: bad magic at offset 0 (not a SPID file)")
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    cfg_off = r.off
    try:
        cfg = json.loads(r.take(r.u32("config length"), "config").decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"corrupt checkpoint: unreadable config block at offset {cfg_off}") from None
    n_stats = r.u32("stats size")
    mean = r.f64(n_stats, "stats means")
    std = r.f64(n_stats, "stats stds")
    params = {}
    for _ in range(r.u32("parameter count")):
        name = r.take(r.u32("name length"), "parameter name").decode()
        shape = tuple(r.u32("dimension") for _ in range(r.u32("ndim")))
        params[name] = r.f64(int(np.prod(shape, dtype=np.int64)), f"parameter {name}").reshape(shape)
    end = r.off
    crc = r.u32("checksum")
    if r.off != len(buf):
        raise CheckpointError(f"corrupt checkpoint: trailing bytes at offset {r.off}")
    if zlib.crc32(buf[:end]) != crc:
        raise CheckpointError(f"corrupt checkpoint: checksum mismatch (checksum at offset {end})")
    ckpt = Checkpoint(cfg["train"], cfg["model"], params, NormalizationStats(mean, std),
                      version, cfg.get("extra", {}))
    if expect_topology is not None and ckpt.topology != expect_topology:
        raise CheckpointError(
            f"checkpoint has {ckpt.topology} topology, expected {expect_topology}"
        )
    return ckpt


def save_checkpoint(ckpt, path):
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path, expect_topology=None):
    return from_bytes(Path(path).read_bytes(), expect_topology)
