"""Flow datasets: CSV ingestion, truncation, splitting, normalization,
per-packet feature vectors and a synthetic generator.

Raw per-packet columns (in order) are the flow-constant ports and protocol,
then length, inter-arrival time, direction and the eight TCP flags. The
model input appends the scaled skipped-packet count and, for steering
models, the flow's tradeoff value.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FLAG_NAMES = ("fin", "syn", "rst", "psh", "ack", "urg", "ece", "cwr")
RAW_FEATURES = (
    "src_port",
    "dst_port",
    "protocol",
    "length",
    "iat_us",
    "direction",
) + tuple(f"flag_{f}" for f in FLAG_NAMES)
N_RAW = len(RAW_FEATURES)

CSV_COLUMNS = (
    "flow_id",
    "pkt_idx",
    "src_port",
    "dst_port",
    "protocol",
    "length",
    "iat_us",
    "direction",
) + tuple(f"flag_{f}" for f in FLAG_NAMES) + ("label", "attack_type")

BENIGN = "Normal"


class DataError(ValueError):
    """Malformed or inconsistent flow data."""


def feature_dim(steering=False):
    """Model input width: raw columns + skipped count (+ tradeoff)."""
    return N_RAW + 1 + (1 if steering else 0)


@dataclass(frozen=True)
class PacketRecord:
    iat_us: int
    length_bytes: int
    direction: int
    tcp_flags: tuple = (0,) * 8

    def __post_init__(self):
        if self.iat_us < 0 or self.length_bytes < 0:
            raise DataError("iat_us and length_bytes must be non-negative")
        if self.direction not in (0, 1):
            raise DataError(f"direction must be 0 or 1, got {self.direction}")
        if len(self.tcp_flags) != 8 or any(f not in (0, 1) for f in self.tcp_flags):
            raise DataError("tcp_flags must be eight 0/1 values")


@dataclass(frozen=True)
class Flow:
    flow_id: str
    src_port: int
    dst_port: int
    protocol_id: int
    packets: tuple
    label: int
    attack_type: str = BENIGN

    def __post_init__(self):
        if not self.packets:
            raise DataError(f"flow {self.flow_id!r} has no packets")
        if self.label not in (0, 1):
            raise DataError(f"flow {self.flow_id!r}: label must be 0 or 1")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise DataError(f"flow {self.flow_id!r}: port {port} out of range")
        if self.packets[0].iat_us != 0:
            raise DataError(f"flow {self.flow_id!r}: first packet must have iat_us = 0")

    def __len__(self):
        return len(self.packets)

    def raw_matrix(self):
        """(N, 14) float array of raw per-packet features."""
        out = np.empty((len(self.packets), N_RAW))
        out[:, 0] = self.src_port
        out[:, 1] = self.dst_port
        out[:, 2] = self.protocol_id
        for i, p in enumerate(self.packets):
            out[i, 3] = p.length_bytes
            out[i, 4] = p.iat_us
            out[i, 5] = p.direction
            out[i, 6:] = p.tcp_flags
        return out


@dataclass
class PackedFlows:
    """Padded array view of a dataset, used by the batched rollout."""

    raw: np.ndarray  # (F, L, 14)
    lengths: np.ndarray  # (F,)
    labels: np.ndarray  # (F,)
    flow_ids: list
    attack_types: list


class FlowDataset:
    """Immutable ordered collection of flows."""

    def __init__(self, flows):
        self.flows = tuple(flows)
        self._packed = None

    def __len__(self):
        return len(self.flows)

    def __iter__(self):
        return iter(self.flows)

    def __getitem__(self, i):
        return self.flows[i]

    def __eq__(self, other):
        return isinstance(other, FlowDataset) and self.flows == other.flows

    def subset(self, indices):
        return FlowDataset(self.flows[i] for i in indices)

    @property
    def n_packets(self):
        return sum(len(f) for f in self.flows)

    @property
    def max_flow_length(self):
        return max((len(f) for f in self.flows), default=0)

    def attack_type_counts(self):
        counts = {}
        for f in self.flows:
            counts[f.attack_type] = counts.get(f.attack_type, 0) + 1
        return counts

    def label_counts(self):
        n_attack = sum(f.label for f in self.flows)
        return {0: len(self.flows) - n_attack, 1: n_attack}

    def mean_length(self):
        return self.n_packets / len(self.flows) if self.flows else 0.0

    def packed(self):
        if self._packed is None:
            L = max(self.max_flow_length, 1)
            raw = np.zeros((len(self.flows), L, N_RAW))
            for k, f in enumerate(self.flows):
                raw[k, : len(f)] = f.raw_matrix()
            self._packed = PackedFlows(
                raw=raw,
                lengths=np.array([len(f) for f in self.flows], dtype=np.int64),
                labels=np.array([f.label for f in self.flows], dtype=np.float64),
                flow_ids=[f.flow_id for f in self.flows],
                attack_types=[f.attack_type for f in self.flows],
            )
        return self._packed


# --- CSV -------------------------------------------------------------------


def _parse_int(value, col, lineno):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DataError(f"line {lineno}: column {col!r} is not an integer: {value!r}") from None


def load_flows_csv(path, schema=None):
    """Read a per-packet CSV into a :class:`FlowDataset`.

    ``schema`` maps canonical column names (see ``CSV_COLUMNS``) to the
    header names actually used in the file; unmapped columns keep their
    canonical name. Flows keep the order of their first row.
    """
    schema = dict(schema or {})
    unknown = set(schema) - set(CSV_COLUMNS)
    if unknown:
        raise DataError(f"schema maps unknown columns: {sorted(unknown)}")
    col = {c: schema.get(c, c) for c in CSV_COLUMNS}
    path = Path(path)
    groups = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise DataError(f"{path}: empty file")
        missing = [c for c in col.values() if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: header is missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise DataError(f"line {lineno}: wrong number of fields")
            ints = {}
            for c in CSV_COLUMNS:
                if c in ("flow_id", "attack_type"):
                    continue
                ints[c] = _parse_int(row[col[c]], col[c], lineno)
            if ints["label"] not in (0, 1):
                raise DataError(f"line {lineno}: label must be 0 or 1")
            if ints["iat_us"] < 0 or ints["length"] < 0:
                raise DataError(f"line {lineno}: negative length or iat_us")
            if ints["direction"] not in (0, 1):
                raise DataError(f"line {lineno}: direction must be 0 or 1")
            flags = tuple(ints[f"flag_{f}"] for f in FLAG_NAMES)
            if any(v not in (0, 1) for v in flags):
                raise DataError(f"line {lineno}: tcp flags must be 0 or 1")
            fid = row[col["flow_id"]]
            groups.setdefault(fid, []).append((lineno, ints, flags, row[col["attack_type"]]))
    if not groups:
        raise DataError(f"{path}: no data rows")

    flows = []
    for fid, rows in groups.items():
        rows.sort(key=lambda r: r[1]["pkt_idx"])
        first_line, first, _, attack_type = rows[0]
        seen_idx = set()
        packets = []
        for lineno, ints, flags, atype in rows:
            if ints["pkt_idx"] in seen_idx:
                raise DataError(f"line {lineno}: duplicate pkt_idx {ints['pkt_idx']} in flow {fid!r}")
            seen_idx.add(ints["pkt_idx"])
            if ints["label"] != first["label"]:
                raise DataError(f"line {lineno}: flow {fid!r} mixes labels 0 and 1")
            for c in ("src_port", "dst_port", "protocol"):
                if ints[c] != first[c]:
                    raise DataError(f"line {lineno}: {c} changes within flow {fid!r}")
            if atype != attack_type:
                raise DataError(f"line {lineno}: attack_type changes within flow {fid!r}")
            packets.append(PacketRecord(ints["iat_us"], ints["length"], ints["direction"], flags))
        try:
            flows.append(
                Flow(fid, first["src_port"], first["dst_port"], first["protocol"],
                     tuple(packets), first["label"], attack_type)
            )
        except DataError as exc:
            raise DataError(f"line {first_line}: {exc}") from None
    return FlowDataset(flows)


def save_flows_csv(ds, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for f in ds:
            for i, p in enumerate(f.packets):
                w.writerow(
                    [f.flow_id, i, f.src_port, f.dst_port, f.protocol_id,
                     p.length_bytes, p.iat_us, p.direction, *p.tcp_flags,
                     f.label, f.attack_type]
                )


# --- transforms ------------------------------------------------------------


def truncate_flows(ds, max_len):
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out = []
    for f in ds:
        if len(f) > max_len:
            f = Flow(f.flow_id, f.src_port, f.dst_port, f.protocol_id,
                     f.packets[:max_len], f.label, f.attack_type)
        out.append(f)
    return FlowDataset(out)


def round_half_up(x):
    """Round half away from zero (for non-negative x)."""
    return int(math.floor(x + 0.5))


def split_dataset(ds, train_fraction, seed):
    """Seeded flow-level partition into (train, test)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(ds)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    n_train = round_half_up(n * train_fraction)
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, raw):
        return (np.asarray(raw, dtype=np.float64) - self.mean) / self.std

    def invert(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


def compute_normalization(train):
    """Per-column z-score statistics over every packet of every flow.

    Population standard deviation; zero-variance columns get std 1.
    """
    if len(train) == 0:
        raise DataError("cannot normalize an empty dataset")
    rows = np.concatenate([f.raw_matrix() for f in train], axis=0)
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std[std < 1e-12] = 1.0
    return NormalizationStats(mean, std)


def build_feature_vector(flow, index, skipped, stats, tradeoff=None, max_len=20):
    """Model input for packet ``index`` of ``flow``."""
    if not 0 <= index < len(flow):
        raise IndexError(f"packet index {index} outside flow of length {len(flow)}")
    if skipped < 0:
        raise ValueError("skipped must be >= 0")
    raw = flow.raw_matrix()[index]
    extra = [min(skipped, max_len) / max_len]
    if tradeoff is not None:
        extra.append(float(tradeoff))
    return np.concatenate([stats.apply(raw), extra])


def build_feature_batch(raw_rows, skipped, stats, max_len, tradeoff=None):
    """Vectorized :func:`build_feature_vector` for (B, 14) raw rows."""
    B = raw_rows.shape[0]
    width = N_RAW + 1 + (0 if tradeoff is None else 1)
    out = np.empty((B, width))
    out[:, :N_RAW] = (raw_rows - stats.mean) / stats.std
    out[:, N_RAW] = np.minimum(skipped, max_len) / max_len
    if tradeoff is not None:
        out[:, N_RAW + 1] = tradeoff
    return out


# --- synthetic data ---------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Generator config.

    Lengths: with probability ``full_length_share`` a flow has exactly
    ``max_len`` packets (the pile-up truncation produces), otherwise uniform
    on [min_len, max_len]. A flow drawn as an attack but too short to reach
    packet ``signal_index`` is forced benign. Attack flows differ from
    benign ones only from packet ``signal_index`` on: those packets draw
    their length from ``signal_length_range`` instead of
    ``benign_length_range``. When the two ranges overlap, a single signal
    packet can look benign, so consuming more of them pays off.
    """

    n_flows: int = 1000
    max_len: int = 20
    min_len: int = 1
    attack_ratio: float = 0.5
    signal_index: int = 3
    full_length_share: float = 0.6
    benign_length_range: tuple = (40, 1000)
    signal_length_range: tuple = (1200, 1500)
    attack_types: tuple = ("SignalAttack",)

    def validate(self):
        if self.n_flows < 1:
            raise ValueError("n_flows must be >= 1")
        if not 0.0 < self.attack_ratio < 1.0:
            raise ValueError("attack_ratio must lie in (0, 1)")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if not 0 <= self.signal_index < self.max_len:
            raise ValueError("signal_index must be < max_len")
        if not 0.0 <= self.full_length_share <= 1.0:
            raise ValueError("full_length_share must lie in [0, 1]")
        lo, hi = self.benign_length_range
        slo, shi = self.signal_length_range
        if not (0 <= lo <= hi and lo <= slo <= shi and shi > hi):
            raise ValueError("signal lengths must be a range reaching above the benign lengths")
        if not self.attack_types:
            raise ValueError("need at least one attack type")

    @property
    def separable(self):
        return self.signal_length_range[0] > self.benign_length_range[1]

    @property
    def oracle_threshold(self):
        """Length threshold of the oracle rule (exact when ``separable``)."""
        return (self.benign_length_range[1] + self.signal_length_range[0]) / 2.0


def _draw_length(spec, rng):
    if rng.random() < spec.full_length_share:
        return spec.max_len
    return int(rng.integers(spec.min_len, spec.max_len + 1))


def generate_synthetic(spec, seed):
    spec.validate()
    rng = np.random.default_rng(seed)
    width = len(str(spec.n_flows - 1))
    flows = []
    for k in range(spec.n_flows):
        label = int(rng.random() < spec.attack_ratio)
        n = _draw_length(spec, rng)
        if n <= spec.signal_index:
            label = 0
        protocol = 6 if rng.random() < 0.8 else 17
        src_port = int(rng.integers(1024, 65536))
        dst_port = int(rng.choice([22, 53, 80, 443, 8080]))
        packets = []
        for i in range(n):
            if label and i >= spec.signal_index:
                length = int(rng.integers(spec.signal_length_range[0], spec.signal_length_range[1] + 1))
            else:
                length = int(rng.integers(spec.benign_length_range[0], spec.benign_length_range[1] + 1))
            iat = 0 if i == 0 else int(rng.integers(0, 100_000))
            direction = 0 if i == 0 else int(rng.integers(0, 2))
            if protocol == 6:
                psh = int(rng.integers(0, 2))
                flags = (0, int(i == 0), 0, psh, int(i > 0), 0, 0, 0)
            else:
                flags = (0,) * 8
            packets.append(PacketRecord(iat, length, direction, flags))
        attack_type = BENIGN
        if label:
            attack_type = spec.attack_types[int(rng.integers(0, len(spec.attack_types)))]
        flows.append(
            Flow(f"f{k:0{width}d}", src_port, dst_port, protocol, tuple(packets), label, attack_type)
        )
    return FlowDataset(flows)
