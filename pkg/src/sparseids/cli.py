"""Command-line entry point: ``sparseids {synth,train,eval,steer,inspect}``.

Every command prints a one-line ``error kind=<kind> exit=<code> msg=<text>``
to stderr on failure and exits with the code listed in ``EXIT_CODES``.
A ``--config`` file holds flat ``key = value`` lines using the long flag
names (dashes or underscores); flags given on the command line win.
"""

import argparse
import csv
import os
import sys
from pathlib import Path

EXIT_CODES = {
    "usage": 2,
    "missing-file": 3,
    "data": 4,
    "checkpoint": 5,
    "topology": 6,
    "training": 7,
    "steering": 8,
    "internal": 1,
}


class CliError(Exception):
    def __init__(self, kind, msg):
        super().__init__(msg)
        self.kind = kind


def _int_or_none(v):
    return None if str(v).lower() in ("", "none") else int(v)


def _float_or_none(v):
    return None if str(v).lower() in ("", "none") else float(v)


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {v!r}")


def _alpha(v):
    if v == "uniform":
        return v
    try:
        a = float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number or 'uniform', got {v!r}") from None
    if a < 0:
        raise argparse.ArgumentTypeError("alpha must be >= 0")
    return a


def _actions(v):
    if v == "continuous":
        return ("continuous", 20)
    if v.startswith("discrete:"):
        try:
            k = int(v.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return ("discrete", k)
    raise argparse.ArgumentTypeError(f"actions must be 'continuous' or 'discrete:k', got {v!r}")


def _policy(v):
    v = v.replace("_", "-")
    if v not in ("rl", "random", "first-m", "relative-first-m", "every-ith"):
        raise argparse.ArgumentTypeError(f"unknown policy {v!r}")
    return v


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    p.add_argument("--threads", type=int, default=1, help="cap on worker/BLAS threads")
    p.add_argument("--config", default=None, help="flat key = value file; flags override it")


def _add_dataset(p, split=True):
    p.add_argument("--data", required=True, help="per-packet flow CSV")
    p.add_argument("--max-len", type=int, default=20, help="packets kept per flow")
    if split:
        p.add_argument("--split", type=float, default=0.667,
                       help="train fraction of the seeded flow split (1 = train on all, 0 = test on all)")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="sparseids", formatter_class=fmt,
                                     description="Adaptive packet sampling for flow-based intrusion detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", formatter_class=fmt, help="write a synthetic flow dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--flows", type=int, default=1000, help="number of flows")
    p.add_argument("--max-len", type=int, default=20, help="longest flow")
    p.add_argument("--min-len", type=int, default=1, help="shortest flow")
    p.add_argument("--attack-ratio", type=float, default=0.3, help="share of attack flows")
    p.add_argument("--signal-index", type=int, default=3, help="packet carrying the attack signal")
    p.add_argument("--full-length-share", type=float, default=0.6,
                   help="share of flows with exactly max-len packets")

    p = sub.add_parser("train", formatter_class=fmt, help="train a model")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--out", default="model.spid", help="checkpoint path")
    p.add_argument("--log-csv", default=None, help="training log CSV (default: <out>.log.csv)")
    p.add_argument("--epochs", type=int, default=8, help="passes over the training flows")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--alpha", type=_alpha, default=0.0, help="sparsity tradeoff, or 'uniform' for steering mode")
    p.add_argument("--beta", type=float, default=0.01, help="entropy weight")
    p.add_argument("--actions", type=_actions, default="continuous", help="continuous or discrete:k")
    p.add_argument("--topology", choices=("shared", "separate"), default="shared", help="network topology")
    p.add_argument("--batch", type=int, default=32, help="flows per update")
    p.add_argument("--hidden", type=int, default=128, help="LSTM width")
    p.add_argument("--layers", type=int, default=3, help="LSTM layers")
    p.add_argument("--clip-norm", type=_float_or_none, default=None, help="global gradient norm clip")
    p.add_argument("--log-every", type=int, default=100, help="flows between log records")
    p.add_argument("--tradeoff-max", type=float, default=1.0, help="upper end of the uniform alpha range")
    p.add_argument("--actor-warmup", type=int, default=0, help="flows before the actor starts learning")
    p.add_argument("--sampler", type=_policy, default="rl", help="training-time sampling policy")
    p.add_argument("--rate", type=float, default=1.0, help="baseline sampling rate")
    p.add_argument("--avg-len", type=_float_or_none, default=None,
                   help="first-m reference length (default: mean training flow length)")

    p = sub.add_parser("eval", formatter_class=fmt, help="evaluate a checkpoint in deployment mode")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint path")
    p.add_argument("--policy", type=_policy, default="rl", help="sampling policy")
    p.add_argument("--rate", type=float, default=1.0, help="baseline sampling rate")
    p.add_argument("--avg-len", type=_float_or_none, default=None,
                   help="first-m reference length (default: mean test flow length)")
    p.add_argument("--by-attack", type=_bool, nargs="?", const=True, default=False,
                   help="also write one histogram per attack type")
    p.add_argument("--tradeoff", type=_float_or_none, default=None,
                   help="tradeoff input for steering-mode checkpoints (default: training maximum)")
    p.add_argument("--metrics-out", default=None, help="key = value metrics file")
    p.add_argument("--histogram-dir", default=None, help="directory for histogram CSVs")
    p.add_argument("--expect-topology", choices=("shared", "separate"), default=None,
                   help="reject checkpoints of the other topology")

    p = sub.add_parser("steer", formatter_class=fmt, help="run the tradeoff steering loop")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint trained with --alpha uniform")
    p.add_argument("--target", type=float, required=True, help="minimum sparsity to keep")
    p.add_argument("--step", type=float, default=0.1, help="tradeoff decrement per window")
    p.add_argument("--window", type=_int_or_none, default=None,
                   help="flows per window (default: 1000 x training batch)")
    p.add_argument("--out", default="steering.csv", help="trace CSV path")

    p = sub.add_parser("inspect", formatter_class=fmt, help="describe a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint path")
    return parser


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise CliError("missing-file", f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("usage", f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv):
    """Parse ``argv``; a ``--config`` file supplies defaults that flags override."""
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    subs = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subs), None)
    if known.config is not None and command is not None:
        _apply_config(subs[command], command, read_config(known.config))
    return parser.parse_args(argv)


def _apply_config(sub, command, cfg):
    known = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    unknown = sorted(set(cfg) - set(known))
    if unknown:
        raise CliError("usage", f"unknown config keys for {command}: {', '.join(unknown)}")
    for key, raw in cfg.items():
        action = known[key]
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise CliError("usage", f"config key {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise CliError("usage", f"config key {key}: {value!r} not in {list(action.choices)}")
        sub.set_defaults(**{key: value})
        action.required = False


def _load_dataset(args):
    from .flow_data import load_flows_csv

    path = Path(args.data)
    if not path.is_file():
        raise CliError("missing-file", f"dataset not found: {path}")
    return load_flows_csv(path)


def _split(args, ds, part):
    from .flow_data import split_dataset

    if not 0.0 <= args.split <= 1.0:
        raise CliError("usage", "--split must lie in [0, 1]")
    if args.split in (0.0, 1.0):
        keep = (args.split == 1.0) == (part == "train")
        if not keep:
            raise CliError("data", f"--split {args.split:g} leaves no {part} flows")
        return ds
    train, test = split_dataset(ds, args.split, args.seed)
    return train if part == "train" else test


def _load_checkpoint(path, expect_topology=None):
    from .checkpoint import load_checkpoint

    path = Path(path)
    if not path.is_file():
        raise CliError("missing-file", f"checkpoint not found: {path}")
    return load_checkpoint(path, expect_topology)


def _write(path, text):
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_synth(args, out):
    from .flow_data import SyntheticSpec, generate_synthetic, save_flows_csv

    spec = SyntheticSpec(
        n_flows=args.flows, max_len=args.max_len, min_len=args.min_len, attack_ratio=args.attack_ratio,
        signal_index=args.signal_index, full_length_share=args.full_length_share,
    )
    ds = generate_synthetic(spec, args.seed)
    save_flows_csv(ds, args.out)
    print(f"wrote {len(ds)} flows ({ds.n_packets} packets) to {args.out}", file=out)


LOG_COLUMNS = ("flows", "epoch", "accuracy", "sparsity", "loss_classifier", "loss_critic", "loss_actor")


def cmd_train(args, out):
    from .checkpoint import save_checkpoint
    from .trainer import TrainConfig, train

    space, k = args.actions
    config = TrainConfig(
        epochs=args.epochs, lr=args.lr, alpha=args.alpha, beta=args.beta, action_space=space,
        n_actions=k, topology=args.topology, batch_size=args.batch, seed=args.seed,
        max_len=args.max_len, hidden=args.hidden, layers=args.layers, sampler=args.sampler.replace("-", "_"),
        rate=args.rate, avg_len=args.avg_len, clip_norm=args.clip_norm, log_every=args.log_every,
        tradeoff_max=args.tradeoff_max, actor_warmup=args.actor_warmup,
    )
    ds = _split(args, _load_dataset(args), "train")
    ckpt, records = train(config, ds)
    save_checkpoint(ckpt, args.out)
    log_path = args.log_csv or f"{args.out}.log.csv"
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in records:
            w.writerow([r["flows"], r["epoch"]] + [repr(float(r[c])) for c in LOG_COLUMNS[2:]])
    last = records[-1]
    print(f"trained on {len(ds)} flows: final accuracy {last['accuracy']:.4f} "
          f"sparsity {last['sparsity']:.4f}", file=out)
    print(f"checkpoint {args.out}, log {log_path}", file=out)


def cmd_eval(args, out):
    from .baselines import SamplingPolicy
    from .evaluator import ALL_TYPES, evaluate, per_attack_histogram

    ckpt = _load_checkpoint(args.checkpoint, args.expect_topology)
    ckpt_len = int(ckpt.train_config.get("max_len", 20))
    if args.max_len != ckpt_len:
        raise CliError("usage", f"--max-len {args.max_len} differs from the checkpoint's {ckpt_len}")
    policy = SamplingPolicy(args.policy, args.rate if args.policy != "rl" else 1.0, args.avg_len, args.seed)
    test = _split(args, _load_dataset(args), "test")
    report = evaluate(ckpt, test, policy, tradeoff=args.tradeoff)
    out.write(report.to_text())
    if args.metrics_out:
        _write(args.metrics_out, report.to_keyvalue())
    if args.histogram_dir:
        types = [ALL_TYPES]
        if args.by_attack:
            types += sorted(report.per_attack)
        for t in types:
            hist = per_attack_histogram(ckpt, test, t, policy, tradeoff=args.tradeoff)
            _write(Path(args.histogram_dir) / f"histogram_{t}.csv", hist.to_csv())


def cmd_steer(args, out):
    from .steering import CheckpointRunner, run_steered

    ckpt = _load_checkpoint(args.checkpoint)
    runner = CheckpointRunner(ckpt)
    window = args.window or 1000 * int(ckpt.train_config.get("batch_size", 32))
    stream = _split(args, _load_dataset(args), "test")
    result = run_steered(runner, stream, args.target, args.step, window, runner.tradeoff_max)
    _write(args.out, result.to_csv())
    print(f"{len(result.rows)} windows, final tradeoff {result.final_tradeoff}, "
          f"stopped: {result.reason}; trace {args.out}", file=out)


def cmd_inspect(args, out):
    ckpt = _load_checkpoint(args.checkpoint)
    mc = ckpt.model_config
    print(f"format version  {ckpt.version}", file=out)
    print(f"topology        {mc['topology']}", file=out)
    print(f"action space    {mc['action_space']}"
          + (f" (k={mc['n_actions']})" if mc["action_space"] == "discrete" else ""), file=out)
    print(f"input width     {mc['input_dim']}", file=out)
    print(f"hidden x layers {mc['hidden']} x {mc['layers']}", file=out)
    print(f"parameters      {ckpt.parameter_count()}", file=out)
    for name, arr in ckpt.params.items():
        print(f"  {name:<28}{'x'.join(map(str, arr.shape)):>12}{arr.size:>10}", file=out)
    print("training config", file=out)
    for k, v in sorted(ckpt.train_config.items()):
        print(f"  {k} = {v}", file=out)


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "steer": cmd_steer,
    "inspect": cmd_inspect,
}


def _classify(exc):
    from .checkpoint import CheckpointError
    from .evaluator import EvaluationError
    from .flow_data import DataError
    from .steering import SteeringError
    from .trainer import TrainingError

    if isinstance(exc, CliError):
        return exc.kind
    if isinstance(exc, CheckpointError):
        return "topology" if "topology" in str(exc) else "checkpoint"
    if isinstance(exc, SteeringError):
        return "steering"
    if isinstance(exc, TrainingError):
        return "training"
    if isinstance(exc, FileNotFoundError):
        return "missing-file"
    if isinstance(exc, (DataError, EvaluationError)):
        return "data"
    if isinstance(exc, ValueError):
        return "usage"
    return "internal"


def _fail(kind, msg, err):
    one_line = " ".join(str(msg).split())
    print(f"error kind={kind} exit={EXIT_CODES[kind]} msg={one_line}", file=err)
    return EXIT_CODES[kind]


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except CliError as exc:
        return _fail(exc.kind, exc, err)
    except SystemExit as exc:
        return exc.code
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(max(1, args.threads)))
    try:
        COMMANDS[args.command](args, out)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one parseable line
        return _fail(_classify(exc), exc, err)
    return 0


if __name__ == "__main__":
    sys.exit(main())
