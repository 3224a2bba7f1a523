"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 32] [--hidden 128] [--repeat 200]

Also checks that both backends agree on the same inputs.
"""

import argparse
import timeit

import numpy as np

from sparseids.kernels import available_backends, get_backend


def make_inputs(batch, hidden, flows, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(batch, 4 * hidden))
    c_prev = rng.normal(size=(batch, hidden))
    dhc = rng.normal(size=(batch, 2 * hidden))

    lengths = rng.integers(1, 21, size=flows)
    T = int(lengths.max())
    positions = np.repeat(lengths[:, None], T, axis=1).astype(np.int64)
    counts = np.zeros(flows, dtype=np.int64)
    last_actions = np.zeros(flows, dtype=np.int64)
    for b, n in enumerate(lengths):
        pos, k = 0, 0
        while pos < n:
            positions[b, k] = pos
            a = int(rng.integers(1, 5))
            last_actions[b] = a
            pos += a
            k += 1
        counts[b] = k
    conf = rng.random((flows, T))
    labels = rng.integers(0, 2, size=flows).astype(np.float64)
    return (z, c_prev, dhc), (positions, conf, counts, lengths.astype(np.int64), labels, last_actions)


def bench(backend, lstm_in, reward_in, repeat):
    k = get_backend(backend)
    z, c_prev, dhc = lstm_in
    acts, _, tanh_c = k.lstm_forward(z, c_prev)
    cases = {
        "lstm_forward": lambda: k.lstm_forward(z, c_prev),
        "lstm_backward": lambda: k.lstm_backward(acts, c_prev, tanh_c, dhc),
        "stream_rewards": lambda: k.stream_rewards(*reward_in),
    }
    return {name: min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat for name, fn in cases.items()}


def check_agreement(lstm_in, reward_in):
    py, cy = get_backend("python"), get_backend("compiled")
    z, c_prev, dhc = lstm_in
    fa, fb = py.lstm_forward(z, c_prev), cy.lstm_forward(z, c_prev)
    worst = max(float(np.max(np.abs(a - b))) for a, b in zip(fa, fb))
    ba = py.lstm_backward(fa[0], c_prev, fa[2], dhc)
    bb = cy.lstm_backward(fa[0], c_prev, fa[2], dhc)
    worst = max([worst] + [float(np.max(np.abs(a - b))) for a, b in zip(ba, bb)])
    ra, rb = py.stream_rewards(*reward_in), cy.stream_rewards(*reward_in)
    worst = max([worst] + [float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)))) for a, b in zip(ra, rb)])
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--flows", type=int, default=256, help="flows per reward call")
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    lstm_in, reward_in = make_inputs(args.batch, args.hidden, args.flows, args.seed)
    backends = available_backends()
    results = {b: bench(b, lstm_in, reward_in, args.repeat) for b in backends}

    print(f"batch={args.batch} hidden={args.hidden} flows={args.flows} repeat={args.repeat}")
    header = f"{'kernel':<16}" + "".join(f"{b + ' (us)':>16}" for b in backends)
    if "compiled" in results:
        header += f"{'speedup':>10}"
    print(header)
    for name in results["python"]:
        row = f"{name:<16}" + "".join(f"{results[b][name] * 1e6:>16.1f}" for b in backends)
        if "compiled" in results:
            row += f"{results['python'][name] / results['compiled'][name]:>9.1f}x"
        print(row)
    if "compiled" in results:
        print(f"max abs difference between backends: {check_agreement(lstm_in, reward_in):.3e}")
    else:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
