"""Time the message-passing kernels: compiled vs plain-Python path.

Both variants run in one process (they are the same function, one wrapped
by the JIT), so this also cross-checks that the two backends produce the
same numbers.  Usage:

    python benchmarks/bench_kernels.py [--n 10000] [--c 8] [--sweeps 20]
"""

import argparse
import time

import numpy as np

from annet import _kernels
from annet.bp import init_messages
from annet.synth import generate_sbm


def build_case(n: int, c: float, seed: int = 0):
    g, _ = generate_sbm(n, 2, c * 1.5, c * 0.5, seed)
    rng = np.random.default_rng(seed)
    prior = rng.dirichlet(np.ones(2), size=n)
    theta = np.array([[3.0, 1.0], [1.0, 3.0]]) / (2 * g.m)
    return g, prior, theta


def run_sweeps(sweep_fn, g, prior, theta, sweeps: int):
    msgs = init_messages(g, prior, seed=1, theta=theta)
    kappa = g.degrees.astype(np.float64) @ msgs.belief
    k = theta.shape[0]
    rows = int(g.degrees.max()) + 1
    work = [np.empty((rows, k)) for _ in range(3)]
    start = time.perf_counter()
    for _ in range(sweeps):
        sweep_fn(g.indptr, g.indices, g.reverse_slot, prior, theta,
                 msgs.msg, msgs.belief, kappa, *work)
    elapsed = time.perf_counter() - start
    return elapsed, msgs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--c", type=float, default=8.0)
    ap.add_argument("--sweeps", type=int, default=20)
    args = ap.parse_args()

    g, prior, theta = build_case(args.n, args.c)
    print(f"graph: n={g.n} m={g.m}, {args.sweeps} sweeps, k=2")

    t_py, msgs_py = run_sweeps(_kernels._sweep_py, g, prior, theta, args.sweeps)
    print(f"numpy/python path : {t_py:8.3f} s  ({t_py / args.sweeps * 1e3:8.2f} ms/sweep)")

    if _kernels.numba is None:
        print("numba not installed; compiled path skipped")
        return

    # warm up the JIT outside the timed region
    run_sweeps(_kernels._sweep_nb, g, prior, theta, 1)
    t_nb, msgs_nb = run_sweeps(_kernels._sweep_nb, g, prior, theta, args.sweeps)
    print(f"numba path        : {t_nb:8.3f} s  ({t_nb / args.sweeps * 1e3:8.2f} ms/sweep)")
    print(f"speedup           : {t_py / t_nb:8.1f}x")

    drift = np.abs(msgs_py.msg - msgs_nb.msg).max()
    print(f"max message difference between paths: {drift:.3e}")
    assert drift < 1e-9, "backend paths diverged"


if __name__ == "__main__":
    main()
