"""Planted-partition generators and the two standard benchmark protocols.

Graphs come from the classic stochastic block model with equal groups;
metadata are planted to agree with the ground truth at a controlled
match rate.  Benchmarks derive every cell's RNG stream from the master
seed and the cell index, so results reproduce bit-exact and cells can
run concurrently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .em import FitConfig, fit
from .graph import Graph, MetadataColumn, constant_column, discrete_column, from_edges
from .metrics import fraction_correct


@dataclass(frozen=True)
class PlantedInstance:
    graph: Graph
    truth: np.ndarray
    metadata: MetadataColumn
    n: int
    k: int
    c_in: float
    c_out: float
    match_rate: float
    seed: int


def detectability_threshold(c_in: float, c_out: float) -> float:
    """Critical value of c_in - c_out below which structure alone is
    undetectable: sqrt(2 (c_in + c_out))."""
    if c_in + c_out < 0:
        raise ValueError("degrees must be nonnegative")
    return float(np.sqrt(2.0 * (c_in + c_out)))


def _sample_block_pairs(rng: np.random.Generator, n_pairs: int, p: float
                        ) -> np.ndarray:
    """Indices of the successes in n_pairs independent Bernoulli(p) draws,
    sampled by geometric gap skipping in O(successes)."""
    if p <= 0 or n_pairs == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n_pairs, dtype=np.int64)
    out = []
    pos = -1
    budget = int(n_pairs * p * 1.3 + 16)
    while True:
        gaps = rng.geometric(p, size=budget)
        steps = np.cumsum(gaps) + pos
        if steps[-1] >= n_pairs:
            out.append(steps[steps < n_pairs])
            break
        out.append(steps)
        pos = int(steps[-1])
    return np.concatenate(out)


def _unrank_triangular(idx: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices over the i<j pairs of range(size) back to (i, j)."""
    b = 2 * size - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2.0).astype(np.int64)
    prev = i * size - i * (i + 1) // 2
    j = idx - prev + i + 1
    return i, j


def generate_sbm(n: int, k: int, c_in: float, c_out: float, seed: int
                 ) -> tuple[Graph, np.ndarray]:
    """Equal-group planted partition with edge probabilities c_in/n inside
    groups and c_out/n between them."""
    if not 0 <= c_out <= c_in:
        raise ValueError("need 0 <= c_out <= c_in")
    if c_in >= n:
        raise ValueError("c_in/n must stay below 1")
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    truth = np.repeat(np.arange(k), sizes)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))

    chunks = []
    for i in range(k):
        si = sizes[i]
        idx = _sample_block_pairs(rng, si * (si - 1) // 2, c_in / n)
        if idx.size:
            a, b = _unrank_triangular(idx, si)
            chunks.append(np.column_stack([a + offsets[i], b + offsets[i]]))
        for j in range(i + 1, k):
            sj = sizes[j]
            idx = _sample_block_pairs(rng, si * sj, c_out / n)
            if idx.size:
                a, b = idx // sj, idx % sj
                chunks.append(np.column_stack([a + offsets[i], b + offsets[j]]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return from_edges(n, edges), truth


def generate_metadata(truth: np.ndarray, match_rate: float, K: int, seed: int
                      ) -> MetadataColumn:
    """Discrete metadata equal to the true label with probability
    ``match_rate`` and uniform over the other K-1 values otherwise."""
    truth = np.asarray(truth, dtype=np.int64)
    k = int(truth.max()) + 1 if truth.size else 0
    if K < k:
        raise ValueError("need at least as many metadata values as communities")
    if not 0 <= match_rate <= 1:
        raise ValueError("match rate must lie in [0, 1]")
    if K < 2 and match_rate < 1:
        raise ValueError("cannot mismatch with a single metadata value")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    codes = truth.copy()
    flip = rng.random(truth.size) >= match_rate
    if flip.any():
        offsets = rng.integers(1, K, size=int(flip.sum()))
        codes[flip] = (codes[flip] + offsets) % K
    return discrete_column(codes, tuple(str(i) for i in range(K)))


def make_instance(n: int, k: int, c_in: float, c_out: float,
                  match_rate: float, K: int, seed: int) -> PlantedInstance:
    ss = np.random.SeedSequence(entropy=seed)
    g_seed, m_seed = (int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(2))
    graph, truth = generate_sbm(n, k, c_in, c_out, g_seed)
    metadata = generate_metadata(truth, match_rate, K, m_seed)
    return PlantedInstance(graph=graph, truth=truth, metadata=metadata,
                           n=n, k=k, c_in=c_in, c_out=c_out,
                           match_rate=match_rate, seed=seed)


def _cell_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def benchmark_fig1a(n: int, c_mean: float, rho_list, diff_grid, reps: int,
                    config: FitConfig, threads: int = 1):
    """Accuracy of the two-community fit as metadata quality and structure
    strength vary; mean degree is held at c_mean while the in/out degree
    difference sweeps the grid.

    Returns rows (rho, diff, mean_acc, stderr, reps).
    """
    cells = [(rho, diff) for rho in rho_list for diff in diff_grid]
    for _, diff in cells:
        if diff > 2 * c_mean:
            raise ValueError("diff exceeds 2 * mean degree")

    def one_rep(rho: float, diff: float, rep: int) -> float:
        c_in = c_mean + diff / 2.0
        c_out = c_mean - diff / 2.0
        seed = _cell_seed(config.seed, int(rho * 1000), int(diff * 1000), rep)
        inst = make_instance(n, 2, c_in, c_out, rho, 2, seed)
        result = fit(inst.graph, inst.metadata, _reseed(config, seed))
        return fraction_correct(result.assignment, inst.truth, 2)

    jobs = [(rho, diff, r) for rho, diff in cells for r in range(reps)]
    accs = _run_jobs(lambda args: one_rep(*args), jobs, threads)

    rows = []
    for idx, (rho, diff) in enumerate(cells):
        vals = np.array(accs[idx * reps:(idx + 1) * reps])
        stderr = vals.std(ddof=1) / np.sqrt(reps) if reps > 1 else 0.0
        rows.append((rho, diff, float(vals.mean()), float(stderr), reps))
    return rows


def benchmark_fig1b(n: int, reps: int, config: FitConfig, threads: int = 1,
                    c_in: float = 20.0, c_out: float = 4.0,
                    match_rate: float = 0.65, success_acc: float = 0.85):
    """Competing-division selection test on four-group graphs.

    The target two-way division merges groups {0,1} against {2,3}; binary
    metadata agree with it at ``match_rate``.  Per repetition the k=2 fit
    runs once with the metadata and once with a constant column (the
    no-metadata limit); a run succeeds when accuracy against the target
    exceeds ``success_acc``.  Returns (success_with, success_without,
    per-rep rows).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")

    def one_rep(rep: int) -> tuple[float, float]:
        seed = _cell_seed(config.seed, 1701, rep)
        graph, truth4 = generate_sbm(n, 4, c_in, c_out, seed)
        target = (truth4 >= 2).astype(np.int64)
        metadata = generate_metadata(target, match_rate, 2, _cell_seed(seed, 1))
        with_md = fit(graph, metadata, _reseed(config, _cell_seed(seed, 2)))
        without_md = fit(graph, constant_column(n), _reseed(config, _cell_seed(seed, 3)))
        acc_with = fraction_correct(with_md.assignment, target, 2)
        acc_without = fraction_correct(without_md.assignment, target, 2)
        return acc_with, acc_without

    results = _run_jobs(lambda r: one_rep(r), list(range(reps)), threads)
    acc = np.array(results)
    success_with = float(np.mean(acc[:, 0] > success_acc))
    success_without = float(np.mean(acc[:, 1] > success_acc))
    return success_with, success_without, acc


def _reseed(config: FitConfig, seed: int) -> FitConfig:
    return FitConfig(k=config.k, restarts=config.restarts,
                     max_em_steps=config.max_em_steps,
                     max_bp_steps=config.max_bp_steps,
                     bp_tol=config.bp_tol, em_tol=config.em_tol,
                     seed=seed, bernstein_degree=config.bernstein_degree,
                     reproducible=config.reproducible)


def _run_jobs(fn, jobs, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]
