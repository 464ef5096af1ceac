"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured values (run with -s to see them inline).

The synthetic-benchmark criteria run at full scale (n = 10 000) and
dominate the runtime: expect roughly half an hour on two cores.
"""

import os
import pathlib

import numpy as np
import pytest
from scipy.optimize import minimize

from annet.bp import exact_log_likelihood, exact_marginals, run_bp
from annet.em import (FitConfig, bethe_log_likelihood, dropped_constants,
                      fit, m_step_theta)
from annet.graph import discrete_column, load_edge_list, load_metadata, ordered_column
from annet.metrics import fraction_correct, nmi
from annet.priors import (BernsteinPrior, BlockAffinity, DiscretePrior,
                          bernstein_basis, m_step_gamma_discrete,
                          m_step_gamma_ordered, prior_matrix)
from annet.synth import (benchmark_fig1a, benchmark_fig1b,
                         detectability_threshold, make_instance)

from test_bp import random_tree
from test_em import random_marginals

THREADS = min(4, os.cpu_count() or 1)


def report(cid: str, text: str) -> None:
    print(f"\nACCEPTANCE {cid}: PASS - {text}", flush=True)


def test_criterion_1_tree_exactness():
    """BP and its Bethe score against full enumeration on random trees.

    Marginals are compared at a random prior.  The score identity needs
    the prior at its own update's fixed point (that is where the paper's
    simplified prior term is exact), so the update is iterated deeply
    first; degenerate instances that collapse toward a one-hot prior
    converge slowly and get the large iteration budget.
    """
    rng = np.random.default_rng(2024)
    worst_marg = 0.0
    worst_ll = 0.0
    for trial in range(50):
        k = int(rng.choice([2, 3]))
        n = int(rng.integers(3, 13 if k == 2 else 11))
        g = random_tree(rng, n)
        theta_arr = rng.uniform(0.5, 1.5, (k, k)) * 1e-11
        theta_arr = 0.5 * (theta_arr + theta_arr.T)
        K = int(rng.integers(2, 4))
        md = discrete_column(rng.integers(0, K, n),
                             tuple(f"c{i}" for i in range(K)))
        prior = DiscretePrior(k=k, gamma=rng.dirichlet(np.ones(k), size=K).T)

        rows = prior_matrix(prior, md)
        marg, msgs = run_bp(g, theta_arr, rows, seed=trial, max_steps=200,
                            tol=1e-15)
        exact = exact_marginals(g, theta_arr, rows)
        worst_marg = max(worst_marg, np.abs(marg.node - exact.node).max())
        worst_marg = max(worst_marg, np.abs(marg.edge - exact.edge).max())

        for _ in range(20000):
            new = m_step_gamma_discrete(marg.node, md)
            done = np.abs(new.gamma - prior.gamma).max() < 1e-13
            prior = new
            rows = prior_matrix(prior, md)
            marg, msgs = run_bp(g, theta_arr, rows, seed=trial, max_steps=200,
                                tol=1e-15, messages=msgs)
            if done:
                break

        theta = BlockAffinity(k=k, theta=theta_arr)
        bethe = bethe_log_likelihood(g, theta, prior, marg, md)
        consts = dropped_constants(g, theta, marg)
        exact_ll = exact_log_likelihood(g, theta_arr, rows)
        worst_ll = max(worst_ll, abs(bethe + consts - exact_ll))

    assert worst_marg < 1e-6, f"marginal mismatch {worst_marg:.2e}"
    assert worst_ll < 1e-6, f"log-likelihood mismatch {worst_ll:.2e}"
    report("1", f"50 trees, max marginal err {worst_marg:.2e}, "
                f"max log-likelihood err {worst_ll:.2e}")


def test_criterion_2_m_step_oracle():
    """Closed-form updates against numerical maximization of the bound."""
    rng = np.random.default_rng(77)
    k = 2
    idx = [(0, 0), (0, 1), (1, 1)]
    worst_theta = 0.0
    worst_gamma = 0.0
    for trial in range(20):
        n = int(rng.integers(3, 7))
        g = random_tree(rng, n)
        marg = random_marginals(rng, g, k)

        closed_theta = m_step_theta(g, marg).theta
        kappa = g.degrees.astype(float) @ marg.node
        mass = marg.edge.sum(axis=0)
        mass = mass + mass.T

        def neg_theta(z):
            theta = np.zeros((k, k))
            for (s, t), val in zip(idx, z):
                theta[s, t] = theta[t, s] = np.exp(val)
            obj = 0.5 * np.sum(mass * np.log(theta)) - 0.5 * kappa @ theta @ kappa
            grad = [(0.5 if s == t else 1.0)
                    * (mass[s, t] - theta[s, t] * kappa[s] * kappa[t])
                    for s, t in idx]
            return -obj, -np.array(grad)

        res = minimize(neg_theta, np.log(np.full(3, 1.0 / (2 * g.m))),
                       jac=True, method="BFGS",
                       options={"gtol": 1e-14, "maxiter": 500})
        numeric = np.zeros((k, k))
        for (s, t), val in zip(idx, res.x):
            numeric[s, t] = numeric[t, s] = np.exp(val)
        worst_theta = max(worst_theta, np.abs(numeric - closed_theta).max())

        K = int(rng.integers(1, 4))
        codes = rng.integers(0, K, n)
        md = discrete_column(codes, tuple(f"c{i}" for i in range(K)))
        closed_gamma = m_step_gamma_discrete(marg.node, md).gamma
        counts = np.zeros((k, K))
        for u in range(n):
            counts[:, codes[u]] += marg.node[u]

        def neg_gamma(z):
            zz = z.reshape(k, K) - z.reshape(k, K).max(axis=0)
            gam = np.exp(zz)
            gam /= gam.sum(axis=0)
            obj = np.sum(counts * np.log(np.maximum(gam, 1e-300)))
            return -obj, -(counts - gam * counts.sum(axis=0)).ravel()

        res = minimize(neg_gamma, np.zeros(k * K), jac=True, method="BFGS",
                       options={"gtol": 1e-14, "maxiter": 1000})
        zz = res.x.reshape(k, K) - res.x.reshape(k, K).max(axis=0)
        gam = np.exp(zz)
        gam /= gam.sum(axis=0)
        occupied = np.unique(codes)
        worst_gamma = max(worst_gamma,
                          np.abs(gam[:, occupied] - closed_gamma[:, occupied]).max())

    assert worst_theta < 1e-6, f"theta mismatch {worst_theta:.2e}"
    assert worst_gamma < 1e-6, f"gamma mismatch {worst_gamma:.2e}"
    report("2", f"20 instances, max theta err {worst_theta:.2e}, "
                f"max gamma err {worst_gamma:.2e}")


def test_criterion_3_benchmark_endpoints():
    """Accuracy endpoints of the metadata-quality sweep at n = 10 000."""
    n, reps = 10_000, 10
    cfg = FitConfig(k=2, restarts=10, max_em_steps=20, seed=1234)
    rows = benchmark_fig1a(n, 8.0, [0.5, 0.9], [0.0], reps, cfg,
                           threads=THREADS)
    rows += benchmark_fig1a(n, 8.0, [0.5], [12.0], reps, cfg,
                            threads=THREADS)
    by_cell = {(rho, diff): acc for rho, diff, acc, _, _ in rows}
    a_uninf = by_cell[(0.5, 0.0)]
    a_meta = by_cell[(0.9, 0.0)]
    a_strong = by_cell[(0.5, 12.0)]
    assert abs(a_uninf - 0.50) <= 0.03, f"rho=0.5 diff=0 accuracy {a_uninf:.4f}"
    assert abs(a_meta - 0.90) <= 0.03, f"rho=0.9 diff=0 accuracy {a_meta:.4f}"
    assert a_strong >= 0.95, f"rho=0.5 diff=12 accuracy {a_strong:.4f}"
    report("3", f"diff=0 accuracies {a_uninf:.3f} (rho=.5) / {a_meta:.3f} "
                f"(rho=.9), diff=12 accuracy {a_strong:.3f}")


def test_criterion_4_threshold_bracket():
    """Accuracy transition brackets the detectability threshold."""
    thr = detectability_threshold(8 + 2.25, 8 - 2.25)  # any split with sum 16
    assert thr == pytest.approx(np.sqrt(32.0))
    n, reps = 10_000, 10
    cfg = FitConfig(k=2, restarts=10, max_em_steps=100, seed=4321)
    rows = benchmark_fig1a(n, 8.0, [0.5], [4.5, 7.0], reps, cfg,
                           threads=THREADS)
    by_diff = {diff: acc for _, diff, acc, _, _ in rows}
    below, above = by_diff[4.5], by_diff[7.0]
    assert 4.5 < thr < 7.0
    assert below <= 0.65, f"accuracy {below:.4f} below threshold should be ~0.5"
    assert above > 0.70, f"accuracy {above:.4f} above threshold should exceed 0.7"
    report("4", f"threshold {thr:.3f}; accuracy {below:.3f} at diff=4.5, "
                f"{above:.3f} at diff=7.0")


def test_criterion_5_competing_divisions():
    """Selection of a planted two-way division among competitors."""
    n, reps = 10_000, 100
    # the 20-step EM budget: metadata-led runs converge within it, which is
    # what makes the with/without contrast sharp
    cfg = FitConfig(k=2, restarts=10, max_em_steps=20, seed=777)
    success_with, success_without, _ = benchmark_fig1b(
        n, reps, cfg, threads=THREADS)
    assert success_with >= 0.90, f"with-metadata success {success_with:.2f}"
    assert success_without <= 0.20, f"without-metadata success {success_without:.2f}"
    report("5", f"success with metadata {success_with:.2f}, "
                f"without {success_without:.2f} ({reps} reps)")


def test_criterion_6_metadata_fixed_point():
    """Perfect metadata is a fixed point: identity prior, perfect accuracy."""
    inst = make_instance(2000, 2, 13, 3, 1.0, 2, seed=31)
    res = fit(inst.graph, inst.metadata,
              FitConfig(k=2, restarts=10, seed=31), threads=THREADS)
    acc = fraction_correct(res.assignment, inst.truth, 2)
    # community labels are arbitrary: align them by the accuracy permutation
    gamma = res.prior.gamma
    if np.mean(res.assignment == inst.truth) < np.mean((1 - res.assignment) == inst.truth):
        gamma = gamma[::-1]
    dev = np.abs(gamma - np.eye(2)).max()
    assert acc == 1.0, f"accuracy {acc}"
    assert dev < 1e-3, f"gamma deviates from identity by {dev:.2e}"
    report("6", f"accuracy {acc:.1f}, prior within {dev:.1e} of identity")


def test_criterion_7_nmi_suite():
    """Reference values for the min-normalized mutual information."""
    assert nmi([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0)
    assert nmi([0, 1, 0, 1], [5, 5, 5, 5]) == 0.0
    val = nmi([1, 1, 2, 2], [1, 1, 1, 2])
    assert val == pytest.approx(0.3837, abs=1e-4)
    rng = np.random.default_rng(123)
    a = rng.integers(0, 2, 1000)
    b = rng.integers(0, 2, 1000)
    indep = nmi(a, b)
    assert indep < 0.05
    report("7", f"identical 1.0, constant 0.0, derived {val:.4f}, "
                f"independent {indep:.4f}")


def test_criterion_8_ordered_recovery():
    """The coefficient iteration recovers a linear prior from hard labels."""
    rng = np.random.default_rng(88)
    n, N = 2000, 1
    x = rng.random(n)
    labels = (rng.random(n) < x).astype(int)
    q = np.eye(2)[labels]
    md = ordered_column(x)
    init = np.full((2, N + 1), 0.5) * (1 + 0.1 * rng.uniform(-1, 1, (2, N + 1)))
    init /= init.sum(axis=0, keepdims=True)
    prior = m_step_gamma_ordered(q, md, N,
                                 BernsteinPrior(k=2, degree=N, gamma=init),
                                 inner_tol=1e-12, inner_max=5000)
    grid = np.linspace(0, 1, 11)
    fitted = bernstein_basis(N, grid) @ prior.gamma[1]
    err = np.abs(fitted - grid).max()
    assert err < 0.05, f"recovered prior off by {err:.3f}"
    report("8", f"P(community 1 | x) recovered within {err:.3f} on the grid")


def test_criterion_9_reference_results_documented():
    """Published-data scores ship as documentation plus working loaders."""
    readme = pathlib.Path(__file__).resolve().parents[1] / "README.md"
    text = readme.read_text(encoding="utf-8")
    for value in ("0.881", "0.820", "0.003", "0.870"):
        assert value in text, f"reference NMI {value} missing from README"
    # the loaders a data holder would use
    g = load_edge_list("0 1\n1 2\n")
    md = load_metadata("node,value\n0,a\n1,b\n2,a\n", "discrete", g.n)
    mo = load_metadata("node,value\n0,1.5\n1,2.5\n2,\n", "ordered", g.n)
    assert g.n == 3 and md.K == 2 and bool(mo.missing[2])
    report("9", "reference NMI table documented; edge-list and metadata "
                "loaders exercised")
