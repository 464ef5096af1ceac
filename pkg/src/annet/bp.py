"""Belief propagation for the annotated degree-corrected block model.

Messages follow the sparse-graph convention: each directed edge carries a
cavity distribution over the source node's community, non-edges enter
through a global external field, and the constant degree factors on
edges are absorbed into message normalization.  The field is derived
from the degree-weighted community masses (kappa) and refreshed
incrementally as node beliefs change inside a sweep; a field that lags a
whole sweep lets strong couplings drive the global magnetization into a
period-2 oscillation instead of converging.

An exact enumeration oracle over the full Bernoulli likelihood is
included for testing on tiny instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Graph

ENUM_LIMIT = 2 ** 24


class DegenerateParameters(RuntimeError):
    """All-zero message or belief: the affinity matrix lost a community."""


@dataclass
class Messages:
    """State for one BP run.

    ``msg[e]`` is the cavity message into the row node of CSR slot ``e``
    from ``graph.indices[e]``, normalized to sum 1.  ``belief`` tracks
    the per-node marginals the external field is built from.
    """

    msg: np.ndarray              # (2m, k)
    belief: np.ndarray           # (n, k)

    def copy(self) -> "Messages":
        return Messages(msg=self.msg.copy(), belief=self.belief.copy())


@dataclass
class Marginals:
    """Node beliefs (n, k) and per-edge pair beliefs (m, k, k), the edge
    matrix oriented to match the graph's canonical u < v edge list."""

    node: np.ndarray
    edge: np.ndarray
    converged: bool = True
    sweeps: int = 0
    max_delta: float = 0.0


def _initial_beliefs(graph: Graph, theta: np.ndarray, prior: np.ndarray,
                     msg: np.ndarray) -> np.ndarray:
    """Beliefs from the current messages with a zero field."""
    out = np.empty_like(prior)
    status = _kernels.node_marginals(graph.indptr, prior, theta, msg, out)
    if status < 0:
        raise DegenerateParameters("node belief collapsed to zero")
    return out


def init_messages(graph: Graph, prior_values: np.ndarray, seed: int,
                  noise: float = 0.1,
                  theta: np.ndarray | None = None) -> Messages:
    """Seed messages with the source node's prior times multiplicative
    noise of the given relative magnitude, renormalized.

    ``theta`` is only used to seed the belief cache; when omitted the
    beliefs start at the priors.
    """
    prior = np.asarray(prior_values, dtype=np.float64)
    n, k = prior.shape
    if n != graph.n:
        raise ValueError("prior rows must match node count")
    if not np.allclose(prior.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("prior rows must sum to 1")
    src = graph.indices
    msg = prior[src].copy()
    if noise:
        rng = np.random.default_rng(seed)
        msg *= 1.0 + noise * rng.uniform(-1.0, 1.0, size=msg.shape)
    total = msg.sum(axis=1, keepdims=True)
    if msg.size and np.any(total <= 0):
        raise DegenerateParameters("zero message at initialization")
    if msg.size:
        msg /= total
    if theta is None or graph.m == 0:
        belief = prior.copy()
    else:
        belief = _initial_beliefs(graph, np.asarray(theta, dtype=np.float64),
                                  prior, msg)
    return Messages(msg=msg, belief=belief)


def _workspaces(graph: Graph, k: int):
    maxdeg = int(graph.degrees.max()) if graph.n else 0
    rows = max(maxdeg, 1) + 1
    return np.empty((rows, k)), np.empty((rows, k)), np.empty((rows, k))


def bp_sweep(graph: Graph, theta: np.ndarray, prior_values: np.ndarray,
             messages: Messages) -> tuple[Messages, float]:
    """One asynchronous update pass over all directed edges.

    The degree-mass vector behind the external field is rebuilt from the
    current beliefs at the start of the pass and then tracks every belief
    update inside it.  Returns the messages (updated in place) and the
    max absolute single-entry change.
    """
    prior = np.asarray(prior_values, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if graph.m == 0:
        return messages, 0.0
    kappa = graph.degrees.astype(np.float64) @ messages.belief
    work_f, work_pre, work_suf = _workspaces(graph, theta.shape[0])
    delta = _kernels.sweep(graph.indptr, graph.indices, graph.reverse_slot,
                           prior, theta, messages.msg, messages.belief, kappa,
                           work_f, work_pre, work_suf)
    if delta < 0:
        raise DegenerateParameters("message collapsed to zero during sweep")
    return messages, float(delta)


def run_bp(graph: Graph, theta: np.ndarray, prior_values: np.ndarray,
           seed: int, max_steps: int = 20, tol: float = 1e-6,
           messages: Messages | None = None,
           ) -> tuple[Marginals, Messages]:
    """Sweep to convergence (or the step cap) and extract marginals.

    ``messages`` warm-start the run when given, which is how the EM loop
    carries beliefs across its iterations; otherwise messages are seeded
    from the priors.  Non-convergence is reported on the result, not
    raised.  Isolated nodes end up with their prior as belief.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    prior = np.asarray(prior_values, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    k = theta.shape[0]
    if messages is None:
        messages = init_messages(graph, prior, seed, theta=theta)
    if graph.m == 0:
        return (Marginals(node=prior.copy(), edge=np.empty((0, k, k)),
                          converged=True, sweeps=0, max_delta=0.0), messages)
    iso = graph.degrees == 0
    if iso.any():
        messages.belief[iso] = prior[iso]
    delta = np.inf
    sweeps = 0
    for sweeps in range(1, max_steps + 1):
        messages, delta = bp_sweep(graph, theta, prior, messages)
        if delta < tol:
            break
    edge = np.empty((graph.m, k, k))
    status = _kernels.edge_marginals(graph.slot_uv, graph.slot_vu,
                                     theta, messages.msg, edge)
    if status < 0:
        raise DegenerateParameters("edge belief collapsed to zero")
    return (Marginals(node=messages.belief.copy(), edge=edge,
                      converged=delta < tol, sweeps=sweeps,
                      max_delta=float(delta)), messages)


def _assignment_table(n: int, k: int) -> np.ndarray:
    """All k^n assignments as a (k^n, n) int array."""
    total = k ** n
    out = np.empty((total, n), dtype=np.int64)
    reps = total
    for u in range(n):
        reps //= k
        out[:, u] = np.tile(np.repeat(np.arange(k), reps), total // (reps * k))
    return out


def exact_log_weights(graph: Graph, theta: np.ndarray,
                      prior_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log posterior weight of every assignment under the full Bernoulli
    likelihood.  Returns (assignments, log_weights), unnormalized."""
    theta = np.asarray(theta, dtype=np.float64)
    prior = np.asarray(prior_values, dtype=np.float64)
    n, k = prior.shape
    if k ** n > ENUM_LIMIT:
        raise ValueError("instance too large for exact enumeration")
    deg = graph.degrees.astype(np.float64)
    dmax = deg.max() if n else 0.0
    if dmax * dmax * theta.max() >= 1.0:
        raise ValueError("edge probability >= 1: parameters invalid at this scale")

    S = _assignment_table(n, k)
    with np.errstate(divide="ignore"):
        logprior = np.log(np.maximum(prior, 1e-300))
    logw = logprior[np.arange(n), S].sum(axis=1) if n else np.zeros(1)

    adj = set(zip(graph.edges_u.tolist(), graph.edges_v.tolist()))
    for u in range(n):
        for v in range(u + 1, n):
            p = deg[u] * deg[v] * theta
            if (u, v) in adj:
                table = np.log(np.maximum(p, 1e-300))
            else:
                table = np.log1p(-p)
            logw += table[S[:, u], S[:, v]]
    return S, logw


def exact_marginals(graph: Graph, theta: np.ndarray,
                    prior_values: np.ndarray) -> Marginals:
    """Brute-force posterior marginals; the test oracle for run_bp."""
    prior = np.asarray(prior_values, dtype=np.float64)
    n, k = prior.shape
    S, logw = exact_log_weights(graph, theta, prior)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    node = np.empty((n, k))
    for u in range(n):
        node[u] = np.bincount(S[:, u], weights=w, minlength=k)
    edge = np.empty((graph.m, k, k))
    for i in range(graph.m):
        joint = S[:, graph.edges_u[i]] * k + S[:, graph.edges_v[i]]
        edge[i] = np.bincount(joint, weights=w, minlength=k * k).reshape(k, k)
    return Marginals(node=node, edge=edge, converged=True)


def exact_log_likelihood(graph: Graph, theta: np.ndarray,
                         prior_values: np.ndarray) -> float:
    """log sum over assignments of the full Bernoulli joint weight."""
    _, logw = exact_log_weights(graph, theta, prior_values)
    mx = logw.max()
    return float(mx + np.log(np.exp(logw - mx).sum()))
