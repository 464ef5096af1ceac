"""Hot inner loops for message passing.

Every kernel is written as a plain Python function over numpy arrays and
compiled with numba when available.  Setting ``ANNET_BACKEND=numpy``
selects the uncompiled fallback path (identical code, identical
semantics, much slower); ``ANNET_BACKEND=numba`` forces compilation and
raises if numba is missing.  Both variants stay importable as ``*_py``
and ``*_nb`` so they can be benchmarked against each other, see
``benchmarks/bench_kernels.py``.

Messages live in an array of shape (2m, k): slot ``e`` in row ``u`` of
the CSR structure holds the message from ``indices[e]`` into ``u``.  The
sweep also maintains the node beliefs and the degree-mass vector kappa
(the source of the external field) incrementally: the anti-crowding
field must react within the sweep, otherwise strong couplings drive a
period-2 oscillation of the global magnetization.

Intermediate products are max-normalized on the fly, so no log-space
path is needed even for hub nodes or extreme affinity scales; a message
that collapses to all zeros signals degenerate parameters and is
reported through a negative return value.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
    numba = None


def _pick_backend() -> str:
    env = os.environ.get("ANNET_BACKEND", "").strip().lower()
    if env in ("numba", "jit"):
        if numba is None:
            raise ImportError("ANNET_BACKEND=numba but numba is not installed")
        return "numba"
    if env in ("numpy", "python", "nojit"):
        return "numpy"
    if env:
        raise ValueError(f"unknown ANNET_BACKEND {env!r}; use 'numba' or 'numpy'")
    return "numba" if numba is not None else "numpy"


BACKEND = _pick_backend()


def _sweep_py(indptr, indices, reverse_slot, prior, theta, msg, q, kappa,
              work_f, work_pre, work_suf):
    """One asynchronous pass in fixed node order; returns max message change.

    For each node: evaluate the external field from the current kappa,
    refresh the node belief, fold the belief change back into kappa, then
    write the outgoing cavity messages.  Returns -1.0 if any message or
    belief would be all zero (degenerate affinity matrix).
    """
    n = indptr.shape[0] - 1
    k = theta.shape[0]
    max_delta = 0.0
    for u in range(n):
        lo = indptr[u]
        hi = indptr[u + 1]
        d = hi - lo
        if d == 0:
            continue
        # Effective prior: prior * exp(-h), h_s = d_u * sum_t theta[s,t] kappa[t],
        # shifted so the exponent never underflows.
        hmin = 1e300
        for s in range(k):
            acc = 0.0
            for t in range(k):
                acc += theta[s, t] * kappa[t]
            acc *= d
            work_pre[0, s] = acc          # reuse row 0 as scratch for h
            if acc < hmin:
                hmin = acc
        for s in range(k):
            work_f[0, s] = prior[u, s] * math.exp(-(work_pre[0, s] - hmin))
        # Neighbor factors f_i[s] = sum_t theta[s, t] * msg_in[i][t],
        # max-normalized (constant factors cancel after normalization).
        for i in range(d):
            mx = 0.0
            for s in range(k):
                acc = 0.0
                for t in range(k):
                    acc += theta[s, t] * msg[lo + i, t]
                work_suf[i, s] = acc      # park f_i in work_suf temporarily
                if acc > mx:
                    mx = acc
            if mx <= 0.0:
                return -1.0
            for s in range(k):
                work_suf[i, s] /= mx
        # Prefix products pre[i] = prior_eff * f_0 ... f_{i-1}, renormalized.
        for s in range(k):
            work_pre[0, s] = work_f[0, s]
        for i in range(d):
            mx = 0.0
            for s in range(k):
                p = work_pre[i, s] * work_suf[i, s]
                work_pre[i + 1, s] = p
                if p > mx:
                    mx = p
            if mx <= 0.0:
                return -1.0
            for s in range(k):
                work_pre[i + 1, s] /= mx
        # Suffix products suf[i] = f_i ... f_{d-1}; overwrite in place from
        # the right (entry i only needs entries >= i).
        for i in range(d - 1, -1, -1):
            mx = 0.0
            for s in range(k):
                p = work_suf[i, s]
                if i < d - 1:
                    p *= work_suf[i + 1, s]
                work_suf[i, s] = p
                if p > mx:
                    mx = p
            if mx <= 0.0:
                return -1.0
            for s in range(k):
                work_suf[i, s] /= mx
        # New node belief from the full product; update kappa in place.
        total = 0.0
        for s in range(k):
            work_f[0, s] = work_pre[d, s]
            total += work_f[0, s]
        if total <= 0.0:
            return -1.0
        for s in range(k):
            new_q = work_f[0, s] / total
            kappa[s] += d * (new_q - q[u, s])
            q[u, s] = new_q
        # Outgoing message to neighbor i: everything except factor i.
        for i in range(d):
            tgt = reverse_slot[lo + i]
            total = 0.0
            for s in range(k):
                val = work_pre[i, s]
                if i < d - 1:
                    val *= work_suf[i + 1, s]
                work_f[0, s] = val
                total += val
            if total <= 0.0:
                return -1.0
            for s in range(k):
                new = work_f[0, s] / total
                delta = abs(new - msg[tgt, s])
                if delta > max_delta:
                    max_delta = delta
                msg[tgt, s] = new
    return max_delta


def _node_marginals_py(indptr, prior_eff, theta, msg, out):
    """Per-node belief: effective prior times product of neighbor factors."""
    n = indptr.shape[0] - 1
    k = theta.shape[0]
    for u in range(n):
        lo = indptr[u]
        hi = indptr[u + 1]
        for s in range(k):
            out[u, s] = prior_eff[u, s]
        for e in range(lo, hi):
            mx = 0.0
            for s in range(k):
                acc = 0.0
                for t in range(k):
                    acc += theta[s, t] * msg[e, t]
                acc *= out[u, s]
                out[u, s] = acc
                if acc > mx:
                    mx = acc
            if mx <= 0.0:
                return -1.0
            for s in range(k):
                out[u, s] /= mx
        total = 0.0
        for s in range(k):
            total += out[u, s]
        if total <= 0.0:
            return -1.0
        for s in range(k):
            out[u, s] /= total
    return 0.0


def _edge_marginals_py(slot_uv, slot_vu, theta, msg, out):
    """Pairwise belief per undirected edge: theta weighted by both cavities."""
    m = slot_uv.shape[0]
    k = theta.shape[0]
    for i in range(m):
        a = slot_uv[i]
        b = slot_vu[i]
        total = 0.0
        for s in range(k):
            for t in range(k):
                val = theta[s, t] * msg[a, s] * msg[b, t]
                out[i, s, t] = val
                total += val
        if total <= 0.0:
            return -1.0
        for s in range(k):
            for t in range(k):
                out[i, s, t] /= total
    return 0.0


if numba is not None:
    _jit = numba.njit(cache=True, nogil=True)
    _sweep_nb = _jit(_sweep_py)
    _node_marginals_nb = _jit(_node_marginals_py)
    _edge_marginals_nb = _jit(_edge_marginals_py)
else:
    _sweep_nb = None
    _node_marginals_nb = None
    _edge_marginals_nb = None

if BACKEND == "numba":
    sweep = _sweep_nb
    node_marginals = _node_marginals_nb
    edge_marginals = _edge_marginals_nb
else:
    sweep = _sweep_py
    node_marginals = _node_marginals_py
    edge_marginals = _edge_marginals_py
