"""Agreement measures between community labelings and metadata.

All entropies are in bits.  NMI is normalized by the smaller of the two
entropies, so metadata that fully determine the communities score 1 even
when they have more categories than there are communities.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.special import xlogy

from .graph import MetadataColumn
from .priors import DiscretePrior


def contingency_table(labels_a, labels_b) -> np.ndarray:
    """Count matrix between two integer labelings of the same nodes."""
    a = np.asarray(labels_a, dtype=np.int64)
    b = np.asarray(labels_b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be equal-length vectors")
    a = a - a.min()
    b = b - b.min()
    ka, kb = a.max() + 1, b.max() + 1
    counts = np.bincount(a * kb + b, minlength=ka * kb)
    return counts.reshape(ka, kb)


def _entropy_bits(p: np.ndarray) -> float:
    return float(-np.sum(xlogy(p, p)) / np.log(2))


def nmi(labels_a, labels_b) -> float:
    """Mutual information over the min of the two entropies, base 2.

    Defined as 0 when either labeling has zero entropy (a constant
    labeling conveys nothing).  Symmetric, in [0, 1], and invariant
    under relabeling either argument.
    """
    table = contingency_table(labels_a, labels_b)
    n = table.sum()
    if n < 1:
        raise ValueError("need at least one node")
    joint = table / n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    ha = _entropy_bits(pa)
    hb = _entropy_bits(pb)
    lo = min(ha, hb)
    if lo <= 0:
        return 0.0
    outer = np.outer(pa, pb)
    mask = joint > 0
    mutual = float(np.sum(joint[mask] * np.log2(joint[mask] / outer[mask])))
    return max(mutual, 0.0) / lo


def conditional_entropy_model(prior: DiscretePrior,
                              metadata: MetadataColumn) -> float:
    """Average prior entropy per node, in bits: how much is still unknown
    about community membership once the metadata value is known."""
    if metadata.kind != "discrete":
        raise ValueError("need discrete metadata")
    if metadata.K != prior.K:
        raise ValueError("category count mismatch")
    rows = prior.gamma.T[metadata.codes]      # (n, k)
    return float(-np.sum(xlogy(rows, rows)) / np.log(2) / metadata.n)


def fraction_correct(assignment, truth, k: int) -> float:
    """Best node-match fraction over all community-label permutations.

    The model's likelihood is label-symmetric, so raw accuracy is only
    meaningful up to a relabeling; k is capped at 10 because the
    permutations are enumerated (use NMI beyond that).
    """
    if k > 10:
        raise ValueError("k too large for permutation search; use nmi instead")
    a = np.asarray(assignment, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if a.shape != t.shape:
        raise ValueError("labelings must be equal length")
    if a.min() < 0 or a.max() >= k or t.min() < 0 or t.max() >= k:
        raise ValueError("labels must lie in 0..k-1")
    counts = np.bincount(a * k + t, minlength=k * k).reshape(k, k)
    best = 0
    for perm in permutations(range(k)):
        hits = sum(counts[s, perm[s]] for s in range(k))
        if hits > best:
            best = hits
    return best / a.size
