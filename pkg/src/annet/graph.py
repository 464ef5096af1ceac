"""Sparse undirected graphs and per-node metadata columns.

Graphs are simple (no self-loops, no parallel edges), stored in a
compressed sparse neighbor-list layout together with the directed-edge
bookkeeping that message passing needs.  Both :class:`Graph` and
:class:`MetadataColumn` are frozen after construction and safe to share
between threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class EdgeListError(ValueError):
    """Malformed edge-list input; message carries the offending line number."""


class MetadataError(ValueError):
    """Malformed metadata input."""


MISSING_LABEL = "missing"


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    ``indptr``/``indices`` hold the symmetric neighbor lists (sorted per
    row).  ``edges_u``/``edges_v`` list each undirected edge once with
    ``u < v``.  The ``slot_*``/``reverse_slot`` arrays index the 2m directed
    message slots: slot ``e`` in row ``u`` stores state for the directed
    edge ``indices[e] -> u``.
    """

    n: int
    m: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    edges_u: np.ndarray
    edges_v: np.ndarray
    slot_uv: np.ndarray      # slot of directed u->v for canonical edge i
    slot_vu: np.ndarray      # slot of directed v->u
    reverse_slot: np.ndarray

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.degrees, self.edges_u,
                    self.edges_v, self.slot_uv, self.slot_vu, self.reverse_slot):
            arr.flags.writeable = False

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]


def from_edges(n: int, edges: np.ndarray) -> Graph:
    """Build a Graph from an (m, 2) array of distinct undirected edges.

    Edges may be given in either orientation; self-loops and duplicates
    raise ValueError.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    if m and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    eu = np.minimum(edges[:, 0], edges[:, 1])
    ev = np.maximum(edges[:, 0], edges[:, 1])
    if m and np.any(eu == ev):
        raise ValueError("self-loop in edge array")
    key = eu * np.int64(n) + ev
    if np.unique(key).size != m:
        raise ValueError("duplicate edge in edge array")

    dir_src = np.concatenate([eu, ev])
    dir_dst = np.concatenate([ev, eu])
    order = np.lexsort((dir_src, dir_dst))
    indices = dir_src[order]
    counts = np.bincount(dir_dst, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])

    slot_of = np.empty(2 * m, dtype=np.int64)
    slot_of[order] = np.arange(2 * m, dtype=np.int64)
    slot_uv = slot_of[:m].copy()   # directed u->v sits in row v
    slot_vu = slot_of[m:].copy()
    reverse_slot = np.empty(2 * m, dtype=np.int64)
    reverse_slot[slot_uv] = slot_vu
    reverse_slot[slot_vu] = slot_uv

    return Graph(
        n=n, m=m,
        indptr=indptr,
        indices=indices,
        degrees=np.diff(indptr).astype(np.int64),
        edges_u=eu, edges_v=ev,
        slot_uv=slot_uv, slot_vu=slot_vu,
        reverse_slot=reverse_slot,
    )


def load_edge_list(stream) -> Graph:
    """Parse an edge-list text stream into a validated Graph.

    One edge per line as two whitespace-separated 0-based node ids;
    ``#`` starts a comment line.  Node count is 1 + max id, so ids never
    mentioned remain as isolated nodes.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    us, vs, lines = [], [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected two node ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer node id in {line!r}") from None
        if u < 0 or v < 0:
            raise EdgeListError(f"line {lineno}: negative node id in {line!r}")
        if u == v:
            raise EdgeListError(f"line {lineno}: self-loop at node {u}")
        us.append(u)
        vs.append(v)
        lines.append(lineno)

    if not us:
        return from_edges(0, np.empty((0, 2), dtype=np.int64))
    eu = np.minimum(us, vs)
    ev = np.maximum(us, vs)
    n = int(max(np.max(eu), np.max(ev))) + 1
    key = eu.astype(np.int64) * n + ev
    uniq, first = np.unique(key, return_index=True)
    if uniq.size != key.size:
        seen = set(first)
        for i, _ in enumerate(key):
            if i not in seen:
                raise EdgeListError(
                    f"line {lines[i]}: duplicate edge ({us[i]}, {vs[i]})")
    return from_edges(n, np.column_stack([eu, ev]))


def write_edge_list(graph: Graph, stream) -> None:
    """Write one canonical 'u v' line per edge."""
    for u, v in zip(graph.edges_u, graph.edges_v):
        stream.write(f"{u} {v}\n")


@dataclass(frozen=True)
class MetadataColumn:
    """One per-node annotation column, discrete or ordered.

    Discrete columns store integer codes 0..K-1 plus the label for each
    code; nodes without a value share the reserved ``missing`` category.
    Ordered columns store the raw scalar, a min-max rescaling to [0, 1],
    and a per-node missing flag; missing nodes take no part in prior
    updates and receive a uniform prior.
    """

    kind: str                     # "discrete" | "ordered"
    n: int
    codes: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    raw: np.ndarray | None = None
    x: np.ndarray | None = None
    missing: np.ndarray | None = None
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        for arr in (self.codes, self.raw, self.x, self.missing):
            if arr is not None:
                arr.flags.writeable = False
        if self.kind == "discrete":
            if self.codes is None or len(self.codes) != self.n:
                raise MetadataError("discrete column needs one code per node")
            if len(set(self.labels)) != len(self.labels):
                raise MetadataError("category labels must be unique")
            if self.n and (self.codes.min() < 0 or self.codes.max() >= self.K):
                raise MetadataError("category code out of range")
        elif self.kind == "ordered":
            if self.x is None or len(self.x) != self.n:
                raise MetadataError("ordered column needs one value per node")
            ok = self.x[~self.missing]
            if ok.size and (ok.min() < -1e-12 or ok.max() > 1 + 1e-12):
                raise MetadataError("rescaled values must lie in [0, 1]")
        else:
            raise MetadataError(f"unknown metadata kind {self.kind!r}")

    @property
    def K(self) -> int:
        return len(self.labels) if self.kind == "discrete" else 0


def discrete_column(codes, labels) -> MetadataColumn:
    codes = np.asarray(codes, dtype=np.int64)
    return MetadataColumn(kind="discrete", n=len(codes), codes=codes,
                          labels=tuple(labels))


def constant_column(n: int) -> MetadataColumn:
    """Single-category column: the no-metadata limit of the model."""
    return discrete_column(np.zeros(n, dtype=np.int64), ("none",))


def ordered_column(values, missing=None) -> MetadataColumn:
    """Build an ordered column from raw scalars, min-max rescaled to [0, 1].

    If every observed value is equal the rescaled value is 0.5 for all of
    them, which avoids a zero denominator in the transform.
    """
    raw = np.asarray(values, dtype=np.float64).copy()
    n = len(raw)
    if missing is None:
        missing = np.isnan(raw)
    missing = np.asarray(missing, dtype=bool).copy()
    obs = raw[~missing]
    if obs.size == 0:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = float(obs.min()), float(obs.max())
    x = np.full(n, 0.5)
    if hi > lo:
        with np.errstate(invalid="ignore"):
            x = (raw - lo) / (hi - lo)
    x[missing] = 0.5
    return MetadataColumn(kind="ordered", n=n, raw=raw, x=x,
                          missing=missing, x_min=lo, x_max=hi)


def load_metadata(stream, kind: str, n: int) -> MetadataColumn:
    """Parse a ``node,value`` CSV into a MetadataColumn for an n-node graph.

    Discrete: distinct strings become categories in first-appearance
    order; nodes that are absent or have an empty value get the reserved
    ``missing`` category (always the last one).  Ordered: values parse as
    reals and are min-max rescaled; absent values are flagged missing.
    """
    if kind not in ("discrete", "ordered"):
        raise MetadataError(f"unknown metadata kind {kind!r}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    values: dict[int, str] = {}
    header_seen = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            if line.lower().replace(" ", "") != "node,value":
                raise MetadataError(f"line {lineno}: expected header 'node,value'")
            header_seen = True
            continue
        node_s, _, value = line.partition(",")
        try:
            node = int(node_s)
        except ValueError:
            raise MetadataError(f"line {lineno}: bad node id {node_s!r}") from None
        if not 0 <= node < n:
            raise MetadataError(f"line {lineno}: node id {node} out of range 0..{n - 1}")
        if node in values:
            raise MetadataError(f"line {lineno}: duplicate row for node {node}")
        values[node] = value.strip()

    if kind == "discrete":
        labels: list[str] = []
        index: dict[str, int] = {}
        codes = np.empty(n, dtype=np.int64)
        missing_nodes = []
        for node in range(n):
            val = values.get(node, "")
            if val == "" or val == MISSING_LABEL:
                missing_nodes.append(node)
                continue
            if val not in index:
                index[val] = len(labels)
                labels.append(val)
            codes[node] = index[val]
        if missing_nodes:
            miss_code = len(labels)
            labels.append(MISSING_LABEL)
            for node in missing_nodes:
                codes[node] = miss_code
        if not labels:
            labels = [MISSING_LABEL]
            codes[:] = 0
        return discrete_column(codes, labels)

    raw_vals = np.full(n, np.nan)
    for node, val in values.items():
        if val == "":
            continue
        try:
            raw_vals[node] = float(val)
        except ValueError:
            raise MetadataError(f"node {node}: unparseable real {val!r}") from None
    return ordered_column(raw_vals)


def write_metadata(column: MetadataColumn, stream) -> None:
    stream.write("node,value\n")
    if column.kind == "discrete":
        for node, code in enumerate(column.codes):
            stream.write(f"{node},{column.labels[code]}\n")
    else:
        for node in range(column.n):
            if column.missing[node]:
                stream.write(f"{node},\n")
            else:
                stream.write(f"{node},{float(column.raw[node])!r}\n")
