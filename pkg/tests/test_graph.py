"""Edge-list and metadata loading, validation, and round trips."""

import io

import numpy as np
import pytest

from annet.graph import (EdgeListError, MetadataError, constant_column,
                         discrete_column, from_edges, load_edge_list,
                         load_metadata, ordered_column, write_edge_list,
                         write_metadata)


class TestLoadEdgeList:
    def test_path_graph(self):
        g = load_edge_list("0 1\n1 2")
        assert g.n == 3
        assert g.m == 2
        assert g.degrees.tolist() == [1, 2, 1]

    def test_self_loop_rejected(self):
        with pytest.raises(EdgeListError, match="line 1.*self-loop"):
            load_edge_list("0 0")

    def test_duplicate_edge_rejected(self):
        with pytest.raises(EdgeListError, match="line 2.*duplicate"):
            load_edge_list("0 1\n1 0")

    def test_malformed_line_reports_number(self):
        with pytest.raises(EdgeListError, match="line 3"):
            load_edge_list("0 1\n1 2\n2 x")

    def test_comments_and_blanks_ignored(self):
        g = load_edge_list("# a comment\n\n0 1\n# another\n1 2\n")
        assert g.m == 2

    def test_isolated_nodes_kept(self):
        g = load_edge_list("0 5")
        assert g.n == 6
        assert g.degrees.tolist() == [1, 0, 0, 0, 0, 1]

    def test_empty_input(self):
        g = load_edge_list("# nothing\n")
        assert g.n == 0 and g.m == 0


class TestGraphStructure:
    def test_adjacency_symmetric(self):
        rng = np.random.default_rng(0)
        n = 30
        pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, (60, 2)) if a != b}
        edges = np.array([(min(a, b), max(a, b)) for a, b in pairs])
        edges = np.unique(edges, axis=0)
        g = from_edges(n, edges)
        for u in range(n):
            for v in g.neighbors(u):
                assert u in g.neighbors(v)

    def test_degree_sum_is_twice_edges(self):
        g = load_edge_list("0 1\n1 2\n2 3\n3 0\n0 2")
        assert g.degrees.sum() == 2 * g.m

    def test_reverse_slot_involution(self):
        g = load_edge_list("0 1\n1 2\n2 0\n2 3")
        rev = g.reverse_slot
        assert np.array_equal(rev[rev], np.arange(2 * g.m))

    def test_slot_arrays_locate_directed_edges(self):
        g = load_edge_list("0 1\n1 2\n2 0")
        for i in range(g.m):
            u, v = g.edges_u[i], g.edges_v[i]
            slot = g.slot_uv[i]
            assert g.indptr[v] <= slot < g.indptr[v + 1]
            assert g.indices[slot] == u
            slot = g.slot_vu[i]
            assert g.indptr[u] <= slot < g.indptr[u + 1]
            assert g.indices[slot] == v

    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        n = 40
        mask = np.triu(rng.random((n, n)) < 0.1, k=1)
        edges = np.argwhere(mask)
        g = from_edges(n, edges)
        buf = io.StringIO()
        write_edge_list(g, buf)
        g2 = load_edge_list(buf.getvalue())
        assert g2.n == g.n and g2.m == g.m
        assert np.array_equal(g.indptr, g2.indptr)
        assert np.array_equal(g.indices, g2.indices)

    def test_immutability(self):
        g = load_edge_list("0 1")
        with pytest.raises(ValueError):
            g.degrees[0] = 5


class TestLoadMetadataDiscrete:
    def test_two_labels(self):
        md = load_metadata("node,value\n0,a\n1,b\n2,a\n", "discrete", 3)
        assert md.K == 2
        assert md.codes.tolist() == [0, 1, 0]
        assert md.labels == ("a", "b")

    def test_missing_rule(self):
        md = load_metadata("node,value\n0,a\n2,a\n", "discrete", 3)
        assert md.K == 2
        assert md.labels == ("a", "missing")
        assert md.codes.tolist() == [0, 1, 0]

    def test_label_code_bijection(self):
        md = load_metadata("node,value\n0,x\n1,y\n2,z\n3,y\n", "discrete", 4)
        assert len(md.labels) == md.K
        for node, code in enumerate(md.codes):
            assert md.labels[code] is not None
        assert sorted(set(md.codes.tolist())) == list(range(md.K))

    def test_duplicate_node_rejected(self):
        with pytest.raises(MetadataError, match="duplicate"):
            load_metadata("node,value\n0,a\n0,b\n", "discrete", 2)

    def test_node_out_of_range(self):
        with pytest.raises(MetadataError, match="out of range"):
            load_metadata("node,value\n7,a\n", "discrete", 3)


class TestLoadMetadataOrdered:
    def test_minmax_rescale(self):
        md = load_metadata("node,value\n0,1.0\n1,3.0\n2,2.0\n", "ordered", 3)
        assert np.allclose(md.x, [0.0, 1.0, 0.5])

    def test_unparseable_real(self):
        with pytest.raises(MetadataError, match="unparseable"):
            load_metadata("node,value\n0,abc\n", "ordered", 1)

    def test_missing_flagged(self):
        md = load_metadata("node,value\n0,1.0\n2,5.0\n", "ordered", 3)
        assert md.missing.tolist() == [False, True, False]

    def test_all_equal_maps_to_half(self):
        md = ordered_column([4.0, 4.0, 4.0])
        assert np.allclose(md.x, 0.5)

    def test_roundtrip(self):
        md = ordered_column([0.5, np.nan, 2.5])
        buf = io.StringIO()
        write_metadata(md, buf)
        md2 = load_metadata(buf.getvalue(), "ordered", 3)
        assert np.array_equal(md.missing, md2.missing)
        assert np.allclose(md.x[~md.missing], md2.x[~md2.missing])


def test_constant_column():
    md = constant_column(5)
    assert md.K == 1
    assert md.codes.tolist() == [0] * 5


def test_discrete_column_validates_codes():
    with pytest.raises(MetadataError):
        discrete_column([0, 3], ("a", "b"))
