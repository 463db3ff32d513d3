import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffdlink.graph import (DirectedGraph, EdgeListError, SplitSpec, graph_from_pairs, load_edge_list,
                           load_split, reverse_view, save_edge_list, save_split, split, write_id_map)

from conftest import random_digraph


def edge_set(g):
    return {tuple(e) for e in g.edges.tolist()}


def test_load_simple_file(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0\t1\n1\t2\n")
    g = load_edge_list(p)
    assert g.num_nodes == 3
    assert edge_set(g) == {(0, 1), (1, 2)}
    assert g.node_ids is None


def test_load_empty_file(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("")
    g = load_edge_list(p)
    assert (g.num_nodes, g.num_edges) == (0, 0)


def test_load_comments_and_spaces(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# a comment\n0 1\n\n2\t0\n")
    assert edge_set(load_edge_list(p)) == {(0, 1), (2, 0)}


@pytest.mark.parametrize("line", ["0\n", "a\tb\n", "0\t1\t2\n", "-1\t2\n"])
def test_malformed_line_reports_line_number(tmp_path, line):
    p = tmp_path / "g.txt"
    p.write_text("0\t1\n" + line)
    with pytest.raises(EdgeListError, match=":2"):
        load_edge_list(p)


def test_loops_and_duplicates_dropped_with_warning(tmp_path, caplog):
    p = tmp_path / "g.txt"
    p.write_text("0\t1\n1\t1\n0\t1\n1\t0\n")
    with caplog.at_level(logging.WARNING):
        g = load_edge_list(p)
    assert g.edges.tolist() == [[0, 1], [1, 0]]
    text = caplog.text.lower()
    assert "self-loop" in text and "duplicate" in text


def test_sparse_ids_are_relabelled(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("10\t30\n30\t7\n")
    g = load_edge_list(p)
    assert g.num_nodes == 3
    assert g.node_ids is not None
    orig = {(int(g.node_ids[u]), int(g.node_ids[v])) for u, v in g.edges.tolist()}
    assert orig == {(10, 30), (30, 7)}
    write_id_map(g, tmp_path / "map.json")
    doc = json.loads((tmp_path / "map.json").read_text())
    assert sorted(doc["dense_to_original"]) == [7, 10, 30]


def test_constructor_rejects_bad_edges():
    with pytest.raises(ValueError):
        DirectedGraph(2, [(0, 0)])
    with pytest.raises(ValueError):
        DirectedGraph(2, [(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        DirectedGraph(2, [(0, 2)])


def test_save_load_roundtrip_keeps_isolated_nodes(tmp_path, rng):
    g = random_digraph(rng, 40, 60)
    g = DirectedGraph(45, g.edges)
    save_edge_list(g, tmp_path / "g.txt")
    assert load_edge_list(tmp_path / "g.txt") == g


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30), st.integers(0, 80))
def test_adjacency_views_agree(seed, n, m):
    g = random_digraph(np.random.default_rng(seed), n, m)
    outs = sum(len(g.out_adjacency(v)) for v in range(n))
    ins = sum(len(g.in_adjacency(v)) for v in range(n))
    assert outs == ins == g.num_edges
    from_out = {(u, int(v)) for u in range(n) for v in g.out_adjacency(u)}
    from_in = {(int(u), v) for v in range(n) for u in g.in_adjacency(v)}
    assert from_out == from_in == edge_set(g)
    for v in range(n):
        assert np.all(np.diff(g.out_adjacency(v)) > 0)
    assert g.average_degree == pytest.approx(g.num_edges / n)


def test_reverse_view_examples():
    assert edge_set(reverse_view(DirectedGraph(2, [(0, 1)]))) == {(1, 0)}
    g = DirectedGraph(3, [(0, 1), (1, 2)])
    assert edge_set(reverse_view(g)) == {(1, 0), (2, 1)}
    assert reverse_view(reverse_view(g)) == g


def test_has_edges_vectorised(rng):
    g = random_digraph(rng, 20, 50)
    src = rng.integers(0, 20, 200)
    dst = rng.integers(0, 20, 200)
    expect = [(int(a), int(b)) in edge_set(g) for a, b in zip(src, dst)]
    assert g.has_edges(src, dst).tolist() == expect


def test_symmetric_is_binary_and_symmetric(rng):
    g = random_digraph(rng, 15, 60)
    a = g.symmetric.toarray()
    assert np.array_equal(a, a.T)
    assert set(np.unique(a)) <= {0.0, 1.0}


def test_split_ten_edges():
    g = DirectedGraph(12, [(i, i + 1) for i in range(10)])
    train, test, observed = split(g, SplitSpec(0.5, seed=3))
    assert sum(p.label for p in train) == 5 and len(train) == 10
    assert sum(p.label for p in test) == 5 and len(test) == 10
    assert observed.num_edges == 5


def test_split_is_deterministic():
    g = random_digraph(np.random.default_rng(0), 50, 200)
    assert split(g, SplitSpec(0.5, 7))[:2] == split(g, SplitSpec(0.5, 7))[:2]
    assert split(g, SplitSpec(0.5, 7))[:2] != split(g, SplitSpec(0.5, 8))[:2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.3, 0.4, 0.5, 0.6]))
def test_split_invariants(seed, frac):
    g = random_digraph(np.random.default_rng(seed), 40, 150)
    train, test, observed = split(g, SplitSpec(frac, seed))
    tr_pos = {(p.src, p.dst) for p in train if p.label}
    te_pos = {(p.src, p.dst) for p in test if p.label}
    tr_neg = {(p.src, p.dst) for p in train if not p.label}
    te_neg = {(p.src, p.dst) for p in test if not p.label}
    assert tr_pos | te_pos == edge_set(g) and not tr_pos & te_pos
    assert len(tr_neg) == len(tr_pos) and len(te_neg) == len(te_pos)
    assert not tr_neg & te_neg
    for u, v in tr_neg | te_neg:
        assert u != v and not g.has_edge(u, v)
    assert edge_set(observed) == tr_pos
    assert observed.num_nodes == g.num_nodes


def test_split_rounding_on_cora_sized_graph():
    g = random_digraph(np.random.default_rng(1), 2707, 5430)
    assert g.num_edges == 5430
    train, test, _ = split(g, SplitSpec(0.5, 0))
    assert sum(p.label for p in train) == 2715
    assert sum(p.label for p in test) == 2715


def test_split_errors():
    small = DirectedGraph(10, [(i, i + 1) for i in range(9)])
    with pytest.raises(ValueError):
        split(small, SplitSpec(0.5, 0))
    g = DirectedGraph(12, [(i, i + 1) for i in range(10)])
    with pytest.raises(ValueError):
        split(g, SplitSpec(0.01, 0))
    with pytest.raises(ValueError):
        SplitSpec(0.0, 0)
    with pytest.raises(ValueError):
        SplitSpec(1.0, 0)


def test_split_json_roundtrip(tmp_path):
    g = random_digraph(np.random.default_rng(2), 30, 80)
    train, test, _ = split(g, SplitSpec(0.4, 5))
    save_split(tmp_path / "s.json", train, test, 5)
    doc = json.loads((tmp_path / "s.json").read_text())
    assert set(doc) == {"train_pos", "train_neg", "test_pos", "test_neg", "seed"}
    tr, te, seed = load_split(tmp_path / "s.json")
    assert (tr, te, seed) == (train, test, 5)


def test_graph_from_pairs_preserves_first_occurrence_order():
    g = graph_from_pairs([(0, 1), (2, 0), (0, 1), (1, 2)])
    assert g.edges.tolist() == [[0, 1], [2, 0], [1, 2]]
