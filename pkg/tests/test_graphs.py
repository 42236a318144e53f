from fractions import Fraction as F

import pytest

from spanflow.graphs import (GraphError, TerminalGraph, distance_vectors,
                             project_graph, shortest_distances, terminal_metric)
from spanflow.metric import is_valid_vector
from spanflow.tightspan import in_tight_span, ts_distance

from conftest import rand_connected_graph, rand_metric, graph_from_metric


def star():
    return TerminalGraph(
        vertices=["a", "b", "c", "o"],
        edges=[("a", "o", F(1), F(2)), ("b", "o", F(1), F(5)), ("c", "o", F(1), F(3))],
        terminals={"a": "a", "b": "b", "c": "c"})


def test_path_distance():
    g = TerminalGraph(vertices=["a", "u", "b"],
                      edges=[("a", "u", F(1), F(1)), ("u", "b", F(1), F(2))],
                      terminals={"a": "a", "b": "b"})
    assert shortest_distances(g, "a")["b"] == 3


def test_parallel_edges_take_shorter():
    g = TerminalGraph(vertices=["a", "b"],
                      edges=[("a", "b", F(1), F(5)), ("a", "b", F(1), F(2))],
                      terminals={"a": "a", "b": "b"})
    assert shortest_distances(g, "a")["b"] == 2


def test_triangle_shortcut():
    g = TerminalGraph(vertices=["a", "b", "c"],
                      edges=[("a", "b", F(1), F(1)), ("b", "c", F(1), F(1)),
                             ("a", "c", F(1), F(3))],
                      terminals={"a": "a", "c": "c"})
    assert shortest_distances(g, "a")["c"] == 2


def test_negative_length_rejected():
    with pytest.raises(GraphError):
        TerminalGraph(vertices=["a", "b"], edges=[("a", "b", F(1), F(-1))],
                      terminals={"a": "a", "b": "b"})


def test_terminal_metric_star_matches_example1():
    m = terminal_metric(star())
    assert m.d("a", "b") == 7
    assert m.d("a", "c") == 5
    assert m.d("b", "c") == 8


def test_terminal_metric_single_edge():
    g = TerminalGraph(vertices=["a", "b"], edges=[("a", "b", F(1), F(9, 2))],
                      terminals={"a": "a", "b": "b"})
    assert terminal_metric(g).d("a", "b") == F(9, 2)


def test_terminal_metric_disconnected_names_pair():
    g = TerminalGraph(vertices=["a", "b"], edges=[], terminals={"a": "a", "b": "b"})
    with pytest.raises(GraphError, match="a.*b|b.*a"):
        terminal_metric(g)


def test_subdivision_invariance(rng):
    for _ in range(10):
        g = rand_connected_graph(rng, 6, 4, ("s", "t", "w"))
        m1 = terminal_metric(g)
        edges = list(g.edges)
        e = edges.pop(rng.randrange(len(edges)))
        cut = F(rng.randint(1, 3), 4)
        mid = "mid"
        edges.append((e.u, mid, e.capacity, e.length * cut))
        edges.append((mid, e.v, e.capacity, e.length * (1 - cut)))
        g2 = TerminalGraph(vertices=g.vertices + [mid], edges=edges,
                           terminals=dict(g.terminals))
        assert terminal_metric(g2).matrix() == m1.matrix()


def test_distance_vectors_star():
    g = star()
    vecs = distance_vectors(g)
    assert vecs["o"] == {"a": 2, "b": 5, "c": 3}
    m = terminal_metric(g)
    for t in g.terminals:
        assert vecs[g.terminals[t]] == m.row(t)
    for v in g.vertices:
        assert is_valid_vector(m, vecs[v])


def test_project_graph_star_center():
    emb = project_graph(star())
    assert emb.points["o"] == {"a": 2, "b": 5, "c": 3}


def test_project_graph_identity_when_all_terminals():
    g = TerminalGraph(vertices=["a", "b", "c"],
                      edges=[("a", "b", F(1), F(2)), ("b", "c", F(1), F(2)),
                             ("a", "c", F(1), F(3))],
                      terminals={"a": "a", "b": "b", "c": "c"})
    emb = project_graph(g)
    for t in "abc":
        assert emb.points[t] == emb.metric.row(t)


def test_projection_chain_inequality(rng):
    for _ in range(8):
        m = rand_metric(rng, 5)
        g = graph_from_metric(m, 5, rng)
        emb = project_graph(g)
        vecs = distance_vectors(g)
        adj = g.adjacency()
        for u, v, _, length in g.edges:
            d_uv = shortest_distances(g, u, adj)[v]
            assert d_uv <= length
            assert ts_distance(vecs[u], vecs[v]) <= d_uv
            assert ts_distance(emb.points[u], emb.points[v]) <= ts_distance(vecs[u], vecs[v])
        for v in g.vertices:
            assert in_tight_span(emb.metric, emb.points[v])
