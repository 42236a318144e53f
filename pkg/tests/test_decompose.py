from fractions import Fraction as F
from itertools import combinations

from spanflow.decompose import (Decomposer, classify, contract, cost,
                                expected_cost, sample_decomposition,
                                type1_metric, type2_metric, type3_metric)
from spanflow.graphs import TerminalGraph, project_graph, terminal_metric
from spanflow.metric import TerminalMetric
from spanflow.tightspan import enumerate_complex

from conftest import graph_from_metric, rand_metric


def rand_fr(rng, lo=1, hi=6):
    return F(rng.randint(lo * 4, hi * 4), 4)


def rand_type1(rng):
    pend = {t: rand_fr(rng) for t in "abcde"}
    sides = {("a", "b"): rand_fr(rng), ("b", "c"): rand_fr(rng),
             ("c", "d"): rand_fr(rng), ("d", "e"): rand_fr(rng),
             ("e", "a"): rand_fr(rng)}
    return pend, sides, type1_metric(pend, sides)


def rand_type2(rng):
    w, h = rand_fr(rng, 6, 9), rand_fr(rng, 6, 9)
    p, q, f = rand_fr(rng, 1, 2), rand_fr(rng, 1, 2), rand_fr(rng, 1, 2)
    pend = {t: rand_fr(rng) for t in "abcde"}
    return (w, h, p, q, f, pend), type2_metric(w, h, p, q, f, pend)


def rand_type3(rng):
    bands = [rand_fr(rng) for _ in range(4)] + [rand_fr(rng, 1, 2)]
    pend = {t: rand_fr(rng) for t in "abcde"}
    return (bands, pend), type3_metric(*bands, pend)


def test_classify_type1_roundtrip(rng):
    for _ in range(5):
        pend, sides, m = rand_type1(rng)
        tpl = classify(enumerate_complex(m))
        assert tpl.tag == "type1"
        for t in "abcde":
            assert tpl.params[f"pendant_{t}"] == pend[t]
        for (a, b), v in sides.items():
            assert tpl.params[f"side_{min(a,b)}_{max(a,b)}"] == v
        # the discovered cycle is the built one up to rotation/reflection
        cyc = list(tpl.cycle)
        doubled = cyc + cyc
        seqs = ["".join(doubled[i:i + 5]) for i in range(5)]
        rev = cyc[::-1] + cyc[::-1]
        seqs += ["".join(rev[i:i + 5]) for i in range(5)]
        assert "abcde" in seqs


def test_classify_type2_roundtrip(rng):
    for _ in range(5):
        (w, h, p, q, f, pend), m = rand_type2(rng)
        tpl = classify(enumerate_complex(m))
        assert tpl.tag == "type2"
        assert tpl.params["fold"] == f
        for t in "abcde":
            assert tpl.params[f"pendant_{t}"] == pend[t]
        bands = {tuple(sorted((tpl.params["x_band_0"], tpl.params["x_band_2"]))),
                 tuple(sorted((tpl.params["y_band_0"], tpl.params["y_band_2"])))}
        expect = {tuple(sorted((p, w - p - f))), tuple(sorted((q, h - q - f)))}
        assert bands == expect
        assert tpl.params["x_band_1"] == f and tpl.params["y_band_1"] == f


def test_classify_type3_roundtrip(rng):
    for _ in range(5):
        (bands, pend), m = rand_type3(rng)
        x_lo, x_hi, y_lo, y_hi, f = bands
        tpl = classify(enumerate_complex(m))
        assert tpl.tag == "type3"
        assert tpl.params["fold"] == f
        for t in "abcde":
            assert tpl.params[f"pendant_{t}"] == pend[t]
        got = {tuple(sorted((tpl.params["x_band_0"], tpl.params["x_band_2"]))),
               tuple(sorted((tpl.params["y_band_0"], tpl.params["y_band_2"])))}
        assert got == {tuple(sorted((x_lo, x_hi))), tuple(sorted((y_lo, y_hi)))}


def test_classify_path_metric_degenerate():
    m = TerminalMetric.from_pairs(
        {(a, b): abs(ord(a) - ord(b)) for a, b in combinations("abcde", 2)})
    tpl = classify(enumerate_complex(m))
    assert tpl.tag == "degenerate"
    assert all(c.dim <= 1 for c in enumerate_complex(m).cells)


def test_sampler_terminal_exactness_and_bounds(rng):
    bounds = {"type1": 16, "type2": 22, "type3": 21}
    builders = [rand_type1, rand_type2, rand_type3]
    for builder in builders:
        m = builder(rng)[-1]
        g = graph_from_metric(m, 6, rng)
        emb = project_graph(g)
        dec = Decomposer(emb)
        bound = bounds[dec.template.tag]
        for seed in range(120):
            sol = dec.solution(seed)
            assert sol.size() <= bound
            assert sol.size() <= 30
            for t, u in combinations(m.terminals, 2):
                ci = sol.cluster_of(g.terminals[t])
                cj = sol.cluster_of(g.terminals[u])
                assert sol.delta(ci, cj) == m.d(t, u)


def test_sampler_exactness_random_metrics(rng):
    # arbitrary metrics may be degenerate; exactness and the 30 bound must hold
    for _ in range(10):
        m = rand_metric(rng, rng.randint(2, 5))
        g = graph_from_metric(m, 4, rng)
        emb = project_graph(g)
        dec = Decomposer(emb)
        for seed in range(40):
            sol = dec.solution(seed)
            assert sol.size() <= 30
            for t, u in combinations(m.terminals, 2):
                ci = sol.cluster_of(g.terminals[t])
                cj = sol.cluster_of(g.terminals[u])
                assert sol.delta(ci, cj) == m.d(t, u)


def _graph_with_points(m, points):
    ts_names = list(m.terminals)
    verts = list(ts_names)
    edges = [(a, b, F(1), m.d(a, b)) for a, b in combinations(ts_names, 2)]
    for i, p in enumerate(points):
        vid = f"w{i}"
        verts.append(vid)
        for t in ts_names:
            edges.append((vid, t, F(1), p[t]))
    return TerminalGraph(vertices=verts, edges=edges, terminals={t: t for t in ts_names})


def test_boundary_points_exact(rng):
    # vertices placed exactly on cell vertices, midpoints, and the fold
    from spanflow.decompose import _PlanarModel
    cases = [
        ("type2", type2_metric(F(7), F(6), F(2), F(1), F(3, 2),
                               {t: F(2) for t in "abcde"}), 22),
        ("type3", type3_metric(F(2), F(3), F(1), F(2), F(3, 2),
                               {t: F(1) for t in "abcde"}), 21),
        ("type1", type1_metric({t: F(1) for t in "abcde"},
                               {("a", "b"): F(2), ("b", "c"): F(1), ("c", "d"): F(3),
                                ("d", "e"): F(2), ("e", "a"): F(1)}), 16),
    ]
    for tag, m, bound in cases:
        base = Decomposer(project_graph(_graph_with_points(m, [])))
        assert base.template.tag == tag
        cx = base.complex
        pts = list(cx.vertices)
        for cell in cx.cells:
            ids = cell.vertex_ids
            pts.append({t: sum(cx.vertices[i][t] for i in ids) / len(ids)
                        for t in m.terminals})
        if isinstance(base.model, _PlanarModel) and base.model.fold:
            i, j = base.model.fold
            a, b = cx.vertices[i], cx.vertices[j]
            pts.append({t: (a[t] + b[t]) / 2 for t in m.terminals})
        emb = project_graph(_graph_with_points(m, pts))
        for i, p in enumerate(pts):
            assert emb.points[f"w{i}"] == p
        dec = Decomposer(emb)
        for seed in range(300):
            assign = dec.assignment_ids(seed)
            assert len(set(assign.values())) <= bound
        rep = expected_cost(emb, 1200, master_seed=11, per_edge=True)
        for st in rep.per_edge:
            assert float(st.mean_delta) <= float(st.embed_dist) + 3 * st.stderr + 1e-12


def test_embedding_mismatch_rejected(rng):
    m = rand_metric(rng, 4)
    g = graph_from_metric(m, 2, rng)
    emb = project_graph(g)
    other = rand_metric(rng, 4)
    emb.metric = other  # rows no longer match the embedded terminals
    import pytest
    from spanflow.metric import MetricError
    with pytest.raises(MetricError):
        Decomposer(emb)


def test_expected_cost_nonexpansion_small(rng):
    for builder in (rand_type1, rand_type2, rand_type3):
        m = builder(rng)[-1]
        g = graph_from_metric(m, 5, rng)
        emb = project_graph(g)
        rep = expected_cost(emb, 2000, master_seed=42, per_edge=True)
        assert float(rep.mean_vol) <= float(rep.opt) + 3 * rep.stderr
        for st in rep.per_edge:
            slack = 3 * st.stderr + 1e-12
            assert float(st.mean_delta) <= float(st.embed_dist) + slack


def test_expected_cost_deterministic(rng):
    m = rand_type1(rng)[-1]
    g = graph_from_metric(m, 4, rng)
    emb = project_graph(g)
    r1 = expected_cost(emb, 50, master_seed=7)
    r2 = expected_cost(emb, 50, master_seed=7)
    assert r1.mean_vol == r2.mean_vol
    r3 = expected_cost(emb, 50, master_seed=8)
    assert r3.mean_vol != r1.mean_vol  # overwhelmingly likely


def test_zero_edge_graph():
    g = TerminalGraph(vertices=["a", "b"], edges=[],
                      terminals={"a": "a", "b": "b"})
    g.edges.append(("a", "b", F(1), F(1)))  # connectivity for embedding
    g2 = TerminalGraph(vertices=["a", "b"], edges=g.edges, terminals=g.terminals)
    emb = project_graph(g2)
    emb.graph.edges[:] = []
    rep = expected_cost(emb, 10, master_seed=0)
    assert rep.mean_vol == 0 and rep.opt == 0


def test_cost_terminal_only_ratio_one(rng):
    m = rand_metric(rng, 5)
    g = TerminalGraph(vertices=list(m.terminals),
                      edges=[(t, u, F(1), m.d(t, u))
                             for t, u in combinations(m.terminals, 2)],
                      terminals={t: t for t in m.terminals})
    emb = project_graph(g)
    sol = sample_decomposition(emb, 3)
    assert sol.size() == 5
    report = cost(emb, sol)
    assert report.vol == report.opt and report.ratio == 1


def test_cost_singleton_partition_le_opt(rng):
    m = rand_type2(rng)[-1]
    g = graph_from_metric(m, 4, rng)
    emb = project_graph(g)
    # singleton partition: every vertex its own cluster at its projected point
    from spanflow.decompose import Cluster, Solution
    clusters = []
    by_vertex = {}
    for i, v in enumerate(g.vertices):
        label = f"t:{v}" if v in m.terminals else f"s{i}"
        clusters.append(Cluster(label=label, vertices=[v], rep=emb.points[v]))
        by_vertex[v] = i
    sol = Solution(metric=m, clusters=clusters, by_vertex=by_vertex)
    report = cost(emb, sol)
    assert report.vol <= report.opt


def test_contract_identity_on_singletons(rng):
    m = rand_metric(rng, 4)
    g = graph_from_metric(m, 3, rng)
    emb = project_graph(g)
    from spanflow.decompose import Cluster, Solution
    clusters, by_vertex = [], {}
    for i, v in enumerate(g.vertices):
        clusters.append(Cluster(label=f"c{i}", vertices=[v], rep=emb.points[v]))
        by_vertex[v] = i
    sol = Solution(metric=m, clusters=clusters, by_vertex=by_vertex)
    h = contract(g, sol)
    assert len(h.vertices) == len(g.vertices)
    assert len(h.edges) == len(g.edges)


def test_contract_drops_self_loops():
    g = TerminalGraph(vertices=["a", "u", "b"],
                      edges=[("a", "u", F(1), F(1)), ("u", "b", F(2), F(1))],
                      terminals={"a": "a", "b": "b"})
    m = terminal_metric(g)
    from spanflow.decompose import Cluster, Solution
    sol = Solution(metric=m, clusters=[
        Cluster(label="t:a", vertices=["a", "u"], rep=m.row("a")),
        Cluster(label="t:b", vertices=["b"], rep=m.row("b")),
    ], by_vertex={"a": 0, "u": 0, "b": 1})
    h = contract(g, sol)
    assert len(h.edges) == 1
    assert h.edges[0].capacity == 2
    assert set(h.terminals.values()) == {"t:a", "t:b"}


def test_contract_capacity_conservation(rng):
    m = rand_metric(rng, 4)
    g = graph_from_metric(m, 4, rng)
    emb = project_graph(g)
    dec = Decomposer(emb)
    for seed in range(10):
        sol = dec.solution(seed)
        h = contract(g, sol)
        intra = sum((e.capacity for e in g.edges
                     if sol.cluster_of(e.u) == sol.cluster_of(e.v)), F(0))
        total_g = sum((e.capacity for e in g.edges), F(0))
        total_h = sum((e.capacity for e in h.edges), F(0))
        assert total_h == total_g - intra


def test_contract_keeps_parallel_edges():
    g = TerminalGraph(vertices=["a", "b"],
                      edges=[("a", "b", F(1), F(2)), ("a", "b", F(3), F(2))],
                      terminals={"a": "a", "b": "b"})
    m = terminal_metric(g)
    from spanflow.decompose import Cluster, Solution
    sol = Solution(metric=m, clusters=[
        Cluster(label="t:a", vertices=["a"], rep=m.row("a")),
        Cluster(label="t:b", vertices=["b"], rep=m.row("b")),
    ], by_vertex={"a": 0, "b": 1})
    h = contract(g, sol)
    assert len(h.edges) == 2
    assert all(e.length == 2 for e in h.edges)
