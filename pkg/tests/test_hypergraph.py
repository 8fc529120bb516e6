"""Conflict hypergraph construction, truncation, incidence, serialization."""

import itertools

import numpy as np
import pytest

from optloss.data import from_arrays
from optloss.geometry import neighborhoods_intersect
from optloss.hypergraph import (
    build_conflict_graph,
    extend_hyperedges,
    graph_from_json,
    graph_to_json,
    incidence,
)
from optloss.lp_core import PackingLp, solve_packing


def random_dataset(rng, n, k, d, spread=1.0):
    pts = rng.normal(size=(n, d)) * spread
    labels = rng.integers(0, k, size=n)
    labels[:k] = np.arange(k)  # every class present
    return from_arrays(pts, labels, merge_duplicates=False)


def triangle_dataset(side=1.0, masses=None):
    pts = side * np.array([(0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3) / 2)])
    return from_arrays(pts, [0, 1, 2], masses=masses)


def test_collinear_chain_edges():
    eps = 0.4
    pts = [(0.0, 0.0), (2 * eps, 0.0), (4 * eps, 0.0)]
    graph = build_conflict_graph(from_arrays(pts, [0, 1, 2]), eps)
    assert [e.vertex_ids for e in graph.edges] == [(0, 1), (1, 2)]
    for e in graph.edges:
        assert np.allclose(
            e.witness, (np.array(pts[e.vertex_ids[0]]) + pts[e.vertex_ids[1]]) / 2
        )


def test_zero_epsilon_distinct_points_no_edges():
    graph = build_conflict_graph(from_arrays([(0.0, 0.0), (0.1, 0.0)], [0, 1]), 0.0)
    assert graph.edges == []


def test_zero_epsilon_identical_points_different_labels_edge():
    graph = build_conflict_graph(from_arrays([(0.5, 0.5), (0.5, 0.5)], [0, 1]), 0.0)
    assert [e.vertex_ids for e in graph.edges] == [(0, 1)]


def test_same_class_pair_never_an_edge():
    graph = build_conflict_graph(
        from_arrays([(0.0, 0.0), (0.05, 0.0)], [1, 1], merge_duplicates=False), 0.5
    )
    assert graph.edges == []


def test_degree2_edges_match_bruteforce_double_loop():
    rng = np.random.default_rng(12)
    for _ in range(20):
        ds = random_dataset(rng, n=int(rng.integers(3, 25)), k=3, d=2)
        eps = float(rng.uniform(0.1, 1.5))
        graph = build_conflict_graph(ds, eps)
        expected = set()
        for i in range(ds.num_points):
            for j in range(i + 1, ds.num_points):
                if ds.labels[i] != ds.labels[j] and np.linalg.norm(
                    ds.points[i] - ds.points[j]
                ) <= 2 * eps * (1 + 1e-9):
                    expected.add((i, j))
        assert {e.vertex_ids for e in graph.edges} == expected


def test_tight_triple_has_degree3_edge():
    graph = build_conflict_graph(triangle_dataset(), 0.6)
    graph = extend_hyperedges(graph, 3)
    assert graph.edge_counts() == {2: 3, 3: 1}
    e3 = graph.edges_of_degree(3)[0]
    assert e3.vertex_ids == (0, 1, 2)
    assert np.linalg.norm(triangle_dataset().points - e3.witness, axis=1).max() <= 0.6 * (1 + 1e-9)


def test_loose_triple_has_no_degree3_edge():
    graph = build_conflict_graph(triangle_dataset(), 0.55)
    graph = extend_hyperedges(graph, 3)
    assert graph.edge_counts() == {2: 3}


def test_two_classes_cap_hyperedge_degree():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, n=12, k=2, d=2, spread=0.3)
    graph = extend_hyperedges(build_conflict_graph(ds, 1.0), 4)
    assert all(len(e.vertex_ids) <= 2 for e in graph.edges)


def test_downward_closure_of_stored_edges():
    rng = np.random.default_rng(23)
    for _ in range(10):
        ds = random_dataset(rng, n=14, k=4, d=2, spread=0.6)
        eps = float(rng.uniform(0.3, 0.9))
        graph = extend_hyperedges(build_conflict_graph(ds, eps), 4)
        edge_sets = {e.vertex_ids for e in graph.edges}
        for e in graph.edges:
            k = len(e.vertex_ids)
            if k < 3:
                continue
            for sub in itertools.combinations(e.vertex_ids, k - 1):
                assert sub in edge_sets
                ok, _ = neighborhoods_intersect(ds.points[list(sub)], eps)
                assert ok


def test_edge_counts_monotone_in_epsilon():
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, n=16, k=3, d=2, spread=0.7)
    previous = None
    for eps in (0.2, 0.4, 0.6, 0.8):
        graph = extend_hyperedges(build_conflict_graph(ds, eps), 3)
        counts = graph.edge_counts()
        total = sum(counts.values())
        if previous is not None:
            assert total >= previous
        previous = total


def test_incidence_triangle_rows():
    graph = build_conflict_graph(triangle_dataset(), 0.55)
    inc = incidence(graph, dedupe_dominated=True)
    dense = inc.matrix.toarray()
    assert dense.shape == (3, 3)
    assert (dense.sum(axis=1) == 2).all()


def test_incidence_dedupe_drops_dominated_rows():
    graph = extend_hyperedges(build_conflict_graph(triangle_dataset(), 0.6), 3)
    deduped = incidence(graph, dedupe_dominated=True)
    full = incidence(graph, dedupe_dominated=False)
    assert deduped.matrix.shape[0] == 1
    assert full.matrix.shape[0] == 4
    assert graph.edges[deduped.edge_ids[0]].vertex_ids == (0, 1, 2)


def test_incidence_empty_edges_yields_full_packing():
    ds = from_arrays([(0.0, 0.0), (5.0, 0.0)], [0, 1])
    graph = build_conflict_graph(ds, 0.1)
    inc = incidence(graph)
    assert inc.matrix.shape == (0, 2)
    sol = solve_packing(PackingLp(graph.masses, inc))
    assert np.allclose(sol.q, 1.0)
    assert sol.loss == pytest.approx(0.0, abs=1e-12)


def test_dedupe_does_not_change_lp_optimum():
    rng = np.random.default_rng(77)
    for _ in range(10):
        ds = random_dataset(rng, n=int(rng.integers(6, 30)), k=3, d=2, spread=0.5)
        eps = float(rng.uniform(0.3, 0.8))
        graph = extend_hyperedges(build_conflict_graph(ds, eps), 3)
        sol_a = solve_packing(PackingLp(graph.masses, incidence(graph, True)))
        sol_b = solve_packing(PackingLp(graph.masses, incidence(graph, False)))
        assert sol_a.objective == pytest.approx(sol_b.objective, abs=1e-8)


def test_parallel_extension_matches_sequential():
    rng = np.random.default_rng(6)
    ds = random_dataset(rng, n=30, k=4, d=2, spread=0.5)
    graph = build_conflict_graph(ds, 0.7)
    seq = extend_hyperedges(graph, 4, jobs=1, batch_size=8)
    par = extend_hyperedges(graph, 4, jobs=4, batch_size=8)
    assert [e.vertex_ids for e in seq.edges] == [e.vertex_ids for e in par.edges]


def test_progress_callback_reports_candidates():
    rng = np.random.default_rng(8)
    ds = random_dataset(rng, n=24, k=3, d=2, spread=0.3)
    seen = []
    extend_hyperedges(build_conflict_graph(ds, 1.0), 3, progress=seen.append, batch_size=4)
    assert seen and seen[-1] == max(seen)


def test_json_round_trip():
    graph = extend_hyperedges(build_conflict_graph(triangle_dataset(), 0.6), 3)
    restored = graph_from_json(graph_to_json(graph))
    assert restored.epsilon == graph.epsilon
    assert restored.max_degree == graph.max_degree
    assert [v.id for v in restored.vertices] == [v.id for v in graph.vertices]
    assert [v.label for v in restored.vertices] == [v.label for v in graph.vertices]
    assert np.allclose(
        [v.mass for v in restored.vertices], [v.mass for v in graph.vertices]
    )
    assert [e.vertex_ids for e in restored.edges] == [e.vertex_ids for e in graph.edges]
    # the imported structure supports LP assembly directly
    sol = solve_packing(PackingLp(restored.masses, incidence(restored)))
    assert sol.loss == pytest.approx(2 / 3, abs=1e-8)


def test_imported_graph_cannot_extend_without_coordinates():
    graph = build_conflict_graph(triangle_dataset(), 0.6)
    restored = graph_from_json(graph_to_json(graph))
    with pytest.raises(ValueError, match="no point coordinates"):
        extend_hyperedges(restored, 3)


def test_empty_dataset_rejected():
    ds = from_arrays([(0.0, 0.0)], [0])
    ds.points = ds.points[:0]
    ds.labels = ds.labels[:0]
    ds.masses = ds.masses[:0]
    with pytest.raises(ValueError):
        build_conflict_graph(ds, 1.0)
