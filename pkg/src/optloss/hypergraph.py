"""Conflict hypergraph construction.

Vertices are the support points of a labeled distribution. A set of
vertices with pairwise-distinct labels forms a hyperedge when the closed
epsilon-neighborhoods of all its points share a common point, i.e. when
the minimum enclosing ball of the points has radius at most epsilon.
The edge set is downward closed, which drives the candidate enumeration:
a k-set is only tested when all of its (k-1)-subsets are already edges.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import (
    REL_TOL,
    circumradius_batch,
    min_enclosing_ball,
    squared_distance_matrix,
)

__all__ = [
    "Vertex",
    "Hyperedge",
    "ConflictHypergraph",
    "IncidenceMatrix",
    "build_conflict_graph",
    "extend_hyperedges",
    "incidence",
    "graph_to_json",
    "graph_from_json",
]

# Keep the full pairwise distance matrix cached only below this vertex count.
_DENSE_CACHE_LIMIT = 8192


@dataclass(frozen=True)
class Vertex:
    id: int
    point: np.ndarray | None
    label: int
    mass: float


@dataclass(frozen=True)
class Hyperedge:
    vertex_ids: tuple[int, ...]
    witness: np.ndarray | None
    radius: float | None = None  # enclosing-ball radius used for the test


@dataclass
class ConflictHypergraph:
    vertices: list[Vertex]
    edges: list[Hyperedge]
    max_degree: int
    epsilon: float
    _d2_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def masses(self) -> np.ndarray:
        return np.array([v.mass for v in self.vertices])

    @property
    def labels(self) -> np.ndarray:
        return np.array([v.label for v in self.vertices])

    def points(self) -> np.ndarray:
        if any(v.point is None for v in self.vertices):
            raise ValueError("hypergraph has no point coordinates (imported from JSON?)")
        return np.vstack([v.point for v in self.vertices])

    def edge_counts(self) -> dict[int, int]:
        """Number of stored hyperedges of each exact degree (dominated included)."""
        counts: dict[int, int] = {}
        for e in self.edges:
            counts[len(e.vertex_ids)] = counts.get(len(e.vertex_ids), 0) + 1
        return counts

    def edges_of_degree(self, k: int) -> list[Hyperedge]:
        return [e for e in self.edges if len(e.vertex_ids) == k]

    def adjacency_sets(self) -> list[set[int]]:
        """Neighbor sets in the degree-2 graph."""
        adj: list[set[int]] = [set() for _ in self.vertices]
        for e in self.edges:
            if len(e.vertex_ids) == 2:
                u, v = e.vertex_ids
                adj[u].add(v)
                adj[v].add(u)
        return adj

    def adjacency_matrix(self) -> sp.csr_matrix:
        """0/1 adjacency matrix of the degree-2 graph."""
        rows, cols = [], []
        for e in self.edges:
            if len(e.vertex_ids) == 2:
                u, v = e.vertex_ids
                rows += [u, v]
                cols += [v, u]
        n = self.num_vertices
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def boundary_tight_count(self, rel_tol: float = 1e-9) -> int:
        """Edges whose deciding ball radius sits within rel_tol of epsilon."""
        if self.epsilon == 0:
            return sum(1 for e in self.edges if e.radius is not None and e.radius == 0.0)
        return sum(
            1
            for e in self.edges
            if e.radius is not None
            and abs(e.radius - self.epsilon) <= rel_tol * self.epsilon
        )


@dataclass
class IncidenceMatrix:
    """Sparse hyperedge-vertex incidence: one row per retained hyperedge."""

    matrix: sp.csr_matrix
    edge_ids: list[int]  # row -> index into the source graph's edge list


def _pair_distance_cache(points: np.ndarray) -> np.ndarray | None:
    if points.shape[0] <= _DENSE_CACHE_LIMIT:
        return squared_distance_matrix(points)
    return None


def build_conflict_graph(dataset, epsilon: float, block_size: int = 2048) -> ConflictHypergraph:
    """Degree-2 conflict graph: cross-class pairs at distance <= 2*epsilon.

    The witness of each pair edge is the midpoint of the two points. Uses a
    blocked all-pairs sweep; no spatial index, distances are exact.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    points = np.asarray(dataset.points, dtype=float)
    labels = np.asarray(dataset.labels)
    masses = np.asarray(dataset.masses, dtype=float)
    n = points.shape[0]
    if n == 0:
        raise ValueError("empty dataset")

    vertices = [Vertex(i, points[i], int(labels[i]), float(masses[i])) for i in range(n)]
    threshold = (2.0 * epsilon * (1.0 + REL_TOL)) ** 2
    sq = np.einsum("ij,ij->i", points, points)

    edges: list[Hyperedge] = []
    for i0 in range(0, n, block_size):
        i1 = min(i0 + block_size, n)
        for j0 in range(i0, n, block_size):
            j1 = min(j0 + block_size, n)
            d2 = (
                sq[i0:i1, None]
                + sq[None, j0:j1]
                - 2.0 * (points[i0:i1] @ points[j0:j1].T)
            )
            np.maximum(d2, 0.0, out=d2)
            ii, jj = np.nonzero(d2 <= threshold)
            gi = ii + i0
            gj = jj + j0
            keep = (gi < gj) & (labels[gi] != labels[gj])
            for a, b in zip(gi[keep], gj[keep]):
                witness = (points[a] + points[b]) / 2.0
                radius = float(np.linalg.norm(points[a] - points[b]) / 2.0)
                edges.append(Hyperedge((int(a), int(b)), witness, radius))

    edges.sort(key=lambda e: e.vertex_ids)
    graph = ConflictHypergraph(vertices, edges, max_degree=2, epsilon=float(epsilon))
    graph._d2_cache = _pair_distance_cache(points)
    return graph


def _candidate_sets(edges_prev: list[Hyperedge], adj: list[set[int]]):
    """Extend each (k-1)-edge by common neighbors with id above its maximum.

    Each k-set is produced exactly once, from its (k-1)-prefix.
    """
    for e in edges_prev:
        ids = e.vertex_ids
        common = adj[ids[0]]
        for v in ids[1:]:
            common = common & adj[v]
            if not common:
                break
        top = ids[-1]
        for u in sorted(common):
            if u > top:
                yield ids + (u,)


def _test_candidate_batch(cands: np.ndarray, points: np.ndarray, epsilon: float,
                          d2_cache: np.ndarray | None):
    """Geometric hyperedge test for an array of candidate id tuples.

    Fast path: batched circumradius. Candidates the batch cannot settle
    (no certified circumsphere, or circumradius above epsilon with negative
    weights so the true enclosing ball may be smaller) are retested with the
    exact per-candidate enclosing-ball routine.
    """
    eps_tol = epsilon * (1.0 + REL_TOL)
    if d2_cache is not None:
        d2 = d2_cache[cands[:, :, None], cands[:, None, :]]
    else:
        pts = points[cands]  # (B, k, d)
        gram = np.einsum("bij,bkj->bik", pts, pts)
        sq = np.einsum("bii->bi", gram)
        d2 = sq[:, :, None] + sq[:, None, :] - 2.0 * gram
        np.maximum(d2, 0.0, out=d2)
    radii, alphas, ok = circumradius_batch(d2)

    accepted: list[tuple[tuple[int, ...], np.ndarray, float]] = []
    for i in range(cands.shape[0]):
        ids = tuple(int(v) for v in cands[i])
        if ok[i] and radii[i] <= eps_tol:
            # the circumcenter is equidistant from all members at radius <= eps
            witness = alphas[i] @ points[cands[i]]
            accepted.append((ids, witness, float(radii[i])))
        elif ok[i] and alphas[i].min() >= -1e-12:
            continue  # circumsphere is the enclosing ball and it is too large
        else:
            ball = min_enclosing_ball(points[cands[i]])
            if ball.radius <= eps_tol:
                accepted.append((ids, ball.center, ball.radius))
    return accepted


def extend_hyperedges(graph: ConflictHypergraph, m: int, jobs: int = 1,
                      progress=None, batch_size: int = 4096) -> ConflictHypergraph:
    """Add all hyperedges of degree up to m to a graph holding lower degrees.

    Candidates of degree k are generated from degree k-1 edges restricted to
    common neighbors in the degree-2 graph (downward-closure pruning) and then
    tested geometrically. Candidate batches may be tested on a thread pool
    (``jobs``); results are merged and sorted so the output is independent of
    scheduling. ``progress`` is called with the cumulative candidate count.
    """
    if m < 2:
        raise ValueError("max degree m must be >= 2")
    if graph.max_degree >= m:
        return graph
    points = graph.points()
    adj = graph.adjacency_sets()
    d2_cache = graph._d2_cache
    if d2_cache is None:
        d2_cache = _pair_distance_cache(points)

    edges = list(graph.edges)
    edge_sets = {frozenset(e.vertex_ids) for e in edges}
    tested = 0

    for k in range(graph.max_degree + 1, m + 1):
        prev = [e for e in edges if len(e.vertex_ids) == k - 1]
        new_edges: list[Hyperedge] = []
        batch: list[tuple[int, ...]] = []
        pending: list[np.ndarray] = []

        for cand in _candidate_sets(prev, adj):
            # downward closure: every (k-1)-subset must already be an edge
            if all(
                frozenset(cand[:j] + cand[j + 1:]) in edge_sets
                for j in range(len(cand) - 1)
            ):
                batch.append(cand)
                if len(batch) >= batch_size:
                    pending.append(np.array(batch, dtype=np.int64))
                    batch = []
        if batch:
            pending.append(np.array(batch, dtype=np.int64))

        def run(arr):
            return _test_candidate_batch(arr, points, graph.epsilon, d2_cache)

        if jobs > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run, pending))
        else:
            results = [run(arr) for arr in pending]

        for arr, res in zip(pending, results):
            tested += arr.shape[0]
            for ids, witness, radius in res:
                new_edges.append(Hyperedge(ids, witness, radius))
            if progress is not None:
                progress(tested)

        new_edges.sort(key=lambda e: e.vertex_ids)
        edges.extend(new_edges)
        edge_sets.update(frozenset(e.vertex_ids) for e in new_edges)

    edges.sort(key=lambda e: (len(e.vertex_ids), e.vertex_ids))
    out = ConflictHypergraph(graph.vertices, edges, max_degree=m, epsilon=graph.epsilon)
    out._d2_cache = d2_cache
    return out


def incidence(graph: ConflictHypergraph, dedupe_dominated: bool = True) -> IncidenceMatrix:
    """Hyperedge-vertex incidence matrix.

    With ``dedupe_dominated`` every edge whose vertex set is a proper subset
    of another edge's is dropped: its packing constraint is implied by the
    superset row, so the LP optimum is unchanged.
    """
    n = graph.num_vertices
    dominated: set[frozenset[int]] = set()
    if dedupe_dominated:
        from itertools import combinations

        for e in graph.edges:
            ids = e.vertex_ids
            if len(ids) < 3:
                continue
            for size in range(2, len(ids)):
                for sub in combinations(ids, size):
                    dominated.add(frozenset(sub))

    rows: list[int] = []
    cols: list[int] = []
    edge_ids: list[int] = []
    r = 0
    for idx, e in enumerate(graph.edges):
        if dedupe_dominated and frozenset(e.vertex_ids) in dominated:
            continue
        for v in e.vertex_ids:
            rows.append(r)
            cols.append(v)
        edge_ids.append(idx)
        r += 1
    matrix = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(r, n)
    )
    return IncidenceMatrix(matrix=matrix, edge_ids=edge_ids)


def graph_to_json(graph: ConflictHypergraph) -> str:
    """Serialize structure (not coordinates) for reuse across bound runs."""
    doc = {
        "epsilon": graph.epsilon,
        "max_degree": graph.max_degree,
        "vertices": [
            {"id": v.id, "label": v.label, "mass": v.mass} for v in graph.vertices
        ],
        "edges": [list(e.vertex_ids) for e in graph.edges],
    }
    return json.dumps(doc)


def graph_from_json(text: str) -> ConflictHypergraph:
    doc = json.loads(text)
    vertices = [
        Vertex(int(v["id"]), None, int(v["label"]), float(v["mass"]))
        for v in doc["vertices"]
    ]
    edges = [Hyperedge(tuple(int(i) for i in ids), None, None) for ids in doc["edges"]]
    edges.sort(key=lambda e: (len(e.vertex_ids), e.vertex_ids))
    return ConflictHypergraph(
        vertices=vertices,
        edges=edges,
        max_degree=int(doc["max_degree"]),
        epsilon=float(doc["epsilon"]),
    )
