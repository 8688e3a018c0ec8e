import os

import numpy as np
import pytest

from jorcumap.dataio import PointCloud
from jorcumap.neighbors import FuzzyGraph

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def digits_csv():
    return os.path.join(FIXTURES, "digits_1000.csv")


def make_path_graph(spacing=1.0):
    """4 collinear points a-b-c-d with unit-weight edges along the path."""
    pts = np.array([[0.0], [1.0], [2.0], [3.0]]) * spacing
    cloud = PointCloud(pts)
    graph = FuzzyGraph(4, np.array([0, 1, 2]), np.array([1, 2, 3]), np.ones(3))
    return cloud, graph


def make_triangle_graph():
    """Unit equilateral triangle, all edges weight 1."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    cloud = PointCloud(pts)
    graph = FuzzyGraph(3, np.array([0, 0, 1]), np.array([1, 2, 2]), np.ones(3))
    return cloud, graph


def random_weighted_graph(rng, max_nodes=12):
    """Connected random graph on random planar points with random weights."""
    n = int(rng.integers(4, max_nodes + 1))
    pts = rng.normal(0.0, 1.0, (n, 2))
    edges = {(i, i + 1) for i in range(n - 1)}
    for _ in range(n):
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    edges = sorted(edges)
    ei = np.array([e[0] for e in edges])
    ej = np.array([e[1] for e in edges])
    w = rng.uniform(0.05, 1.0, len(edges))
    return PointCloud(pts), FuzzyGraph(n, ei, ej, w)


def dijkstra_oracle(n, edges, source):
    """Plain heapq Dijkstra over (i, j, length) edges; independent of the
    library's shortest-path machinery."""
    import heapq

    adj = {v: [] for v in range(n)}
    for i, j, length in edges:
        adj[i].append((j, length))
        adj[j].append((i, length))
    dist = {source: 0.0}
    heap = [(0.0, source)]
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        for v, length in adj[u]:
            nd = d + length
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist
