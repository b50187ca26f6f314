import numpy as np
import pytest

from diffwalk.graph import build_graph


def random_connected_graph(rng: np.random.Generator, max_vertices=6, max_edges=8):
    """Random connected graph with 2..max_vertices vertices and at most
    max_edges edges (built from a random spanning tree plus extras)."""
    n = int(rng.integers(2, max_vertices + 1))
    names = [chr(ord("a") + i) for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add(tuple(sorted((names[i], names[j]))))
    pool = [
        (names[i], names[j])
        for i in range(n)
        for j in range(i + 1, n)
        if tuple(sorted((names[i], names[j]))) not in edges
    ]
    room = min(max_edges - len(edges), len(pool))
    if room > 0:
        extra = int(rng.integers(0, room + 1))
        for k in rng.choice(len(pool), size=extra, replace=False):
            edges.add(pool[int(k)])
    return build_graph(names, sorted(edges))


@pytest.fixture(scope="session")
def paper_graph():
    """The worked 4-vertex example: A-B, A-C, B-C, C-D."""
    return build_graph(["A", "B", "C", "D"], [("A", "B"), ("A", "C"), ("B", "C"), ("C", "D")])


@pytest.fixture(scope="session")
def fifty_graphs():
    """The fixed pool of 50 random connected graphs used by the acceptance
    criteria (|V| <= 6, |E| <= 8), generated from one pinned seed."""
    rng = np.random.default_rng(20240915)
    return [random_connected_graph(rng) for _ in range(50)]
