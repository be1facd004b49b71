"""Ground-truth helpers used across the test suite.

Everything here is computed independently of the code paths under test:
brute force, union-find, direct BFS, or scipy shortest paths.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csg


def kruskal(g) -> set:
    edges = sorted((w, u, v) for (u, v), w in g.weights.items())
    up = list(range(g.n + 1))

    def find(a):
        while up[a] != a:
            up[a] = up[up[a]]
            a = up[a]
        return a

    out = set()
    for w, u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            up[ru] = rv
            out.add((u, v))
    return out


def components_of(n: int, edges) -> dict[int, int]:
    """Node -> component representative over the given edge list."""
    up = list(range(n + 1))

    def find(a):
        while up[a] != a:
            up[a] = up[up[a]]
            a = up[a]
        return a

    for u, v in edges:
        ru, rv = find(int(u)), find(int(v))
        if ru != rv:
            up[ru] = rv
    return {v: find(v) for v in range(1, n + 1)}


def true_cut(g, members) -> set:
    ms = set(int(v) for v in members)
    return {(u, v) for u, v in g.edges() if (u in ms) != (v in ms)}


def check_forest(parent: np.ndarray) -> None:
    """Assert parent pointers are acyclic and land on roots."""
    n = len(parent) - 1
    state = np.zeros(n + 1, dtype=np.int8)  # 0 new, 1 visiting, 2 done
    for v in range(1, n + 1):
        if parent[v] < 0 or state[v]:
            continue
        path = []
        x = v
        while True:
            assert state[x] != 1, f"cycle through {x}"
            if state[x] == 2 or parent[x] == 0:
                break
            state[x] = 1
            path.append(x)
            x = int(parent[x])
            assert parent[x] >= 0, f"{path[-1]} points to non-member {x}"
        for y in path:
            state[y] = 2
        state[x] = 2


def sp_matrix(n: int, pairs) -> sp.csr_matrix:
    pairs = list(pairs)
    if not pairs:
        return sp.csr_matrix((n, n))
    r = np.array([p[0] - 1 for p in pairs] + [p[1] - 1 for p in pairs])
    c = np.array([p[1] - 1 for p in pairs] + [p[0] - 1 for p in pairs])
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))


def all_pairs_hops(n: int, pairs) -> np.ndarray:
    return csg.shortest_path(sp_matrix(n, pairs), method="D", unweighted=True)


def bfs_ecc(adj: dict[int, set], start) -> int:
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            for y in adj.get(x, ()):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    nxt.append(y)
        frontier = nxt
    if len(dist) < len(adj):
        return len(adj) + 10
    return max(dist.values())
