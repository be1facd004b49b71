"""Static undirected graphs: representation, generators, exact oracles, file IO.

Nodes carry ids 1..n; the id bound N known to every node defaults to n^2.
Graphs are immutable after construction and safe to share between runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .rng import key, mix64, rand_float_vec, chain

_GEN_KEY = key("graph-gen")


class GraphError(ValueError):
    """Invalid parameters or malformed graph input."""


class DisconnectedSampleError(GraphError):
    """A randomized family failed to produce a connected graph within the retry cap."""


class TooLargeError(GraphError):
    """The exact oracle was asked for a graph beyond its enumeration cap."""


class Graph:
    """Undirected simple connected graph in CSR form, ids 1..n.

    ``indptr``/``nbrs`` stores sorted adjacency; ``weights`` (optional, MST
    only) maps the canonical edge (u, v) with u < v to a positive integer.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]],
                 weights: Optional[dict[tuple[int, int], int]] = None,
                 id_bound: Optional[int] = None, check: bool = True):
        self.n = int(n)
        self.id_bound = int(id_bound) if id_bound else self.n * self.n
        adj: list[set[int]] = [set() for _ in range(self.n + 1)]
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if check:
                if not (1 <= u <= self.n and 1 <= v <= self.n):
                    raise GraphError(f"edge ({u},{v}) outside id range 1..{self.n}")
                if u == v:
                    raise GraphError(f"self-loop at node {u}")
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in canon:
                if check:
                    raise GraphError(f"parallel edge ({a},{b})")
                continue
            canon.add((a, b))
            adj[u].add(v)
            adj[v].add(u)
        self.m = len(canon)
        indptr = np.zeros(self.n + 2, dtype=np.int64)
        for v in range(1, self.n + 1):
            indptr[v + 1] = indptr[v] + len(adj[v])
        nbrs = np.zeros(indptr[-1], dtype=np.int32)
        for v in range(1, self.n + 1):
            nbrs[indptr[v]:indptr[v + 1]] = sorted(adj[v])
        self.indptr = indptr
        self.nbrs = nbrs
        self.weights = dict(weights) if weights else None
        if self.weights is not None:
            missing = canon - set(self.weights)
            if missing:
                raise GraphError(f"{len(missing)} edges lack weights")
        if check and not self.is_connected():
            raise GraphError("graph is not connected")
        # canonical edge array, one row per undirected edge, u < v
        if self.m:
            ea = np.array(sorted(canon), dtype=np.int64)
        else:
            ea = np.zeros((0, 2), dtype=np.int64)
        self.edge_u = ea[:, 0].copy() if self.m else np.zeros(0, dtype=np.int64)
        self.edge_v = ea[:, 1].copy() if self.m else np.zeros(0, dtype=np.int64)

    # -- basic accessors ---------------------------------------------------

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbrs[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return (self.indptr[2:] - self.indptr[1:-1]).astype(np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def edges(self) -> Iterable[tuple[int, int]]:
        return zip(self.edge_u.tolist(), self.edge_v.tolist())

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        return len(self._bfs_order(1)) == self.n

    def _bfs_order(self, src: int) -> list[int]:
        seen = np.zeros(self.n + 1, dtype=bool)
        seen[src] = True
        order = [src]
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for u in self.neighbors(v):
                if not seen[u]:
                    seen[u] = True
                    order.append(int(u))
        return order

    def bfs_depths(self, src: int) -> np.ndarray:
        """Hop distance from src to every node; -1 where unreachable."""
        dist = np.full(self.n + 1, -1, dtype=np.int64)
        dist[src] = 0
        frontier = [src]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for v in frontier:
                for u in self.neighbors(v):
                    if dist[u] < 0:
                        dist[u] = d
                        nxt.append(int(u))
            frontier = nxt
        return dist

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


# ---------------------------------------------------------------------------
# Generators


FAMILIES = ("dumbbell", "c_barbell", "expander_barbell", "path", "complete",
            "star", "random_regular", "erdos_renyi", "from_file")


@dataclass(frozen=True)
class GraphSpec:
    """A reproducible graph description: same (spec, seed) => same adjacency."""
    family: str
    n: int = 0
    c: int = 0
    d: int = 0
    p: float = 0.0
    path: str = ""
    seed: int = 0
    weighted: bool = False  # attach distinct random weights (for MST)

    def label(self) -> str:
        bits = [self.family, f"n{self.n}"]
        if self.c:
            bits.append(f"c{self.c}")
        if self.d:
            bits.append(f"d{self.d}")
        if self.p:
            bits.append(f"p{self.p}")
        return "-".join(bits)


def _clique_edges(nodes: list[int]) -> list[tuple[int, int]]:
    return [(nodes[i], nodes[j]) for i in range(len(nodes))
            for j in range(i + 1, len(nodes))]


def _barbell_edges(n: int, c: int) -> list[tuple[int, int]]:
    if c < 1 or n % c != 0:
        raise GraphError(f"c_barbell needs c | n, got n={n}, c={c}")
    m = n // c
    edges = []
    for i in range(c):
        edges += _clique_edges(list(range(i * m + 1, (i + 1) * m + 1)))
    for i in range(c - 1):
        edges.append(((i + 1) * m, (i + 1) * m + 1))  # last of block i, first of i+1
    return edges


def _pairing_regular_edges(n: int, d: int, seed: int, tries: int = 200) -> set:
    """Pairing-model d-regular simple graph; retries until simple."""
    if n * d % 2 != 0 or not 0 < d < n:
        raise GraphError(f"random_regular needs n*d even and 0 < d < n, got n={n}, d={d}")
    rng = np.random.default_rng(mix64(_GEN_KEY, seed, key("regular"), n, d))
    for _ in range(tries):
        stubs = np.repeat(np.arange(1, n + 1), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        a = np.minimum(pairs[:, 0], pairs[:, 1])
        b = np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(a == b):
            continue
        eset = set(zip(a.tolist(), b.tolist()))
        if len(eset) == len(a):
            return eset
    raise DisconnectedSampleError(f"pairing model failed for n={n}, d={d}")


def generate(spec: GraphSpec) -> Graph:
    """Build the graph a spec describes; deterministic in (spec, seed)."""
    fam, n = spec.family, spec.n
    if fam != "from_file" and n < 1:
        raise GraphError(f"need n >= 1, got {n}")
    if fam == "from_file":
        g = load_edgelist(spec.path)
    elif fam == "path":
        g = Graph(n, [(i, i + 1) for i in range(1, n)])
    elif fam == "complete":
        g = Graph(n, _clique_edges(list(range(1, n + 1))))
    elif fam == "star":
        g = Graph(n, [(1, i) for i in range(2, n + 1)])
    elif fam == "dumbbell":
        if n < 2 or n % 2:
            raise GraphError(f"dumbbell needs even n >= 2, got {n}")
        g = Graph(n, _barbell_edges(n, 2))
    elif fam == "c_barbell":
        g = Graph(n, _barbell_edges(n, spec.c))
    elif fam == "expander_barbell":
        c, d = spec.c, (spec.d or 3)
        if c < 1 or n % c != 0:
            raise GraphError(f"expander_barbell needs c | n, got n={n}, c={c}")
        m = n // c
        edges: list[tuple[int, int]] = []
        for i in range(c):
            base = i * m
            if m == 1:
                comp: set = set()
            else:
                comp = _connected_component_sample(
                    m, d, mix64(spec.seed, key("expander"), i))
            edges += [(base + a, base + b) for a, b in comp]
        for i in range(c - 1):
            edges.append((i * m + 1, (i + 1) * m + 1))  # lowest-id nodes
        g = Graph(n, edges)
    elif fam == "random_regular":
        for attempt in range(50):
            try:
                eset = _pairing_regular_edges(n, spec.d, mix64(spec.seed, attempt))
            except DisconnectedSampleError:
                continue
            g0 = Graph(n, eset, check=False)
            if g0.is_connected():
                g = g0
                break
        else:
            raise DisconnectedSampleError(f"no connected {spec.d}-regular sample, n={n}")
    elif fam == "erdos_renyi":
        for attempt in range(50):
            pref = chain(_GEN_KEY, key("er"), spec.seed, attempt)
            iu, iv = np.triu_indices(n, k=1)
            coins = rand_float_vec(pref, (iu.astype(np.int64) * n + iv).astype(np.uint64))
            keep = coins < spec.p
            g0 = Graph(n, zip((iu[keep] + 1).tolist(), (iv[keep] + 1).tolist()),
                       check=False)
            if g0.n and g0.is_connected():
                g = g0
                break
        else:
            raise DisconnectedSampleError(f"no connected G(n={n}, p={spec.p}) sample")
    else:
        raise GraphError(f"unknown family {fam!r}")

    if spec.weighted:
        g = with_random_weights(g, spec.seed)
    return g


def _connected_component_sample(m: int, d: int, seed: int) -> set:
    d = min(d, m - 1)
    if (m * d) % 2:
        d += 1 if d + 1 < m else -1
    for attempt in range(50):
        try:
            eset = _pairing_regular_edges(m, d, mix64(seed, attempt))
        except DisconnectedSampleError:
            continue
        if Graph(m, eset, check=False).is_connected():
            return eset
    raise DisconnectedSampleError(f"no connected component sample m={m}, d={d}")


def with_random_weights(g: Graph, seed: int) -> Graph:
    """Attach distinct uniform weights in [1, n^4]; distinctness makes the MST unique."""
    rng = np.random.default_rng(mix64(_GEN_KEY, key("weights"), seed))
    hi = g.n ** 4
    seen: set[int] = set()
    weights = {}
    for u, v in g.edges():
        w = int(rng.integers(1, hi + 1))
        while w in seen:
            w = int(rng.integers(1, hi + 1))
        seen.add(w)
        weights[(u, v)] = w
    return Graph(g.n, g.edges(), weights=weights, id_bound=g.id_bound, check=False)


# ---------------------------------------------------------------------------
# Exact oracles (brute force; test-scale ground truth)


def _phi_of_cut(cut: int, vol_s: int, vol_t: int) -> Fraction:
    if cut == 0:
        return Fraction(0)
    return Fraction(cut, min(vol_s, vol_t))


def conductance_exact(g: Graph, cap: int = 20) -> Fraction:
    """min over nonempty proper S of |cut(S)| / min(vol(S), vol(T)), exact."""
    if g.n > cap:
        raise TooLargeError(f"conductance_exact capped at n={cap}, got {g.n}")
    masks = _adj_masks(g)
    deg = [0] + [g.degree(v) for v in range(1, g.n + 1)]
    total_vol = sum(deg)
    best: Optional[Fraction] = None
    full = (1 << g.n) - 1
    # fix node 1 in S to halve the enumeration (phi is complement-symmetric)
    for bits in range(0, 1 << (g.n - 1)):
        s_mask = (bits << 1) | 1
        if s_mask == full:
            continue
        cut, vol_s = _cut_and_vol(g, masks, deg, s_mask)
        phi = _phi_of_cut(cut, vol_s, total_vol - vol_s)
        if best is None or phi < best:
            best = phi
    assert best is not None
    return best


def _adj_masks(g: Graph) -> list[int]:
    masks = [0] * (g.n + 1)
    for v in range(1, g.n + 1):
        mk = 0
        for u in g.neighbors(v):
            mk |= 1 << (int(u) - 1)
        masks[v] = mk
    return masks


def _cut_and_vol(g: Graph, masks: list[int], deg: list[int], s_mask: int):
    cut = 0
    vol = 0
    rest = ~s_mask
    bits = s_mask
    while bits:
        low = bits & -bits
        v = low.bit_length()
        cut += (masks[v] & rest).bit_count()
        vol += deg[v]
        bits ^= low
    return cut, vol


def _induced_conductance(g: Graph, masks: list[int], s_mask: int) -> Fraction:
    """Conductance of the subgraph induced by the node set s_mask."""
    members = []
    bits = s_mask
    while bits:
        low = bits & -bits
        members.append(low.bit_length())
        bits ^= low
    if len(members) < 2:
        return Fraction(0)
    ideg = {v: (masks[v] & s_mask).bit_count() for v in members}
    total_vol = sum(ideg.values())
    best: Optional[Fraction] = None
    k = len(members)
    for sub in range(0, (1 << (k - 1))):  # member[0] always in U (phi is symmetric)
        u_mask = 1 << (members[0] - 1)
        for i in range(1, k):
            if sub & (1 << (i - 1)):
                u_mask |= 1 << (members[i] - 1)
        if u_mask == s_mask:
            continue
        cut = 0
        vol_u = 0
        rest = s_mask & ~u_mask
        b = u_mask
        while b:
            low = b & -b
            v = low.bit_length()
            cut += (masks[v] & rest).bit_count()
            vol_u += ideg[v]
            b ^= low
        phi = _phi_of_cut(cut, vol_u, total_vol - vol_u)
        if best is None or phi < best:
            best = phi
    return best if best is not None else Fraction(0)


def weak_conductance_exact(g: Graph, c, cap: int = 12) -> Fraction:
    """min over v of max over S ∋ v, |S| >= n/c, of conductance of G[S]; exact.

    Triple-quantifier enumeration over subsets, so the cap is small.
    """
    if g.n > cap:
        raise TooLargeError(f"weak_conductance_exact capped at n={cap}, got {g.n}")
    c = Fraction(c)
    if c < 1:
        raise GraphError(f"weak conductance needs c >= 1, got {c}")
    min_size = math.ceil(Fraction(g.n) / c)
    masks = _adj_masks(g)
    cond_cache: dict[int, Fraction] = {}
    result: Optional[Fraction] = None
    for v in range(1, g.n + 1):
        vbit = 1 << (v - 1)
        best_v: Optional[Fraction] = None
        for s_mask in range(1, 1 << g.n):
            if not (s_mask & vbit) or s_mask.bit_count() < min_size:
                continue
            if s_mask not in cond_cache:
                cond_cache[s_mask] = _induced_conductance(g, masks, s_mask)
            phi = cond_cache[s_mask]
            if best_v is None or phi > best_v:
                best_v = phi
        assert best_v is not None  # S = V always qualifies
        if result is None or best_v < result:
            result = best_v
    assert result is not None
    return result


def diameter(g: Graph) -> int:
    """Exact hop diameter via all-sources BFS."""
    best = 0
    for src in range(1, g.n + 1):
        d = g.bfs_depths(src)
        best = max(best, int(d[1:].max()))
    return best


# ---------------------------------------------------------------------------
# Edge-list file format: header "n m", then one "u v [w]" line per edge.


class EdgeListParseError(GraphError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def save_edgelist(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges():
            if g.weights is not None:
                fh.write(f"{u} {v} {g.weights[(u, v)]}\n")
            else:
                fh.write(f"{u} {v}\n")


def load_edgelist(path) -> Graph:
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise EdgeListParseError(1, "empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise EdgeListParseError(1, f"expected 'n m' header, got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise EdgeListParseError(1, f"non-integer header {lines[0]!r}") from None
    edges = []
    weights: dict[tuple[int, int], int] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListParseError(i, f"expected 'u v [w]', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = int(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise EdgeListParseError(i, f"non-integer field in {line!r}") from None
        edges.append((u, v))
        if w is not None:
            if w <= 0:
                raise EdgeListParseError(i, f"non-positive weight {w}")
            weights[(min(u, v), max(u, v))] = w
    if len(edges) != m:
        raise EdgeListParseError(len(lines), f"header said {m} edges, found {len(edges)}")
    try:
        g = Graph(n, edges, weights=weights or None)
    except GraphError as e:
        raise GraphError(f"invalid edge list {path}: {e}") from None
    if not g.is_connected():
        raise GraphError(f"{path}: graph is disconnected")
    return g
