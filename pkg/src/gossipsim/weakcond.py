"""Rumor spreading on graphs with good weak conductance.

Set-up part: repeated highest-rumor gossip carves the graph into at most
floor(c) disjoint clusters, each spanned by a tree of depth at most 2T(n).
Tree-merging part: clusters form super clusters connected by inter-cluster
edges with single-node communication responsibility; in phase i the super
clusters whose supergraph eccentricity (from the max-root-id cluster) is at
most 2^i reorient into one temporary tree, sample an outgoing edge through
sketches, attach it, and revert.  Once one super cluster remains, a final
reorientation yields the spanning tree over which the rumor is convergecast
and broadcast.

All phase lengths derive from (n, c, conductance, config), so every node
computes the same schedule locally; program code between phases performs
only node-local bookkeeping plus simulator-level progress checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .engine import MessageBudget, SimulationError, Trace
from .graphs import Graph
from .primitives import (ContactListPhase, Forest, MaxGossipPhase,
                         SketchConvergecastPhase, TreeBroadcastPhase,
                         TreeConvergecastPhase, true_labels)
from .program import Program, run_program
from .rng import key
from .sketch import SketchParams, fresh_seed, sample_cut_edge

_KEY_WC = key("weakcond")


class MergeStallError(SimulationError):
    """Merging phases stopped adding inter-cluster edges beyond the retry cap."""


class ResponsibilityViolationError(SimulationError):
    pass


class PreconditionUnverifiedError(SimulationError):
    """reorient called without a passing eccentricity check."""


# ---------------------------------------------------------------------------
# Super clusters


@dataclass
class SuperCluster:
    """Disjoint cluster trees plus inter-cluster edges, each owned by exactly
    one responsible endpoint (the node that initiates its communication)."""
    forest: Forest
    responsible: dict[int, int]  # node -> other endpoint of its edge

    def __post_init__(self):
        for v, u in self.responsible.items():
            if not self.forest.g.has_edge(v, u):
                raise ResponsibilityViolationError(f"({v},{u}) is not an edge")

    def cluster_of(self) -> np.ndarray:
        _, rid = true_labels(self.forest.parent)
        return rid

    def supergraph(self) -> dict[int, set[int]]:
        rid = self.cluster_of()
        adj: dict[int, set[int]] = {int(r): set() for r in self.forest.roots()}
        for v, u in self.responsible.items():
            a, b = int(rid[v]), int(rid[u])
            if a != b:
                adj[a].add(b)
                adj[b].add(a)
        return adj


def supergraph_ecc(sc: SuperCluster, start: int) -> int:
    """Oracle: supergraph eccentricity of a cluster (BFS on the supergraph)."""
    adj = sc.supergraph()
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    nxt.append(y)
        frontier = nxt
    if len(dist) < len(adj):
        return len(adj) + 1
    return max(dist.values())


# ---------------------------------------------------------------------------
# Flood machinery: one supergraph iteration = broadcast + contacts + convergecast


class _ScState:
    """Distributed state for flooding over one cluster forest."""

    def __init__(self, g: Graph, parent: np.ndarray, responsible: dict[int, int],
                 t_block: int):
        self.g = g
        self.parent = parent
        self.responsible = responsible  # shared reference; may grow between phases
        self.t_block = t_block
        self.node_val = np.zeros(g.n + 1, dtype=np.int64)
        self.recv_val: dict[int, int] = {}
        self.root_val: dict[int, int] = {}
        self.cap_parent: Optional[np.ndarray] = None  # token-capture (reorient)

    def roots(self) -> list[int]:
        return [int(r) for r in np.nonzero(self.parent == 0)[0]]


def _flood_iteration(state: _ScState, capture: bool = False):
    """Build the three phases of one flood iteration (call right before use)."""
    tb = state.t_block

    def bcast_recv(P, v, root, body, depth, rnd):
        state.node_val[v] = body
        if capture and body:
            _capture(state, v, int(state.parent[v]))

    bodies = {r: int(state.root_val.get(r, 0)) for r in state.roots()}
    for r, body in bodies.items():
        state.node_val[r] = body  # a root holds its own broadcast value
    bcast = TreeBroadcastPhase(tb, state.parent, bodies,
                               on_receive=bcast_recv)

    def contacts(P):
        return [(v, u, int(state.node_val[v]))
                for v, u in sorted(state.responsible.items())]

    def handler(P, w, sender, payload):
        if payload and payload > state.recv_val.get(w, 0):
            state.recv_val[w] = int(payload)
        if capture and payload:
            _capture(state, w, sender)
        return int(state.node_val[w])

    def replied(P, x, target, reply):
        if reply and reply > state.recv_val.get(x, 0):
            state.recv_val[x] = int(reply)
        if capture and reply:
            _capture(state, x, target)

    contact = ContactListPhase(contacts, handler, replied)

    on_child = None
    if capture:
        def on_child(P, parent_node, child, payload):
            if payload:
                _capture(state, parent_node, child)

    conv = TreeConvergecastPhase(tb, state.parent,
                                 lambda: dict(state.recv_val),
                                 "max", on_child=on_child)

    def conv_finish(P, _orig=conv.finish):
        _orig(P)
        for r, agg in conv.result.items():
            if agg and agg > state.root_val.get(r, 0):
                state.root_val[r] = int(agg)
        state.recv_val.clear()

    conv.finish = conv_finish
    return [bcast, contact, conv]


def _capture(state: _ScState, v: int, sender: int) -> None:
    if state.cap_parent is not None and state.cap_parent[v] == -2:
        state.cap_parent[v] = sender


def _flood_iters(state: _ScState, iters: int, capture: bool = False):
    """Yield flood phases lazily so each iteration sees fresh root values."""
    for _ in range(iters):
        yield from _flood_iteration(state, capture)


def flood_iteration_rounds(t_block: int) -> int:
    return 2 * t_block + 1


# ---------------------------------------------------------------------------
# Standalone super-cluster primitives (shared by tests and the main program)


class _GenProgram(Program):
    """Program over an externally supplied phase generator."""

    def __init__(self, g, cfg, seed, phases_fn, outputs_fn=None):
        super().__init__(g, cfg, seed)
        self._phases_fn = phases_fn
        self._outputs_fn = outputs_fn

    def setup_state(self) -> None:
        pass

    def build_phases(self):
        return self._phases_fn(self)

    def outputs(self) -> dict:
        return self._outputs_fn(self) if self._outputs_fn else {}


def supergraph_simulate(sc: SuperCluster, iterations: int, initial: dict[int, int],
                        t_bound: Optional[int] = None, seed: int = 0, cfg=None,
                        mode: str = "fast", budget: Optional[MessageBudget] = None):
    """Run a max-flood over the cluster supergraph for T_I iterations.

    Returns (root -> final value, trace); one iteration costs one cluster
    broadcast, one contact round over responsible edges, one convergecast.
    """
    cfg = cfg or DEFAULTS
    g = sc.forest.g
    tb = t_bound if t_bound is not None else max(1, sc.forest.max_depth())
    state = _ScState(g, sc.forest.parent, sc.responsible, tb)
    state.root_val = {r: int(initial.get(r, 0)) for r in state.roots()}

    def phases(P):
        yield from _flood_iters(state, iterations)

    prog = _GenProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    return dict(state.root_val), trace


def flood(sc: SuperCluster, beta: int, values: dict[int, int], **kw):
    """Max-aggregate over all clusters within supergraph distance beta."""
    return supergraph_simulate(sc, beta, values, **kw)


def eccentricity_at_most(sc: SuperCluster, beta: int, t_bound: Optional[int] = None,
                         seed: int = 0, cfg=None, mode: str = "fast",
                         budget: Optional[MessageBudget] = None):
    """Exactly the max-root-id cluster outputs True iff its supergraph
    eccentricity is at most beta (id flood watched for late changes, then a
    boolean alarm flood; each runs beta+1 iterations)."""
    cfg = cfg or DEFAULTS
    g = sc.forest.g
    tb = t_bound if t_bound is not None else max(1, sc.forest.max_depth())
    id_state = _ScState(g, sc.forest.parent, sc.responsible, tb)
    roots = id_state.roots()
    id_state.root_val = {r: r for r in roots}
    result: dict[int, bool] = {}

    def phases(P):
        snapshot = {}
        for it in range(beta + 1):
            if it == beta:
                snapshot.update(id_state.root_val)
            yield from _flood_iters(id_state, 1)
        alarm_state = _ScState(g, sc.forest.parent, sc.responsible, tb)
        alarm_state.root_val = {
            r: int(id_state.root_val.get(r, 0) != snapshot.get(r, 0))
            for r in roots}
        yield from _flood_iters(alarm_state, beta + 1)
        for r in roots:
            result[r] = (id_state.root_val.get(r, 0) == r
                         and not alarm_state.root_val.get(r, 0))

    prog = _GenProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    return result, trace


def _reorient_phases(state_parent, responsible, roots_val_state: _ScState,
                     beta: int, temp_parent: np.ndarray):
    """Two id-floods: learn the winning root id, then flood it as a token;
    every node's temp parent is whoever first delivered the token."""
    yield from _flood_iters(roots_val_state, beta + 1)
    M = max((v for v in roots_val_state.root_val.values()), default=0)
    tok = _ScState(roots_val_state.g, state_parent, responsible,
                   roots_val_state.t_block)
    tok.cap_parent = temp_parent
    for r in roots_val_state.roots():
        if roots_val_state.root_val.get(r, 0) == r == M:
            tok.root_val[r] = M
            temp_parent[r] = 0
    yield from _flood_iters(tok, beta + 1, capture=True)


def reorient(sc: SuperCluster, beta: int, t_bound: Optional[int] = None,
             seed: int = 0, cfg=None, mode: str = "fast",
             budget: Optional[MessageBudget] = None, verified: bool = True):
    """Build one temporary spanning tree over the super cluster's nodes,
    rooted at the max-root-id cluster's root.  The cluster forest is left
    untouched, so reverting is discarding the temp forest.

    Requires a passing eccentricity_at_most(sc, beta) (pass verified=True
    only after checking); diameter of the result is O(beta * t_bound)."""
    cfg = cfg or DEFAULTS
    if not verified:
        raise PreconditionUnverifiedError("run eccentricity_at_most first")
    g = sc.forest.g
    tb = t_bound if t_bound is not None else max(1, sc.forest.max_depth())
    id_state = _ScState(g, sc.forest.parent, sc.responsible, tb)
    id_state.root_val = {r: r for r in id_state.roots()}
    temp_parent = np.full(g.n + 1, -2, dtype=np.int64)
    temp_parent[0] = -1

    def phases(P):
        yield from _reorient_phases(sc.forest.parent, sc.responsible, id_state,
                                    beta, temp_parent)

    prog = _GenProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    temp_parent[temp_parent == -2] = -1
    f = Forest(g, temp_parent)
    f.trace = trace
    return f, trace


# ---------------------------------------------------------------------------
# The full algorithm


class WeakcondProgram(Program):
    """Set-up, tree-merging, final spanning tree, and the rumor spread."""

    def __init__(self, g: Graph, source: int, c: float, phi_c: float,
                 cfg=None, seed: int = 0):
        cfg = cfg or DEFAULTS
        super().__init__(g, cfg, seed)
        if c < 1 or phi_c <= 0:
            raise ValueError(f"need c >= 1 and phi_c > 0, got c={c}, phi_c={phi_c}")
        self.source = source
        self.c = c
        self.phi_c = phi_c
        self.T = cfg.T(g.n, phi_c)
        self.c_star = max(1, math.floor(c))
        self.t_block = 2 * self.T  # cluster tree depth bound
        self.merge_phases = math.ceil(math.log2(self.c_star)) if self.c_star > 1 else 0
        self.phase_cluster_counts: list[tuple[int, list[int]]] = []

    # -- plan bookkeeping ---------------------------------------------------

    def plan_rounds(self) -> int:
        """Upper bound on total rounds, for max_rounds and sanity checks."""
        t_it = flood_iteration_rounds(self.t_block)
        total = self.c_star * 6 * self.T + self.t_block  # set-up + relabel
        parts = self._params(0, 0, 1).parts
        for i in range(1, self.merge_phases + 1):
            beta = 2 ** i
            d_t = (beta + 2) * t_it
            total += (4 * (beta + 1) * t_it + 3 * d_t + parts + 1) \
                * (1 + self.cfg.stall_retries)
        bf = self.c_star
        d_f = (bf + 2) * t_it
        total += 2 * (bf + 1) * t_it + 2 * d_f
        return total + 16

    def _params(self, phase: int, retry: int, root: int) -> SketchParams:
        s = fresh_seed(self.seed, _KEY_WC, phase, retry, root)
        budget_bits = MessageBudget(self.g.id_bound, self.cfg.budget_const).max_bits
        return SketchParams(shared_seed=s, id_bound=self.g.id_bound,
                            max_id=self.g.n, delta=self.cfg.delta_sk(self.g.n),
                            budget_bits=budget_bits)

    # -- state ----------------------------------------------------------------

    def setup_state(self) -> None:
        n = self.g.n
        self.covered = np.zeros(n + 1, dtype=bool)
        self.parent_f = np.full(n + 1, -1, dtype=np.int64)   # cluster forest
        self.depth_f = np.full(n + 1, -1, dtype=np.int64)    # depth labels
        self.cluster_id = np.full(n + 1, -1, dtype=np.int64)
        self.responsible: dict[int, int] = {}
        self.sc_id = np.zeros(n + 1, dtype=np.int64)         # best-known SC max id
        self.rumor = np.full(n + 1, -1, dtype=np.int64)
        self.first_from = np.full(n + 1, -1, dtype=np.int64)  # first rumor edge
        self.final_parent: Optional[np.ndarray] = None

    def outputs(self) -> dict:
        return {
            "rumor": self.rumor.copy(),
            "first_from": self.first_from.copy(),
            "source": self.source,
            "spanning_parent": None if self.final_parent is None
            else self.final_parent.copy(),
            "cluster_parent": self.parent_f.copy(),
        }

    # -- phases ---------------------------------------------------------------

    def build_phases(self):
        g, n, T = self.g, self.g.n, self.T

        # ---- set-up: c* phases of 6T rounds ------------------------------
        for i in range(1, self.c_star + 1):
            uncovered = np.nonzero(~self.covered[1:])[0] + 1
            rumor_a = np.full(n + 1, -1, dtype=np.int64)
            parent_a = np.full(n + 1, -1, dtype=np.int64)
            rumor_a[uncovered] = uncovered
            parent_a[uncovered] = 0
            ph_a = MaxGossipPhase(2 * T, rumor_a, adopt=True, parent=parent_a,
                                  label=f"setup-{i}-grow")
            yield ph_a
            # step 2a: spread the highest ids seen; roots that hear higher die
            rumor_b = rumor_a.copy()
            yield MaxGossipPhase(2 * T, rumor_b, label=f"setup-{i}-prune")
            active = [int(v) for v in uncovered
                      if rumor_a[v] == v and rumor_b[v] == v]
            # step 2b: partial broadcast to depth 2T; receivers join
            joined: list[tuple[int, int]] = []

            def recv(P, v, root, body, depth, rnd, _joined=joined):
                _joined.append((v, depth))

            yield TreeBroadcastPhase(2 * T, parent_a, {r: r for r in active},
                                     on_receive=recv, label=f"setup-{i}-join")
            # step 3 (local): merge with the standing forest, smaller depth wins
            for r in active:
                if not self.covered[r] or 0 < self.depth_f[r]:
                    self.covered[r] = True
                    self.parent_f[r] = 0
                    self.depth_f[r] = 0
            for v, depth in joined:
                if not self.covered[v]:
                    self.covered[v] = True
                    self.parent_f[v] = parent_a[v]
                    self.depth_f[v] = depth
                elif depth < self.depth_f[v]:
                    self.parent_f[v] = parent_a[v]
                    self.depth_f[v] = depth

        # ---- relabel: every node learns its final root id and depth -------
        relabel = TreeBroadcastPhase(
            self.t_block, self.parent_f,
            {int(r): int(r) for r in np.nonzero(self.parent_f == 0)[0]},
            label="setup-relabel")
        yield relabel
        have, root, depth = relabel.received()
        m = have & (self.parent_f >= 0)
        self.cluster_id[m] = root[m]
        self.depth_f[m] = depth[m]
        roots0 = [int(r) for r in np.nonzero(self.parent_f == 0)[0]]
        for r in roots0:
            self.cluster_id[r] = r
        self.initial_clusters = len(roots0)
        self.phase_cluster_counts.append((0, [1] * self.initial_clusters))

        # ---- tree-merging phases ------------------------------------------
        for i in range(1, self.merge_phases + 1):
            beta = 2 ** i
            edges_before = self._edge_count()
            for retry in range(self.cfg.stall_retries + 1):
                yield from self._merge_phase(i, beta, retry)
                sizes = self._sc_sizes()
                self.phase_cluster_counts.append((i, sizes))
                if len(sizes) <= 1 or self._edge_count() > edges_before:
                    break
                if retry == self.cfg.stall_retries:
                    raise MergeStallError(
                        f"merge phase {i}: no growth after "
                        f"{self.cfg.stall_retries} retries")

        # ---- final: one spanning tree, then convergecast + broadcast ------
        beta_f = self.c_star
        id_state = _ScState(g, self.parent_f, self.responsible, self.t_block)
        id_state.root_val = {r: r for r in id_state.roots()}
        temp_parent = np.full(n + 1, -2, dtype=np.int64)
        temp_parent[0] = -1
        for ph in _reorient_phases(self.parent_f, self.responsible, id_state,
                                   beta_f, temp_parent):
            ph.label = ph.label or "final-reorient"
            yield ph
        temp_parent[temp_parent == -2] = -1
        self.final_parent = temp_parent
        self.sc_id[1:] = np.maximum(self.sc_id[1:], 0)

        t_it = flood_iteration_rounds(self.t_block)
        d_f = (beta_f + 2) * t_it
        token = int(self.source)
        conv = TreeConvergecastPhase(
            d_f, temp_parent, {self.source: token}, "max",
            on_child=self._rumor_child, label="rumor-up")
        yield conv
        bodies = {r: int(agg) for r, agg in conv.result.items() if agg}
        self.rumor[self.source] = token
        self.first_from[self.source] = 0

        def recv_rumor(P, v, root, body, depth, rnd):
            if self.rumor[v] < 0:
                self.rumor[v] = body
                if self.first_from[v] < 0:
                    self.first_from[v] = self.final_parent[v]

        yield TreeBroadcastPhase(d_f, temp_parent, bodies,
                                 on_receive=recv_rumor, label="rumor-down")

    def _rumor_child(self, P, parent_node, child, payload):
        if payload and self.first_from[parent_node] < 0 \
                and parent_node != self.source:
            self.first_from[parent_node] = child
            self.rumor[parent_node] = payload

    # -- merging phase ---------------------------------------------------------

    def _merge_phase(self, i: int, beta: int, retry: int):
        g, n = self.g, self.g.n
        tb = self.t_block
        t_it = flood_iteration_rounds(tb)

        # eccentricity detection (id flood + alarm flood)
        id_state = _ScState(g, self.parent_f, self.responsible, tb)
        roots = id_state.roots()
        id_state.root_val = {r: r for r in roots}
        snapshot: dict[int, int] = {}
        first = True
        for it in range(beta + 1):
            if it == beta:
                snapshot.update(id_state.root_val)
            for ph in _flood_iteration(id_state):
                if first:
                    ph.label = f"merge-{i}" + ("" if retry == 0 else f"-retry{retry}")
                    first = False
                yield ph
        alarm = _ScState(g, self.parent_f, self.responsible, tb)
        alarm.root_val = {r: int(id_state.root_val.get(r, 0) != snapshot.get(r, 0))
                          for r in roots}
        yield from _flood_iters(alarm, beta + 1)
        go_roots = {r for r in roots
                    if id_state.root_val.get(r, 0) == r
                    and not alarm.root_val.get(r, 0)}

        # GO flood tells every cluster of an eligible super cluster to join in
        go_state = _ScState(g, self.parent_f, self.responsible, tb)
        go_state.root_val = {r: (r if r in go_roots else 0) for r in roots}
        yield from _flood_iters(go_state, beta + 1)
        go_cluster = {r for r in roots if go_state.root_val.get(r, 0)}

        # token flood from each eligible max cluster reorients its super
        # cluster into one temporary tree (nodes keep the old forest to revert)
        temp_parent = np.full(n + 1, -2, dtype=np.int64)
        temp_parent[0] = -1
        tok = _ScState(g, self.parent_f, self.responsible, tb)
        tok.cap_parent = temp_parent
        for r in go_roots:
            tok.root_val[r] = r
            temp_parent[r] = 0
        yield from _flood_iters(tok, beta + 1, capture=True)
        temp_parent[temp_parent == -2] = -1

        # sampling block over the temp trees
        d_t = (beta + 2) * t_it
        temp_roots = [int(r) for r in np.nonzero(temp_parent == 0)[0]]
        params = {r: self._params(i, retry, r) for r in temp_roots}
        yield TreeBroadcastPhase(
            d_t, temp_parent,
            {r: params[r].shared_seed & ((1 << 128) - 1) for r in temp_roots})
        parts = max((p.parts for p in params.values()), default=1)
        conv = SketchConvergecastPhase(d_t + parts, temp_parent, params)
        yield conv
        samples = {r: sample_cut_edge(sk) for r, sk in conv.result.items()}
        announce = {}
        for r in temp_roots:
            e = samples.get(r)
            announce[r] = 0 if e is None else (e[0] * g.id_bound + e[1])
        ann = TreeBroadcastPhase(d_t, temp_parent, announce)
        yield ann
        # every temp-tree member now knows its super cluster's identity (the
        # temp root id, which is the max root id of the super cluster)
        have, rootlab, _ = ann.received()
        in_tree = (have) & (rootlab > 0)
        self.sc_id[in_tree] = rootlab[in_tree]
        # the inside endpoint contacts the outside endpoint of the sample
        proposals = []
        for r in temp_roots:
            if not announce[r]:
                continue
            a, b = announce[r] // g.id_bound, announce[r] % g.id_bound
            for x, peer in ((a, b), (b, a)):
                if 1 <= x <= n and rootlab[x] == r:
                    x_free = x not in self.responsible
                    proposals.append((int(x), int(peer), (int(r), x_free)))
        yield ContactListPhase(lambda P, _p=proposals: _p,
                               self._edge_handler, self._edge_replied)
        # revert: the temp trees are discarded; cluster forest was untouched

    def _edge_handler(self, P, w, sender, payload):
        sc, x_free = payload
        if not self.covered[w] or self.sc_id[w] == sc:
            return 0  # same super cluster (or outside any): drop
        if x_free:
            return 1  # sampler's endpoint takes responsibility
        if w not in self.responsible:
            self.responsible[w] = sender
            return 2  # w claimed the edge
        return 0

    def _edge_replied(self, P, x, target, reply):
        if reply == 1 and x not in self.responsible:
            self.responsible[x] = target

    # -- simulator-level observers ---------------------------------------------

    def _edge_count(self) -> int:
        return len(self.responsible)

    def _sc_sizes(self) -> list[int]:
        """Cluster counts per super cluster (union-find over inter edges)."""
        rid = self.cluster_id
        roots = [int(r) for r in np.nonzero(self.parent_f == 0)[0]]
        up = {r: r for r in roots}

        def find(a):
            while up[a] != a:
                up[a] = up[up[a]]
                a = up[a]
            return a

        for v, u in self.responsible.items():
            a, b = int(rid[v]), int(rid[u])
            if a in up and b in up:
                ra, rb = find(a), find(b)
                if ra != rb:
                    up[ra] = rb
        sizes: dict[int, int] = {}
        for r in roots:
            sizes[find(r)] = sizes.get(find(r), 0) + 1
        return sorted(sizes.values(), reverse=True)


def rumor_spread_weakcond(g: Graph, source: int, c: float, phi_c: float,
                          cfg=None, seed: int = 0, mode: str = "fast",
                          budget: Optional[MessageBudget] = None) -> Trace:
    """Spread a rumor from ``source``; rounds are O(c log n / phi_c)-scale.

    The returned trace's outputs hold per-node rumor values, the first-
    receipt edges (a spanning tree rooted at the source), and the final
    spanning tree.
    """
    cfg = cfg or DEFAULTS
    prog = WeakcondProgram(g, source, c, phi_c, cfg=cfg, seed=seed)
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode,
                        max_rounds=prog.plan_rounds())
    trace.outputs["phase_cluster_counts"] = prog.phase_cluster_counts
    trace.outputs["initial_clusters"] = prog.initial_clusters
    return trace


def setup(g: Graph, c: float, phi_c: float, cfg=None, seed: int = 0,
          mode: str = "fast", budget: Optional[MessageBudget] = None) -> Forest:
    """Run only the set-up part; returns the cluster forest (<= floor(c) roots,
    depth <= 2T(n), spanning the graph, all w.h.p.)."""
    cfg = cfg or DEFAULTS
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)

    class _SetupOnly(WeakcondProgram):
        def build_phases(self):
            it = WeakcondProgram.build_phases(self)
            for ph in it:
                label = ph.label or ""
                if label.startswith("merge") or label.startswith("final") \
                        or label.startswith("rumor"):
                    break
                yield ph

    prog = _SetupOnly(g, 1, c, phi_c, cfg=cfg, seed=seed)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode,
                        max_rounds=prog.plan_rounds())
    f = Forest(g, prog.parent_f, depth=prog.depth_f.copy(),
               root_id=prog.cluster_id.copy())
    f.trace = trace
    f.covered = prog.covered.copy()
    return f
