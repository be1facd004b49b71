"""Byproducts of the rumor-spreading algorithms: spanning trees, leader
election, exact aggregates, and minimum spanning trees.

The MST runs in two stages of fragment merging: real merges capped at
diameter O(sqrt(n)) using the fragments' own trees, then virtual merges
(fragment ids unified, trees frozen) whose candidate edges travel over the
communication backbone produced by the general rumor-spreading run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .engine import MessageBudget, SimulationError, Trace
from .graphs import Graph
from .general import CongestBlockPhase, ReRootWalkPhase, _group_targets, \
    rumor_spread_general
from .primitives import (ContactListPhase, Forest, SketchConvergecastPhase,
                         TreeBroadcastPhase, TreeConvergecastPhase,
                         true_labels)
from .program import Program, run_program
from .rng import key, mix64
from .sketch import SketchParams, fresh_seed, sample_cut_edge
from .wire import int_bits

_KEY_MST = key("mst")


class SpreadIncompleteError(SimulationError):
    """extract_spanning_tree on a run that did not reach every node."""


class WidthOverflowError(SimulationError):
    """An aggregate value cannot fit the message budget."""


class DuplicateWeightsError(ValueError):
    pass


class BackboneMissingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spanning tree, leader election, aggregates


def extract_spanning_tree(g: Graph, trace: Trace) -> Forest:
    """The first-receipt tree of a completed spread: every node's parent is
    the neighbor that first delivered the rumor; rooted at the source."""
    out = trace.outputs
    first = out.get("first_from")
    if first is None:
        raise SpreadIncompleteError("trace has no first-receipt records")
    parent = np.asarray(first, dtype=np.int64).copy()
    missing = np.nonzero(parent[1:] < 0)[0]
    if len(missing):
        raise SpreadIncompleteError(
            f"{len(missing)} nodes never received the rumor")
    f = Forest(g, parent)
    f.validate()
    return f


@dataclass(frozen=True)
class AggregateSpec:
    op: str  # min, max, sum, count, average

    def __post_init__(self):
        if self.op not in ("min", "max", "sum", "count", "average"):
            raise ValueError(f"unknown aggregate {self.op!r}")


def aggregate(g: Graph, spec: AggregateSpec, values: dict[int, int],
              tree: Forest, cfg=None, seed: int = 0, mode: str = "fast",
              budget: Optional[MessageBudget] = None):
    """Exact aggregate at every node: one convergecast, one broadcast."""
    cfg = cfg or DEFAULTS
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)
    width = max((int_bits(int(v)) for v in values.values()), default=1)
    if width + math.ceil(math.log2(max(g.n, 2))) + 8 > budget.max_bits:
        raise WidthOverflowError(
            f"values of {width} bits cannot aggregate within "
            f"{budget.max_bits}-bit messages")
    roots = tree.roots()
    if len(roots) != 1:
        raise ValueError("aggregate needs a single spanning tree")
    depth_bound = tree.max_depth() + 1

    if spec.op == "count":
        conv_values = {v: 1 for v in range(1, g.n + 1)}
        op = "sum"
    elif spec.op == "average":
        conv_values = {v: (int(values[v]), 1) for v in values}
        op = _pair_sum
    else:
        conv_values = {v: int(values[v]) for v in values}
        op = spec.op

    from .primitives import convergecast, broadcast
    result, tr1 = convergecast(tree, conv_values, op, rounds=depth_bound,
                               seed=seed, cfg=cfg, mode=mode, budget=budget)
    agg = result[roots[0]]
    body = _encode_result(agg)
    got, tr2 = broadcast(tree, {roots[0]: body}, depth_bound, seed=seed,
                         cfg=cfg, mode=mode, budget=budget)
    decoded = _decode_result(body, spec.op)
    out = {v: decoded for v in range(1, g.n + 1)}
    total = Trace(rounds_used=tr1.rounds_used + tr2.rounds_used,
                  messages_sent=tr1.messages_sent + tr2.messages_sent,
                  total_bits=tr1.total_bits + tr2.total_bits,
                  max_message_bits=max(tr1.max_message_bits, tr2.max_message_bits),
                  rng_seed=seed)
    return out, total


def _pair_sum(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _encode_result(agg) -> int:
    if isinstance(agg, tuple):  # (sum, count) for averages
        s, c = agg
        return (abs(int(s)) << 34) | (int(c) << 2) | (2 if s < 0 else 0) | 1
    return int(agg) << 1


def _decode_result(body: int, op: str):
    if body & 1:
        neg = bool(body & 2)
        c = (body >> 2) & ((1 << 32) - 1)
        s = body >> 34
        return (-s if neg else s, c)
    return body >> 1


def leader_election(g: Graph, algorithm: str = "general", source: int = 1,
                    c: float = 1.0, phi_c: float = 0.5, cfg=None,
                    seed: int = 0, mode: str = "fast",
                    budget: Optional[MessageBudget] = None):
    """All nodes output the same leader: the spanning tree's root id."""
    cfg = cfg or DEFAULTS
    if algorithm == "general":
        trace = rumor_spread_general(g, source, cfg=cfg, seed=seed, mode=mode,
                                     budget=budget)
    elif algorithm == "weakcond":
        from .weakcond import rumor_spread_weakcond
        trace = rumor_spread_weakcond(g, source, c, phi_c, cfg=cfg, seed=seed,
                                      mode=mode, budget=budget)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    tree = extract_spanning_tree(g, trace)
    root = tree.roots()[0]
    return {v: root for v in range(1, g.n + 1)}, trace, tree


# ---------------------------------------------------------------------------
# minimum spanning tree


class _Candidates:
    """Per-virtual-fragment minimum candidate edges; mergeable and measurable."""

    __slots__ = ("best",)

    def __init__(self, best=None):
        self.best = dict(best) if best else {}

    @staticmethod
    def merge(a: "_Candidates", b: "_Candidates") -> "_Candidates":
        out = _Candidates(a.best)
        for vid, cand in b.best.items():
            cur = out.best.get(vid)
            if cur is None or cand < cur:
                out.best[vid] = cand
        return out

    def bit_size(self) -> int:
        bits = 8
        for vid, (w, u, v) in self.best.items():
            bits += int_bits(vid) + int_bits(w) + int_bits(u) + int_bits(v) + 8
        return bits


class MstProgram(Program):
    """Two-stage fragment merging; outputs the exact MST edge set."""

    def __init__(self, g: Graph, backbone: Forest, cfg=None, seed: int = 0):
        cfg = cfg or DEFAULTS
        super().__init__(g, cfg, seed)
        if g.weights is None:
            raise ValueError("mst needs edge weights")
        if len(set(g.weights.values())) != len(g.weights):
            raise DuplicateWeightsError("edge weights must be distinct")
        self.backbone = backbone
        n = g.n
        self.cap = cfg.mst_diam_const * math.ceil(math.sqrt(n))
        self.b1 = 4 * self.cap + 4
        self.p1 = math.ceil(math.log2(max(n, 2)))
        self.delta_g = int(g.degrees().max())
        self.weight_of = {}
        for (u, v), w in g.weights.items():
            self.weight_of[(u, v)] = w
            self.weight_of[(v, u)] = w

    def setup_state(self) -> None:
        n = self.g.n
        self.frag_parent = np.zeros(n + 1, dtype=np.int64)  # all roots
        self.frag_parent[0] = -1
        self.frag_id = np.arange(n + 1, dtype=np.int64)
        self.vid = np.arange(n + 1, dtype=np.int64)
        self.nbr_vid: dict[int, dict[int, int]] = {}
        self.capped: dict[int, bool] = {}
        self.mst_edges: set[tuple[int, int]] = set()
        self.done_stage2 = False

    def outputs(self) -> dict:
        return {"mst_edges": sorted(self.mst_edges)}

    # helpers ---------------------------------------------------------------

    def _refresh_block(self, values_of):
        eu, ev = self.g.edge_u, self.g.edge_v
        drv = np.minimum(eu, ev)
        oth = np.maximum(eu, ev)
        svc = _group_targets(drv, oth)
        heard: list = []

        def apply(P, it, s, r, vals):
            heard.append((s, r, vals))

        block = CongestBlockPhase(svc, self.delta_g, 1,
                                  values_fn=lambda P, it: values_of(),
                                  apply_fn=apply)
        return block, heard

    def _local_candidates(self, heard) -> dict[int, tuple]:
        """Per node: min-weight incident edge leaving its virtual fragment."""
        nbr: dict[int, dict[int, int]] = {}
        for s, r, vals in heard:
            for a, b, val in zip(s.tolist(), r.tolist(), vals.tolist()):
                nbr.setdefault(b, {})[a] = val
        out = {}
        for v, seen in nbr.items():
            best = None
            for u, u_vid in seen.items():
                if u_vid == self.vid[v]:
                    continue
                w = self.weight_of[(v, u)]
                cand = (w, min(v, u), max(v, u))
                if best is None or cand < best:
                    best = cand
            if best is not None:
                out[v] = best
        return out

    # phases ------------------------------------------------------------------

    def build_phases(self):
        yield from self._stage1()
        yield from self._stage2()

    def _stage1(self):
        g, n = self.g, self.g.n
        for i in range(1, self.p1 + 1):
            block, heard = self._refresh_block(
                lambda: self.vid.astype(np.int64))
            block.label = f"mst-stage1-{i}"
            yield block
            cands = self._local_candidates(heard)
            depth, rid = true_labels(self.frag_parent)
            roots = [int(r) for r in np.nonzero(self.frag_parent == 0)[0]]
            coin = {r: mix64(self.seed, _KEY_MST, i, r) & 1 for r in roots}
            conv = TreeConvergecastPhase(
                self.b1, self.frag_parent,
                {v: cand for v, cand in cands.items()}, _min_cand)
            yield conv
            chosen = {r: conv.result.get(r) for r in roots}
            announce = {}
            for r in roots:
                e = chosen[r]
                ok = e is not None and coin[r] == 0 and not self.capped.get(r)
                announce[r] = 0 if not ok else _encode_edge(e, g.id_bound)
            ann = TreeBroadcastPhase(self.b1, self.frag_parent, announce)
            yield ann
            have, rootlab, _ = ann.received()
            proposals = []
            for r in roots:
                if not announce[r]:
                    continue
                w, a, b = chosen[r]
                x, peer = (a, b) if rootlab[a] == r or a == r else (b, a)
                proposals.append((int(x), int(peer), int(r)))
            hooked: list[tuple[int, int, int]] = []

            def handler(P, w_node, sender, payload, _coin=coin):
                _, wr = true_labels_of(self.frag_parent, w_node)
                if wr <= 0 or wr == payload:
                    return 0
                if _coin.get(wr, 0) == 1 and not self.capped.get(wr):
                    return 1
                return 0

            def replied(P, x, target, reply, _hooked=hooked, _chosen=chosen):
                if reply == 1:
                    _hooked.append((x, target, 0))

            yield ContactListPhase(lambda P, _p=proposals: _p, handler, replied)
            walks = [(x, w_) for x, w_, _ in hooked]
            for x, w_, _ in hooked:
                _, r_ = true_labels_of(self.frag_parent, x)
                e = chosen.get(r_)
                if e is not None:
                    self.mst_edges.add((e[1], e[2]))
            yield ReRootWalkPhase(self.b1, self.frag_parent, walks)
            relabel = TreeBroadcastPhase(
                self.b1, self.frag_parent,
                {int(r): int(r) for r in np.nonzero(self.frag_parent == 0)[0]})
            yield relabel
            # fragment ids and virtual ids follow the new roots
            d2, rid2 = true_labels(self.frag_parent)
            m = self.frag_parent >= 0
            self.frag_id[m] = rid2[m]
            self.vid[m] = rid2[m]
            # roots learn their height (max member depth) to track diameter
            def _depth_values():
                d3, _ = true_labels(self.frag_parent)
                return {int(v): int(d3[v])
                        for v in np.nonzero(self.frag_parent >= 0)[0]}

            hconv = TreeConvergecastPhase(self.b1, self.frag_parent,
                                          _depth_values, "max")
            yield hconv
            for r, h in hconv.result.items():
                self.capped[r] = h is not None and 2 * int(h) > self.cap

    def _stage2(self):
        g, n = self.g, self.g.n
        bb = self.backbone
        b_bb = bb.max_depth() + 2
        phase = 0
        while not self.done_stage2:
            phase += 1
            if phase > math.ceil(math.log2(max(n, 2))) + 2:
                raise SimulationError("stage 2 did not converge")
            block, heard = self._refresh_block(
                lambda: self.vid.astype(np.int64))
            block.label = f"mst-stage2-{phase}"
            yield block
            cands = self._local_candidates(heard)
            conv = TreeConvergecastPhase(
                self.b1, self.frag_parent, dict(cands), _min_cand)
            yield conv
            frag_cand = {}
            for r, e in conv.result.items():
                if e is not None:
                    frag_cand[r] = _Candidates({int(self.vid[r]): e})
            bconv = TreeConvergecastPhase(b_bb, bb.parent, frag_cand,
                                          _Candidates.merge)
            yield bconv
            root = bb.roots()[0]
            agg = bconv.result.get(root)
            per_vid = agg.best if agg is not None else {}
            if not per_vid:
                self.done_stage2 = True
                mapping: dict[int, int] = {}
            else:
                mapping = self._virtual_merge(per_vid)
            body = _encode_mapping(mapping)
            bc = TreeBroadcastPhase(b_bb, bb.parent, {root: body})
            yield bc
            if mapping:
                remap = np.arange(n + 1, dtype=np.int64)
                for old, new in mapping.items():
                    remap[old] = new
                # chains resolved by the sender; nodes apply one lookup
                self.vid = remap[self.vid]
        # existence test: the backbone root confirms through a sketch that
        # the finished fragment has no outgoing edge left
        root = bb.roots()[0]
        params = SketchParams(
            shared_seed=fresh_seed(self.seed, _KEY_MST, key("final")),
            id_bound=g.id_bound, max_id=n, delta=self.cfg.delta_sk(n),
            budget_bits=MessageBudget(g.id_bound, self.cfg.budget_const).max_bits)
        yield TreeBroadcastPhase(b_bb, bb.parent,
                                 {root: params.shared_seed & ((1 << 128) - 1)})
        sconv = SketchConvergecastPhase(b_bb + params.parts, bb.parent,
                                        {root: params})
        yield sconv
        leftover = sample_cut_edge(sconv.result[root])
        if leftover is not None:
            raise SimulationError(f"existence test found outgoing {leftover}")

    def _virtual_merge(self, per_vid: dict[int, tuple]) -> dict[int, int]:
        """Union the virtual fragments along their minimum outgoing edges."""
        up = {}

        def find(a):
            while up.get(a, a) != a:
                up[a] = up.get(up[a], up[a])
                a = up[a]
            return a

        vids = set(np.unique(self.vid[1:]).tolist())
        for vid, (w, u, v) in per_vid.items():
            self.mst_edges.add((u, v))
            a, b = find(int(self.vid[u])), find(int(self.vid[v]))
            if a != b:
                up[max(a, b)] = min(a, b)
        return {v: find(v) for v in vids if find(v) != v}


def _min_cand(a, b):
    return a if a <= b else b


def _encode_edge(e, id_bound: int) -> int:
    w, a, b = e
    return ((a * id_bound + b) << 1) | 1


def _encode_mapping(mapping: dict[int, int]) -> int:
    body = 1
    for old, new in sorted(mapping.items()):
        body = (body << 48) | (old << 24) | new
    return body


def true_labels_of(parent: np.ndarray, v: int) -> tuple[int, int]:
    d = 0
    x = v
    while parent[x] > 0:
        x = int(parent[x])
        d += 1
        if d > len(parent):
            return -1, -1
    return (d, x) if parent[x] == 0 else (-1, -1)


def save_edge_set(g: Graph, edges, path) -> None:
    """Write an edge subset in the edge-list format (for oracle diffing)."""
    edges = sorted((min(u, v), max(u, v)) for u, v in edges)
    with open(path, "w") as fh:
        fh.write(f"{g.n} {len(edges)}\n")
        for u, v in edges:
            if g.weights is not None:
                fh.write(f"{u} {v} {g.weights[(u, v)]}\n")
            else:
                fh.write(f"{u} {v}\n")


def mst(g: Graph, backbone: Optional[Forest] = None, cfg=None, seed: int = 0,
        mode: str = "fast", budget: Optional[MessageBudget] = None):
    """Exact minimum spanning tree; returns (edge set, trace).

    ``backbone`` defaults to the spanning tree extracted from a general
    rumor-spreading run on the same graph.
    """
    cfg = cfg or DEFAULTS
    if g.weights is None:
        raise ValueError("mst needs a weighted graph")
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)
    backbone_trace = None
    if backbone is None:
        backbone_trace = rumor_spread_general(g, 1, cfg=cfg, seed=seed,
                                              mode=mode, budget=budget)
        backbone = extract_spanning_tree(g, backbone_trace)
    if len(backbone.roots()) != 1:
        raise BackboneMissingError("backbone must be a single spanning tree")
    prog = MstProgram(g, backbone, cfg=cfg, seed=seed)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    edges = set(trace.outputs["mst_edges"])
    if backbone_trace is not None:
        trace.rounds_used += backbone_trace.rounds_used
        trace.messages_sent += backbone_trace.messages_sent
        trace.total_bits += backbone_trace.total_bits
        trace.max_message_bits = max(trace.max_message_bits,
                                     backbone_trace.max_message_bits)
    return edges, trace
