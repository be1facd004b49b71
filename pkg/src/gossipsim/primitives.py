"""Building-block protocols: highest-rumor gossip, forest construction,
broadcast, convergecast, and sketch-based outgoing-edge sampling.

Each phase class implements the per-node callback path and a vectorized
fast path that reproduces it exactly (state, rounds, messages, bits).
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from .engine import MessageBudget, SimulationError
from .graphs import Graph
from .program import (Phase, Program, charge_bulk, int_bits_vec,
                      run_program, uniform_target_scalar, uniform_targets)
from .rng import key
from .sketch import (Sketch, SketchParams, fresh_seed, node_sketch,
                     sample_cut_edge, set_sketch)
from .wire import int_bits, payload_bits


class PhaseOverrunError(SimulationError):
    """A tree was deeper than the schedule allotted for it."""


# ---------------------------------------------------------------------------
# Forest


class Forest:
    """Distributed parent-pointer forest over a graph.

    parent[v]: -1 not in forest, 0 root, else the parent's node id.
    depth/root_id are node labels (what the node believes); structural
    truth is always recomputed from the parent pointers.
    """

    def __init__(self, g: Graph, parent: np.ndarray,
                 depth: Optional[np.ndarray] = None,
                 root_id: Optional[np.ndarray] = None):
        self.g = g
        self.parent = parent.astype(np.int64)
        if depth is None or root_id is None:
            depth, root_id = true_labels(self.parent)
        self.depth = depth
        self.root_id = root_id

    def members(self) -> np.ndarray:
        return np.nonzero(self.parent >= 0)[0]

    def roots(self) -> list[int]:
        return [int(v) for v in np.nonzero(self.parent == 0)[0]]

    def tree_nodes(self, root: int) -> list[int]:
        _, rid = true_labels(self.parent)
        return [int(v) for v in np.nonzero(rid == root)[0]]

    def validate(self) -> None:
        """Raise if parent pointers are cyclic or touch non-members."""
        depth, _ = true_labels(self.parent)
        bad = np.nonzero((self.parent >= 0) & (depth < 0))[0]
        if len(bad):
            raise SimulationError(f"forest has a cycle through nodes {bad[:5]}")
        for v in self.members():
            p = int(self.parent[v])
            if p > 0 and self.parent[p] < 0:
                raise SimulationError(f"node {v} points to non-member {p}")

    def max_depth(self) -> int:
        depth, _ = true_labels(self.parent)
        return int(depth.max()) if len(depth) else 0


def true_labels(parent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """True depth and root id per node from parent pointers (BFS from roots)."""
    n = len(parent) - 1
    depth = np.full(n + 1, -1, dtype=np.int64)
    root_id = np.full(n + 1, -1, dtype=np.int64)
    children: dict[int, list[int]] = {}
    for v in range(1, n + 1):
        p = int(parent[v])
        if p > 0:
            children.setdefault(p, []).append(v)
        elif p == 0:
            depth[v] = 0
            root_id[v] = v
    frontier = [v for v in range(1, n + 1) if parent[v] == 0]
    while frontier:
        nxt = []
        for v in frontier:
            for c in children.get(v, ()):
                depth[c] = depth[v] + 1
                root_id[c] = root_id[v]
                nxt.append(c)
        frontier = nxt
    return depth, root_id


def tree_heights(parent: np.ndarray) -> np.ndarray:
    """Height (max distance to a descendant leaf) per member node."""
    depth, _ = true_labels(parent)
    n = len(parent) - 1
    height = np.zeros(n + 1, dtype=np.int64)
    order = np.argsort(depth, kind="stable")[::-1]
    for v in order:
        v = int(v)
        if depth[v] <= 0:
            continue
        p = int(parent[v])
        if height[v] + 1 > height[p]:
            height[p] = height[v] + 1
    height[depth < 0] = -1
    return height


# ---------------------------------------------------------------------------
# Phase: uniform highest-rumor gossip (optionally adopting parents)


class MaxGossipPhase(Phase):
    """Every node contacts a uniformly random neighbor each round and both
    sides exchange their current highest rumor; improvements are applied at
    the end of the round.  With ``adopt``, an improving node takes the
    counterpart that delivered the improvement as its parent (highest value
    wins; ties broken toward the lowest sender id)."""

    def __init__(self, rounds: int, rumor: np.ndarray, adopt: bool = False,
                 parent: Optional[np.ndarray] = None,
                 adopt_round: Optional[np.ndarray] = None,
                 label: Optional[str] = None):
        self.rounds = rounds
        self.rumor = rumor
        self.adopt = adopt
        self.parent = parent
        self.adopt_round = adopt_round
        self.label = label

    def duration(self, P) -> int:
        return self.rounds

    def begin(self, P) -> None:
        n = P.g.n
        self._key = np.full(n + 1, -1, dtype=np.int64)
        self._K = n + 2

    def choose_contact(self, P, v, lr):
        if P.g.degree(v) == 0:
            return None
        return uniform_target_scalar(P.g, P.seed, P.abs_round(lr), v)

    def make_payload(self, P, v, lr, target):
        r = int(self.rumor[v])
        return r if r >= 0 else None

    def _offer(self, v, val, sender):
        if val is None:
            return
        k = (val + 1) * self._K + (self._K - 1 - sender)
        if k > self._key[v]:
            self._key[v] = k

    def on_exchange(self, P, v, lr, sender, payload):
        self._offer(v, payload, sender)
        r = int(self.rumor[v])
        return r if r >= 0 else None

    def on_reply(self, P, v, lr, responder, reply):
        self._offer(v, reply, responder)

    def local_step(self, P, v, lr):
        k = int(self._key[v])
        if k < 0:
            return
        val = k // self._K - 1
        if val > self.rumor[v]:
            self.rumor[v] = val
            if self.adopt:
                sender = self._K - 1 - (k % self._K)
                self.parent[v] = sender
                if self.adopt_round is not None:
                    self.adopt_round[v] = P.abs_round(lr)
        self._key[v] = -1

    def run_fast(self, P, trace, budget, abs0):
        g = P.g
        n = g.n
        K = self._K
        active = np.zeros(n + 1, dtype=bool)
        active[1:] = g.degrees() > 0
        nodes = np.nonzero(active)[0]
        if len(nodes) == 0:
            trace.rounds_used += self.rounds
            return
        eu, ev = g.edge_u, g.edge_v
        lr = 0
        check_at = 4
        while lr < self.rounds:
            # fixed point: rumor constant per component => counters extrapolate
            if lr == check_at:
                check_at = min(self.rounds, check_at * 4)
                if np.array_equal(self.rumor[eu], self.rumor[ev]):
                    remaining = self.rounds - lr
                    vals = self.rumor[nodes]
                    bits = np.where(vals >= 0, int_bits_vec(vals), 0)
                    per_round = 2 * int(bits.sum())
                    charge_bulk(trace, budget, abs0 + lr, 2 * len(nodes) * remaining,
                                per_round * remaining,
                                int(bits.max()) if len(bits) else 0)
                    trace.rounds_used += remaining
                    return
            targets = uniform_targets(g, P.seed, abs0 + lr, active)
            vals = self.rumor.copy()
            pay = vals[nodes]
            rep = vals[targets]
            pay_bits = np.where(pay >= 0, int_bits_vec(pay), 0)
            rep_bits = np.where(rep >= 0, int_bits_vec(rep), 0)
            charge_bulk(trace, budget, abs0 + lr, 2 * len(nodes),
                        int(pay_bits.sum()) + int(rep_bits.sum()),
                        max(int(pay_bits.max()), int(rep_bits.max())))
            best = np.full(n + 1, -1, dtype=np.int64)
            k_out = (pay + 1) * K + (K - 1 - nodes)    # offer carried to target
            k_back = (rep + 1) * K + (K - 1 - targets)  # reply back to initiator
            np.maximum.at(best, targets, k_out)
            np.maximum.at(best, nodes, k_back)
            cand = np.nonzero(best >= 0)[0]
            val = best[cand] // K - 1
            imp = val > self.rumor[cand]
            upd = cand[imp]
            self.rumor[upd] = val[imp]
            if self.adopt:
                sender = (K - 1) - (best[upd] % K)
                self.parent[upd] = sender
                if self.adopt_round is not None:
                    self.adopt_round[upd] = abs0 + lr
            trace.rounds_used += 1
            lr += 1


# ---------------------------------------------------------------------------
# Phase: pull-based (partial) broadcast over a forest


class TreeBroadcastPhase(Phase):
    """Nodes pull from their parents until they hold the broadcast value.

    ``payload_by_root`` maps each broadcasting root to an int body; nodes of
    other roots keep pulling all phase and receive nothing.  On receipt a
    node learns (root id, body, its depth).  Runs for ``rounds`` rounds, so
    exactly the nodes within that depth are reached.
    """

    def __init__(self, rounds: int, parent: np.ndarray, payload_by_root: dict,
                 on_receive: Optional[Callable] = None,
                 label: Optional[str] = None):
        self.rounds = rounds
        self.parent = parent
        self.payload_by_root = payload_by_root
        self.on_receive = on_receive  # on_receive(P, v, root, body, depth, abs_round)
        self.label = label

    def duration(self, P) -> int:
        return self.rounds

    def begin(self, P) -> None:
        n = P.g.n
        self._have = np.zeros(n + 1, dtype=bool)
        self._root = np.full(n + 1, -1, dtype=np.int64)
        self._depth = np.full(n + 1, -1, dtype=np.int64)
        self._body: dict[int, int] = {}
        for r, body in self.payload_by_root.items():
            if self.parent[r] == 0:
                self._have[r] = True
                self._root[r] = r
                self._depth[r] = 0
                self._body[r] = body
        self._inbox: dict[int, tuple] = {}

    def choose_contact(self, P, v, lr):
        if self.parent[v] > 0 and not self._have[v]:
            return int(self.parent[v])
        return None

    def on_exchange(self, P, v, lr, sender, payload):
        if self._have[v]:
            return (int(self._root[v]), self._body[int(self._root[v])],
                    int(self._depth[v]) + 1)
        return None

    def on_reply(self, P, v, lr, responder, reply):
        if reply is not None and not self._have[v]:
            self._inbox[v] = reply

    def local_step(self, P, v, lr):
        got = self._inbox.pop(v, None)
        if got is not None:
            root, body, depth = got
            self._have[v] = True
            self._root[v] = root
            self._depth[v] = depth
            self._body[root] = body
            if self.on_receive is not None:
                self.on_receive(P, v, root, body, depth, P.abs_round(lr))

    def received(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._have, self._root, self._depth

    def run_fast(self, P, trace, budget, abs0):
        parent = self.parent
        depth, rid = true_labels(parent)
        n = P.g.n
        members = np.nonzero(parent > 0)[0]
        has_root = np.zeros(n + 1, dtype=bool)
        for r in self.payload_by_root:
            if parent[r] == 0:
                has_root[r] = True
        covered = members[has_root[rid[members]]]
        recv_round = depth[covered]  # node at depth d receives in local round d-1+1
        reached = covered[recv_round <= self.rounds]
        # contacts: pull until received (depth rounds), others pull all phase
        pulls = np.full(n + 1, 0, dtype=np.int64)
        pulls[members] = self.rounds
        pulls[reached] = depth[reached]
        msgs = 2 * int(pulls[members].sum())
        # one non-empty reply per reached node: (root, body, depth) tuple
        total_bits = 0
        max_bits = 0
        for v in reached:
            v = int(v)
            self._have[v] = True
            self._root[v] = rid[v]
            self._depth[v] = depth[v]
            b = 6 + int_bits(int(rid[v])) + int_bits(self._body[int(rid[v])]) \
                + int_bits(int(depth[v]))
            total_bits += b
            if b > max_bits:
                max_bits = b
            if self.on_receive is not None:
                self.on_receive(P, v, int(rid[v]), self._body[int(rid[v])],
                                int(depth[v]), abs0 + int(depth[v]) - 1)
        charge_bulk(trace, budget, abs0, msgs, total_bits, max_bits)
        trace.rounds_used += self.rounds


# ---------------------------------------------------------------------------
# Phase: convergecast of values up a forest


OPS = {
    "max": (lambda a, b: a if a >= b else b),
    "min": (lambda a, b: a if a <= b else b),
    "sum": (lambda a, b: a + b),
    "or": (lambda a, b: a or b),
}


class TreeConvergecastPhase(Phase):
    """Leaf-to-root aggregation: a node sends its aggregate to its parent in
    the round after all children have reported; each value aggregates once.

    ``values``: dict node -> payload (ints or tuples); missing means the
    op's identity.  Results land in ``self.result`` (root -> aggregate).
    """

    def __init__(self, rounds: int, parent: np.ndarray, values: dict | Callable,
                 op: Callable | str, label: Optional[str] = None,
                 strict_schedule: bool = True, on_child: Optional[Callable] = None):
        self.rounds = rounds
        self.parent = parent
        self.values = values  # dict, or callable() -> dict read at phase start
        self.op = OPS[op] if isinstance(op, str) else op
        self.label = label
        self.strict_schedule = strict_schedule
        self.on_child = on_child  # on_child(P, parent, child, payload) in arrival order
        self.result: dict[int, object] = {}

    def duration(self, P) -> int:
        return self.rounds

    def begin(self, P) -> None:
        if callable(self.values):
            self.values = self.values()
        n = P.g.n
        parent = self.parent
        self._pending = np.zeros(n + 1, dtype=np.int64)
        for v in range(1, n + 1):
            p = int(parent[v])
            if p > 0:
                self._pending[p] += 1
        if self.strict_schedule:
            h = tree_heights(parent)
            need = int(h[parent == 0].max()) if (parent == 0).any() else 0
            if need > self.rounds:
                raise PhaseOverrunError(
                    f"convergecast needs {need} rounds, scheduled {self.rounds}")
        self._agg: dict[int, object] = {v: val for v, val in self.values.items()}
        self._sent = np.zeros(n + 1, dtype=bool)
        self._inbox: dict[int, list] = {}

    def _aggregate_of(self, v: int):
        return self._agg.get(v)

    def _fold(self, v: int, incoming) -> None:
        cur = self._agg.get(v)
        self._agg[v] = incoming if cur is None else (
            cur if incoming is None else self.op(cur, incoming))

    def choose_contact(self, P, v, lr):
        if self.parent[v] > 0 and not self._sent[v] and self._pending[v] == 0:
            return int(self.parent[v])
        return None

    def make_payload(self, P, v, lr, target):
        return self._aggregate_of(v)

    def on_exchange(self, P, v, lr, sender, payload):
        self._inbox.setdefault(v, []).append((sender, payload))
        return None

    def local_step(self, P, v, lr):
        if self.parent[v] > 0 and not self._sent[v] and self._pending[v] == 0:
            self._sent[v] = True  # contact was made this round
        for sender, payload in self._inbox.pop(v, ()):
            self._fold(v, payload)
            self._pending[v] -= 1
            if self.on_child is not None:
                self.on_child(P, v, sender, payload)

    def finish(self, P) -> None:
        for r in np.nonzero(self.parent == 0)[0]:
            self.result[int(r)] = self._agg.get(int(r))

    def run_fast(self, P, trace, budget, abs0):
        parent = self.parent
        depth, _ = true_labels(parent)
        height = tree_heights(parent) if self.on_child is not None else None
        order = np.argsort(depth, kind="stable")[::-1]
        msgs = 0
        total_bits = 0
        max_bits = 0
        arrivals: dict[int, list] = {}
        for v in order:
            v = int(v)
            if depth[v] <= 0:
                continue
            payload = self._agg.get(v)
            b = payload_bits(payload)
            msgs += 2
            total_bits += b
            if b > max_bits:
                max_bits = b
            p = int(parent[v])
            self._fold(p, payload)
            if self.on_child is not None:
                arrivals.setdefault(p, []).append((int(height[v]), v, payload))
        if self.on_child is not None:
            for p, lst in arrivals.items():
                for _, c, payload in sorted(lst, key=lambda t: (t[0], t[1])):
                    self.on_child(P, p, c, payload)
        charge_bulk(trace, budget, abs0, msgs, total_bits, max_bits)
        trace.rounds_used += self.rounds


# ---------------------------------------------------------------------------
# Phase: convergecast of sketches, pipelined one part per round


class SketchConvergecastPhase(Phase):
    """Convergecast where each node's value is its graph sketch, sent as a
    fixed number of budget-sized parts; part j moves one hop per round, so
    the whole forest finishes within max-height + parts rounds.

    Reference mode materializes every node's sketch; fast mode exploits
    linearity and builds each root's merged sketch directly from the cut
    edges of its tree's node set (identical cells, since internal edges
    cancel exactly).
    """

    def __init__(self, rounds: int, parent: np.ndarray,
                 params_by_root: dict, keep_mask: Optional[np.ndarray] = None,
                 label: Optional[str] = None):
        self.rounds = rounds
        self.parent = parent
        self.params_by_root = params_by_root
        self.keep_mask = keep_mask  # bool per canonical edge of g, None = all
        self.label = label
        self.result: dict[int, Sketch] = {}

    def duration(self, P) -> int:
        return self.rounds

    def _edge_kept(self, P, u, v) -> bool:
        if self.keep_mask is None:
            return True
        g = P.g
        a, b = (u, v) if u < v else (v, u)
        i = np.searchsorted(g.edge_u, a)
        while i < len(g.edge_u) and g.edge_u[i] == a:
            if g.edge_v[i] == b:
                return bool(self.keep_mask[i])
            i += 1
        return False

    def begin(self, P) -> None:
        n = P.g.n
        self._depth, self._rid = true_labels(self.parent)
        self._height = tree_heights(self.parent)
        self._sent_parts = np.zeros(n + 1, dtype=np.int64)
        self._pending = [None] * (n + 1)
        self._sketch: list[Optional[Sketch]] = [None] * (n + 1)
        self._np = {}
        need = 0
        for r, params in self.params_by_root.items():
            if self.parent[r] != 0:
                continue
            self._np[r] = params.parts
            need = max(need, int(self._height[r]) + params.parts)
        if need > self.rounds:
            raise PhaseOverrunError(
                f"sketch convergecast needs {need} rounds, scheduled {self.rounds}")

    def _build_node(self, P, v: int) -> Sketch:
        g = P.g
        rid = int(self._rid[v])
        params = self.params_by_root[rid]
        incident = [(v, int(u)) for u in g.neighbors(v)]
        keep = None
        if self.keep_mask is not None:
            keep = lambda a, b: self._edge_kept(P, a, b)
        return node_sketch(v, incident, keep, params)

    def begin_reference(self, P) -> None:
        for v in np.nonzero(self.parent >= 0)[0]:
            if int(self._rid[v]) in self.params_by_root:
                self._sketch[int(v)] = self._build_node(P, int(v))
        n = P.g.n
        self._child_parts = np.zeros(n + 1, dtype=np.int64)
        self._nchildren = np.zeros(n + 1, dtype=np.int64)
        for v in range(1, n + 1):
            p = int(self.parent[v])
            if p > 0:
                self._nchildren[p] += 1
        self._recv_count = [dict() for _ in range(n + 1)]
        self._ref_ready = True

    def choose_contact(self, P, v, lr):
        if not getattr(self, "_ref_ready", False):
            self.begin_reference(P)
        if self.parent[v] <= 0:
            return None
        j = int(self._sent_parts[v])
        rid = int(self._rid[v])
        if rid < 0 or rid not in self._np or j >= self._np[rid]:
            return None
        # part j may go once all children delivered their part j
        got = self._recv_count[v].get(j, 0)
        if got < self._nchildren[v]:
            return None
        return int(self.parent[v])

    def make_payload(self, P, v, lr, target):
        return self._sketch[v].part(int(self._sent_parts[v]))

    def on_exchange(self, P, v, lr, sender, payload):
        self._pending[v] = (self._pending[v] or []) + [payload]
        return None

    def local_step(self, P, v, lr):
        if self.parent[v] > 0 and self.choose_contact(P, v, lr) is not None:
            self._sent_parts[v] += 1
        inbox = self._pending[v]
        self._pending[v] = None
        if inbox:
            sk = self._sketch[v]
            for part in inbox:
                lo = part.index * part.params.group_reps
                hi = lo + part.count.shape[1]
                cm = (1 << part.params.count_bits) - 1
                im = (1 << part.params.index_bits) - 1
                km = (1 << part.params.check_bits) - 1
                with np.errstate(over="ignore"):
                    sk.count[:, lo:hi] = (sk.count[:, lo:hi] + part.count) \
                        & np.uint64(cm)
                    sk.isum[:, lo:hi] = (sk.isum[:, lo:hi] + part.isum) \
                        & np.uint64(im)
                    sk.csum[:, lo:hi] = (sk.csum[:, lo:hi] + part.csum) \
                        & np.uint64(km)
                self._recv_count[v][part.index] = \
                    self._recv_count[v].get(part.index, 0) + 1

    def finish(self, P) -> None:
        for r in np.nonzero(self.parent == 0)[0]:
            r = int(r)
            if self._sketch[r] is not None:
                self.result[r] = self._sketch[r]

    def run_fast(self, P, trace, budget, abs0):
        g = P.g
        members = np.nonzero(self.parent >= 0)[0]
        rid = self._rid
        msgs = 0
        total_bits = 0
        max_bits = 0
        for r, params in sorted(self.params_by_root.items()):
            if self.parent[r] != 0:
                continue
            tree = members[rid[members] == r]
            part_bits = Sketch(params).part(0).bit_size()
            last = Sketch(params).part(params.parts - 1).bit_size()
            n_non_root = len(tree) - 1
            msgs += 2 * n_non_root * params.parts
            total_bits += n_non_root * ((params.parts - 1) * part_bits + last)
            max_bits = max(max_bits, part_bits if params.parts >= 1 else 0)
            self.result[r] = set_sketch(tree, g.edge_u, g.edge_v,
                                        self.keep_mask, params)
        charge_bulk(trace, budget, abs0, msgs, total_bits, max_bits)
        trace.rounds_used += self.rounds


# ---------------------------------------------------------------------------
# Phase: an explicit list of one-round contacts (inter-cluster edges etc.)


class ContactListPhase(Phase):
    """One round in which a given set of nodes each contact one neighbor.

    ``contacts``: callable(P) -> list of (initiator, target, payload);
    ``handler``: callable(P, node, peer, payload) -> reply, invoked at the
    contacted node; ``on_replied``: callable(P, initiator, target, reply).
    State changes belong in the callbacks; both executors share them.
    """

    def __init__(self, contacts: Callable, handler: Callable,
                 on_replied: Optional[Callable] = None,
                 label: Optional[str] = None):
        self.contacts = contacts
        self.handler = handler
        self.on_replied = on_replied
        self.label = label

    def duration(self, P) -> int:
        return 1

    def begin(self, P) -> None:
        self._list = sorted(self.contacts(P))

    def choose_contact(self, P, v, lr):
        for u, t, _ in self._list:
            if u == v:
                return t
        return None

    def make_payload(self, P, v, lr, target):
        for u, t, payload in self._list:
            if u == v and t == target:
                return payload
        return None

    def on_exchange(self, P, v, lr, sender, payload):
        return self.handler(P, v, sender, payload)

    def on_reply(self, P, v, lr, responder, reply):
        if self.on_replied is not None:
            self.on_replied(P, v, responder, reply)

    def run_fast(self, P, trace, budget, abs0):
        for u, t, payload in self._list:
            trace.charge(abs0, u, payload_bits(payload), budget)
            reply = self.handler(P, t, u, payload)
            trace.charge(abs0, t, payload_bits(reply), budget)
            if self.on_replied is not None:
                self.on_replied(P, u, t, reply)
        trace.rounds_used += 1


class IdlePhase(Phase):
    def __init__(self, rounds: int, label: Optional[str] = None):
        self.rounds = rounds
        self.label = label

    def duration(self, P) -> int:
        return self.rounds

    def run_fast(self, P, trace, budget, abs0):
        trace.rounds_used += self.rounds


# ---------------------------------------------------------------------------
# Baseline: uniform push-pull gossip (measurement reference, not an algorithm)


class PushPullPhase(Phase):
    """Classic uniform push-pull: every node contacts a random neighbor; the
    rumor crosses any contact that pairs an informed node with an uninformed
    one.  Runs until everyone is informed (observed by the simulator) or the
    round cap is hit."""

    def __init__(self, max_rounds: int, informed: np.ndarray, rumor_value: int):
        self.max_rounds = max_rounds
        self.informed = informed
        self.rumor_value = rumor_value

    def duration(self, P) -> int:
        return self.max_rounds

    def done_early(self, P, lr) -> bool:
        return bool(self.informed[1:].all())

    def begin(self, P) -> None:
        self._newly: list[int] = []

    def choose_contact(self, P, v, lr):
        if P.g.degree(v) == 0:
            return None
        return uniform_target_scalar(P.g, P.seed, P.abs_round(lr), v)

    def make_payload(self, P, v, lr, target):
        return self.rumor_value if self.informed[v] else None

    def on_exchange(self, P, v, lr, sender, payload):
        if payload is not None and not self.informed[v]:
            self._newly.append(v)
        return self.rumor_value if self.informed[v] else None

    def on_reply(self, P, v, lr, responder, reply):
        if reply is not None and not self.informed[v]:
            self._newly.append(v)

    def end_round(self, P, lr) -> None:
        for v in self._newly:
            self.informed[v] = True
        self._newly = []

    def run_fast(self, P, trace, budget, abs0):
        g = P.g
        informed = self.informed
        active = np.zeros(g.n + 1, dtype=bool)
        active[1:] = g.degrees() > 0
        nodes = np.nonzero(active)[0]
        rbits = int_bits(self.rumor_value)
        lr = 0
        while lr < self.max_rounds and not informed[1:].all():
            targets = uniform_targets(g, P.seed, abs0 + lr, active)
            inf = informed.copy()
            n_inf_msgs = int(inf[nodes].sum()) + int(inf[targets].sum())
            charge_bulk(trace, budget, abs0 + lr, 2 * len(nodes),
                        rbits * n_inf_msgs, rbits if n_inf_msgs else 0)
            hit = np.zeros(g.n + 1, dtype=bool)
            hit[targets[inf[nodes]]] = True   # push
            hit[nodes[inf[targets]]] = True   # pull
            informed |= hit
            trace.rounds_used += 1
            lr += 1


def push_pull(g: Graph, source: int, max_rounds: int = 1_000_000, seed: int = 0,
              cfg=None, mode: str = "fast",
              budget: Optional[MessageBudget] = None):
    """Run uniform push-pull from one source; returns (informed mask, trace)."""
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    informed = np.zeros(g.n + 1, dtype=bool)
    informed[source] = True

    def phases(P):
        yield PushPullPhase(max_rounds, informed, source)

    prog = _OpProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    return informed, trace


# ---------------------------------------------------------------------------
# Standalone operations (each drives a tiny one-phase program)


class _OpProgram(Program):
    """Adapter for running a prebuilt list of phases as a program."""

    def __init__(self, g, cfg, seed, phases_fn, setup_fn=None, outputs_fn=None):
        super().__init__(g, cfg, seed)
        self._phases_fn = phases_fn
        self._setup_fn = setup_fn
        self._outputs_fn = outputs_fn

    def setup_state(self) -> None:
        if self._setup_fn:
            self._setup_fn(self)

    def build_phases(self):
        return self._phases_fn(self)

    def outputs(self) -> dict:
        return self._outputs_fn(self) if self._outputs_fn else {}


def spread_max_rumor(g: Graph, sources: dict[int, int], rounds: int,
                     seed: int = 0, cfg=None, mode: str = "fast",
                     budget: Optional[MessageBudget] = None):
    """Uniform gossip with highest-rumor exchange; per-node max after R rounds."""
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    rumor = np.full(g.n + 1, -1, dtype=np.int64)
    for v, r in sources.items():
        rumor[v] = r

    def phases(P):
        yield MaxGossipPhase(rounds, rumor)

    prog = _OpProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    out = {v: (int(rumor[v]) if rumor[v] >= 0 else None) for v in range(1, g.n + 1)}
    return out, trace


def build_forest(g: Graph, sources: Iterable[int], rounds: int, seed: int = 0,
                 cfg=None, mode: str = "fast",
                 budget: Optional[MessageBudget] = None):
    """Highest-rumor gossip with parent adoption; returns the forest grown."""
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    rumor = np.full(g.n + 1, -1, dtype=np.int64)
    parent = np.full(g.n + 1, -1, dtype=np.int64)
    adopt_round = np.full(g.n + 1, -1, dtype=np.int64)
    for v in sources:
        rumor[v] = v
        parent[v] = 0

    def phases(P):
        yield MaxGossipPhase(rounds, rumor, adopt=True, parent=parent,
                             adopt_round=adopt_round)

    prog = _OpProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    # a source that adopted a parent is no longer a root
    f = Forest(g, parent)
    f.adopt_round = adopt_round
    f.trace = trace
    return f


def broadcast(f: Forest, payload_by_root: dict[int, int], depth_limit: int,
              seed: int = 0, cfg=None, mode: str = "fast",
              budget: Optional[MessageBudget] = None):
    """Partial broadcast down to ``depth_limit``; returns node -> body."""
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    phase = TreeBroadcastPhase(depth_limit, f.parent, payload_by_root)

    def phases(P):
        yield phase

    prog = _OpProgram(f.g, cfg, seed, phases)
    trace = run_program(f.g, prog, budget=budget, seed=seed, mode=mode)
    have, root, _ = phase.received()
    out = {v: payload_by_root[int(root[v])]
           for v in range(1, f.g.n + 1) if have[v]}
    return out, trace


def convergecast(f: Forest, values: dict[int, object], op, rounds: Optional[int] = None,
                 seed: int = 0, cfg=None, mode: str = "fast",
                 budget: Optional[MessageBudget] = None):
    """Aggregate values leaf-to-root; returns root -> aggregate."""
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    if rounds is None:
        h = tree_heights(f.parent)
        roots = np.nonzero(f.parent == 0)[0]
        rounds = int(h[roots].max()) + 1 if len(roots) else 1
    phase = TreeConvergecastPhase(rounds, f.parent, values, op)

    def phases(P):
        yield phase

    prog = _OpProgram(f.g, cfg, seed, phases)
    trace = run_program(f.g, prog, budget=budget, seed=seed, mode=mode)
    return phase.result, trace


def sample_outgoing_edge(f: Forest, keep_mask: Optional[np.ndarray] = None,
                         delta: float = 0.05, seed: int = 0, cfg=None,
                         mode: str = "fast",
                         budget: Optional[MessageBudget] = None,
                         t_bound: Optional[int] = None):
    """Each root samples one edge leaving its tree's node set, w.h.p.

    Root broadcasts a fresh random string, nodes build sketches under it,
    parts convergecast up, the root recovers, and the result is broadcast
    back down.  Returns (root -> edge or None, trace).
    """
    from .config import DEFAULTS
    cfg = cfg or DEFAULTS
    g = f.g
    if t_bound is None:
        t_bound = max(1, f.max_depth())
    budget_bits = budget.max_bits if budget is not None else \
        MessageBudget(g.id_bound, cfg.budget_const).max_bits
    roots = f.roots()
    params_by_root = {}
    seeds_by_root = {}
    for r in roots:
        s = fresh_seed(seed, key("outedge"), r)
        seeds_by_root[r] = s
        params_by_root[r] = SketchParams(
            shared_seed=s, id_bound=g.id_bound, max_id=g.n, delta=delta,
            budget_bits=budget_bits)
    max_parts = max((p.parts for p in params_by_root.values()), default=1)
    conv = SketchConvergecastPhase(t_bound + max_parts, f.parent, params_by_root,
                                   keep_mask=keep_mask)
    result: dict[int, Optional[tuple[int, int]]] = {}
    announce: dict[int, int] = {}

    def finish_recover(P):
        for r, sk in conv.result.items():
            result[r] = sample_cut_edge(sk)
            e = result[r]
            announce[r] = 0 if e is None else (e[0] * g.id_bound + e[1])

    def phases(P):
        yield TreeBroadcastPhase(t_bound, f.parent,
                                 {r: seeds_by_root[r] for r in roots})
        yield conv
        recover = IdlePhase(0)
        recover.finish = lambda P: finish_recover(P)
        yield recover
        yield TreeBroadcastPhase(t_bound, f.parent, announce)

    prog = _OpProgram(g, cfg, seed, phases)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    return result, trace
