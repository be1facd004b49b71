"""Rumor spreading on general graphs via threshold sparsification.

Pipeline: (1) sampling phase separates star, high-degree and low-degree
nodes and forms star clusters; (2) heads/tails tree-merging with sketches
spans the high-degree side by a forest with bounded total diameter; (3) a
simulated low-diameter decomposition plus one neighbor-cluster exchange
sparsifies the low-degree side to a logarithmic-degree spanner; (4) rumor
phases push the rumor one hop per phase along the sparse subgraph, with the
diameter estimate doubling until a sketch test at the first-contact tree's
root certifies that no outgoing edge remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import DEFAULTS
from .engine import MessageBudget, SimulationError, Trace
from .graphs import Graph
from .primitives import (ContactListPhase, PhaseOverrunError,
                         SketchConvergecastPhase, TreeBroadcastPhase,
                         true_labels)
from .program import (_KEY_CONTACT, Phase, Program, charge_bulk, int_bits_vec,
                      run_program, uniform_target_scalar)
from .rng import chain, key, mix64, mix64_vec, rand_float
from .sketch import SketchParams, fresh_seed, sample_cut_edge

_KEY_STAR = key("star-coin")
_KEY_TM = key("tree-merge")
_KEY_SHIFT = key("mpx-shift")


class GeneralSpreadError(SimulationError):
    pass


def _group_targets(drivers: np.ndarray, targets: np.ndarray) -> dict[int, list[int]]:
    """{driver: sorted target list} built from parallel arrays."""
    svc: dict[int, list[int]] = {}
    if len(drivers) == 0:
        return svc
    order = np.lexsort((targets, drivers))
    d = drivers[order]
    t = targets[order]
    starts = np.nonzero(np.r_[True, d[1:] != d[:-1]])[0]
    ends = np.r_[starts[1:], len(d)]
    for a, b in zip(starts.tolist(), ends.tolist()):
        svc[int(d[a])] = t[a:b].tolist()
    return svc


# ---------------------------------------------------------------------------
# sampling phase


class SamplingPhase(Phase):
    """Star discovery and low-edge probing.

    High-degree non-star nodes contact a uniformly random incident edge each
    round; low-degree nodes walk their incident edges round-robin; stars only
    answer.  Exchanges carry (is_star, is_low) flags, so by the end every
    node knows which incident edges lead into the low-degree set, and every
    high-degree node has found a star neighbor w.h.p.
    """

    label = "sampling"

    def __init__(self, rounds: int, star: np.ndarray, high: np.ndarray,
                 low: np.ndarray, star_seen: np.ndarray):
        self.rounds = rounds
        self.star = star
        self.high = high
        self.low = low
        self.star_seen = star_seen  # lowest star id contacted, else 0

    def duration(self, P) -> int:
        return self.rounds

    def choose_contact(self, P, v, lr):
        g = P.g
        if self.high[v]:
            return uniform_target_scalar(g, P.seed, P.abs_round(lr), v)
        if self.low[v]:
            nbrs = g.neighbors(v)
            return int(nbrs[lr % len(nbrs)])
        return None

    def make_payload(self, P, v, lr, target):
        return (bool(self.star[v]), bool(self.low[v]))

    def on_exchange(self, P, v, lr, sender, payload):
        return (bool(self.star[v]), bool(self.low[v]))

    def on_reply(self, P, v, lr, responder, reply):
        if self.high[v] and reply[0]:
            if self.star_seen[v] == 0 or responder < self.star_seen[v]:
                self.star_seen[v] = responder

    def run_fast(self, P, trace, budget, abs0):
        g = P.g
        hi = np.nonzero(self.high)[0]
        lo = np.nonzero(self.low)[0]
        deg = g.degrees()
        n_active = len(hi) + len(lo)
        # flag payloads are 6 bits in each direction, every round
        charge_bulk(trace, budget, abs0, 2 * n_active * self.rounds,
                    12 * n_active * self.rounds, 6 if n_active else 0)
        trace.rounds_used += self.rounds
        if len(hi):
            pref = chain(P.seed, _KEY_CONTACT)
            for lr in range(self.rounds):
                h = mix64_vec(pref, (hi.astype(np.uint64) << np.uint64(32))
                              | np.uint64((abs0 + lr) & 0xFFFFFFFF))
                t = g.nbrs[g.indptr[hi] + (h % deg[hi - 1].astype(np.uint64)).astype(np.int64)]
                is_star = self.star[t]
                saw = hi[is_star]
                tt = t[is_star].astype(np.int64)
                cur = self.star_seen[saw]
                upd = (cur == 0) | (tt < cur)
                self.star_seen[saw[upd]] = tt[upd]


# ---------------------------------------------------------------------------
# congest blocks (broadcast-style rounds on a subgraph, one value per node)


class CongestBlockPhase(Phase):
    """T_I simulated CONGEST rounds on a subgraph, each given a round window.

    Every node owning a service list (its subgraph edges it is designated to
    drive) contacts min(len, window) of them per iteration, rotating across
    iterations when the list is longer than the window.  Payloads are
    per-node integers fixed at each iteration's start (-1 sends nothing);
    inboxes apply at iteration end.
    """

    def __init__(self, svc: dict[int, list[int]], window: int, iters: int,
                 values_fn: Callable, apply_fn: Callable,
                 label: Optional[str] = None, rotate: bool = True):
        self.svc = {v: list(t) for v, t in svc.items() if t}
        self.window = window
        self.iters = iters
        self.values_fn = values_fn  # values_fn(P, it) -> int64 array [n+1]
        self.apply_fn = apply_fn    # apply_fn(P, it, senders, receivers, values)
        self.label = label
        self.rotate = rotate

    def duration(self, P) -> int:
        return self.window * self.iters

    def begin(self, P) -> None:
        self._off = {v: 0 for v in self.svc}
        self._it = -1
        self._inbox_s: list[int] = []
        self._inbox_r: list[int] = []
        self._inbox_v: list[int] = []

    def _start_iteration(self, P, it):
        self._it = it
        self._vals = self.values_fn(P, it)

    def choose_contact(self, P, v, lr):
        it, r = divmod(lr, self.window)
        if self._it != it:
            self._start_iteration(P, it)
        lst = self.svc.get(v)
        if lst is None or r >= min(len(lst), self.window):
            return None
        return lst[(self._off[v] + r) % len(lst)]

    def make_payload(self, P, v, lr, target):
        val = int(self._vals[v])
        return val if val >= 0 else None

    def on_exchange(self, P, v, lr, sender, payload):
        if payload is not None:
            self._inbox_s.append(sender)
            self._inbox_r.append(v)
            self._inbox_v.append(payload)
        val = int(self._vals[v])
        return val if val >= 0 else None

    def on_reply(self, P, v, lr, responder, reply):
        if reply is not None:
            self._inbox_s.append(responder)
            self._inbox_r.append(v)
            self._inbox_v.append(reply)

    def end_round(self, P, lr) -> None:
        it, r = divmod(lr, self.window)
        if r == self.window - 1:
            self._flush(P, it)

    def _flush(self, P, it):
        if self._inbox_s:
            self.apply_fn(P, it,
                          np.array(self._inbox_s, dtype=np.int64),
                          np.array(self._inbox_r, dtype=np.int64),
                          np.array(self._inbox_v, dtype=np.int64))
        else:
            self.apply_fn(P, it, np.zeros(0, dtype=np.int64),
                          np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        self._inbox_s, self._inbox_r, self._inbox_v = [], [], []
        if self.rotate:
            for v, lst in self.svc.items():
                if len(lst) > self.window:
                    self._off[v] = (self._off[v] + self.window) % len(lst)

    def finish(self, P) -> None:
        pass

    def _flat_slots(self) -> tuple[np.ndarray, np.ndarray]:
        """(initiator, target) pairs served this iteration, in schedule order."""
        snd: list[int] = []
        tgt: list[int] = []
        for v in sorted(self.svc):
            lst = self.svc[v]
            L = len(lst)
            off = self._off[v]
            for j in range(min(L, self.window)):
                snd.append(v)
                tgt.append(lst[(off + j) % L])
        return np.array(snd, dtype=np.int64), np.array(tgt, dtype=np.int64)

    def run_fast(self, P, trace, budget, abs0):
        if not self.svc:
            trace.rounds_used += self.duration(P)
            return
        rotating = any(len(lst) > self.window for lst in self.svc.values())
        s = t = None
        prev_vals = None
        it = 0
        while it < self.iters:
            vals = self.values_fn(P, it)
            # fixed point: identical payloads meeting an unchanged state mean
            # every remaining iteration repeats this one's counters exactly
            if not rotating and prev_vals is not None \
                    and np.array_equal(vals, prev_vals):
                remaining = self.iters - it
                charge_bulk(trace, budget, abs0 + it * self.window,
                            self._last_msgs * remaining,
                            self._last_bits * remaining, self._last_max)
                break
            prev_vals = vals.copy()
            if s is None or rotating:
                s, t = self._flat_slots()
                if self.rotate and rotating:
                    for v, lst in self.svc.items():
                        if len(lst) > self.window:
                            self._off[v] = (self._off[v] + self.window) % len(lst)
            vs = vals[s]
            vt = vals[t]
            bs = np.where(vs >= 0, int_bits_vec(vs), 0)
            bt = np.where(vt >= 0, int_bits_vec(vt), 0)
            self._last_msgs = 2 * len(s)
            self._last_bits = int(bs.sum()) + int(bt.sum())
            self._last_max = max(int(bs.max(initial=0)), int(bt.max(initial=0)))
            charge_bulk(trace, budget, abs0 + it * self.window, self._last_msgs,
                        self._last_bits, self._last_max)
            keep_st = vs >= 0
            keep_ts = vt >= 0
            senders = np.concatenate([s[keep_st], t[keep_ts]])
            receivers = np.concatenate([t[keep_st], s[keep_ts]])
            values = np.concatenate([vs[keep_st], vt[keep_ts]])
            self.apply_fn(P, it, senders, receivers, values)
            it += 1
        trace.rounds_used += self.duration(P)


# ---------------------------------------------------------------------------
# MPX low-diameter decomposition


@dataclass
class MpxClustering:
    root: np.ndarray     # cluster root per node (-1 outside the subgraph)
    parent: np.ndarray   # tree parent within the cluster (0 at roots)
    shift_q: np.ndarray  # quantized exponential shifts
    rounds: int = 0

    def depths(self) -> np.ndarray:
        d, _ = true_labels(self.parent)
        return d


_Q = 1 << 16


def mpx_shifts(n: int, beta: float, seed: int, members: np.ndarray) -> np.ndarray:
    """Quantized exponential shifts, truncated with deterministic retries."""
    cap = (4.0 / beta) * math.log(max(n, 2))
    shift = np.zeros(n + 1, dtype=np.int64)
    for v in members:
        v = int(v)
        for attempt in range(8):
            u = rand_float(seed, _KEY_SHIFT, v, attempt)
            val = -math.log(max(u, 1e-300)) / beta
            if val <= cap:
                shift[v] = int(val * _Q)
                break
        else:
            shift[v] = int(cap * _Q)
    return shift


def _mpx_iterations(n: int, beta: float) -> int:
    return math.ceil((4.0 / beta) * math.log(max(n, 2))) + 2


_KEY_OFF = 1 << 25  # keeps wire keys nonnegative after distance decay


class _MpxState:
    """Per-node best offer (key, root) and the neighbor that delivered it."""

    def __init__(self, n: int, members: np.ndarray, shift: np.ndarray):
        self.key = np.full(n + 1, np.int64(-_KEY_OFF), dtype=np.int64)
        self.root = np.full(n + 1, -1, dtype=np.int64)
        self.parent = np.full(n + 1, -1, dtype=np.int64)
        if len(members):
            self.key[members] = shift[members]
            self.root[members] = members
            self.parent[members] = 0
        self.n = n

    def encode(self) -> np.ndarray:
        """Offer wire format: (key + offset) * (n+1) + root; -1 = no offer."""
        out = np.full(self.n + 1, -1, dtype=np.int64)
        m = self.root > 0
        out[m] = (self.key[m] + _KEY_OFF) * (self.n + 1) + self.root[m]
        return out

    def apply(self, senders, receivers, values) -> None:
        if not len(senders):
            return
        n1 = self.n + 1
        keys = values // n1 - _KEY_OFF - _Q  # one hop costs one distance unit
        roots = values % n1
        # composite (key, root, lowest-sender) max-scatter per receiver
        comp = ((keys + _KEY_OFF) * n1 + roots) * n1 + (n1 - senders)
        best = np.full(self.n + 1, -1, dtype=np.int64)
        np.maximum.at(best, receivers, comp)
        touched = np.nonzero(best >= 0)[0]
        b = best[touched]
        snd = n1 - (b % n1)
        kr = b // n1
        rt = kr % n1
        ky = kr // n1 - _KEY_OFF
        cur_k = self.key[touched]
        cur_r = self.root[touched]
        better = (ky > cur_k) | ((ky == cur_k) & (rt > cur_r))
        upd = touched[better]
        self.key[upd] = ky[better]
        self.root[upd] = rt[better]
        self.parent[upd] = snd[better]


def mpx_decompose(g: Graph, sub_edges, cover, delta_th: int, beta: float,
                  seed: int = 0, cfg=None, mode: str = "fast",
                  budget: Optional[MessageBudget] = None) -> MpxClustering:
    """Low-diameter decomposition of a subgraph through the gossip simulator.

    Every member draws a truncated exponential shift and joins the cluster
    of the root maximizing shift - distance, realized as an iterated best-
    offer flood; each simulated CONGEST round costs ``delta_th`` gossip
    rounds (the cover drives its incident subgraph edges round-robin).
    """
    cfg = cfg or DEFAULTS
    cover = set(int(v) for v in cover)
    svc: dict[int, list[int]] = {}
    members_set = set()
    for (u, v) in sub_edges:
        u, v = int(u), int(v)
        members_set.update((u, v))
        driver = min(u, v) if (u in cover and v in cover) else \
            (u if u in cover else v)
        if driver not in cover:
            raise SimulationError(f"edge ({u},{v}) has no cover endpoint")
        svc.setdefault(driver, []).append(v if driver == u else u)
    for v in svc:
        svc[v].sort()
        if len(svc[v]) > delta_th:
            raise SimulationError(f"cover node {v} exceeds degree {delta_th}")
    members = np.array(sorted(members_set), dtype=np.int64)
    shift = mpx_shifts(g.n, beta, seed, members)
    state = _MpxState(g.n, members, shift)
    iters = _mpx_iterations(g.n, beta)

    phase = CongestBlockPhase(
        svc, delta_th, iters,
        values_fn=lambda P, it: state.encode(),
        apply_fn=lambda P, it, s, r, vals: state.apply(s, r, vals),
        label="mpx")

    from .primitives import _OpProgram
    prog = _OpProgram(g, cfg, seed, lambda P: iter([phase]))
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    out = MpxClustering(root=state.root.copy(), parent=state.parent.copy(),
                        shift_q=shift, rounds=trace.rounds_used)
    out.trace = trace
    return out


def mpx_reference(g: Graph, sub_edges, beta: float, seed: int = 0,
                  shifts: Optional[np.ndarray] = None) -> MpxClustering:
    """Direct CONGEST executor for the decomposition (oracle for fidelity)."""
    adj: dict[int, list[int]] = {}
    members_set = set()
    for (u, v) in sub_edges:
        u, v = int(u), int(v)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
        members_set.update((u, v))
    members = np.array(sorted(members_set), dtype=np.int64)
    shift = shifts if shifts is not None else mpx_shifts(g.n, beta, seed, members)
    state = _MpxState(g.n, members, shift)
    for it in range(_mpx_iterations(g.n, beta)):
        enc = state.encode()
        s_list, r_list, v_list = [], [], []
        for u in sorted(adj):
            if enc[u] < 0:
                continue
            for w in sorted(adj[u]):
                s_list.append(u)
                r_list.append(w)
                v_list.append(int(enc[u]))
        state.apply(np.array(s_list, dtype=np.int64),
                    np.array(r_list, dtype=np.int64),
                    np.array(v_list, dtype=np.int64))
    return MpxClustering(root=state.root.copy(), parent=state.parent.copy(),
                         shift_q=shift)


# ---------------------------------------------------------------------------
# the sparse subgraph


@dataclass
class SparseSubgraph:
    g: Graph
    hbar: np.ndarray            # bool: star or high-degree
    star: np.ndarray
    high: np.ndarray
    low: np.ndarray
    hbar_parent: np.ndarray     # forest over hbar (E_Hbar')
    el_mask: np.ndarray         # bool per canonical edge: in E_L
    elp_mask: np.ndarray        # bool per canonical edge: in E_L'
    mpx: Optional[MpxClustering] = None
    trace: Optional[Trace] = None

    def ehbar_prime_edges(self) -> list[tuple[int, int]]:
        out = []
        for v in range(1, self.g.n + 1):
            p = int(self.hbar_parent[v])
            if p > 0:
                out.append((min(v, p), max(v, p)))
        return out

    def el_prime_edges(self) -> list[tuple[int, int]]:
        eu, ev = self.g.edge_u, self.g.edge_v
        idx = np.nonzero(self.elp_mask)[0]
        return [(int(eu[i]), int(ev[i])) for i in idx]


# ---------------------------------------------------------------------------
# the full program


class GeneralProgram(Program):
    """Sparsify, then spread, with the diameter estimate doubling."""

    def __init__(self, g: Graph, source: Optional[int], delta_exp: float = 0.5,
                 cfg=None, seed: int = 0, spread: bool = True):
        cfg = cfg or DEFAULTS
        super().__init__(g, cfg, seed)
        if not (0.0 <= delta_exp <= 1.0):
            raise ValueError(f"delta_exp must be in [0,1], got {delta_exp}")
        self.source = source
        self.delta_exp = delta_exp
        self.spread = spread
        n = g.n
        ln = math.log(max(n, 2))
        nd = n ** delta_exp
        self.deg_th = math.ceil(cfg.threshold_const * nd * ln)
        self.r_star = math.ceil(cfg.star_probe_const * nd * ln)
        self.tm_phases = math.ceil(cfg.tm_const * math.log2(max(n, 2)))
        self.b_cap = math.ceil(cfg.kappa_const * (n ** (1 - delta_exp)) * ln) + 4
        self.w_spread = cfg.spread_congest_const * math.ceil(math.log2(max(n, 2)))
        self.spread_phase_count = 0

    # -- state -----------------------------------------------------------

    def setup_state(self) -> None:
        n = self.g.n
        deg = np.zeros(n + 1, dtype=np.int64)
        deg[1:] = self.g.degrees()
        pref = chain(self.seed, _KEY_STAR)
        coins = (mix64_vec(pref, np.arange(n + 1, dtype=np.uint64))
                 >> np.uint64(11)) * (1.0 / (1 << 53))
        self.star = np.zeros(n + 1, dtype=bool)
        self.star[1:] = coins[1:] < (n ** (-self.delta_exp))
        self.high = (~self.star) & (deg >= self.deg_th)
        self.high[0] = False
        self.low = np.zeros(n + 1, dtype=bool)
        self.low[1:] = ~self.star[1:] & ~self.high[1:]
        self.star_seen = np.zeros(n + 1, dtype=np.int64)
        self.tm_parent = np.full(n + 1, -1, dtype=np.int64)
        self.el_mask = self.low[self.g.edge_u] | self.low[self.g.edge_v]
        self.keep_hbar = ~self.el_mask  # edges with no endpoint in L
        self.elp_mask = np.zeros(self.g.m, dtype=bool)
        self.mpx: Optional[MpxClustering] = None
        self.informed = np.zeros(n + 1, dtype=bool)
        self.first_from = np.full(n + 1, -1, dtype=np.int64)
        self.rumor = np.full(n + 1, -1, dtype=np.int64)
        self.done = False

    def outputs(self) -> dict:
        return {
            "rumor": self.rumor.copy(),
            "first_from": self.first_from.copy(),
            "source": self.source,
            "informed": self.informed.copy(),
            "hbar_parent": self.tm_parent.copy(),
            "elp_mask": self.elp_mask.copy(),
            "done": self.done,
        }

    def subgraph(self) -> SparseSubgraph:
        return SparseSubgraph(
            g=self.g, hbar=self.star | self.high, star=self.star.copy(),
            high=self.high.copy(), low=self.low.copy(),
            hbar_parent=self.tm_parent.copy(), el_mask=self.el_mask.copy(),
            elp_mask=self.elp_mask.copy(), mpx=self.mpx, trace=self.trace)

    def _budget_bits(self) -> int:
        return MessageBudget(self.g.id_bound, self.cfg.budget_const).max_bits

    # -- phases ------------------------------------------------------------

    def build_phases(self):
        yield from self._sampling_phases()
        yield from self._tree_merging_phases()
        yield from self._sparsification_phases()
        if self.spread:
            yield from self._spread_phases()

    def _sampling_phases(self):
        yield SamplingPhase(self.r_star, self.star, self.high, self.low,
                            self.star_seen)
        # stars root clusters; discovered highs join them; lone highs self-root
        for v in np.nonzero(self.star | self.high)[0]:
            v = int(v)
            if self.star[v]:
                self.tm_parent[v] = 0
            elif self.star_seen[v]:
                self.tm_parent[v] = self.star_seen[v]
            else:
                self.tm_parent[v] = 0  # no star found (rare): singleton star

    def _tree_merging_phases(self):
        g, n = self.g, self.g.n
        for i in range(1, self.tm_phases + 1):
            b_i = min(2 ** (i + 1) + 2, self.b_cap)
            b_next = min(2 ** (i + 2) + 2, self.b_cap)
            roots = [int(r) for r in np.nonzero(self.tm_parent == 0)[0]]
            coin = {r: mix64(self.seed, _KEY_TM, i, r) & 1 for r in roots}
            params = {r: SketchParams(
                shared_seed=fresh_seed(self.seed, _KEY_TM, i, r),
                id_bound=g.id_bound, max_id=n, delta=self.cfg.delta_sk(n),
                budget_bits=self._budget_bits())
                for r in roots if coin[r] == 0}  # tails sample
            label = f"tree-merge-{i}"
            yield TreeBroadcastPhase(
                b_i, self.tm_parent,
                {r: (params[r].shared_seed << 1 | 1) if r in params else 0
                 for r in roots}, label=label)
            parts = max((p.parts for p in params.values()), default=1)
            conv = SketchConvergecastPhase(b_i + parts, self.tm_parent, params,
                                           keep_mask=self.keep_hbar)
            yield conv
            announce = {}
            for r in roots:
                e = sample_cut_edge(conv.result[r]) if r in params else None
                announce[r] = 0 if e is None else (e[0] * g.id_bound + e[1])
            ann = TreeBroadcastPhase(b_i, self.tm_parent, announce)
            yield ann
            have, rootlab, _ = ann.received()
            proposals = []
            for r in roots:
                if not announce[r]:
                    continue
                a, b = announce[r] // g.id_bound, announce[r] % g.id_bound
                for x, peer in ((a, b), (b, a)):
                    if 1 <= x <= n and rootlab[x] == r:
                        proposals.append((int(x), int(peer), int(r)))
            kept: list[tuple[int, int]] = []  # (inside endpoint, outside endpoint)

            def handler(P, w, sender, payload, _coin=coin):
                _, wr = true_of(self.tm_parent, w)
                if wr <= 0 or wr == payload:
                    return 0
                return 1 if _coin.get(wr, 1) == 1 else 0  # kept iff target heads

            def replied(P, x, target, reply, _kept=kept):
                if reply == 1:
                    _kept.append((x, target))

            yield ContactListPhase(lambda P, _p=proposals: _p, handler, replied)
            # re-root each merging tails cluster at its inside endpoint
            walks = []
            for x, w in kept:
                walks.append((x, w))
            yield ReRootWalkPhase(b_i, self.tm_parent, walks)
            # relabel: surviving roots broadcast ids; nodes refresh depth/root
            relabel = TreeBroadcastPhase(
                b_next, self.tm_parent,
                {int(r): int(r) for r in np.nonzero(self.tm_parent == 0)[0]})
            yield relabel

    def _sparsification_phases(self):
        g, n = self.g, self.g.n
        el_idx = np.nonzero(self.el_mask)[0]
        eu = g.edge_u[el_idx]
        ev = g.edge_v[el_idx]
        both = self.low[eu] & self.low[ev]
        drv = np.where(both, np.minimum(eu, ev), np.where(self.low[eu], eu, ev))
        oth = np.where(drv == eu, ev, eu)
        svc = _group_targets(drv, oth)
        members = np.unique(np.concatenate([eu, ev])) if len(eu) else \
            np.zeros(0, dtype=np.int64)
        shift = mpx_shifts(n, self.cfg.beta_mpx, self.seed, members)
        state = _MpxState(n, members, shift)
        iters = _mpx_iterations(n, self.cfg.beta_mpx)
        yield CongestBlockPhase(
            svc, self.deg_th, iters,
            values_fn=lambda P, it: state.encode(),
            apply_fn=lambda P, it, s, r, vals: state.apply(s, r, vals),
            label="mpx")
        self.mpx = MpxClustering(root=state.root.copy(),
                                 parent=state.parent.copy(), shift_q=shift)
        # roots broadcast their id over the cluster trees (tree pull)
        depth_bound = _mpx_iterations(n, self.cfg.beta_mpx)
        mroots = {int(r): int(r)
                  for r in np.nonzero(self.mpx.parent == 0)[0]}
        yield TreeBroadcastPhase(depth_bound, self.mpx.parent, mroots,
                                 label="mpx-labels")
        # one simulated CONGEST round: everyone learns neighbor cluster ids
        root_of = self.mpx.root
        heard: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []

        def apply_ids(P, it, senders, receivers, values):
            heard.append((senders, receivers, values))

        yield CongestBlockPhase(
            svc, self.deg_th, 1,
            values_fn=lambda P, it: np.where(root_of > 0, root_of, -1),
            apply_fn=apply_ids, label="cluster-exchange")
        # keep one edge per neighboring cluster (lowest neighbor id), plus the
        # decomposition's own tree edges
        keep_u: list[int] = []
        keep_v: list[int] = []
        if heard:
            snd = np.concatenate([h[0] for h in heard])
            rcv = np.concatenate([h[1] for h in heard])
            cl = np.concatenate([h[2] for h in heard])
            keep = cl != root_of[rcv]
            rcv, snd, cl = rcv[keep], snd[keep], cl[keep]
            order = np.lexsort((snd, cl, rcv))
            rcv, snd, cl = rcv[order], snd[order], cl[order]
            firsts = np.ones(len(rcv), dtype=bool)
            firsts[1:] = (rcv[1:] != rcv[:-1]) | (cl[1:] != cl[:-1])
            keep_u = np.minimum(rcv[firsts], snd[firsts])
            keep_v = np.maximum(rcv[firsts], snd[firsts])
        tp = self.mpx.parent
        tv = members[tp[members] > 0]
        pairs = set(zip(np.asarray(keep_u).tolist(), np.asarray(keep_v).tolist()))
        pairs.update(zip(np.minimum(tv, tp[tv]).tolist(),
                         np.maximum(tv, tp[tv]).tolist()))
        eu, ev = g.edge_u, g.edge_v
        el_idx = np.nonzero(self.el_mask)[0]
        for i in el_idx.tolist():
            if (int(eu[i]), int(ev[i])) in pairs:
                self.elp_mask[i] = True

    # -- spreading ---------------------------------------------------------

    def _spread_phases(self):
        g, n = self.g, self.g.n
        self.informed[self.source] = True
        self.rumor[self.source] = self.source
        self.first_from[self.source] = 0
        # service lists for E_L': keeper drives its kept edges; every tree
        # child drives the edge to its parent
        svc: dict[int, list[int]] = {}
        eu, ev = g.edge_u, g.edge_v
        for i in np.nonzero(self.elp_mask)[0]:
            u, v = int(eu[i]), int(ev[i])
            if self.low[u] and self.low[v]:
                driver = min(u, v)
            elif self.low[u]:
                driver = u
            else:
                driver = v
            svc.setdefault(driver, []).append(v if driver == u else u)
        for v in svc:
            svc[v].sort()
        forest_members = np.nonzero(self.tm_parent > 0)[0].astype(np.int64)
        rotating = any(len(lst) > self.w_spread for lst in svc.values())
        flat = None
        if not rotating:
            snd, tgt, slot = [], [], []
            for v in sorted(svc):
                for j, u in enumerate(svc[v]):
                    snd.append(v)
                    tgt.append(u)
                    slot.append(j)
            flat = (np.array(snd, dtype=np.int64), np.array(tgt, dtype=np.int64),
                    np.array(slot, dtype=np.int64))
        d_est = 2
        n_bound = n
        while True:
            phases_here = math.ceil(
                self.cfg.spread_phase_const * (d_est + math.sqrt(n_bound))
                * math.log2(max(n_bound, 2))) + 8
            yield from self._one_estimate(d_est, phases_here, svc,
                                          forest_members, flat, rotating)
            if self.done:
                return
            d_est *= 2
            if d_est > 4 * n_bound:
                raise GeneralSpreadError(
                    "diameter estimate exceeded 4n without termination")

    def _spread_fixed_point(self, svc, flat, rotating) -> bool:
        """True when no future spreading phase can change any node's state."""
        inf = self.informed
        kids = np.nonzero(self.tm_parent > 0)[0]
        if len(kids) and not np.array_equal(inf[kids], inf[self.tm_parent[kids]]):
            return False
        if flat is not None:
            s, t, _ = flat
            if not np.array_equal(inf[s], inf[t]):
                return False
        else:
            touched = set()
            for v, lst in svc.items():
                touched.add(v)
                touched.update(lst)
                for u in lst:
                    if inf[v] != inf[u]:
                        return False
            if rotating and not all(inf[v] for v in touched):
                return False  # rotation varies per-phase reply bits otherwise
        return True

    def _one_estimate(self, d_est, phases_here, svc, forest_members, flat,
                      rotating):
        g, n = self.g, self.g.n
        label = f"spread-Dest={d_est}"
        ph = 0
        while ph < phases_here:
            if self.mode == "fast" and ph % 4 == 0 \
                    and self._spread_fixed_point(svc, flat, rotating):
                remaining = phases_here - ph
                yield _SpreadSkipPhase(remaining, self, svc, forest_members,
                                       flat, label if ph == 0 else None)
                self.spread_phase_count += remaining
                ph = phases_here
                break
            hop = ForestHopPhase(self.tm_parent, forest_members, self.informed,
                                 self.rumor, self.first_from,
                                 label=label if ph == 0 else None)
            yield hop
            yield SpreadWindowPhase(svc, self.w_spread, self.informed,
                                    self.rumor, self.first_from, flat=flat)
            self.spread_phase_count += 1
            ph += 1
        # termination check over the first-contact tree
        tree_parent = self.first_from.copy()
        tree_parent[~self.informed] = -1
        b_term = 2 * self.spread_phase_count + 2
        params = SketchParams(
            shared_seed=fresh_seed(self.seed, key("term"), d_est),
            id_bound=g.id_bound, max_id=n, delta=self.cfg.delta_sk(n),
            budget_bits=self._budget_bits())
        yield TreeBroadcastPhase(b_term, tree_parent,
                                 {self.source: params.shared_seed & ((1 << 128) - 1)})
        conv = SketchConvergecastPhase(b_term + params.parts, tree_parent,
                                       {self.source: params})
        yield conv
        edge = sample_cut_edge(conv.result[self.source])
        verdict = 1 if edge is None else 0
        yield TreeBroadcastPhase(b_term, tree_parent, {self.source: verdict})
        if verdict:
            self.done = True


def true_of(parent: np.ndarray, v: int) -> tuple[int, int]:
    """(depth, root) of one node by walking parent pointers."""
    d = 0
    x = v
    while parent[x] > 0:
        x = int(parent[x])
        d += 1
        if d > len(parent):
            return -1, -1
    if parent[x] != 0:
        return -1, -1
    return d, x


class ReRootWalkPhase(Phase):
    """Reverse the parent path from each entry node to its old root, then
    hang the entry node under its outside counterpart.

    The entry node adopts the outside endpoint immediately; a token then
    walks one hop per round up the old parent chain, and every node it
    reaches re-points at the child that delivered it.
    """

    def __init__(self, rounds: int, parent: np.ndarray,
                 walks: list[tuple[int, int]], label: Optional[str] = None):
        self.rounds = rounds
        self.parent = parent
        self.walks = walks
        self.label = label

    def duration(self, P) -> int:
        return self.rounds

    def begin(self, P) -> None:
        # token[v] = the old parent v still has to forward the token to
        self._token: dict[int, int] = {}
        self._arrived: list[tuple[int, int]] = []
        self._start: dict[int, int] = {}
        for x, w in self.walks:
            old = int(self.parent[x])
            self._start[x] = old
            self.parent[x] = w
            if old > 0:
                self._token[x] = old

    def choose_contact(self, P, v, lr):
        return self._token.get(v)

    def make_payload(self, P, v, lr, target):
        return 1

    def on_exchange(self, P, v, lr, sender, payload):
        self._arrived.append((v, sender))
        return None

    def end_round(self, P, lr) -> None:
        for v, child in self._arrived:
            self._token.pop(child, None)
            old = int(self.parent[v])
            self.parent[v] = child
            if old > 0:
                self._token[v] = old
        self._arrived = []

    def run_fast(self, P, trace, budget, abs0):
        msgs = 0
        longest = 0
        for x, w in self.walks:
            path = [x]
            nxt = self._start[x]  # begin() already re-pointed x itself
            while nxt > 0:
                path.append(nxt)
                nxt = int(self.parent[nxt])
            hops = len(path) - 1
            longest = max(longest, hops)
            msgs += 2 * hops
            for node, newp in zip(path[1:], path[:-1]):
                self.parent[node] = newp
        if longest > self.rounds:
            raise PhaseOverrunError(
                f"re-root walk needs {longest} rounds, scheduled {self.rounds}")
        charge_bulk(trace, budget, abs0, msgs, msgs, 2 if msgs else 0)
        trace.rounds_used += self.rounds


class ForestHopPhase(Phase):
    """One round: every forest child contacts its parent; the rumor crosses
    any informed-uninformed pairing in either direction."""

    def __init__(self, parent, members, informed, rumor, first_from,
                 label=None):
        self.parent = parent
        self.members = members
        self.informed = informed
        self.rumor = rumor
        self.first_from = first_from
        self.label = label

    def duration(self, P) -> int:
        return 1

    def begin(self, P) -> None:
        self._new: list[tuple[int, int, int]] = []

    def choose_contact(self, P, v, lr):
        if self.parent[v] > 0:
            return int(self.parent[v])
        return None

    def make_payload(self, P, v, lr, target):
        return int(self.rumor[v]) if self.informed[v] else None

    def on_exchange(self, P, v, lr, sender, payload):
        if payload is not None and not self.informed[v]:
            self._new.append((v, sender, payload))
        return int(self.rumor[v]) if self.informed[v] else None

    def on_reply(self, P, v, lr, responder, reply):
        if reply is not None and not self.informed[v]:
            self._new.append((v, responder, reply))

    def end_round(self, P, lr) -> None:
        for v, sender, val in self._new:
            if not self.informed[v]:
                self.informed[v] = True
                self.rumor[v] = val
                self.first_from[v] = sender
        self._new = []

    def run_fast(self, P, trace, budget, abs0):
        par = self.parent
        kids = np.array([v for v in self.members], dtype=np.int64)
        if len(kids) == 0:
            trace.rounds_used += 1
            return
        tgts = par[kids]
        inf = self.informed
        vals = self.rumor
        pay_i = inf[kids]
        rep_i = inf[tgts]
        pb = np.where(pay_i, int_bits_vec(vals[kids]), 0)
        rb = np.where(rep_i, int_bits_vec(vals[tgts]), 0)
        charge_bulk(trace, budget, abs0, 2 * len(kids),
                    int(pb.sum()) + int(rb.sum()),
                    max(int(pb.max(initial=0)), int(rb.max(initial=0))))
        # receipts in contact order (ascending child id): child k delivers to
        # its parent at order index k; the reply lands back at the same index
        order = np.arange(len(kids))
        first = np.full(P.g.n + 1, np.iinfo(np.int64).max, dtype=np.int64)
        K = P.g.n + 2
        newly: dict[int, tuple[int, int]] = {}
        push = (pay_i) & (~inf[tgts])
        np.minimum.at(first, tgts[push], order[push] * K + kids[push])
        pull = (rep_i) & (~inf[kids])
        np.minimum.at(first, kids[pull], order[pull] * K + tgts[pull])
        got = np.nonzero(first < np.iinfo(np.int64).max)[0]
        senders = (first[got] % K).astype(np.int64)
        for v, s in zip(got.tolist(), senders.tolist()):
            self.informed[v] = True
            self.rumor[v] = self.rumor[s] if self.rumor[s] >= 0 else self.rumor[v]
            self.first_from[v] = s
        trace.rounds_used += 1


class _SpreadSkipPhase(Phase):
    """Counters for k spreading phases whose state provably cannot change
    (the informed set is closed under every sparse-subgraph edge)."""

    def __init__(self, k, prog, svc, forest_members, flat, label=None):
        self.k = k
        self.prog = prog
        self.svc = svc
        self.members = forest_members
        self.flat = flat
        self.label = label

    def duration(self, P) -> int:
        return self.k * (1 + self.prog.w_spread)

    def run_fast(self, P, trace, budget, abs0):
        inf = self.prog.informed
        vals = self.prog.rumor
        msgs = 0
        bits = 0
        maxb = 0
        kids = self.members
        if len(kids):
            par = self.prog.tm_parent[kids]
            pb = np.where(inf[kids], int_bits_vec(vals[kids]), 0)
            rb = np.where(inf[par], int_bits_vec(vals[par]), 0)
            msgs += 2 * len(kids)
            bits += int(pb.sum()) + int(rb.sum())
            maxb = max(maxb, int(pb.max(initial=0)), int(rb.max(initial=0)))
        if self.flat is not None:
            s, t, _ = self.flat
        else:
            s_list, t_list = [], []
            for v in sorted(self.svc):
                lst = self.svc[v]
                for j in range(min(len(lst), self.prog.w_spread)):
                    s_list.append(v)
                    t_list.append(lst[j])  # all touched nodes informed: offset-free
            s = np.array(s_list, dtype=np.int64)
            t = np.array(t_list, dtype=np.int64)
        if len(s):
            pb = np.where(inf[s], int_bits_vec(vals[s]), 0)
            rb = np.where(inf[t], int_bits_vec(vals[t]), 0)
            msgs += 2 * len(s)
            bits += int(pb.sum()) + int(rb.sum())
            maxb = max(maxb, int(pb.max(initial=0)), int(rb.max(initial=0)))
        charge_bulk(trace, budget, abs0, msgs * self.k, bits * self.k, maxb)
        # keep rotation offsets in step with what per-phase execution would do
        off = getattr(P, "_spread_offsets", None)
        if off is not None:
            for v, lst in self.svc.items():
                if len(lst) > self.prog.w_spread:
                    off[v] = (off[v] + self.k * self.prog.w_spread) % len(lst)
        trace.rounds_used += self.duration(P)


class SpreadWindowPhase(Phase):
    """One simulated CONGEST round of rumor exchange on the sparse spanner.

    Servicers contact their kept edges round-robin inside a fixed window;
    payloads are frozen at window start, so the rumor advances exactly one
    spanner hop per phase.
    """

    def __init__(self, svc, window, informed, rumor, first_from, label=None,
                 flat=None):
        self.svc = svc
        self.window = window
        self.informed = informed
        self.rumor = rumor
        self.first_from = first_from
        self.label = label
        self.flat = flat  # precomputed (senders, targets, slots); rotation-free
        self._offsets: dict[int, int] = {}

    def duration(self, P) -> int:
        return self.window

    def begin(self, P) -> None:
        self._snap = self.informed.copy()
        self._new: list[tuple[int, int, int, int]] = []
        if not hasattr(P, "_spread_offsets"):
            P._spread_offsets = {v: 0 for v in self.svc}
        self._off = P._spread_offsets

    def choose_contact(self, P, v, lr):
        lst = self.svc.get(v)
        if not lst or lr >= min(len(lst), self.window):
            return None
        return lst[(self._off[v] + lr) % len(lst)]

    def make_payload(self, P, v, lr, target):
        return int(self.rumor[v]) if self._snap[v] else None

    def on_exchange(self, P, v, lr, sender, payload):
        if payload is not None and not self.informed[v] \
                and all(t[0] != v for t in self._new):
            self._new.append((v, sender, payload, len(self._new)))
        return int(self.rumor[v]) if self._snap[v] else None

    def on_reply(self, P, v, lr, responder, reply):
        if reply is not None and not self.informed[v] \
                and all(t[0] != v for t in self._new):
            self._new.append((v, responder, reply, len(self._new)))

    def finish(self, P) -> None:
        for v, sender, val, _ in self._new:
            if not self.informed[v]:
                self.informed[v] = True
                self.rumor[v] = val
                self.first_from[v] = sender
        for v, lst in self.svc.items():
            if len(lst) > self.window:
                self._off[v] = (self._off[v] + self.window) % len(lst)
        self._new = []

    def run_fast(self, P, trace, budget, abs0):
        if self.flat is not None:
            s, t, slot = self.flat
        else:
            snd: list[int] = []
            tgt: list[int] = []
            slots: list[int] = []
            for v in sorted(self.svc):
                lst = self.svc[v]
                L = len(lst)
                off = self._off[v]
                for j in range(min(L, self.window)):
                    snd.append(v)
                    tgt.append(lst[(off + j) % L])
                    slots.append(j)
            s = np.array(snd, dtype=np.int64)
            t = np.array(tgt, dtype=np.int64)
            slot = np.array(slots, dtype=np.int64)
        if not len(s):
            trace.rounds_used += self.window
            self.finish(P)
            self.finish = lambda P: None
            return
        snap = self.informed.copy()
        vals = self.rumor
        pb = np.where(snap[s], int_bits_vec(vals[s]), 0)
        rb = np.where(snap[t], int_bits_vec(vals[t]), 0)
        charge_bulk(trace, budget, abs0, 2 * len(s),
                    int(pb.sum()) + int(rb.sum()),
                    max(int(pb.max(initial=0)), int(rb.max(initial=0))))
        # first receipt per node: reference schedules round-major (round r
        # serves slot r), so order receipts by (slot, then initiator id)
        K = P.g.n + 2
        okey = slot * K * K + s * K  # (round, initiator) order
        first = np.full(P.g.n + 1, np.iinfo(np.int64).max, dtype=np.int64)
        push = snap[s] & ~snap[t]
        np.minimum.at(first, t[push], okey[push] + s[push])
        pull = snap[t] & ~snap[s]
        np.minimum.at(first, s[pull], okey[pull] + t[pull])
        got = np.nonzero(first < np.iinfo(np.int64).max)[0]
        senders = (first[got] % K).astype(np.int64)
        for v, sd in zip(got.tolist(), senders.tolist()):
            if not self.informed[v]:
                self.informed[v] = True
                self.rumor[v] = self.rumor[sd]
                self.first_from[v] = sd
        for v, lst in self.svc.items():
            if len(lst) > self.window:
                self._off[v] = (self._off[v] + self.window) % len(lst)
        trace.rounds_used += self.window
        self.finish = lambda P: None


# ---------------------------------------------------------------------------
# public operations


def sparsify(g: Graph, delta_exp: float, cfg=None, seed: int = 0,
             mode: str = "fast",
             budget: Optional[MessageBudget] = None) -> SparseSubgraph:
    """Compute the detour/threshold sparse subgraph (no rumor spreading)."""
    cfg = cfg or DEFAULTS
    prog = GeneralProgram(g, None, delta_exp, cfg=cfg, seed=seed, spread=False)
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    sub = prog.subgraph()
    sub.trace = trace
    return sub


def rumor_spread_general(g: Graph, source: int, cfg=None, seed: int = 0,
                         mode: str = "fast",
                         budget: Optional[MessageBudget] = None) -> Trace:
    """Spread a rumor in about D + sqrt(n) (polylog factors) rounds."""
    cfg = cfg or DEFAULTS
    prog = GeneralProgram(g, source, 0.5, cfg=cfg, seed=seed, spread=True)
    if budget is None:
        budget = MessageBudget(g.id_bound, cfg.budget_const)
    trace = run_program(g, prog, budget=budget, seed=seed, mode=mode)
    return trace
