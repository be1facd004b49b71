"""The synchronous round executor.

A round has three steps: (i) every non-halted node may pick one neighbor to
contact, (ii) each contacted node receives every contacter's payload and
answers each of them within the same round, (iii) every node runs its local
step.  Replies and payloads are computed from start-of-round state: a
protocol must buffer what it learns during step (ii) and apply it in step
(iii), which is what makes runs independent of message processing order.

The executor enforces the one-contact rule, neighbor legality, and the
message bit budget, and records a Trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .graphs import Graph
from .wire import payload_bits


class SimulationError(RuntimeError):
    pass


class IllegalContactError(SimulationError):
    """A node tried to contact a non-neighbor."""


class BudgetExceededError(SimulationError):
    def __init__(self, rnd: int, sender: int, bits: int, limit: int):
        super().__init__(
            f"round {rnd}: node {sender} sent {bits} bits (budget {limit})")
        self.round = rnd
        self.sender = sender
        self.bits = bits


class RoundLimitError(SimulationError):
    """max_rounds reached before every node halted."""


class CoverViolationError(SimulationError):
    """simulate_congest_round: an edge of the subgraph has no cover endpoint."""


class DegreeViolationError(SimulationError):
    """simulate_congest_round: a cover node exceeds the degree threshold."""


@dataclass
class MessageBudget:
    """Per-message bit cap: budget_const * ceil(log2 N)^2."""
    id_bound: int
    budget_const: int = 64

    @property
    def max_bits(self) -> int:
        return self.budget_const * math.ceil(math.log2(max(self.id_bound, 2))) ** 2


@dataclass
class Trace:
    rounds_used: int = 0
    messages_sent: int = 0
    total_bits: int = 0
    max_message_bits: int = 0
    phase_marks: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    rng_seed: int = 0

    def mark(self, rnd: int, label: str) -> None:
        self.phase_marks.append((rnd, label))

    def charge(self, rnd: int, sender: int, bits: int,
               budget: Optional[MessageBudget]) -> None:
        self.messages_sent += 1
        self.total_bits += bits
        if bits > self.max_message_bits:
            self.max_message_bits = bits
        if budget is not None and bits > budget.max_bits:
            raise BudgetExceededError(rnd, sender, bits, budget.max_bits)

    def to_json(self) -> str:
        return json.dumps({
            "rounds": self.rounds_used,
            "messages": self.messages_sent,
            "bits": self.total_bits,
            "max_message_bits": self.max_message_bits,
            "phases": [[r, label] for r, label in self.phase_marks],
            "seed": self.rng_seed,
        }, sort_keys=True)


class Protocol:
    """Duck-typed per-node callback interface the executor drives.

    Subclasses keep all per-node state internally (dicts or arrays keyed by
    node id) and must follow snapshot discipline: choose_contact,
    make_payload and on_exchange read only start-of-round state, while
    on_exchange/on_reply buffer inbound data that local_step applies.
    """

    def begin(self, g: Graph, seed: int) -> None:
        raise NotImplementedError

    def choose_contact(self, v: int, rnd: int) -> Optional[int]:
        return None

    def make_payload(self, v: int, rnd: int, target: int):
        return None

    def on_exchange(self, v: int, rnd: int, sender: int, payload):
        """Called at the contacted node; returns the reply payload."""
        return None

    def on_reply(self, v: int, rnd: int, responder: int, reply) -> None:
        pass

    def local_step(self, v: int, rnd: int) -> None:
        pass

    def is_halted(self, v: int) -> bool:
        return False

    def end_round(self, rnd: int) -> None:
        pass

    def outputs(self) -> dict:
        return {}

    def phase_label(self, rnd: int) -> Optional[str]:
        return None


def run(g: Graph, proto: Protocol, budget: Optional[MessageBudget] = None,
        max_rounds: int = 1_000_000, seed: int = 0) -> Trace:
    """Execute a protocol to global halt; deterministic in (g, proto, seed)."""
    proto.begin(g, seed)
    trace = Trace(rng_seed=seed)
    nodes = range(1, g.n + 1)
    rnd = 0
    while True:
        if all(proto.is_halted(v) for v in nodes):
            break
        if rnd >= max_rounds:
            raise RoundLimitError(f"no global halt after {max_rounds} rounds")
        label = proto.phase_label(rnd)
        if label:
            trace.mark(rnd, label)
        contacts = []
        for v in nodes:
            if proto.is_halted(v):
                continue
            t = proto.choose_contact(v, rnd)
            if t is None:
                continue
            if not g.has_edge(v, int(t)):
                raise IllegalContactError(
                    f"round {rnd}: node {v} contacted non-neighbor {t}")
            contacts.append((v, int(t)))
        for u, t in contacts:
            out = proto.make_payload(u, rnd, t)
            trace.charge(rnd, u, payload_bits(out), budget)
            reply = proto.on_exchange(t, rnd, u, out)
            trace.charge(rnd, t, payload_bits(reply), budget)
            proto.on_reply(u, rnd, t, reply)
        for v in nodes:
            if not proto.is_halted(v):
                proto.local_step(v, rnd)
        proto.end_round(rnd)
        rnd += 1
    trace.rounds_used = rnd
    trace.outputs = proto.outputs()
    return trace


# ---------------------------------------------------------------------------
# Vertex-cover based simulation of one CONGEST round


@dataclass
class CongestSimResult:
    rounds: int
    delivered: dict  # node -> sorted list of (sender, payload)


def simulate_congest_round(g: Graph, sub_edges, cover, delta_th: int,
                           outbox: dict, budget: Optional[MessageBudget] = None,
                           trace: Optional[Trace] = None) -> CongestSimResult:
    """Deliver one CONGEST round's messages over a subgraph using gossip contacts.

    ``sub_edges``: edges of the (possibly disconnected) subgraph; ``cover``: a
    vertex cover of it whose members have subgraph degree <= delta_th;
    ``outbox``: per-node dict {neighbor: payload} of messages to send.  Cover
    nodes contact their subgraph neighbors one per round, round-robin; other
    nodes initiate nothing.  One exchange services an edge in both directions
    and each edge is serviced exactly once, so after at most delta_th rounds
    every node holds exactly the multiset of messages addressed to it.
    """
    sub_adj: dict[int, list] = {}
    cover = set(int(v) for v in cover)
    for (u, v) in sub_edges:
        sub_adj.setdefault(int(u), []).append(int(v))
        sub_adj.setdefault(int(v), []).append(int(u))
        if int(u) not in cover and int(v) not in cover:
            raise CoverViolationError(f"edge ({u},{v}) has no cover endpoint")
    for v in sub_adj:
        sub_adj[v].sort()
    for v in cover:
        if len(sub_adj.get(v, [])) > delta_th:
            raise DegreeViolationError(
                f"cover node {v} has degree {len(sub_adj[v])} > {delta_th}")

    trace = trace if trace is not None else Trace()
    delivered: dict[int, list] = {}
    serviced: set[tuple[int, int]] = set()
    rnd = 0
    while rnd < delta_th:
        for u in sorted(cover):
            nbrs = sub_adj.get(u, [])
            if rnd >= len(nbrs):
                continue
            t = nbrs[rnd]
            e = (min(u, t), max(u, t))
            if e in serviced:
                continue  # the other cover endpoint already serviced this edge
            if not g.has_edge(u, t):
                raise IllegalContactError(f"subgraph edge ({u},{t}) not in G")
            out = outbox.get(u, {}).get(t)
            reply = outbox.get(t, {}).get(u)
            trace.charge(rnd, u, payload_bits(out), budget)
            trace.charge(rnd, t, payload_bits(reply), budget)
            delivered.setdefault(t, []).append((u, out))
            delivered.setdefault(u, []).append((t, reply))
            serviced.add(e)
        rnd += 1
        if all(rnd >= len(sub_adj.get(v, [])) for v in cover):
            break
    trace.rounds_used += rnd
    delivered = {v: sorted(ms, key=lambda sp: (sp[0], repr(sp[1])))
                 for v, ms in delivered.items()}
    return CongestSimResult(rounds=rnd, delivered=delivered)


def congest_round_reference(sub_edges, outbox: dict) -> dict:
    """Direct CONGEST executor: every edge delivers both ways at once (oracle)."""
    delivered: dict[int, list] = {}
    for (u, v) in sub_edges:
        u, v = int(u), int(v)
        delivered.setdefault(v, []).append((u, outbox.get(u, {}).get(v)))
        delivered.setdefault(u, []).append((v, outbox.get(v, {}).get(u)))
    return {v: sorted(ms, key=lambda sp: (sp[0], repr(sp[1])))
            for v, ms in delivered.items()}
