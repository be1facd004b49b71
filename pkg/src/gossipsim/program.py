"""Phased protocol programs and their two interchangeable executors.

Algorithms here are straight-line sequences of phases whose lengths every
node can compute from globally known parameters, so a program is a list of
Phase objects over shared per-node state arrays.  A program runs either

* through the callback engine (``mode="reference"``), one contact at a
  time, exactly as the round executor defines the model; or
* through each phase's vectorized ``run_fast`` (``mode="fast"``), which
  must reproduce the reference execution bit for bit: same final state,
  same rounds, same message count, same bit totals.

Randomness is counter-based (see rng), so the fast path may evaluate many
rounds at once, or extrapolate counters over rounds that provably cannot
change state, and still agree with the reference path.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from . import engine
from .engine import BudgetExceededError, MessageBudget, Trace
from .graphs import Graph
from .rng import chain, key, mix64, mix64_vec
from .wire import payload_bits

_KEY_CONTACT = key("uniform-contact")


def int_bits_vec(vals: np.ndarray) -> np.ndarray:
    """Vectorized wire size of signed ints; exact for |v| < 2^51."""
    mag = np.abs(vals).astype(np.float64)
    bits = np.zeros(vals.shape, dtype=np.int64)
    nz = mag > 0
    bits[nz] = np.floor(np.log2(mag[nz])).astype(np.int64) + 1
    return bits + 1


class Phase:
    """One schedule block. Durations are globally computable constants."""

    label: Optional[str] = None

    def duration(self, P) -> int:
        raise NotImplementedError

    def begin(self, P) -> None:
        pass

    def finish(self, P) -> None:
        pass

    def done_early(self, P, lr: int) -> bool:
        """Baseline protocols only; scheduled algorithms always run full length."""
        return False

    # reference-path callbacks (lr = local round within the phase)
    def choose_contact(self, P, v: int, lr: int) -> Optional[int]:
        return None

    def make_payload(self, P, v: int, lr: int, target: int):
        return None

    def on_exchange(self, P, v: int, lr: int, sender: int, payload):
        return None

    def on_reply(self, P, v: int, lr: int, responder: int, reply) -> None:
        pass

    def local_step(self, P, v: int, lr: int) -> None:
        pass

    def end_round(self, P, lr: int) -> None:
        pass

    def run_fast(self, P, trace: Trace, budget: Optional[MessageBudget],
                 abs0: int) -> None:
        """Default fast path: drive the reference callbacks in-process."""
        reference_rounds(self, P, trace, budget, abs0)


def reference_rounds(phase: Phase, P, trace: Trace,
                     budget: Optional[MessageBudget], abs0: int) -> None:
    g = P.g
    R = phase.duration(P)
    for lr in range(R):
        if phase.done_early(P, lr):
            break
        contacts = []
        for v in range(1, g.n + 1):
            t = phase.choose_contact(P, v, lr)
            if t is not None:
                contacts.append((v, int(t)))
        for u, t in contacts:
            out = phase.make_payload(P, u, lr, t)
            trace.charge(abs0 + lr, u, payload_bits(out), budget)
            reply = phase.on_exchange(P, t, lr, u, out)
            trace.charge(abs0 + lr, t, payload_bits(reply), budget)
            phase.on_reply(P, u, lr, t, reply)
        for v in range(1, g.n + 1):
            phase.local_step(P, v, lr)
        phase.end_round(P, lr)
        trace.rounds_used += 1


class Program(engine.Protocol):
    """Shared state + a phase sequence; runs under either executor.

    Subclasses set up state arrays in ``setup_state`` and yield phases from
    ``build_phases``.  The generator may consult state between phases (e.g.
    to append a retry), as long as every decision is a deterministic
    function of (graph, params, seed).
    """

    def __init__(self, g: Graph, cfg, seed: int):
        self.g = g
        self.cfg = cfg
        self.seed = seed
        self.trace: Optional[Trace] = None
        self.mode = "fast"  # run_program sets this; phases may consult it

    # -- subclass interface --------------------------------------------------

    def setup_state(self) -> None:
        raise NotImplementedError

    def build_phases(self) -> Iterable[Phase]:
        raise NotImplementedError

    def outputs(self) -> dict:
        return {}

    # -- engine.Protocol plumbing (reference mode) ----------------------------

    def begin(self, g: Graph, seed: int) -> None:
        assert g is self.g
        self.setup_state()
        self._it = iter(self.build_phases())
        self._phase: Optional[Phase] = None
        self._phase_start = 0
        self._pending_mark: Optional[str] = None
        self._finished = False
        self._advance(0)

    def _advance(self, rnd: int) -> None:
        while not self._finished:
            if self._phase is None:
                try:
                    self._phase = next(self._it)
                except StopIteration:
                    self._finished = True
                    return
                self._phase_start = rnd
                self._phase.begin(self)
                self._pending_mark = self._phase.label
                if self._phase.duration(self) > 0:
                    return
                self._phase.finish(self)
                self._phase = None
            else:
                return

    def _local(self, rnd: int) -> int:
        return rnd - self._phase_start

    def abs_round(self, lr: int) -> int:
        return self._phase_start + lr

    def phase_label(self, rnd: int) -> Optional[str]:
        mark = self._pending_mark
        self._pending_mark = None
        return mark

    def is_halted(self, v: int) -> bool:
        return self._finished

    def choose_contact(self, v: int, rnd: int):
        if self._finished:
            return None
        return self._phase.choose_contact(self, v, self._local(rnd))

    def make_payload(self, v: int, rnd: int, target: int):
        return self._phase.make_payload(self, v, self._local(rnd), target)

    def on_exchange(self, v: int, rnd: int, sender: int, payload):
        return self._phase.on_exchange(self, v, self._local(rnd), sender, payload)

    def on_reply(self, v: int, rnd: int, responder: int, reply):
        self._phase.on_reply(self, v, self._local(rnd), responder, reply)

    def local_step(self, v: int, rnd: int) -> None:
        if not self._finished:
            self._phase.local_step(self, v, self._local(rnd))

    def end_round(self, rnd: int) -> None:
        if self._finished:
            return
        phase = self._phase
        lr = self._local(rnd)
        phase.end_round(self, lr)
        if lr + 1 >= phase.duration(self) or phase.done_early(self, lr + 1):
            phase.finish(self)
            self._phase = None
            self._advance(rnd + 1)


def run_program(g: Graph, program: Program, budget: Optional[MessageBudget] = None,
                seed: int = 0, mode: str = "fast",
                max_rounds: Optional[int] = None) -> Trace:
    """Execute a program to completion and return its Trace."""
    if mode == "reference":
        program.mode = "reference"
        trace = engine.run(g, program, budget=budget,
                           max_rounds=max_rounds or 100_000_000, seed=seed)
        program.trace = trace
        return trace
    if mode != "fast":
        raise ValueError(f"unknown mode {mode!r}")
    program.mode = "fast"
    program.seed = seed
    program.setup_state()
    trace = Trace(rng_seed=seed)
    program.trace = trace
    for phase in program.build_phases():
        program._phase_start = trace.rounds_used
        phase.begin(program)
        if phase.label:
            trace.mark(trace.rounds_used, phase.label)
        dur = phase.duration(program)
        if dur > 0:
            before = trace.rounds_used
            phase.run_fast(program, trace, budget, before)
            assert trace.rounds_used - before <= dur
            if max_rounds is not None and trace.rounds_used > max_rounds:
                raise engine.RoundLimitError(
                    f"program exceeded {max_rounds} rounds")
        phase.finish(program)
    trace.outputs = program.outputs()
    return trace


# ---------------------------------------------------------------------------
# Counter helpers shared by fast paths


def charge_bulk(trace: Trace, budget: Optional[MessageBudget], rnd: int,
                n_messages: int, total_bits: int, max_bits: int) -> None:
    trace.messages_sent += int(n_messages)
    trace.total_bits += int(total_bits)
    if max_bits > trace.max_message_bits:
        trace.max_message_bits = int(max_bits)
    if budget is not None and max_bits > budget.max_bits:
        raise BudgetExceededError(rnd, -1, int(max_bits), budget.max_bits)


def uniform_targets(g: Graph, seed: int, abs_round: int,
                    active: np.ndarray) -> np.ndarray:
    """Contact choices for one round of uniform gossip, one per active node.

    Matches the scalar draw mix64(seed, KEY_CONTACT, v, abs_round) % deg(v).
    """
    nodes = np.nonzero(active)[0]
    deg = (g.indptr[nodes + 1] - g.indptr[nodes]).astype(np.uint64)
    pref = chain(seed, _KEY_CONTACT)
    h = mix64_vec(pref, nodes.astype(np.uint64) << np.uint64(32)
                  | np.uint64(abs_round & 0xFFFFFFFF))
    slot = (h % deg).astype(np.int64)
    return g.nbrs[g.indptr[nodes] + slot].astype(np.int64)


def uniform_target_scalar(g: Graph, seed: int, abs_round: int, v: int) -> int:
    h = mix64(seed, _KEY_CONTACT, (v << 32) | (abs_round & 0xFFFFFFFF))
    return int(g.neighbors(v)[h % g.degree(v)])
