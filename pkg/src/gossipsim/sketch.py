"""Linear graph sketches over signed incidence vectors.

A sketch is a levels x reps grid of cells; cell (l, r) accumulates, over
the edges whose level-hash has at least l trailing zero bits in repetition
r, the signed count, the signed sum of edge indices, and a signed hash
fingerprint.  All three fields wrap modulo fixed powers of two, so addition
of sketches is exact, associative and commutative, and the sketch of a node
set equals the cell-wise sum of its members' sketches.  A cell holding
exactly one edge reveals that edge; the fingerprint test rejects cells that
merely look one-sparse.

Edge (u, v) with u < v is indexed as (u-1)*N + (v-1); the endpoint with the
smaller id contributes +1 and the other -1, so edges internal to a merged
set cancel and only cut edges survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Optional

import numpy as np

from .rng import chain, key, mix64, mix64_from, mix64_vec

_KEY_LEVEL = key("sketch-level")
_KEY_CHECK = key("sketch-check")
_U64 = np.uint64
_M64 = (1 << 64) - 1


class SketchMismatchError(ValueError):
    """Sketches built under different params or edge filters cannot merge."""


class IdOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SketchParams:
    """Shared configuration all nodes derive from the same random string.

    shared_seed carries the common random bits; id_bound is the global id
    bound N; max_id the largest id actually in use (indices stay below
    max_id * N, which keeps cells narrow); delta the per-sample failure
    probability; budget_bits the message cap a packed part must respect.
    """
    shared_seed: int
    id_bound: int
    max_id: int
    delta: float
    budget_bits: int
    tag: str = "all"
    count_bits: int = 8
    check_bits: int = 40

    def __post_init__(self):
        if not (0 < self.delta < 1):
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if self.max_id > self.id_bound:
            raise ValueError("max_id exceeds id_bound")

    @cached_property
    def reps(self) -> int:
        return max(1, math.ceil(math.log2(1.0 / self.delta)))

    @cached_property
    def levels(self) -> int:
        pairs = self.max_id * (self.max_id - 1) // 2
        return max(2, math.ceil(math.log2(max(pairs, 2))) + 1)

    @cached_property
    def index_bits(self) -> int:
        return math.ceil(math.log2(self.max_id * self.id_bound))

    @cached_property
    def cell_bits(self) -> int:
        return self.count_bits + self.index_bits + self.check_bits

    @cached_property
    def group_reps(self) -> int:
        """Reps per wire part, sized so a fixed-width part fits the budget."""
        per_rep = self.levels * self.cell_bits
        g = (self.budget_bits - _PART_HEADER_BITS) // per_rep
        if g < 1:
            raise ValueError(
                f"one sketch repetition ({per_rep} bits) exceeds the "
                f"message budget ({self.budget_bits} bits)")
        return min(g, self.reps)

    @cached_property
    def parts(self) -> int:
        return math.ceil(self.reps / self.group_reps)

    @cached_property
    def _seed_words(self) -> tuple[int, int]:
        return self.shared_seed & _M64, (self.shared_seed >> 64) & _M64

    def level_prefix(self, rep: int) -> int:
        w0, w1 = self._seed_words
        return chain(w0, w1, _KEY_LEVEL, rep)

    def check_prefix(self) -> int:
        w0, w1 = self._seed_words
        return chain(w0, w1, _KEY_CHECK)

    def edge_index(self, u: int, v: int) -> int:
        a, b = (u, v) if u < v else (v, u)
        if not (1 <= a < b <= self.max_id):
            raise IdOutOfRangeError(f"edge ({u},{v}) outside id range 1..{self.max_id}")
        return (a - 1) * self.id_bound + (b - 1)

    def decode_index(self, i: int) -> Optional[tuple[int, int]]:
        a, b = i // self.id_bound + 1, i % self.id_bound + 1
        if 1 <= a < b <= self.max_id:
            return a, b
        return None


_PART_HEADER_BITS = 16


def _masks(params: SketchParams):
    return (_U64((1 << params.count_bits) - 1),
            _U64((1 << params.index_bits) - 1),
            _U64((1 << params.check_bits) - 1))


def _trailing_zeros(h: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.bitwise_count((h & (~h + _U64(1))) - _U64(1))


class Sketch:
    """Value object: three (levels, reps) uint64 grids, kept canonical mod 2^w."""

    __slots__ = ("params", "count", "isum", "csum")

    def __init__(self, params: SketchParams, count=None, isum=None, csum=None):
        self.params = params
        shape = (params.levels, params.reps)
        self.count = count if count is not None else np.zeros(shape, dtype=_U64)
        self.isum = isum if isum is not None else np.zeros(shape, dtype=_U64)
        self.csum = csum if csum is not None else np.zeros(shape, dtype=_U64)

    def copy(self) -> "Sketch":
        return Sketch(self.params, self.count.copy(), self.isum.copy(),
                      self.csum.copy())

    def is_zero(self) -> bool:
        return not (self.count.any() or self.isum.any() or self.csum.any())

    def __eq__(self, other):
        return (isinstance(other, Sketch) and self.params == other.params
                and np.array_equal(self.count, other.count)
                and np.array_equal(self.isum, other.isum)
                and np.array_equal(self.csum, other.csum))

    def bit_size(self) -> int:
        p = self.params
        return p.parts * _PART_HEADER_BITS + p.levels * p.reps * p.cell_bits

    def part(self, j: int) -> "SketchPart":
        p = self.params
        lo = j * p.group_reps
        hi = min(lo + p.group_reps, p.reps)
        return SketchPart(p, j, self.count[:, lo:hi].copy(),
                          self.isum[:, lo:hi].copy(), self.csum[:, lo:hi].copy())


@dataclass
class SketchPart:
    """One wire-sized slice of a sketch (a contiguous group of repetitions).

    Parts with the same index merge cell-wise, so a convergecast can pipeline
    one part per round without ever exceeding the message budget.
    """
    params: SketchParams
    index: int
    count: np.ndarray
    isum: np.ndarray
    csum: np.ndarray

    def bit_size(self) -> int:
        p = self.params
        return _PART_HEADER_BITS + p.levels * self.count.shape[1] * p.cell_bits

    def merge(self, other: "SketchPart") -> "SketchPart":
        if self.params != other.params or self.index != other.index:
            raise SketchMismatchError("parts from different sketches or positions")
        cm, im, km = _masks(self.params)
        with np.errstate(over="ignore"):
            return SketchPart(self.params, self.index,
                              (self.count + other.count) & cm,
                              (self.isum + other.isum) & im,
                              (self.csum + other.csum) & km)

    def pack(self) -> bytes:
        """Fixed-width binary encoding; bit_size() bits before byte padding."""
        p = self.params
        acc = (self.index & 0xFF) | ((self.count.shape[1] & 0xFF) << 8)
        pos = _PART_HEADER_BITS
        cw, iw, kw = p.count_bits, p.index_bits, p.check_bits
        for l in range(p.levels):
            for r in range(self.count.shape[1]):
                acc |= int(self.count[l, r]) << pos
                pos += cw
                acc |= int(self.isum[l, r]) << pos
                pos += iw
                acc |= int(self.csum[l, r]) << pos
                pos += kw
        return acc.to_bytes((pos + 7) // 8, "little")

    @classmethod
    def unpack(cls, data: bytes, params: SketchParams) -> "SketchPart":
        acc = int.from_bytes(data, "little")
        index = acc & 0xFF
        width = (acc >> 8) & 0xFF
        pos = _PART_HEADER_BITS
        cw, iw, kw = params.count_bits, params.index_bits, params.check_bits
        count = np.zeros((params.levels, width), dtype=_U64)
        isum = np.zeros((params.levels, width), dtype=_U64)
        csum = np.zeros((params.levels, width), dtype=_U64)
        for l in range(params.levels):
            for r in range(width):
                count[l, r] = (acc >> pos) & ((1 << cw) - 1)
                pos += cw
                isum[l, r] = (acc >> pos) & ((1 << iw) - 1)
                pos += iw
                csum[l, r] = (acc >> pos) & ((1 << kw) - 1)
                pos += kw
        return cls(params, index, count, isum, csum)


def assemble(parts: Iterable[SketchPart], params: SketchParams) -> Sketch:
    s = Sketch(params)
    for part in sorted(parts, key=lambda p: p.index):
        lo = part.index * params.group_reps
        hi = lo + part.count.shape[1]
        s.count[:, lo:hi] = part.count
        s.isum[:, lo:hi] = part.isum
        s.csum[:, lo:hi] = part.csum
    return s


def merge(a: Sketch, b: Sketch) -> Sketch:
    """Cell-wise sum; exact, associative and commutative."""
    if a.params != b.params:
        raise SketchMismatchError("sketch params differ")
    cm, im, km = _masks(a.params)
    with np.errstate(over="ignore"):
        return Sketch(a.params, (a.count + b.count) & cm,
                      (a.isum + b.isum) & im, (a.csum + b.csum) & km)


def _accumulate(sk: Sketch, idx: np.ndarray, signs: np.ndarray) -> None:
    """Add signed edge contributions (vector of indices, +-1 signs) into sk."""
    p = sk.params
    if len(idx) == 0:
        return
    R, L = p.reps, p.levels
    cm, im, km = _masks(p)
    idx_u = idx.astype(_U64)
    pos = signs > 0
    cprefix = p.check_prefix()
    hcheck = mix64_vec(cprefix, idx_u) & km
    with np.errstate(over="ignore"):
        neg_i = (-idx_u) & im
        neg_h = (-hcheck) & km
        neg_c = _U64(_M64) & cm  # -1 mod 2^count_bits
        for r in range(R):
            h = mix64_vec(p.level_prefix(r), idx_u)
            tz = _trailing_zeros(h).astype(np.int64)
            np.minimum(tz, L - 1, out=tz)
            # scatter at the top level, then suffix-sum down the level axis:
            # an edge at level t contributes to every cell 0..t.
            top_c = np.zeros(L, dtype=_U64)
            top_i = np.zeros(L, dtype=_U64)
            top_k = np.zeros(L, dtype=_U64)
            np.add.at(top_c, tz[pos], _U64(1))
            np.add.at(top_c, tz[~pos], neg_c)
            np.add.at(top_i, tz[pos], idx_u[pos] & im)
            np.add.at(top_i, tz[~pos], neg_i[~pos])
            np.add.at(top_k, tz[pos], hcheck[pos])
            np.add.at(top_k, tz[~pos], neg_h[~pos])
            sk.count[:, r] = (sk.count[:, r] + np.cumsum(top_c[::-1])[::-1]) & cm
            sk.isum[:, r] = (sk.isum[:, r] + np.cumsum(top_i[::-1])[::-1]) & im
            sk.csum[:, r] = (sk.csum[:, r] + np.cumsum(top_k[::-1])[::-1]) & km


def node_sketch(v: int, incident: Iterable[tuple[int, int]],
                keep: Optional[Callable[[int, int], bool]],
                params: SketchParams) -> Sketch:
    """Sketch of node v's signed incidence vector, restricted to kept edges."""
    idx = []
    signs = []
    for (a, b) in incident:
        if v not in (a, b):
            raise ValueError(f"edge ({a},{b}) does not touch node {v}")
        u = b if a == v else a
        if keep is not None and not keep(min(v, u), max(v, u)):
            continue
        idx.append(params.edge_index(v, u))
        signs.append(1 if v < u else -1)
    sk = Sketch(params)
    _accumulate(sk, np.array(idx, dtype=np.int64), np.array(signs, dtype=np.int64))
    return sk


def set_sketch(members, edge_u: np.ndarray, edge_v: np.ndarray,
               keep_mask: Optional[np.ndarray], params: SketchParams) -> Sketch:
    """Sketch of a node set, built directly from its cut edges.

    Equals the cell-wise sum of the members' node sketches: internal edges
    cancel exactly under the wrapping arithmetic, so only edges with one
    endpoint in the set contribute.
    """
    inside = np.zeros(params.id_bound + 1, dtype=bool)
    inside[np.asarray(list(members), dtype=np.int64)] = True
    u_in = inside[edge_u]
    v_in = inside[edge_v]
    cut = u_in ^ v_in
    if keep_mask is not None:
        cut &= keep_mask
    eu = edge_u[cut]
    ev = edge_v[cut]
    idx = (eu - 1) * params.id_bound + (ev - 1)
    signs = np.where(u_in[cut], 1, -1).astype(np.int64)  # min endpoint inside: +1
    sk = Sketch(params)
    _accumulate(sk, idx, signs)
    return sk


def sample_cut_edge(s: Sketch) -> Optional[tuple[int, int]]:
    """Recover one cut edge from the sketch, or None.

    Scans repetition-major for a cell whose count is +-1, whose index sum
    decodes to a legal edge, and whose fingerprint matches.  Absence of any
    such cell (or an all-zero sketch) yields None; a false positive needs a
    fingerprint collision (probability 2^-check_bits per candidate cell).
    """
    p = s.params
    if s.is_zero():
        return None
    cm, im, km = _masks(p)
    minus_one = int(cm)
    cprefix = p.check_prefix()
    count = s.count
    isum = s.isum
    csum = s.csum
    for r in range(p.reps):
        col = count[:, r]
        candidates = np.nonzero((col == 1) | (col == minus_one))[0]
        for l in candidates:
            sign = 1 if col[l] == 1 else -1
            raw = int(isum[l, r])
            i = raw if sign == 1 else (int(im) + 1 - raw) & int(im)
            edge = p.decode_index(i)
            if edge is None:
                continue
            h = mix64_from(cprefix, i) & int(km)
            want = h if sign == 1 else ((int(km) + 1 - h) & int(km))
            if int(csum[l, r]) == want:
                return edge
    return None


def fresh_seed(*words: int) -> int:
    """A 128-bit shared random string derived from the given words."""
    return mix64(key("seed-lo"), *words) | (mix64(key("seed-hi"), *words) << 64)
