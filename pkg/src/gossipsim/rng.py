"""Counter-based pseudo-randomness shared by all protocols.

Every random decision in a run is a pure function of (run seed, node id,
round number, purpose key).  There are no sequential generator streams, so
an executor may evaluate rounds out of order, skip rounds whose outcome is
already determined, or evaluate whole arrays of decisions at once, and
still reproduce exactly what a round-by-round execution would have drawn.
"""

from __future__ import annotations

import numpy as np

_M = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _finalize(h: int) -> int:
    h = (h ^ (h >> 30)) * _MIX1 & _M
    h = (h ^ (h >> 27)) * _MIX2 & _M
    return h ^ (h >> 31)


def mix64(*words: int) -> int:
    """Hash any number of integer words into one 64-bit value (splitmix-style)."""
    h = 0x243F6A8885A308D3
    for w in words:
        h = (h + (w & _M) + _GAMMA) & _M
        h = _finalize(h)
    return h


def rand_below(bound: int, *words: int) -> int:
    """Deterministic draw from [0, bound). Modulo bias is < bound / 2**64."""
    return mix64(*words) % bound


def rand_float(*words: int) -> float:
    """Deterministic draw from [0, 1) with 53 bits of precision."""
    return (mix64(*words) >> 11) * (1.0 / (1 << 53))


def key(name: str) -> int:
    """Stable 64-bit tag for a purpose string, usable as a mix64 word."""
    h = 0xCBF29CE484222325
    for b in name.encode():
        h = ((h ^ b) * 0x100000001B3) & _M
    return h


# Vectorized twins.  mix64_vec(k, arr) == [mix64(k, x) for x in arr] element
# for element; the scalar and vector paths must never diverge.

def _finalize_vec(h: np.ndarray) -> np.ndarray:
    h = (h ^ (h >> np.uint64(30))) * np.uint64(_MIX1)
    h = (h ^ (h >> np.uint64(27))) * np.uint64(_MIX2)
    return h ^ (h >> np.uint64(31))


def mix64_vec(prefix: int, values: np.ndarray) -> np.ndarray:
    """Vectorized mix64(prefix_chain..., v) where prefix pre-hashes fixed words."""
    h = np.full(values.shape, prefix, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = h + values.astype(np.uint64) + np.uint64(_GAMMA)
        return _finalize_vec(h)


def chain(*words: int) -> int:
    """Pre-hash fixed leading words so mix64_vec(chain(a, b), xs) == mix64(a, b, xs)."""
    h = 0x243F6A8885A308D3
    for w in words:
        h = (h + (w & _M) + _GAMMA) & _M
        h = _finalize(h)
    return h


def mix64_from(prefix: int, x: int) -> int:
    """Scalar twin of mix64_vec: mix64_from(chain(*ws), x) == mix64(*ws, x)."""
    h = (prefix + (x & _M) + _GAMMA) & _M
    return _finalize(h)


def rand_vec(prefix: int, values: np.ndarray) -> np.ndarray:
    return mix64_vec(prefix, values)


def rand_float_vec(prefix: int, values: np.ndarray) -> np.ndarray:
    return (mix64_vec(prefix, values) >> np.uint64(11)) * (1.0 / (1 << 53))
