"""Message size accounting.

Every payload the engine carries is charged an exact bit size so the
polylog message budget can be enforced.  Composite payloads pay a two-bit
framing charge per element; objects that know their own packed size expose
``bit_size()``.
"""

from __future__ import annotations


def payload_bits(msg) -> int:
    """Packed size of a payload in bits."""
    if msg is None:
        return 0
    if isinstance(msg, bool):
        return 1
    if isinstance(msg, int):
        return msg.bit_length() + 1  # magnitude + sign; 0 costs 1 bit
    if isinstance(msg, (bytes, bytearray)):
        return 8 * len(msg)
    if isinstance(msg, str):
        return 8 * len(msg.encode())
    if isinstance(msg, (tuple, list)):
        return 2 * len(msg) + sum(payload_bits(x) for x in msg)
    size = getattr(msg, "bit_size", None)
    if callable(size):
        return int(size())
    raise TypeError(f"payload of type {type(msg).__name__} has no defined wire size")


def int_bits(x: int) -> int:
    return x.bit_length() + 1
