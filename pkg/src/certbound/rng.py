"""Counter-based substream RNG.

Every random draw in the toolkit comes from a substream keyed by
(master_seed, label, index) through SHA-256 into a Philox counter-based
generator. Substreams are therefore pure functions of their key: the same
triple yields the same bits on every platform, for any worker count, in any
visitation order. Nothing here keeps global state.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_DOMAIN_TAG = b"certbound/substream/1\x00"


def substream_key(master_seed: int, label: str, index: int) -> int:
    """128-bit Philox key derived from (master_seed, label, index)."""
    if not 0 <= master_seed < 2**64:
        raise ValueError("master_seed must fit in an unsigned 64-bit integer")
    if index < 0:
        raise ValueError("index must be nonnegative")
    msg = (
        _DOMAIN_TAG
        + struct.pack("<Q", master_seed)
        + label.encode("utf-8")
        + b"\x00"
        + struct.pack("<Q", index)
    )
    return int.from_bytes(hashlib.sha256(msg).digest()[:16], "little")


def substream(master_seed: int, label: str, index: int) -> np.random.Generator:
    """Independent generator for one (seed, label, index) substream."""
    return np.random.Generator(np.random.Philox(key=substream_key(master_seed, label, index)))


_MASK64 = (1 << 64) - 1


class SubstreamFactory:
    """Re-keys one Philox generator per substream instead of allocating a new one.

    Emits bit-identical streams to substream() (pinned by test) at a fraction
    of the construction cost; the returned generator is shared, so callers
    must finish with it before requesting the next substream. Not thread-safe;
    use one factory per worker.
    """

    def __init__(self):
        self._bg = np.random.Philox(key=0)
        self._gen = np.random.Generator(self._bg)
        self._state = self._bg.state

    def at(self, master_seed: int, label: str, index: int) -> np.random.Generator:
        key = substream_key(master_seed, label, index)
        inner = self._state["state"]
        inner["key"][0] = key & _MASK64
        inner["key"][1] = key >> 64
        inner["counter"][:] = 0
        self._state["buffer_pos"] = 4
        self._state["has_uint32"] = 0
        self._state["uinteger"] = 0
        self._bg.state = self._state
        return self._gen
