"""Counter-based random streams keyed by (seed, labels)."""
from __future__ import annotations

import hashlib

import numpy as np


def stream_key(*labels) -> int:
    h = hashlib.sha256(repr(tuple(labels)).encode()).digest()
    return int.from_bytes(h[:16], "little")


def stream(*labels) -> np.random.Generator:
    """Independent Philox generator for the given label tuple.

    The same labels always give the same stream, whatever the order in which
    streams are created, so replicas can run in any order or concurrently.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(*labels)))
