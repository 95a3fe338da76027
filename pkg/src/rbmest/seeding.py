"""Deterministic per-task seeds derived from one master seed."""

import hashlib


def derive_seed(master: int, *labels) -> int:
    """63-bit seed from ``master`` and a task label path, e.g. ``("replicate", 3)``."""
    key = ":".join([str(int(master))] + [str(x) for x in labels]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1
