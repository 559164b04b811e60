"""Deterministic seed derivation.

Every piece of randomness in the package is seeded from a small integer.
Sub-seeds (per document, per stage, per tree) are derived by hashing the
parent seed together with a label, so results never depend on worker
count, scheduling, or the order in which stages were added.
"""

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(seed: int, *parts: object) -> int:
    """Derive a child seed from ``seed`` and any hashable labels.

    Uses SHA-256 over a canonical string encoding, so the result is stable
    across processes, platforms, and Python versions (unlike ``hash()``).
    """
    key = ":".join([str(int(seed))] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK
