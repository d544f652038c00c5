"""Deterministic 64-bit seed derivation for replications and experiment cells.

The splitting rule is: start from the root seed, then for every label (an int
or a string) xor in a stable 64-bit digest of the label and pass the result
through the splitmix64 mixer. Strings are digested with blake2b so the rule
does not depend on Python's randomized ``hash``.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixing function on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _label_to_u64(label) -> int:
    if isinstance(label, bool):
        return int(label)
    if isinstance(label, int):
        return label & _MASK
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(root_seed: int, *labels) -> int:
    """Derive a child seed from a root seed and a sequence of labels."""
    h = root_seed & _MASK
    for label in labels:
        h = splitmix64(h ^ _label_to_u64(label))
    return h
