"""Counter-based seed derivation.

Every random decision in a run is keyed off one config seed plus a stage
label, so reruns and parallel runs agree bit-for-bit.
"""

from __future__ import annotations

import hashlib


def derive_seed(base: int, *labels: object) -> int:
    """Derive a 63-bit child seed from a base seed and a label path."""
    material = ":".join([str(base), *map(str, labels)]).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big") >> 1
