"""Named, independently seeded random streams.

Every stream is derived from a master seed plus a tuple of labels through
SHA-256, so a stream's draws do not depend on how many other streams exist
or on the order in which the event loop consumes them.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(master_seed: int, *labels: object) -> int:
    key = "/".join([str(int(master_seed))] + [str(label) for label in labels])
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def stream(master_seed: int, *labels: object) -> random.Random:
    return random.Random(derive_seed(master_seed, *labels))
