"""Named, independent random streams derived from one master seed.

Every source of randomness in a run (device placement, fading, noise,
data partition, error injection, ...) pulls from its own generator, so
changing how much randomness one consumer uses never shifts the draws
seen by another.
"""

import hashlib

import numpy as np


def substream(master_seed: int, *names: str) -> np.random.Generator:
    """Return a generator keyed by the master seed and a name path.

    The same (seed, names) pair always yields the same stream, on any
    platform: names are folded in through SHA-256 so arbitrary labels
    (including sweep values rendered as strings) are safe.
    """
    entropy = [int(master_seed)]
    for name in names:
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        entropy.append(int.from_bytes(digest[:8], "big"))
    return np.random.default_rng(np.random.SeedSequence(entropy))
