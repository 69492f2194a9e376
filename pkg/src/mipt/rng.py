"""Reproducible generator derivation.

Every trajectory gets its own counter-based (Philox) generator whose key is
derived from ``(master_seed, *labels)``, so results do not depend on the order
in which work units are executed.
"""
import numpy as np


def derive(master_seed, *labels):
    """Return a Philox generator keyed by the master seed and integer labels."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *(int(x) for x in labels)])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
