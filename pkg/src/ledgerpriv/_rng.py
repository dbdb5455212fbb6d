import numpy as np

_MASK64 = (1 << 64) - 1


def rng_for(seed, *stream):
    """Independent generator for ``seed`` and a tuple of integer stream tags."""
    entropy = [int(seed) & _MASK64] + [int(s) & _MASK64 for s in stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))
