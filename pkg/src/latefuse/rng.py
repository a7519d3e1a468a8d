"""Reproducible random streams.

Every stream is a Philox4x32-10 counter-based generator keyed through
numpy's ``SeedSequence``. A stream is identified by ``(seed, *keys)``, so
independent tasks (one bootstrap resample, one synthetic cohort) draw
from their own stream and the result never depends on execution order
or thread count. Both Philox and SeedSequence hashing are specified
bit-for-bit by numpy, which makes streams identical across platforms.
"""

from __future__ import annotations

import numpy as np

# stream namespaces
BOOTSTRAP = 1
SYNTH = 2


def substream(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be non-negative integers")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
