"""Named random substreams derived from a single root seed."""

import zlib

import numpy as np


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return a generator keyed by ``(seed, name, *extra)``.

    Streams with different names are statistically independent, so consuming
    one (say, ``"shuffle"``) never perturbs another (``"init"``).
    """
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    key.extend(int(e) & 0xFFFFFFFF for e in extra)
    return np.random.default_rng(key)
