"""Counter-based, splittable random streams.

Every stream is a Philox generator whose key is derived from ``(seed, tag)`` and
whose 256-bit counter starts at ``index << 192``.  Streams for different sample
indices are therefore disjoint and can be created in any order, which keeps
parallel ensembles reproducible.
"""

import zlib

import numpy as np

_TAG_CACHE = {}


def _tag_word(tag):
    return tag if isinstance(tag, int) else zlib.crc32(str(tag).encode())


def _key(seed, tag):
    ck = (int(seed), tag)
    key = _TAG_CACHE.get(ck)
    if key is None:
        ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _tag_word(tag)])
        key = ss.generate_state(2, np.uint64)
        _TAG_CACHE[ck] = key
    return key


def stream(seed, index=0, tag="default"):
    """Return the generator for sample ``index`` under ``(seed, tag)``."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed, tag), counter=counter))


def streams(seed, count, tag="default", start=0):
    return [stream(seed, start + i, tag) for i in range(count)]


def seed_path(seed, index, tag):
    """The integers that identify a stream, for echoing in reports."""
    return (int(seed), int(_tag_word(tag)), int(index))
