"""Counter-based uniform random numbers.

numpy generators are sequential, so drawing "the k-th number of stream i"
for millions of independent streams at once is not possible with them.
Here a uniform is a pure function of (key, counters...) built from the
SplitMix64 finalizer, vectorized over numpy uint64 arrays. Results do not
depend on evaluation order or batching.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALTS = (
    np.uint64(0xD1B54A32D192ED03),
    np.uint64(0xAEF17502108EF2D9),
    np.uint64(0xDB4F0B9175AE2165),
    np.uint64(0x8CB92BA72F3D8DD7),
)
_MASK = (1 << 64) - 1


def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed, *tags):
    """Fold an integer seed and integer tags into one 64-bit key."""
    z = np.uint64(int(seed) & _MASK)
    with np.errstate(over="ignore"):
        z = _mix(np.array([z], dtype=np.uint64))
        for t in tags:
            z = _mix(z ^ np.uint64(int(t) & _MASK))
    return int(z[0])


def counter_uniform(key, *counters):
    """Uniform deviates in [0, 1) indexed by ``key`` and broadcast integer counters."""
    arrays = np.broadcast_arrays(*[np.asarray(c).astype(np.uint64) for c in counters])
    with np.errstate(over="ignore"):
        z = np.full(arrays[0].shape, np.uint64(key), dtype=np.uint64)
        for i, c in enumerate(arrays):
            z = _mix(z ^ (c * _SALTS[i % len(_SALTS)]))
        z = _mix(z)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
