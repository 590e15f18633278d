"""Compiled telegraph-process kernels.

Time is cut into blocks of length ``B``. The number of switching events of
fluctuator ``uid`` in block ``b`` is Poisson(rate*B), drawn by inverse CDF
from the counter uniform ``u(key, uid, b, 0)``; the event positions are
``u(key, uid, b, k+1) * B`` for ``k < n``. This is an exact realization of a
Poisson event stream (hence of a telegraph process with exponential waiting
times), and the state at any time depends only on (key, uid, t) — never on
which other times were evaluated or in what order.

The hash mirrors :func:`tlsbath._streams.counter_uniform` bit for bit.
"""

import math

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S0 = np.uint64(0xD1B54A32D192ED03)
_S1 = np.uint64(0xAEF17502108EF2D9)
_S2 = np.uint64(0xDB4F0B9175AE2165)
_S3 = np.uint64(0x8CB92BA72F3D8DD7)
_SH30 = np.uint64(30)
_SH27 = np.uint64(27)
_SH31 = np.uint64(31)
_SH11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(inline="always")
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _SH30)) * _M1
    z = (z ^ (z >> _SH27)) * _M2
    return z ^ (z >> _SH31)


@numba.njit(inline="always")
def _uniform3(key, a, b, c):
    z = key
    z = _mix(z ^ (a * _S0))
    z = _mix(z ^ (b * _S1))
    z = _mix(z ^ (c * _S2))
    z = _mix(z)
    return np.float64(z >> _SH11) * _INV53


@numba.njit(inline="always")
def _poisson_inv(u, mu):
    p = math.exp(-mu)
    cdf = p
    n = 0
    while u >= cdf and n < 10000:
        n += 1
        p *= mu / n
        cdf += p
        if p == 0.0 and n > mu:
            break
    return n


@numba.njit(inline="always")
def _events_in_block(key, uid, block, mu):
    return _poisson_inv(_uniform3(key, uid, np.uint64(block), np.uint64(0)), mu)


@numba.njit(inline="always")
def _events_before(key, uid, block, n, frac):
    count = 0
    for k in range(n):
        if _uniform3(key, uid, np.uint64(block), np.uint64(k + 1)) < frac:
            count += 1
    return count


@numba.njit(cache=True)
def advance(key, uid, rate, block_hours, t, cur_block, base_sign, out_sign):
    """Bring every fluctuator to time ``t`` [hr].

    ``cur_block``/``base_sign`` (updated in place) hold the block index whose
    start state is ``base_sign``; they must describe a time <= ``t``.
    ``out_sign`` receives the state at ``t``.
    """
    key = np.uint64(key)
    b = int(math.floor(t / block_hours))
    frac = t / block_hours - b
    for i in range(uid.size):
        mu = rate[i] * block_hours
        u = uid[i]
        s = base_sign[i]
        cb = cur_block[i]
        while cb < b:
            n = _events_in_block(key, u, cb, mu)
            if n & 1:
                s = -s
            cb += 1
        base_sign[i] = s
        cur_block[i] = cb
        if frac > 0.0:
            n = _events_in_block(key, u, b, mu)
            if n > 0 and (_events_before(key, u, b, n, frac) & 1):
                s = -s
        out_sign[i] = s


@numba.njit(cache=True)
def switch_counts(key, uid, rate, block_hours, t):
    """Number of switching events in ``[0, t)`` for each fluctuator."""
    key = np.uint64(key)
    b = int(math.floor(t / block_hours))
    frac = t / block_hours - b
    out = np.zeros(uid.size, dtype=np.int64)
    for i in range(uid.size):
        mu = rate[i] * block_hours
        total = 0
        for cb in range(b):
            total += _events_in_block(key, uid[i], cb, mu)
        if frac > 0.0:
            n = _events_in_block(key, uid[i], b, mu)
            total += _events_before(key, uid[i], b, n, frac)
        out[i] = total
    return out


@numba.njit(cache=True)
def accumulate_offsets(owner, shift, sign, n_defects):
    """Per-defect sum of ``sign * shift`` in fluctuator order (deterministic)."""
    out = np.zeros(n_defects)
    for j in range(owner.size):
        out[owner[j]] += sign[j] * shift[j]
    return out


def uniform3(key, a, b, c):
    """Scalar access to the kernel hash (for cross-checks against ``_streams``)."""
    return _uniform3_py(np.uint64(key), np.uint64(a), np.uint64(b), np.uint64(c))


@numba.njit
def _uniform3_py(key, a, b, c):
    return _uniform3(key, a, b, c)
