"""Philox4x32-10 counter-based generator and standard normals drawn from it.

Each call maps a 128-bit counter and a 64-bit key to four 32-bit words, with no hidden
state.  Normal variates are addressed by (seed, tag, replica, mode, step), so any
replica, mode or time step can be regenerated on its own, and refining the truncation
or the number of replicas never shifts the other streams.
"""
from __future__ import annotations

import os

import numba as nb
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old; workqueue is always available and deterministic here
    nb.config.THREADING_LAYER = "workqueue"

GENERATOR_ID = "philox4x32-10/box-muller"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)


@nb.njit(cache=True)
def _mulhilo(a, b):
    p = np.uint64(a) * np.uint64(b)
    return np.uint32(p >> np.uint64(32)), np.uint32(p & _MASK)


@nb.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on counter (c0..c3) with key (k0, k1); returns four uint32 words."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(cache=True)
def _uniform53(hi, lo):
    # 53 random bits mapped into the open interval (0, 1), so log is safe
    bits = (np.uint64(hi) << np.uint64(21)) ^ (np.uint64(lo) >> np.uint64(11))
    bits = bits & np.uint64((1 << 53) - 1)
    return (np.float64(bits) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def normal_pair(k0, k1, tag, replica, mode, block):
    """Two independent normals from one Philox block (Box-Muller); they serve steps 2b and 2b+1."""
    r0, r1, r2, r3 = philox4x32(block, mode, replica, tag, k0, k1)
    u1 = _uniform53(r0, r1)
    u2 = _uniform53(r2, r3)
    rad = np.sqrt(-2.0 * np.log(u1))
    return rad * np.cos(2.0 * np.pi * u2), rad * np.sin(2.0 * np.pi * u2)


@nb.njit(cache=True)
def normal_at(k0, k1, tag, replica, mode, step):
    """Standard normal for one (tag, replica, mode, step) address under key (k0, k1)."""
    z0, z1 = normal_pair(k0, k1, tag, replica, mode, step >> 1)
    return z1 if step & 1 else z0


def split_seed(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


@nb.njit(cache=True)
def _normals(k0, k1, tag, replicas, modes, steps, out):
    for a in range(replicas.size):
        for b in range(modes.size):
            for c in range(steps.size):
                out[a, b, c] = normal_at(k0, k1, tag, replicas[a], modes[b], steps[c])


def normals(seed, replicas, modes, steps, tag=0):
    """Array of normals with shape (len(replicas), len(modes), len(steps))."""
    k0, k1 = split_seed(seed)
    r = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    m = np.atleast_1d(np.asarray(modes, dtype=np.int64))
    s = np.atleast_1d(np.asarray(steps, dtype=np.int64))
    out = np.empty((r.size, m.size, s.size))
    _normals(k0, k1, tag, r, m, s, out)
    return out


@nb.njit(cache=True, parallel=True)
def ou_unit_paths(k0, k1, tag, replicas, lam, n_steps, dt, record, out):
    """Exact unit-noise OU recursion Z <- a Z + b zeta per replica and mode.

    dZ = -lam Z dt + d beta, Z_0 = 0, with a = exp(-lam dt) and
    b = sqrt((1 - a^2) / (2 lam)).  ``record`` lists the (sorted) step indices to keep;
    out has shape (len(replicas), len(record), len(lam)).
    """
    K = lam.size
    for ir in nb.prange(replicas.size):
        rep = replicas[ir]
        for k in range(K):
            a = np.exp(-lam[k] * dt)
            b = np.sqrt(-np.expm1(-2.0 * lam[k] * dt) / (2.0 * lam[k]))
            z = 0.0
            pos = 0
            while pos < record.size and record[pos] == 0:
                out[ir, pos, k] = 0.0
                pos += 1
            step = 0
            while step < n_steps and pos < record.size:
                z0, z1 = normal_pair(k0, k1, tag, rep, k, step >> 1)
                z = a * z + b * (z1 if step & 1 else z0)
                step += 1
                while pos < record.size and record[pos] == step:
                    out[ir, pos, k] = z
                    pos += 1
                if step & 1 and step < n_steps and pos < record.size:
                    z = a * z + b * z1
                    step += 1
                    while pos < record.size and record[pos] == step:
                        out[ir, pos, k] = z
                        pos += 1


def configure_threads():
    """Apply HPHI4_THREADS (if set) as the numba thread cap; returns the active count."""
    value = os.environ.get("HPHI4_THREADS")
    if value:
        nb.set_num_threads(max(1, min(int(value), nb.config.NUMBA_NUM_THREADS)))
    return nb.get_num_threads()
