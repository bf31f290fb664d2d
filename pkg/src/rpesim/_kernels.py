"""Hot loops: counter-based categorical sampling and batched CHSH evaluation.

Each kernel has a numba version (explicit loops) and a vectorised numpy
version that must agree with it bit for bit (sampling) or to rounding
(CHSH).  Set ``RPESIM_DISABLE_NUMBA=1`` to force the numpy path; it is also
used automatically when numba cannot be imported.
"""

from __future__ import annotations

import os

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
STREAM_MUL = np.uint64(0xD1B54A32D192ED03)
SAMPLER_NAME = "splitmix64-counter"

_disabled = os.environ.get("RPESIM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def stream_key(seed: int, stream: int = 0) -> np.uint64:
    """Fold a stream id into the seed so independent draws use disjoint counters."""
    with np.errstate(over="ignore"):
        return np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ (np.uint64(stream) * STREAM_MUL)


# --- sampling ---------------------------------------------------------------

@njit(cache=True)
def _sample_counts_nb(cdf, key, start, shots):
    counts = np.zeros(cdf.size, dtype=np.int64)
    k = len(cdf)
    for i in range(shots):
        z = key + np.uint64(start + i + 1) * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        z = z ^ (z >> np.uint64(31))
        u = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        lo, hi = 0, k - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if u < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        counts[lo] += 1
    return counts


def _uniforms_np(key, start, shots):
    idx = np.arange(start + 1, start + shots + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = key + idx * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _sample_counts_np(cdf, key, start, shots):
    u = _uniforms_np(key, start, shots)
    which = np.searchsorted(cdf[:-1], u, side="right")
    return np.bincount(which, minlength=cdf.size).astype(np.int64)


def _cdf(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a non-empty 1-d probability vector")
    if np.any(p < -1e-12):
        raise ValueError("negative probability")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, expected 1")
    cdf = np.cumsum(np.clip(p, 0.0, None)) / np.clip(p, 0.0, None).sum()
    cdf[-1] = 1.0
    return cdf


def sample_counts(probabilities, seed: int, shots: int, stream: int = 0, start: int = 0,
                  backend: str | None = None) -> np.ndarray:
    """Counts of ``shots`` categorical draws; shot ``i`` depends only on (seed, stream, i)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = _cdf(probabilities)
    key = stream_key(seed, stream)
    backend = backend or BACKEND
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return _sample_counts_nb(cdf, key, start, shots)
    return _sample_counts_np(cdf, key, start, shots)


# --- CHSH scan --------------------------------------------------------------

@njit(cache=True)
def _chsh_scan_nb(t, a, a2, b, b2):
    n = a.shape[0]
    out = np.empty(n)
    for s in range(n):
        e_ab = 0.0
        e_ab2 = 0.0
        e_a2b = 0.0
        e_a2b2 = 0.0
        for i in range(3):
            for j in range(3):
                tij = t[i, j]
                e_ab += a[s, i] * tij * b[s, j]
                e_ab2 += a[s, i] * tij * b2[s, j]
                e_a2b += a2[s, i] * tij * b[s, j]
                e_a2b2 += a2[s, i] * tij * b2[s, j]
        out[s] = e_ab + e_ab2 + e_a2b - e_a2b2
    return out


def _chsh_scan_np(t, a, a2, b, b2):
    def e(x, y):
        return np.einsum("si,ij,sj->s", x, t, y)
    return e(a, b) + e(a, b2) + e(a2, b) - e(a2, b2)


def chsh_scan(t, a, a2, b, b2, backend: str | None = None) -> np.ndarray:
    """CHSH values for many settings from the 3x3 correlation tensor ``t``.

    ``a, a2, b, b2`` are ``(n, 3)`` arrays of unit Bloch vectors.
    """
    arrs = [np.ascontiguousarray(x, dtype=np.float64) for x in (t, a, a2, b, b2)]
    backend = backend or BACKEND
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return _chsh_scan_nb(*arrs)
    return _chsh_scan_np(*arrs)
