"""Hot detection kernels.

Both kernels exist twice: a numba ``@njit`` build and a pure-numpy build.
The numba path is used when numba imports cleanly and the environment
variable ``SMLINK_DISABLE_NUMBA`` is not set to ``1``; ``BACKEND`` records
which one is active.  Both paths scan candidates in enumeration order and
keep the first minimum, so ties resolve identically.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "detect_min_indices",
    "detect_min_indices_numpy",
    "sm_detect_min_indices",
    "sm_detect_min_indices_numpy",
]

_DISABLED = os.environ.get("SMLINK_DISABLE_NUMBA", "0") == "1"

try:
    if _DISABLED:
        raise ImportError("numba disabled via SMLINK_DISABLE_NUMBA")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def detect_min_indices_numpy(y, hx):
    """Index of the minimum-distance candidate for each received vector.

    Parameters
    ----------
    y : (n, nr) complex array of received vectors.
    hx : (n_cand, nr) complex array, one row per noiseless candidate H @ x.

    Returns
    -------
    (n,) int64 array of candidate indices (first minimum wins).
    """
    y = np.ascontiguousarray(y)
    hx = np.ascontiguousarray(hx)
    out = np.empty(y.shape[0], dtype=np.int64)
    # chunk to keep the (chunk, n_cand, nr) temporary small
    chunk = max(1, int(4e6) // max(1, hx.size))
    for s in range(0, y.shape[0], chunk):
        d = y[s : s + chunk, None, :] - hx[None, :, :]
        metrics = np.einsum("skr,skr->sk", d, d.conj()).real
        out[s : s + chunk] = np.argmin(metrics, axis=1)
    return out


def sm_detect_min_indices_numpy(y, h, points):
    """Single-active-antenna ML search over (antenna, constellation point).

    Uses the per-column metric sum_r |y_r - h[r, a] * s|^2 rather than a
    candidate matrix product; returns flat indices a * len(points) + p.
    """
    y = np.asarray(y)
    h = np.asarray(h)
    points = np.asarray(points)
    ref = h[None, :, :, None] * points[None, None, None, :]  # (1, nr, nt, M)
    d = y[:, :, None, None] - ref
    metrics = (d.real**2 + d.imag**2).sum(axis=1)  # (n, nt, M)
    n, nt, m_ord = metrics.shape
    return np.argmin(metrics.reshape(n, nt * m_ord), axis=1).astype(np.int64)


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _detect_min_indices_numba(y, hx):
        n = y.shape[0]
        n_cand = hx.shape[0]
        nr = y.shape[1]
        out = np.empty(n, dtype=np.int64)
        for s in prange(n):
            best = np.inf
            best_k = 0
            for k in range(n_cand):
                acc = 0.0
                for r in range(nr):
                    d = y[s, r] - hx[k, r]
                    acc += d.real * d.real + d.imag * d.imag
                if acc < best:
                    best = acc
                    best_k = k
            out[s] = best_k
        return out

    @njit(parallel=True, cache=True)
    def _sm_detect_min_indices_numba(y, h, points):
        n = y.shape[0]
        nr = h.shape[0]
        nt = h.shape[1]
        m_ord = points.shape[0]
        out = np.empty(n, dtype=np.int64)
        for s in prange(n):
            best = np.inf
            best_k = 0
            for a in range(nt):
                for p in range(m_ord):
                    acc = 0.0
                    for r in range(nr):
                        d = y[s, r] - h[r, a] * points[p]
                        acc += d.real * d.real + d.imag * d.imag
                    if acc < best:
                        best = acc
                        best_k = a * m_ord + p
            out[s] = best_k
        return out

    def detect_min_indices(y, hx):
        return _detect_min_indices_numba(
            np.ascontiguousarray(y), np.ascontiguousarray(hx)
        )

    detect_min_indices.__doc__ = detect_min_indices_numpy.__doc__

    def sm_detect_min_indices(y, h, points):
        return _sm_detect_min_indices_numba(
            np.ascontiguousarray(y),
            np.ascontiguousarray(h),
            np.ascontiguousarray(points),
        )

    sm_detect_min_indices.__doc__ = sm_detect_min_indices_numpy.__doc__

    BACKEND = "numba"
else:
    detect_min_indices = detect_min_indices_numpy
    sm_detect_min_indices = sm_detect_min_indices_numpy
    BACKEND = "numpy"
