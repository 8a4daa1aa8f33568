"""
Hot inner loops, each in two flavours.

The ``*_numba`` functions are compiled with :func:`numba.njit` when numba is
available and not disabled via ``RFFP_DISABLE_NUMBA``. The ``*_numpy``
functions are vectorised fallbacks producing the same results (to rounding).
Public callers go through the dispatchers at the bottom of the module.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

METRICS = ("euclidean", "manhattan", "cosine")
_METRIC_CODES = {"euclidean": 0, "manhattan": 1, "cosine": 2}

# rows of A processed per block in the numpy path (bounds peak memory)
_BLOCK = 256


# ---------------------------------------------------------------------------
# pairwise distances
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pairwise_numba(A, B, code):
    n, d = A.shape
    m = B.shape[0]
    out = np.empty((n, m))
    na = np.zeros(n)
    nb = np.zeros(m)
    if code == 2:
        for i in range(n):
            s = 0.0
            for t in range(d):
                s += A[i, t] * A[i, t]
            na[i] = np.sqrt(s)
        for j in range(m):
            s = 0.0
            for t in range(d):
                s += B[j, t] * B[j, t]
            nb[j] = np.sqrt(s)
    for i in range(n):
        for j in range(m):
            s = 0.0
            if code == 0:
                for t in range(d):
                    diff = A[i, t] - B[j, t]
                    s += diff * diff
                out[i, j] = np.sqrt(s)
            elif code == 1:
                for t in range(d):
                    s += abs(A[i, t] - B[j, t])
                out[i, j] = s
            else:
                if na[i] == 0.0 or nb[j] == 0.0:
                    out[i, j] = 1.0
                else:
                    for t in range(d):
                        s += A[i, t] * B[j, t]
                    out[i, j] = 1.0 - s / (na[i] * nb[j])
    return out


def _pairwise_numpy(A, B, code):
    n = A.shape[0]
    out = np.empty((n, B.shape[0]))
    if code == 2:
        na = np.sqrt(np.einsum("ij,ij->i", A, A))
        nb = np.sqrt(np.einsum("ij,ij->i", B, B))
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = (A @ B.T) / np.outer(na, nb)
        out = 1.0 - cos
        out[na == 0.0, :] = 1.0
        out[:, nb == 0.0] = 1.0
        return out
    for lo in range(0, n, _BLOCK):
        diff = A[lo:lo + _BLOCK, None, :] - B[None, :, :]
        if code == 0:
            out[lo:lo + _BLOCK] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        else:
            out[lo:lo + _BLOCK] = np.abs(diff).sum(axis=2)
    return out


# ---------------------------------------------------------------------------
# extrema and zero crossings (EMD sifting)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _extrema_numba(x):
    n = x.shape[0]
    maxima = np.empty(n, dtype=np.int64)
    minima = np.empty(n, dtype=np.int64)
    nmax = 0
    nmin = 0
    prev_sign = 0
    prev_idx = -1  # index of the diff that set prev_sign
    for i in range(n - 1):
        d = x[i + 1] - x[i]
        if d > 0.0:
            sgn = 1
        elif d < 0.0:
            sgn = -1
        else:
            continue
        if prev_sign != 0 and sgn != prev_sign:
            pos = (prev_idx + 1 + i) // 2
            if prev_sign > 0:
                maxima[nmax] = pos
                nmax += 1
            else:
                minima[nmin] = pos
                nmin += 1
        prev_sign = sgn
        prev_idx = i
    return maxima[:nmax].copy(), minima[:nmin].copy()


def _extrema_numpy(x):
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    s = np.sign(d[nz])
    turn = np.flatnonzero(s[:-1] != s[1:])
    pos = (nz[turn] + 1 + nz[turn + 1]) // 2
    is_max = s[turn] > 0
    return pos[is_max].astype(np.int64), pos[~is_max].astype(np.int64)


@njit(cache=True)
def _zero_crossings_numba(x):
    count = 0
    prev = 0
    for i in range(x.shape[0]):
        v = x[i]
        if v > 0.0:
            sgn = 1
        elif v < 0.0:
            sgn = -1
        else:
            continue
        if prev != 0 and sgn != prev:
            count += 1
        prev = sgn
    return count


def _zero_crossings_numpy(x):
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[:-1] != s[1:]))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def metric_code(metric):
    try:
        return _METRIC_CODES[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}") from None


def pairwise_distances(A, B, metric="euclidean"):
    """Dense distance matrix ``D[i, j] = d(A[i], B[j])``.

    Cosine distance is ``1 - cos(a, b)``; a zero vector is at distance 1 from
    everything, itself included.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    code = metric_code(metric)
    # cosine is a matrix product, where BLAS beats the compiled loop
    if HAVE_NUMBA and code != 2:
        return _pairwise_numba(A, B, code)
    return _pairwise_numpy(A, B, code)


def find_extrema(x):
    """Indices of local maxima and minima; plateaus report their midpoint."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return _extrema_numba(x)
    return _extrema_numpy(x)


def count_zero_crossings(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return int(_zero_crossings_numba(x))
    return _zero_crossings_numpy(x)
