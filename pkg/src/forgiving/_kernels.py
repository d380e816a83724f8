"""All-pairs BFS kernels.

The numba path runs one queue-based BFS per source over a CSR graph.  Setting
``FORGIVING_NO_NUMBA=1`` (or lacking numba) selects the numpy path, which
expands all frontiers at once with boolean matrix products.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

UNREACHABLE = -1
USE_NUMBA = numba is not None and os.environ.get("FORGIVING_NO_NUMBA", "").lower() not in ("1", "true", "yes")


def apsp_numpy(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    dist = np.full((n, n), UNREACHABLE, dtype=np.int32)
    if n == 0:
        return dist
    adj = np.zeros((n, n), dtype=np.uint8)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = 1
    reached = np.eye(n, dtype=bool)
    frontier = reached.astype(np.uint8)
    dist[reached] = 0
    level = 0
    while True:
        level += 1
        nxt = (frontier @ adj > 0) & ~reached
        if not nxt.any():
            return dist
        dist[nxt] = level
        reached |= nxt
        frontier = nxt.astype(np.uint8)


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _apsp_numba(indptr, indices, n):
        dist = np.full((n, n), -1, dtype=np.int32)
        queue = np.empty(n, dtype=np.int64)
        for s in range(n):
            row = dist[s]
            row[s] = 0
            head = 0
            tail = 1
            queue[0] = s
            while head < tail:
                u = queue[head]
                head += 1
                du = row[u] + 1
                for k in range(indptr[u], indptr[u + 1]):
                    w = indices[k]
                    if row[w] < 0:
                        row[w] = du
                        queue[tail] = w
                        tail += 1
        return dist

else:  # pragma: no cover
    _apsp_numba = None


def apsp_numba(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    if _apsp_numba is None:
        raise RuntimeError("numba is not installed")
    return _apsp_numba(indptr.astype(np.int64), indices.astype(np.int64), n)


def apsp(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Hop distances between all vertex pairs; ``UNREACHABLE`` where none."""
    if USE_NUMBA:
        return apsp_numba(indptr, indices, n)
    return apsp_numpy(indptr, indices, n)
