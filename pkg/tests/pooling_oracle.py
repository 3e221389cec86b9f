"""Dense brute-force pooling used as the oracle for the numba kernel."""
import numpy as np


def block_ranges(n1, m):
    """Row ranges of the ``m`` blocks (or ``n1`` singleton blocks when n1 < m)."""
    if n1 < m:
        return [(i, i + 1) for i in range(n1)] + [(n1, n1)] * (m - n1)
    q, p = divmod(n1, m)
    sizes = [q + 1] * p + [q] * (m - p)
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return list(zip(edges[:-1], edges[1:]))


def dense_pool(M, m):
    n1 = M.shape[0]
    rng_ = block_ranges(n1, m)
    V = np.zeros((4, m, m))
    for i, (r0, r1) in enumerate(rng_):
        for j, (c0, c1) in enumerate(rng_):
            B = M[r0:r1, c0:c1]
            if B.size == 0:
                continue
            V[0, i, j] = max(B.max(), 0.0)
            V[1, i, j] = max(-B.min(), 0.0)
            V[2, i, j] = B.sum()
            V[3, i, j] = np.count_nonzero(B)
    return V
