"""Compiled inner loops over sorted CSR adjacency."""
import numba
import numpy as np

# skip TBB: older system TBB builds only produce a warning before fallback
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@numba.njit(parallel=True, cache=True)
def _intersect_counts(a_ptr, a_idx, b_ptr, b_idx, us, vs, out):
    for k in numba.prange(len(us)):
        i = a_ptr[us[k]]
        i_end = a_ptr[us[k] + 1]
        j = b_ptr[vs[k]]
        j_end = b_ptr[vs[k] + 1]
        c = 0
        while i < i_end and j < j_end:
            x = a_idx[i]
            y = b_idx[j]
            if x == y:
                c += 1
                i += 1
                j += 1
            elif x < y:
                i += 1
            else:
                j += 1
        out[k] = c


def intersect_counts(a_ptr, a_idx, b_ptr, b_idx, us, vs) -> np.ndarray:
    """``|A[us[k]] & B[vs[k]]|`` for every k, with A, B sorted CSR neighbor lists."""
    out = np.empty(len(us), dtype=np.int64)
    if len(us):
        _intersect_counts(a_ptr, a_idx, b_ptr, b_idx,
                          np.ascontiguousarray(us, dtype=np.int64),
                          np.ascontiguousarray(vs, dtype=np.int64), out)
    return out


def set_threads(n: int | None) -> None:
    """Cap the worker count of compiled kernels; results never depend on it."""
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
