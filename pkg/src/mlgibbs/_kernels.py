"""Hot CSR kernels: numba-jitted loops with a pure-numpy fallback.

Backend selection: set ``MLGIBBS_BACKEND=numpy`` to force the fallback
path (useful for debugging and for the benchmark in ``benchmarks/``).
Default is numba when importable. Both backends are serial and
deterministic; they may differ in the last float bits because the
summation order differs.
"""

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


BACKEND = "numpy"
if _HAVE_NUMBA and os.environ.get("MLGIBBS_BACKEND", "numba").lower() != "numpy":
    BACKEND = "numba"


# ---------------------------------------------------------------------------
# numba implementations (also valid plain Python, but slow without jit)

@njit(cache=True)
def _spmv_nb(row_offsets, col_indices, values, x, out):
    for i in range(row_offsets.size - 1):
        acc = 0.0
        for k in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[k] * x[col_indices[k]]
        out[i] = acc
    return out


@njit(cache=True)
def _spmv_t_nb(row_offsets, col_indices, values, x, out):
    # scatter over rows; A^T is never materialized
    for i in range(row_offsets.size - 1):
        xi = x[i]
        if xi != 0.0:
            for k in range(row_offsets[i], row_offsets[i + 1]):
                out[col_indices[k]] += values[k] * xi
    return out


@njit(cache=True)
def _leader_follower_nb(col_ptr, row_idx, vals, n_rows, threshold, assignment):
    n_cols = col_ptr.size - 1
    leaders = np.zeros((n_cols, n_rows))
    leader_norms = np.empty(n_cols)
    leader_cluster = np.empty(n_cols, dtype=np.int64)
    n_leaders = 0
    n_clusters = 0
    merge_all = threshold >= 1.0
    col = np.empty(n_rows)
    for j in range(n_cols):
        col[:] = 0.0
        sq = 0.0
        for k in range(col_ptr[j], col_ptr[j + 1]):
            col[row_idx[k]] = vals[k]
            sq += vals[k] * vals[k]
        norm = np.sqrt(sq)
        if norm == 0.0:
            # zero column: singleton cluster, never a leader
            assignment[j] = n_clusters
            n_clusters += 1
            continue
        found = -1
        for m in range(n_leaders):
            dot = 0.0
            for k in range(col_ptr[j], col_ptr[j + 1]):
                dot += vals[k] * leaders[m, row_idx[k]]
            dist = 1.0 - dot / (norm * leader_norms[m])
            if dist <= threshold or merge_all:
                found = m
                break
        if found >= 0:
            assignment[j] = leader_cluster[found]
        else:
            leaders[n_leaders, :] = col
            leader_norms[n_leaders] = norm
            leader_cluster[n_leaders] = n_clusters
            assignment[j] = n_clusters
            n_leaders += 1
            n_clusters += 1
    return n_clusters


# ---------------------------------------------------------------------------
# pure-numpy implementations

def _spmv_np(row_offsets, col_indices, values, x, out):
    if values.size:
        row_ids = np.repeat(
            np.arange(row_offsets.size - 1), np.diff(row_offsets)
        )
        out[:] = np.bincount(
            row_ids, weights=values * x[col_indices], minlength=out.size
        )
    return out


def _spmv_t_np(row_offsets, col_indices, values, x, out):
    if values.size:
        xr = np.repeat(x, np.diff(row_offsets))
        out += np.bincount(col_indices, weights=values * xr, minlength=out.size)
    return out


def _leader_follower_np(col_ptr, row_idx, vals, n_rows, threshold, assignment):
    n_cols = col_ptr.size - 1
    leaders = np.zeros((0, n_rows))
    leader_norms = np.zeros(0)
    leader_cluster = []
    n_clusters = 0
    merge_all = threshold >= 1.0
    for j in range(n_cols):
        lo, hi = col_ptr[j], col_ptr[j + 1]
        col = np.zeros(n_rows)
        col[row_idx[lo:hi]] = vals[lo:hi]
        norm = np.sqrt(np.dot(col, col))
        if norm == 0.0:
            assignment[j] = n_clusters
            n_clusters += 1
            continue
        found = -1
        if leaders.shape[0]:
            dist = 1.0 - (leaders @ col) / (norm * leader_norms)
            ok = np.nonzero(dist <= threshold)[0] if not merge_all else np.array([0])
            if ok.size:
                found = int(ok[0])
        if found >= 0:
            assignment[j] = leader_cluster[found]
        else:
            leaders = np.vstack([leaders, col[None, :]])
            leader_norms = np.append(leader_norms, norm)
            leader_cluster.append(n_clusters)
            assignment[j] = n_clusters
            n_clusters += 1
    return n_clusters


if BACKEND == "numba":
    spmv_kernel = _spmv_nb
    spmv_t_kernel = _spmv_t_nb
    leader_follower_kernel = _leader_follower_nb
else:
    spmv_kernel = _spmv_np
    spmv_t_kernel = _spmv_t_np
    leader_follower_kernel = _leader_follower_np
