"""Compare the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel (CSR matvec, transposed matvec, leader-follower
clustering) on synthetic matrices of growing size and prints a timing
table. The two backends are imported directly so a single process can
time both regardless of MLGIBBS_BACKEND.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--repeat K]
"""

import argparse
import time

import numpy as np

from mlgibbs import from_triplets
from mlgibbs._kernels import (
    _HAVE_NUMBA,
    _leader_follower_nb,
    _leader_follower_np,
    _spmv_nb,
    _spmv_np,
    _spmv_t_nb,
    _spmv_t_np,
)


def cluster_matrix(rng, n_rows, n_clusters, per_cluster, nnz_per_col):
    entries = []
    f = 0
    for _ in range(n_clusters):
        pattern = rng.choice(n_rows, nnz_per_col, replace=False)
        vals = rng.standard_normal(nnz_per_col)
        for _ in range(per_cluster):
            col = vals * rng.uniform(0.5, 1.5)
            for r, x in zip(pattern, col):
                entries.append((int(r), f, float(x)))
            f += 1
    return from_triplets(n_rows, f, entries)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _HAVE_NUMBA:
        print("numba is not installed; only the numpy fallback is available")
        return

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n_cols':>8}{'nnz':>10}{'numba (s)':>12}"
          f"{'numpy (s)':>12}{'speedup':>9}")
    for n_clusters, per in ((50, 10), (200, 20), (500, 40)):
        A = cluster_matrix(rng, args.rows, n_clusters, per, 30)
        x = rng.standard_normal(A.n_cols)
        xt = rng.standard_normal(A.n_rows)
        col_ptr, row_idx, vals = A.transpose_csc()
        out_r = np.zeros(A.n_rows)
        out_c = np.zeros(A.n_cols)
        assign = np.empty(A.n_cols, dtype=np.int64)

        cases = [
            ("spmv",
             lambda: _spmv_nb(A.row_offsets, A.col_indices, A.values, x, out_r),
             lambda: _spmv_np(A.row_offsets, A.col_indices, A.values, x, out_r)),
            ("spmv_t",
             lambda: _spmv_t_nb(A.row_offsets, A.col_indices, A.values, xt, out_c),
             lambda: _spmv_t_np(A.row_offsets, A.col_indices, A.values, xt, out_c)),
            ("leader_follower",
             lambda: _leader_follower_nb(col_ptr, row_idx, vals, A.n_rows, 0.1, assign),
             lambda: _leader_follower_np(col_ptr, row_idx, vals, A.n_rows, 0.1, assign)),
        ]
        for name, nb, np_ in cases:
            nb()  # trigger jit compilation outside the timed region
            t_nb = best_of(nb, args.repeat)
            t_np = best_of(np_, args.repeat)
            print(f"{name:<18}{A.n_cols:>8}{A.nnz():>10}{t_nb:>12.2e}"
                  f"{t_np:>12.2e}{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
