# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels (dilated conv, Viterbi DP).

Drop-in replacements for tempseg._kernels._ref; selected at import when the
extension built.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def conv1d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray b_arr, int dilation):
    cdef double[:, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t cout = w.shape[0], r = w.shape[2]
    cdef Py_ssize_t half = (r - 1) // 2
    cdef cnp.ndarray y_arr = np.empty((T, cout), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t t, co, ci, j, s
    cdef double acc
    for t in range(T):
        for co in range(cout):
            acc = b[co]
            for j in range(r):
                s = t + (j - half) * dilation
                if s < 0 or s >= T:
                    continue
                for ci in range(cin):
                    acc += w[co, ci, j] * x[s, ci]
            y[t, co] = acc
    return y_arr


def conv1d_backward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray gy_arr, int dilation):
    cdef double[:, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[:, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t cout = w.shape[0], r = w.shape[2]
    cdef Py_ssize_t half = (r - 1) // 2
    cdef cnp.ndarray gx_arr = np.zeros((T, cin), dtype=np.float64)
    cdef cnp.ndarray gw_arr = np.zeros((cout, cin, r), dtype=np.float64)
    cdef cnp.ndarray gb_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t t, co, ci, j, s
    cdef double g
    for t in range(T):
        for co in range(cout):
            g = gy[t, co]
            gb[co] += g
            for j in range(r):
                s = t + (j - half) * dilation
                if s < 0 or s >= T:
                    continue
                for ci in range(cin):
                    gx[s, ci] += g * w[co, ci, j]
                    gw[co, ci, j] += g * x[s, ci]
    return gx_arr, gw_arr, gb_arr


def viterbi_path(cnp.ndarray grid_arr):
    cdef double[:, ::1] grid = np.ascontiguousarray(grid_arr, dtype=np.float64)
    cdef Py_ssize_t T = grid.shape[0], K = grid.shape[1]
    cdef cnp.ndarray dp_arr = np.full(K, -np.inf)
    cdef double[::1] dp = dp_arr
    cdef cnp.ndarray adv_arr = np.zeros((T, K), dtype=np.uint8)
    cdef cnp.npy_uint8[:, ::1] advance = adv_arr
    cdef cnp.ndarray path_arr = np.empty(T, dtype=np.int64)
    cdef cnp.npy_int64[::1] path = path_arr
    cdef Py_ssize_t t, j
    cdef double stay, adv, prev
    dp[0] = grid[0, 0]
    for t in range(1, T):
        # sweep right-to-left so dp can be updated in place
        for j in range(K - 1, -1, -1):
            stay = dp[j]
            adv = dp[j - 1] if j > 0 else -np.inf
            if adv > stay:
                advance[t, j] = 1
                dp[j] = adv + grid[t, j]
            else:
                dp[j] = stay + grid[t, j]
    j = K - 1
    path[T - 1] = j
    for t in range(T - 1, 0, -1):
        if advance[t, j]:
            j -= 1
        path[t - 1] = j
    return path_arr, float(dp[K - 1])
