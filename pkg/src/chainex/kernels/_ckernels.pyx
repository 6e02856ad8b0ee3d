# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled LSTM sequence kernels (hot path).

Same contract as chainex.kernels.reference: x (T, B, I), wx (I, 4H),
wh (H, 4H), b (4H,), h0/c0 (B, H); gate order [input, forget, candidate,
output].  Matrix products go through BLAS dgemm; gate math is plain C.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


# Row-major wrappers over column-major dgemm (standard transpose trick).

cdef void _mm_nn(double* a, double* b, double* c, int m, int k, int n, double beta) noexcept nogil:
    # C(m,n) = A(m,k) @ B(k,n) + beta * C
    cdef char tn = 110  # 'n'
    cdef double one = 1.0
    dgemm(&tn, &tn, &n, &m, &k, &one, b, &n, a, &k, &beta, c, &n)


cdef void _mm_nt(double* a, double* b, double* c, int m, int k, int n, double beta) noexcept nogil:
    # C(m,n) = A(m,k) @ B(n,k)^T + beta * C
    cdef char tt = 116  # 't'
    cdef char tn = 110
    cdef double one = 1.0
    dgemm(&tt, &tn, &n, &m, &k, &one, b, &k, a, &k, &beta, c, &n)


cdef void _mm_tn(double* a, double* b, double* c, int m, int k, int n, double beta) noexcept nogil:
    # C(m,n) = A(k,m)^T @ B(k,n) + beta * C
    cdef char tn = 110
    cdef char tt = 116
    cdef double one = 1.0
    dgemm(&tn, &tt, &n, &m, &k, &one, b, &n, a, &m, &beta, c, &n)


def lstm_forward(x, wx, wh, b, h0, c0):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] wxv = np.ascontiguousarray(wx, dtype=np.float64)
    cdef double[:, ::1] whv = np.ascontiguousarray(wh, dtype=np.float64)
    cdef double[::1] bias = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] h0v = np.ascontiguousarray(h0, dtype=np.float64)
    cdef double[:, ::1] c0v = np.ascontiguousarray(c0, dtype=np.float64)

    cdef int T = xv.shape[0]
    cdef int B = xv.shape[1]
    cdef int I = xv.shape[2]
    cdef int H = whv.shape[0]
    cdef int G = 4 * H

    h_arr = np.empty((T, B, H))
    c_arr = np.empty((T, B, H))
    gates_arr = np.empty((T, B, G))
    z_arr = np.empty((B, G))
    cdef double[:, :, ::1] hv = h_arr
    cdef double[:, :, ::1] cv = c_arr
    cdef double[:, :, ::1] gatesv = gates_arr
    cdef double[:, ::1] z = z_arr

    cdef int t, bb, j
    cdef double ig, fg, gg, og, c_prev, c_t
    cdef double* h_prev
    with nogil:
        for t in range(T):
            _mm_nn(&xv[t, 0, 0], &wxv[0, 0], &z[0, 0], B, I, G, 0.0)
            h_prev = &h0v[0, 0] if t == 0 else &hv[t - 1, 0, 0]
            _mm_nn(h_prev, &whv[0, 0], &z[0, 0], B, H, G, 1.0)
            for bb in range(B):
                for j in range(H):
                    ig = _sigmoid(z[bb, j] + bias[j])
                    fg = _sigmoid(z[bb, H + j] + bias[H + j])
                    gg = tanh(z[bb, 2 * H + j] + bias[2 * H + j])
                    og = _sigmoid(z[bb, 3 * H + j] + bias[3 * H + j])
                    c_prev = c0v[bb, j] if t == 0 else cv[t - 1, bb, j]
                    c_t = fg * c_prev + ig * gg
                    gatesv[t, bb, j] = ig
                    gatesv[t, bb, H + j] = fg
                    gatesv[t, bb, 2 * H + j] = gg
                    gatesv[t, bb, 3 * H + j] = og
                    cv[t, bb, j] = c_t
                    hv[t, bb, j] = og * tanh(c_t)
    return h_arr, c_arr, gates_arr


def lstm_backward(x, wx, wh, h, c, gates, h0, c0, dh):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] wxv = np.ascontiguousarray(wx, dtype=np.float64)
    cdef double[:, ::1] whv = np.ascontiguousarray(wh, dtype=np.float64)
    cdef double[:, :, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[:, :, ::1] gatesv = np.ascontiguousarray(gates, dtype=np.float64)
    cdef double[:, ::1] h0v = np.ascontiguousarray(h0, dtype=np.float64)
    cdef double[:, ::1] c0v = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[:, :, ::1] dhv = np.ascontiguousarray(dh, dtype=np.float64)

    cdef int T = xv.shape[0]
    cdef int B = xv.shape[1]
    cdef int I = xv.shape[2]
    cdef int H = whv.shape[0]
    cdef int G = 4 * H

    dx_arr = np.empty((T, B, I))
    dwx_arr = np.zeros((I, G))
    dwh_arr = np.zeros((H, G))
    db_arr = np.zeros(G)
    dh_next_arr = np.zeros((B, H))
    dc_next_arr = np.zeros((B, H))
    dz_arr = np.empty((B, G))
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dwx = dwx_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dh_next = dh_next_arr
    cdef double[:, ::1] dc_next = dc_next_arr
    cdef double[:, ::1] dz = dz_arr

    cdef int t, bb, j
    cdef double ig, fg, gg, og, tanh_c, dh_t, dc_t, c_prev
    cdef double* h_prev
    with nogil:
        for t in range(T - 1, -1, -1):
            for bb in range(B):
                for j in range(H):
                    ig = gatesv[t, bb, j]
                    fg = gatesv[t, bb, H + j]
                    gg = gatesv[t, bb, 2 * H + j]
                    og = gatesv[t, bb, 3 * H + j]
                    tanh_c = tanh(cv[t, bb, j])
                    c_prev = c0v[bb, j] if t == 0 else cv[t - 1, bb, j]
                    dh_t = dhv[t, bb, j] + dh_next[bb, j]
                    dc_t = dc_next[bb, j] + dh_t * og * (1.0 - tanh_c * tanh_c)
                    dz[bb, j] = dc_t * gg * ig * (1.0 - ig)
                    dz[bb, H + j] = dc_t * c_prev * fg * (1.0 - fg)
                    dz[bb, 2 * H + j] = dc_t * ig * (1.0 - gg * gg)
                    dz[bb, 3 * H + j] = dh_t * tanh_c * og * (1.0 - og)
                    dc_next[bb, j] = dc_t * fg
            _mm_nt(&dz[0, 0], &wxv[0, 0], &dx[t, 0, 0], B, G, I, 0.0)
            _mm_tn(&xv[t, 0, 0], &dz[0, 0], &dwx[0, 0], I, B, G, 1.0)
            h_prev = &h0v[0, 0] if t == 0 else &hv[t - 1, 0, 0]
            _mm_tn(h_prev, &dz[0, 0], &dwh[0, 0], H, B, G, 1.0)
            for bb in range(B):
                for j in range(G):
                    db[j] += dz[bb, j]
            _mm_nt(&dz[0, 0], &whv[0, 0], &dh_next[0, 0], B, G, H, 0.0)
    return dx_arr, dwx_arr, dwh_arr, db_arr, dh_next_arr, dc_next_arr
