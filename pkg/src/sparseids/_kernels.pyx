# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fused LSTM pointwise math and streaming rewards.

Mirrors ``_kernels_py`` one-to-one.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def lstm_forward(double[:, ::1] z, double[:, ::1] c_prev):
    # tanh comes from numpy's vectorized ufunc (several times faster than
    # scalar libm calls); the gate algebra around it is fused here.
    cdef Py_ssize_t B = z.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    scale = np.full(4 * H, 0.5)
    scale[2 * H : 3 * H] = 1.0
    acts_arr = np.tanh(np.multiply(z, scale))
    hc_arr = np.empty((B, 2 * H))
    cdef double[:, ::1] acts = acts_arr
    cdef double[:, ::1] hc = hc_arr
    cdef Py_ssize_t b, k
    with nogil:
        for b in range(B):
            for k in range(2 * H):
                acts[b, k] = 0.5 * (1.0 + acts[b, k])
            for k in range(3 * H, 4 * H):
                acts[b, k] = 0.5 * (1.0 + acts[b, k])
            for k in range(H):
                hc[b, H + k] = acts[b, H + k] * c_prev[b, k] + acts[b, k] * acts[b, 2 * H + k]
    tc_arr = np.tanh(hc_arr[:, H:])
    cdef double[:, ::1] tc = tc_arr
    with nogil:
        for b in range(B):
            for k in range(H):
                hc[b, k] = acts[b, 3 * H + k] * tc[b, k]
    return acts_arr, hc_arr, tc_arr


def lstm_backward(double[:, ::1] acts, double[:, ::1] c_prev,
                  double[:, ::1] tanh_c, double[:, ::1] dhc):
    cdef Py_ssize_t B = acts.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    dz_arr = np.empty((B, 4 * H))
    dcp_arr = np.empty((B, H))
    cdef double[:, ::1] dz = dz_arr
    cdef double[:, ::1] dcp = dcp_arr
    cdef Py_ssize_t b, k
    cdef double i, f, g, o, t, dh, dc
    with nogil:
        for b in range(B):
            for k in range(H):
                i = acts[b, k]
                f = acts[b, H + k]
                g = acts[b, 2 * H + k]
                o = acts[b, 3 * H + k]
                t = tanh_c[b, k]
                dh = dhc[b, k]
                dc = dhc[b, H + k] + dh * o * (1.0 - t * t)
                dz[b, k] = dc * g * i * (1.0 - i)
                dz[b, H + k] = dc * c_prev[b, k] * f * (1.0 - f)
                dz[b, 2 * H + k] = dc * i * (1.0 - g * g)
                dz[b, 3 * H + k] = dh * t * o * (1.0 - o)
                dcp[b, k] = dc * f
    return dz_arr, dcp_arr


def stream_rewards(cnp.int64_t[:, ::1] positions, double[:, ::1] confidences,
                   cnp.int64_t[::1] counts, cnp.int64_t[::1] lengths,
                   double[::1] labels, cnp.int64_t[::1] last_actions):
    cdef Py_ssize_t B = positions.shape[0]
    cdef Py_ssize_t T = positions.shape[1]
    r_cls_arr = np.zeros((B, T))
    r_sp_arr = np.zeros((B, T))
    def_arr = np.zeros((B, T))
    cdef double[:, ::1] r_cls = r_cls_arr
    cdef double[:, ::1] r_sp = r_sp_arr
    cdef double[:, ::1] defined = def_arr
    cdef Py_ssize_t b, j
    cdef long long K, N, p, nxt, gap, future, over, skipped
    cdef double y, cls_sum, score
    with nogil:
        for b in range(B):
            K = counts[b]
            N = lengths[b]
            y = labels[b]
            cls_sum = 0.0
            skipped = 0
            nxt = N
            for j in range(K - 1, -1, -1):
                p = positions[b, j]
                gap = nxt - p - 1
                score = 1.0 - fabs(y - confidences[b, j])
                future = N - 1 - p
                if future >= 1:
                    r_cls[b, j] = (cls_sum + gap * score) / future
                    if j == K - 1:
                        over = p + last_actions[b] - N
                        if over < 0:
                            over = 0
                        r_sp[b, j] = <double>future / <double>(future + over)
                    else:
                        r_sp[b, j] = <double>(skipped + gap) / <double>future
                    defined[b, j] = 1.0
                cls_sum += gap * score + score
                skipped += gap
                nxt = p
    return r_cls_arr, r_sp_arr, def_arr
