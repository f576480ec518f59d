# Compiled LSTM sequence kernels; contract identical to kernels_py.
#
# Gate order (i, f, g, o) along the last axis. Per-step recurrent matmuls go
# through BLAS dgemm; the gate nonlinearities and state updates run in the
# fused SIMD step loops from _kernel_steps.h. All arrays are C-contiguous
# float64.

import numpy as np

cimport numpy as cnp
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

COMPILED = True


cdef extern from "_kernel_steps.h":
    void lstm_step_fwd(long nb, long hid, const double* pre,
                       const double* cprev, long cprev_rs,
                       double* gates, long gates_rs,
                       double* cout, double* hout, long ch_rs) nogil
    void lstm_step_bwd(long nb, long hid, const double* gates, long gates_rs,
                       const double* cnow, long cnow_rs,
                       const double* cprev, long cprev_rs,
                       const double* dho, long dho_rs,
                       const double* dhr, double* dcr, double* dpre) nogil


cdef void _gemm_rowmajor(char transa, char transb, int m, int n, int k,
                         double alpha, double* a, int lda,
                         double* b, int ldb,
                         double beta, double* c, int ldc) nogil:
    # Row-major C[m,n] = alpha*op(A)op(B) + beta*C realized as the
    # column-major product of the swapped, re-interpreted operands.
    dgemm(&transb, &transa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef void _matmul(double* x, int ldx, double* y, double* out,
                  int m, int k, int n, double beta) nogil:
    # out[m,n] (+)= x[m,k] @ y[k,n]; x rows strided by ldx, y and out contiguous
    _gemm_rowmajor(b'N', b'N', m, n, k, 1.0, x, ldx, y, n, beta, out, n)


cdef void _matmul_bt(double* x, double* y, double* out, int m, int k, int n,
                     double beta) nogil:
    # out[m,n] (+)= x[m,k] @ y[n,k].T
    _gemm_rowmajor(b'N', b'T', m, n, k, 1.0, x, k, y, k, beta, out, n)


cdef void _matmul_at(double* x, int ldx, double* y, double* out,
                     int m, int k, int n, double beta) nogil:
    # out[m,n] (+)= x[k,m].T @ y[k,n]; x rows strided by ldx
    _gemm_rowmajor(b'T', b'N', m, n, k, 1.0, x, ldx, y, n, beta, out, n)


def lstm_seq_forward(double[:, :, ::1] xw, double[:, ::1] u,
                     double[:, ::1] h0, double[:, ::1] c0):
    cdef int nb = xw.shape[0]
    cdef int steps = xw.shape[1]
    cdef int h4 = xw.shape[2]
    cdef int hid = h4 // 4

    h_arr = np.empty((nb, steps, hid))
    c_arr = np.empty((nb, steps, hid))
    gates_arr = np.empty((nb, steps, h4))
    pre_arr = np.empty((nb, h4))

    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, ::1] pre = pre_arr

    cdef int s, b
    cdef double *cprev
    cdef long cprev_rs

    with nogil:
        for s in range(steps):
            for b in range(nb):
                memcpy(&pre[b, 0], &xw[b, s, 0], h4 * sizeof(double))
            # previous h and c feed the step straight from their slabs
            if s > 0:
                _matmul(&h[0, s - 1, 0], steps * hid, &u[0, 0], &pre[0, 0],
                        nb, hid, h4, 1.0)
                cprev = &c[0, s - 1, 0]
                cprev_rs = steps * hid
            else:
                _matmul(&h0[0, 0], hid, &u[0, 0], &pre[0, 0], nb, hid, h4, 1.0)
                cprev = &c0[0, 0]
                cprev_rs = hid
            lstm_step_fwd(nb, hid, &pre[0, 0], cprev, cprev_rs,
                          &gates[0, s, 0], steps * h4,
                          &c[0, s, 0], &h[0, s, 0], steps * hid)
    return h_arr, c_arr, gates_arr


def lstm_seq_backward(double[:, :, ::1] dh_out, double[:, ::1] u,
                      double[:, ::1] h0, double[:, ::1] c0,
                      double[:, :, ::1] h, double[:, :, ::1] c,
                      double[:, :, ::1] gates):
    cdef int nb = h.shape[0]
    cdef int steps = h.shape[1]
    cdef int hid = h.shape[2]
    cdef int h4 = 4 * hid

    dxw_arr = np.empty((nb, steps, h4))
    du_arr = np.zeros((hid, h4))
    dh_rec_arr = np.zeros((nb, hid))
    dc_rec_arr = np.zeros((nb, hid))
    dpre_arr = np.empty((nb, h4))

    cdef double[:, :, ::1] dxw = dxw_arr
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr
    cdef double[:, ::1] dc_rec = dc_rec_arr
    cdef double[:, ::1] dpre = dpre_arr

    cdef int s, b
    cdef double *cprev
    cdef double *hprev
    cdef long cprev_rs, hprev_rs

    with nogil:
        for s in range(steps - 1, -1, -1):
            if s > 0:
                cprev = &c[0, s - 1, 0]
                hprev = &h[0, s - 1, 0]
                cprev_rs = steps * hid
                hprev_rs = steps * hid
            else:
                cprev = &c0[0, 0]
                hprev = &h0[0, 0]
                cprev_rs = hid
                hprev_rs = hid
            lstm_step_bwd(nb, hid, &gates[0, s, 0], steps * h4,
                          &c[0, s, 0], steps * hid, cprev, cprev_rs,
                          &dh_out[0, s, 0], steps * hid,
                          &dh_rec[0, 0], &dc_rec[0, 0], &dpre[0, 0])
            for b in range(nb):
                memcpy(&dxw[b, s, 0], &dpre[b, 0], h4 * sizeof(double))
            _matmul_at(hprev, <int> hprev_rs, &dpre[0, 0], &du[0, 0],
                       hid, nb, h4, 1.0)
            _matmul_bt(&dpre[0, 0], &u[0, 0], &dh_rec[0, 0], nb, h4, hid, 0.0)
    return dxw_arr, du_arr, dh_rec_arr, dc_rec_arr
