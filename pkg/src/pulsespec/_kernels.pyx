# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for linear RK sweeps; same contract as ``_kernels_py``."""
import numpy as np
from libc.math cimport sqrt, log
from libc.stdlib cimport malloc, free


cdef inline double cabs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


def step_maps(const double complex[:, :, :, ::1] A, const double[::1] h,
              const double[:, ::1] a, const double[::1] b):
    cdef Py_ssize_t N = A.shape[0], s = A.shape[1], k = A.shape[2]
    cdef Py_ssize_t n, i, j, p, q, t
    out = np.empty((N, k, k), dtype=complex)
    cdef double complex[:, :, ::1] R = out
    cdef double complex *K = <double complex *> malloc(s * k * k * sizeof(double complex))
    cdef double complex *Y = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex acc
    cdef double hn, w
    with nogil:
        for n in range(N):
            hn = h[n]
            for i in range(s):
                for p in range(k):
                    for q in range(k):
                        acc = 1.0 if p == q else 0.0
                        for j in range(i):
                            w = a[i, j]
                            if w != 0.0:
                                acc = acc + hn * w * K[(j * k + p) * k + q]
                        Y[p * k + q] = acc
                for p in range(k):
                    for q in range(k):
                        acc = 0.0
                        for t in range(k):
                            acc = acc + A[n, i, p, t] * Y[t * k + q]
                        K[(i * k + p) * k + q] = acc
            for p in range(k):
                for q in range(k):
                    acc = 1.0 if p == q else 0.0
                    for i in range(s):
                        if b[i] != 0.0:
                            acc = acc + hn * b[i] * K[(i * k + p) * k + q]
                    R[n, p, q] = acc
    free(K)
    free(Y)
    return out


def step_affine(const double complex[:, :, :, ::1] A, const double complex[:, :, :, ::1] F,
                const double[::1] h, const double[:, ::1] a, const double[::1] b):
    cdef Py_ssize_t N = A.shape[0], s = A.shape[1], k = A.shape[2], c = F.shape[3]
    cdef Py_ssize_t n, i, j, p, q, t
    outR = np.empty((N, k, k), dtype=complex)
    outr = np.empty((N, k, c), dtype=complex)
    cdef double complex[:, :, ::1] R = outR
    cdef double complex[:, :, ::1] r = outr
    cdef double complex *K = <double complex *> malloc(s * k * k * sizeof(double complex))
    cdef double complex *Kf = <double complex *> malloc(s * k * c * sizeof(double complex))
    cdef double complex *Y = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex *Yf = <double complex *> malloc(k * c * sizeof(double complex))
    cdef double complex acc
    cdef double hn, w
    with nogil:
        for n in range(N):
            hn = h[n]
            for i in range(s):
                for p in range(k):
                    for q in range(k):
                        acc = 1.0 if p == q else 0.0
                        for j in range(i):
                            w = a[i, j]
                            if w != 0.0:
                                acc = acc + hn * w * K[(j * k + p) * k + q]
                        Y[p * k + q] = acc
                    for q in range(c):
                        acc = 0.0
                        for j in range(i):
                            w = a[i, j]
                            if w != 0.0:
                                acc = acc + hn * w * Kf[(j * k + p) * c + q]
                        Yf[p * c + q] = acc
                for p in range(k):
                    for q in range(k):
                        acc = 0.0
                        for t in range(k):
                            acc = acc + A[n, i, p, t] * Y[t * k + q]
                        K[(i * k + p) * k + q] = acc
                    for q in range(c):
                        acc = F[n, i, p, q]
                        for t in range(k):
                            acc = acc + A[n, i, p, t] * Yf[t * c + q]
                        Kf[(i * k + p) * c + q] = acc
            for p in range(k):
                for q in range(k):
                    acc = 1.0 if p == q else 0.0
                    for i in range(s):
                        if b[i] != 0.0:
                            acc = acc + hn * b[i] * K[(i * k + p) * k + q]
                    R[n, p, q] = acc
                for q in range(c):
                    acc = 0.0
                    for i in range(s):
                        if b[i] != 0.0:
                            acc = acc + hn * b[i] * Kf[(i * k + p) * c + q]
                    r[n, p, q] = acc
    free(K)
    free(Kf)
    free(Y)
    free(Yf)
    return outR, outr


def stage_values(const double complex[:, :, :, ::1] A, F, const double[::1] h,
                 const double[:, ::1] a, const double[::1] b, y):
    cdef Py_ssize_t N = A.shape[0], s = A.shape[1], k = A.shape[2]
    cdef const double complex[:, :, ::1] yv = np.ascontiguousarray(y, dtype=complex)
    cdef Py_ssize_t c = yv.shape[2]
    cdef bint has_f = F is not None
    cdef const double complex[:, :, :, ::1] Fv
    if has_f:
        Fv = np.ascontiguousarray(F, dtype=complex)
    else:
        Fv = np.zeros((1, 1, 1, 1), dtype=complex)
    out = np.empty((N, s, k, c), dtype=complex)
    cdef double complex[:, :, :, ::1] Yv = out
    cdef double complex *K = <double complex *> malloc(s * k * c * sizeof(double complex))
    cdef Py_ssize_t n, i, j, p, q, t
    cdef double complex acc
    cdef double hn, w
    with nogil:
        for n in range(N):
            hn = h[n]
            for i in range(s):
                for p in range(k):
                    for q in range(c):
                        acc = yv[n, p, q]
                        for j in range(i):
                            w = a[i, j]
                            if w != 0.0:
                                acc = acc + hn * w * K[(j * k + p) * c + q]
                        Yv[n, i, p, q] = acc
                for p in range(k):
                    for q in range(c):
                        acc = Fv[n, i, p, q] if has_f else 0.0
                        for t in range(k):
                            acc = acc + A[n, i, p, t] * Yv[n, i, t, q]
                        K[(i * k + p) * c + q] = acc
    free(K)
    return out


def chain(const double complex[:, :, ::1] R, starts):
    cdef Py_ssize_t S = len(starts) - 1, k = R.shape[1]
    cdef const long[::1] st = np.ascontiguousarray(starts, dtype=np.int_)
    out = np.empty((S, k, k), dtype=complex)
    cdef double complex[:, :, ::1] P = out
    cdef double complex *M = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex *T = <double complex *> malloc(k * k * sizeof(double complex))
    cdef Py_ssize_t jseg, n, p, q, t
    cdef double complex acc
    with nogil:
        for jseg in range(S):
            for p in range(k):
                for q in range(k):
                    M[p * k + q] = 1.0 if p == q else 0.0
            for n in range(st[jseg], st[jseg + 1]):
                for p in range(k):
                    for q in range(k):
                        acc = 0.0
                        for t in range(k):
                            acc = acc + R[n, p, t] * M[t * k + q]
                        T[p * k + q] = acc
                for p in range(k * k):
                    M[p] = T[p]
            for p in range(k):
                for q in range(k):
                    P[jseg, p, q] = M[p * k + q]
    free(M)
    free(T)
    return out


def chain_affine(const double complex[:, :, ::1] R, const double complex[:, :, ::1] r, starts):
    cdef Py_ssize_t S = len(starts) - 1, k = R.shape[1], c = r.shape[2]
    cdef const long[::1] st = np.ascontiguousarray(starts, dtype=np.int_)
    outP = np.empty((S, k, k), dtype=complex)
    outp = np.empty((S, k, c), dtype=complex)
    cdef double complex[:, :, ::1] P = outP
    cdef double complex[:, :, ::1] pv = outp
    cdef double complex *M = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex *T = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex *v = <double complex *> malloc(k * c * sizeof(double complex))
    cdef double complex *vt = <double complex *> malloc(k * c * sizeof(double complex))
    cdef Py_ssize_t jseg, n, p, q, t
    cdef double complex acc
    with nogil:
        for jseg in range(S):
            for p in range(k):
                for q in range(k):
                    M[p * k + q] = 1.0 if p == q else 0.0
                for q in range(c):
                    v[p * c + q] = 0.0
            for n in range(st[jseg], st[jseg + 1]):
                for p in range(k):
                    for q in range(k):
                        acc = 0.0
                        for t in range(k):
                            acc = acc + R[n, p, t] * M[t * k + q]
                        T[p * k + q] = acc
                    for q in range(c):
                        acc = r[n, p, q]
                        for t in range(k):
                            acc = acc + R[n, p, t] * v[t * c + q]
                        vt[p * c + q] = acc
                for p in range(k * k):
                    M[p] = T[p]
                for p in range(k * c):
                    v[p] = vt[p]
            for p in range(k):
                for q in range(k):
                    P[jseg, p, q] = M[p * k + q]
                for q in range(c):
                    pv[jseg, p, q] = v[p * c + q]
    free(M)
    free(T)
    free(v)
    free(vt)
    return outP, outp


cdef double _mgs(double complex *Q, Py_ssize_t k, Py_ssize_t r) noexcept nogil:
    # in-place modified Gram-Schmidt on a row-major k x r block
    cdef Py_ssize_t i, j, p
    cdef double complex dot
    cdef double nrm, logs = 0.0
    for j in range(r):
        for i in range(j):
            dot = 0.0
            for p in range(k):
                dot = dot + Q[p * r + i].conjugate() * Q[p * r + j]
            for p in range(k):
                Q[p * r + j] = Q[p * r + j] - dot * Q[p * r + i]
        nrm = 0.0
        for p in range(k):
            nrm += cabs2(Q[p * r + j])
        nrm = sqrt(nrm)
        for p in range(k):
            Q[p * r + j] = Q[p * r + j] / nrm
        logs += log(nrm)
    return logs


def frame_sweep(const double complex[:, :, ::1] R, Y0, Py_ssize_t every):
    cdef Py_ssize_t N = R.shape[0], k = R.shape[1]
    cdef const double complex[:, ::1] y0 = np.ascontiguousarray(Y0, dtype=complex)
    cdef Py_ssize_t r = y0.shape[1]
    outY = np.empty((N + 1, k, r), dtype=complex)
    outl = np.empty(N + 1, dtype=float)
    cdef double complex[:, :, ::1] Y = outY
    cdef double[::1] ls = outl
    cdef double complex *cur = <double complex *> malloc(k * r * sizeof(double complex))
    cdef double complex *nxt = <double complex *> malloc(k * r * sizeof(double complex))
    cdef Py_ssize_t n, p, q, t
    cdef double complex acc
    cdef double tot = 0.0
    with nogil:
        for p in range(k):
            for q in range(r):
                cur[p * r + q] = y0[p, q]
        tot += _mgs(cur, k, r)
        for p in range(k):
            for q in range(r):
                Y[0, p, q] = cur[p * r + q]
        ls[0] = tot
        for n in range(N):
            for p in range(k):
                for q in range(r):
                    acc = 0.0
                    for t in range(k):
                        acc = acc + R[n, p, t] * cur[t * r + q]
                    nxt[p * r + q] = acc
            for p in range(k * r):
                cur[p] = nxt[p]
            if (n + 1) % every == 0 or n == N - 1:
                tot += _mgs(cur, k, r)
            for p in range(k):
                for q in range(r):
                    Y[n + 1, p, q] = cur[p * r + q]
            ls[n + 1] = tot
    free(cur)
    free(nxt)
    return outY, outl
