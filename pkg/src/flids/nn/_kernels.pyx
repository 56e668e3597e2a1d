# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels; flids.nn.kernels_py is the reference semantics."""

import numpy as np


def dense_fwd(double[:, ::1] X, double[:, ::1] W, double[::1] b):
    cdef Py_ssize_t B = X.shape[0], I = X.shape[1], O = W.shape[1]
    out_arr = np.empty((B, O))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double xv
    for i in range(B):
        for j in range(O):
            out[i, j] = b[j]
        for k in range(I):
            xv = X[i, k]
            if xv != 0.0:
                for j in range(O):
                    out[i, j] += xv * W[k, j]
    return out_arr


def dense_bwd(double[:, ::1] X, double[:, ::1] W, double[:, ::1] dZ):
    cdef Py_ssize_t B = X.shape[0], I = X.shape[1], O = W.shape[1]
    dX_arr = np.empty((B, I))
    dW_arr = np.zeros((I, O))
    db_arr = np.zeros(O)
    cdef double[:, ::1] dX = dX_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, xv
    for i in range(B):
        for k in range(I):
            acc = 0.0
            for j in range(O):
                acc += dZ[i, j] * W[k, j]
            dX[i, k] = acc
    for i in range(B):
        for k in range(I):
            xv = X[i, k]
            if xv != 0.0:
                for j in range(O):
                    dW[k, j] += xv * dZ[i, j]
        for j in range(O):
            db[j] += dZ[i, j]
    return dX_arr, dW_arr, db_arr


def conv1d_fwd(double[:, ::1] X, double[:, ::1] W, double[::1] b):
    cdef Py_ssize_t B = X.shape[0], L = X.shape[1], F = W.shape[0], K = W.shape[1]
    cdef Py_ssize_t Lout = L - K + 1
    out_arr = np.empty((B, Lout, F))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, l, f, k
    cdef double acc
    for i in range(B):
        for l in range(Lout):
            for f in range(F):
                acc = b[f]
                for k in range(K):
                    acc += X[i, l + k] * W[f, k]
                out[i, l, f] = acc
    return out_arr


def conv1d_bwd(double[:, ::1] X, double[:, ::1] W, double[:, :, ::1] dZ):
    cdef Py_ssize_t B = X.shape[0], L = X.shape[1], F = W.shape[0], K = W.shape[1]
    cdef Py_ssize_t Lout = dZ.shape[1]
    dX_arr = np.zeros((B, L))
    dW_arr = np.zeros((F, K))
    db_arr = np.zeros(F)
    cdef double[:, ::1] dX = dX_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, l, f, k
    cdef double dzv
    for i in range(B):
        for l in range(Lout):
            for f in range(F):
                dzv = dZ[i, l, f]
                if dzv != 0.0:
                    db[f] += dzv
                    for k in range(K):
                        dW[f, k] += dzv * X[i, l + k]
                        dX[i, l + k] += dzv * W[f, k]
    return dX_arr, dW_arr, db_arr


def maxpool_fwd(double[:, :, ::1] A, Py_ssize_t width):
    cdef Py_ssize_t B = A.shape[0], L = A.shape[1], F = A.shape[2]
    cdef Py_ssize_t Lp = L // width
    P_arr = np.empty((B, Lp, F))
    idx_arr = np.empty((B, Lp, F), dtype=np.int64)
    cdef double[:, :, ::1] P = P_arr
    cdef long long[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, p, f, w, base, bi
    cdef double best, v
    for i in range(B):
        for p in range(Lp):
            base = p * width
            for f in range(F):
                best = A[i, base, f]
                bi = base
                for w in range(1, width):
                    v = A[i, base + w, f]
                    if v > best:
                        best = v
                        bi = base + w
                P[i, p, f] = best
                idx[i, p, f] = bi
    return P_arr, idx_arr


def maxpool_bwd(double[:, :, ::1] dP, long long[:, :, ::1] idx, Py_ssize_t L):
    cdef Py_ssize_t B = dP.shape[0], Lp = dP.shape[1], F = dP.shape[2]
    dA_arr = np.zeros((B, L, F))
    cdef double[:, :, ::1] dA = dA_arr
    cdef Py_ssize_t i, p, f
    for i in range(B):
        for p in range(Lp):
            for f in range(F):
                dA[i, idx[i, p, f], f] = dP[i, p, f]
    return dA_arr
