"""Numpy fallback for the training kernels.

Same signatures and semantics as the compiled flids.nn._kernels module;
float64 throughout. Max-pool ties resolve to the first maximum in both
implementations.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def dense_fwd(X, W, b):
    return X @ W + b


def dense_bwd(X, W, dZ):
    return dZ @ W.T, X.T @ dZ, dZ.sum(axis=0)


def conv1d_fwd(X, W, b):
    win = sliding_window_view(X, W.shape[1], axis=1)
    return np.einsum("blk,fk->blf", win, W, optimize=True) + b


def conv1d_bwd(X, W, dZ):
    K = W.shape[1]
    L_out = dZ.shape[1]
    win = sliding_window_view(X, K, axis=1)
    dW = np.einsum("blf,blk->fk", dZ, win, optimize=True)
    db = dZ.sum(axis=(0, 1))
    dX = np.zeros_like(X)
    for k in range(K):
        dX[:, k : k + L_out] += dZ @ W[:, k]
    return dX, dW, db


def maxpool_fwd(A, width):
    B, L, F = A.shape
    Lp = L // width
    S = A[:, : Lp * width].reshape(B, Lp, width, F)
    local = S.argmax(axis=2)
    P = np.take_along_axis(S, local[:, :, None, :], axis=2)[:, :, 0, :]
    idx = local + (np.arange(Lp) * width)[None, :, None]
    return np.ascontiguousarray(P), idx.astype(np.int64)


def maxpool_bwd(dP, idx, L):
    B, Lp, F = dP.shape
    dA = np.zeros((B, L, F))
    bi = np.arange(B)[:, None, None]
    fi = np.arange(F)[None, None, :]
    dA[bi, idx, fi] = dP
    return dA
