"""Pure numpy kernels for linear RK sweeps (fallback for ``_kernels``).

All kernels act on precomputed stage coefficients ``A[n, i]`` (the matrix of
the linear ODE at the i-th stage point of step n) so that the RK method is
applied to x' = A(x) y + F(x) without any Python callbacks.  Loops run over
stages; steps are vectorised.
"""
import numpy as np


def _eye(N, k):
    out = np.zeros((N, k, k), dtype=complex)
    idx = np.arange(k)
    out[:, idx, idx] = 1.0
    return out


def step_maps(A, h, a, b):
    """Linear one-step maps R[n] with y_{n+1} = R[n] y_n."""
    N, s, k, _ = A.shape
    hh = h[:, None, None]
    I = _eye(N, k)
    K = np.empty((s, N, k, k), dtype=complex)
    for i in range(s):
        Y = I.copy()
        for j in range(i):
            if a[i, j] != 0.0:
                Y += hh * (a[i, j] * K[j])
        K[i] = np.matmul(A[:, i], Y)
    R = I
    for i in range(s):
        if b[i] != 0.0:
            R = R + hh * (b[i] * K[i])
    return R


def step_affine(A, F, h, a, b):
    """Affine one-step maps: y_{n+1} = R[n] y_n + r[n]."""
    N, s, k, _ = A.shape
    c = F.shape[3]
    hh = h[:, None, None]
    I = _eye(N, k)
    K = np.empty((s, N, k, k), dtype=complex)
    Kf = np.empty((s, N, k, c), dtype=complex)
    for i in range(s):
        Y = I.copy()
        Yf = np.zeros((N, k, c), dtype=complex)
        for j in range(i):
            if a[i, j] != 0.0:
                Y += hh * (a[i, j] * K[j])
                Yf += hh * (a[i, j] * Kf[j])
        K[i] = np.matmul(A[:, i], Y)
        Kf[i] = np.matmul(A[:, i], Yf) + F[:, i]
    R = I
    r = np.zeros((N, k, c), dtype=complex)
    for i in range(s):
        if b[i] != 0.0:
            R = R + hh * (b[i] * K[i])
            r = r + hh * (b[i] * Kf[i])
    return R, r


def stage_values(A, F, h, a, b, y):
    """Stage values Y[n, i] of the RK step started from node values y[n].

    ``F`` may be None for the homogeneous problem.  ``y`` has shape (N, k, c).
    """
    N, s, k, _ = A.shape
    c = y.shape[2]
    hh = h[:, None, None]
    K = np.empty((s, N, k, c), dtype=complex)
    Y = np.empty((N, s, k, c), dtype=complex)
    for i in range(s):
        Yi = y.astype(complex, copy=True)
        for j in range(i):
            if a[i, j] != 0.0:
                Yi += hh * (a[i, j] * K[j])
        Y[:, i] = Yi
        K[i] = np.matmul(A[:, i], Yi)
        if F is not None:
            K[i] += F[:, i]
    return Y


def chain(R, starts):
    """Products P[j] = R[e-1] ... R[s] over segments [starts[j], starts[j+1])."""
    S = len(starts) - 1
    k = R.shape[1]
    P = np.empty((S, k, k), dtype=complex)
    for j in range(S):
        M = np.eye(k, dtype=complex)
        for n in range(starts[j], starts[j + 1]):
            M = R[n] @ M
        P[j] = M
    return P


def chain_affine(R, r, starts):
    """Segment compositions of affine step maps."""
    S = len(starts) - 1
    k = R.shape[1]
    c = r.shape[2]
    P = np.empty((S, k, k), dtype=complex)
    p = np.empty((S, k, c), dtype=complex)
    for j in range(S):
        M = np.eye(k, dtype=complex)
        v = np.zeros((k, c), dtype=complex)
        for n in range(starts[j], starts[j + 1]):
            M = R[n] @ M
            v = R[n] @ v + r[n]
        P[j] = M
        p[j] = v
    return P, p


def _mgs(Y):
    k, r = Y.shape
    Q = Y.copy()
    logs = 0.0
    for j in range(r):
        for i in range(j):
            Q[:, j] -= np.vdot(Q[:, i], Q[:, j]) * Q[:, i]
        nrm = np.linalg.norm(Q[:, j])
        Q[:, j] /= nrm
        logs += np.log(nrm)
    return Q, logs


def frame_sweep(R, Y0, every):
    """Propagate a frame through the step maps with periodic MGS renormalisation.

    Returns the renormalised frames at every node and the cumulative log of
    the discarded triangular factors (its determinant), so that the true frame
    at node n spans the same space and has det-scale exp(logscale[n]).
    """
    N = R.shape[0]
    k, r = Y0.shape
    Y = np.empty((N + 1, k, r), dtype=complex)
    logscale = np.zeros(N + 1)
    cur = np.asarray(Y0, dtype=complex).copy()
    acc = 0.0
    cur, l0 = _mgs(cur)
    acc += l0
    Y[0] = cur
    logscale[0] = acc
    for n in range(N):
        cur = R[n] @ cur
        if (n + 1) % every == 0 or n == N - 1:
            cur, ln = _mgs(cur)
            acc += ln
        Y[n + 1] = cur
        logscale[n + 1] = acc
    return Y, logscale
