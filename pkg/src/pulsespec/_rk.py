"""Explicit Runge-Kutta tableau shared by the sampled linear solvers.

The 12-stage, 8th-order Dormand-Prince tableau is taken from scipy so the
numbers are not retyped by hand.
"""
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES], dtype=float)
B = np.ascontiguousarray(_dop.B, dtype=float)
C = np.ascontiguousarray(_dop.C[:N_STAGES], dtype=float)
ORDER = 8


def stage_points(x):
    """Stage abscissae for the grid ``x`` (monotone in either direction).

    Returns an array of shape (len(x) - 1, N_STAGES).
    """
    x = np.asarray(x, dtype=float)
    h = np.diff(x)
    return x[:-1, None] + C[None, :] * h[:, None]


def quad_weights(x):
    """Weights w[n, i] = h_n b_i so that sum(w * g(stage)) integrates g."""
    h = np.diff(np.asarray(x, dtype=float))
    return h[:, None] * B[None, :]
