import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg as sla

from pulsespec import _rk, kernels

try:
    compiled = kernels.backend("cython")
except ImportError:
    compiled = None
numpy_impl = kernels.backend("numpy")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def random_system(seed, N=30, k=3, c=2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(N, _rk.N_STAGES, k, k)) + 1j * rng.normal(size=(N, _rk.N_STAGES, k, k))
    F = rng.normal(size=(N, _rk.N_STAGES, k, c)) + 0j
    h = rng.uniform(0.01, 0.1, N)
    y = rng.normal(size=(N, k, c)) + 0j
    return A, F, h, y


def test_constant_step_map_is_expm():
    A = np.array([[0.1, 1.0], [-2.0, -0.3]], complex)
    R = kernels.step_maps(np.broadcast_to(A, (1, _rk.N_STAGES, 2, 2)), np.array([0.05]), _rk.A, _rk.B)
    # 8th order: local error ~ (h |A|)^9
    assert np.allclose(R[0], sla.expm(0.05 * A), atol=1e-14)


@needs_compiled
@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_backends_agree(seed):
    A, F, h, y = random_system(seed)
    for name in ("step_maps", "step_affine", "stage_values"):
        args = {"step_maps": (A, h, _rk.A, _rk.B), "step_affine": (A, F, h, _rk.A, _rk.B),
                "stage_values": (A, F, h, _rk.A, _rk.B, y)}[name]
        a = getattr(kernels, name)(*args, impl=numpy_impl)
        b = getattr(kernels, name)(*args, impl=compiled)
        for x, z in zip(np.atleast_1d(a) if not isinstance(a, tuple) else a,
                        np.atleast_1d(b) if not isinstance(b, tuple) else b):
            assert np.allclose(x, z, rtol=1e-13, atol=1e-13)
    R, r = kernels.step_affine(A * 0.2, F, h, _rk.A, _rk.B)
    starts = np.array([0, 7, 19, 30])
    assert np.allclose(kernels.chain(R, starts, impl=numpy_impl), kernels.chain(R, starts, impl=compiled),
                       rtol=1e-13)
    for a, b in zip(kernels.chain_affine(R, r, starts, impl=numpy_impl),
                    kernels.chain_affine(R, r, starts, impl=compiled)):
        assert np.allclose(a, b, rtol=1e-13)
    Y0 = np.eye(3, 2, dtype=complex)
    for a, b in zip(kernels.frame_sweep(R, Y0, 5, impl=numpy_impl), kernels.frame_sweep(R, Y0, 5, impl=compiled)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_frame_sweep_log_scale_tracks_growth():
    A = np.diag([0.5, 2.0]).astype(complex)
    N = 40
    R = kernels.step_maps(np.broadcast_to(A, (N, _rk.N_STAGES, 2, 2)), np.full(N, 0.05), _rk.A, _rk.B)
    Y, logs = kernels.frame_sweep(R, np.eye(2, 1, dtype=complex), 7)
    assert logs[-1] == pytest.approx(0.5 * 2.0, rel=1e-10)


def test_fallback_selected_by_environment():
    env = dict(os.environ, PULSESPEC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from pulsespec import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.backend("fortran")
