import functools

import numpy as np
import pytest

from pulsespec import gierer_meinhardt, shoot_periodic_orbit, singular_orbit


@functools.lru_cache(maxsize=None)
def gm(variant="minus_mu", mu=1.0, beta2=2, coupling=1.0):
    return gierer_meinhardt(variant=variant, mu=mu, beta2=beta2, coupling=coupling)


@functools.lru_cache(maxsize=None)
def orbit_of(variant="minus_mu", mu=1.0, beta2=2, u0=1.0, coupling=1.0):
    return singular_orbit(gm(variant, mu, beta2, coupling), u0)


@functools.lru_cache(maxsize=None)
def profile_of(eps, variant="minus_mu", mu=1.0, beta2=2, u0=1.0, h=0.05):
    return shoot_periodic_orbit(gm(variant, mu, beta2), eps, orbit_of(variant, mu, beta2, u0), h=h)


@pytest.fixture(scope="session")
def center():
    """GM center case f(u) = -u at u0 = 1."""
    return gm(), orbit_of()


@pytest.fixture(scope="session")
def saddle():
    """Slowly linear GM, f(u) = u at u0 = 1.5."""
    return gm("mu"), orbit_of("mu", u0=1.5)


@pytest.fixture(scope="session")
def profile04():
    return profile_of(0.04)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> list of (ok, detail) recorded by test_acceptance
ACCEPTANCE = {}


def record(n, ok, detail):
    ACCEPTANCE.setdefault(n, []).append((bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        bad = [d for ok, d in parts if not ok]
        status = "PASS" if not bad else "FAIL"
        detail = "; ".join(bad) if bad else parts[-1][1]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}  [{len(parts) - len(bad)}/{len(parts)} checks]")
