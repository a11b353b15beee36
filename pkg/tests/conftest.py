import warnings

import numpy as np
import pytest

from quantstab.data import NoiseBound, build_ellipsoid
from quantstab.fixtures import BENCH_B, bench_data, bench_system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ball_noise(n, T, omega, rng):
    z = rng.standard_normal((T, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return np.sqrt(omega) * z * rng.uniform(size=(T, 1)) ** (1 / n)


def bench_ellipsoid(omega=0.0, seed=0, corrected=True, T=20):
    """Benchmark data set and its uncertainty set; ``omega=0`` is exact data."""
    sys = bench_system(corrected=corrected)
    noise = ball_noise(3, T, omega, np.random.default_rng([seed, 99]))
    data = bench_data(sys, T=T, seed=seed, noise=noise)
    return sys, data, build_ellipsoid(data, BENCH_B, NoiseBound.ball(omega, T, 3))


@pytest.fixture(autouse=True)
def _quiet_slater():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="generalized Slater", category=RuntimeWarning)
        yield


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        rows = ACCEPTANCE[criterion]
        verdict = "PASS" if all(ok for ok, _ in rows) else "FAIL"
        details = "; ".join(d for _, d in rows)
        terminalreporter.write_line(f"criterion {criterion:2d}: {verdict}  {details}")
