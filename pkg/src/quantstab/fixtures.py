"""Named systems and data sets used throughout the tests and demos."""

import numpy as np

from .data import NoiseBound, TrajectoryData
from .lti import LinearSystem, simulate_open_loop

# open-loop unstable benchmark plant, three-decimal entries
BENCH_A = np.array([
    [-0.192, -0.936, -0.814],
    [-0.918, 0.729, -0.724],
    [-0.412, 0.735, -0.516],
])
BENCH_B = np.array([[-0.554], [0.735], [0.528]])
BENCH_EIGENVALUES = (1.2910, -1.3228, 0.0528)

# The three-decimal matrix above has spectrum {1.2113, -0.595 +- 0.090j}, not
# BENCH_EIGENVALUES (only the trace agrees).  Entry (3, 2) duplicates B's
# second entry; replacing it by -0.135 reproduces all three listed
# eigenvalues to 2e-5, so this is the likely intended plant.
BENCH_A_CORRECTED = BENCH_A.copy()
BENCH_A_CORRECTED[2, 1] = -0.135


def bench_system(corrected=False):
    return LinearSystem(BENCH_A_CORRECTED if corrected else BENCH_A, BENCH_B)


def bench_data(system=None, T=20, seed=0, noise=None):
    """Open-loop experiment with standard normal ``x0`` and inputs.

    ``noise`` is a ``(T, n)`` array; ``None`` means exact data.
    """
    system = system or bench_system()
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(system.n)
    u = rng.standard_normal(T)
    if noise is None:
        noise = np.zeros((T, system.n))
    return simulate_open_loop(system, x0, u, noise)


def example1():
    """Rank-deficient two-input data set whose consistent plants include ``[[0, k], [0, 0]]``.

    Returns ``(data, B, bound)``.  ``B`` is the 2x2 identity, so this fixture
    is only meant for the set-membership machinery.
    """
    data = TrajectoryData(
        X_minus=np.array([[1.0, 1.0], [0.0, 0.0]]),
        U=np.eye(2),
        X_plus=np.eye(2),
    )
    bound = NoiseBound(np.eye(2), np.zeros((2, 2)), -np.eye(2))
    return data, np.eye(2), bound
