import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantstab.fixtures import BENCH_A, BENCH_B, bench_system
from quantstab.lti import (
    ClosedLoopSystem, LinearSystem, LogQuantizer, delta_to_rho, frequency_response_norm, quantize,
    rho_to_delta, simulate_open_loop, simulate_quantized_closed_loop,
)

rhos = st.floats(0.01, 0.99)
magnitudes = st.floats(-8, 8).map(lambda e: 10.0 ** e)


@pytest.mark.parametrize("v, expected", [(0.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (1.5, 1.0), (1.6, 2.0),
                                         (0.75, 0.5), (0.76, 1.0), (-3.0, -2.0), (-3.5, -4.0)])
def test_quantize_half(v, expected):
    # delta = 1/3: level 2^i covers (0.75 * 2^i, 1.5 * 2^i]
    assert quantize(LogQuantizer(0.5), v) == expected


def test_quantizer_validation():
    with pytest.raises(ValueError):
        LogQuantizer(1.0)
    with pytest.raises(ValueError):
        LogQuantizer(0.5, u0=0.0)
    assert LogQuantizer.from_delta(1 / 3).rho == pytest.approx(0.5)


@settings(max_examples=300, deadline=None)
@given(rhos, magnitudes, st.sampled_from([1.0, -1.0]), st.floats(0.1, 10.0))
def test_sector_bound(rho, mag, sign, u0):
    q = LogQuantizer(rho, u0)
    v = sign * mag
    assert abs(quantize(q, v) - v) <= q.delta * abs(v) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(rhos, magnitudes)
def test_odd_symmetry(rho, v):
    q = LogQuantizer(rho)
    assert quantize(q, -v) == -quantize(q, v)


@settings(max_examples=200, deadline=None)
@given(rhos, st.integers(-40, 40))
def test_levels_are_fixed_points(rho, i):
    q = LogQuantizer(rho)
    u = q.level(i)
    assert quantize(q, u) == pytest.approx(u, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(rhos)
def test_rho_delta_roundtrip(rho):
    assert delta_to_rho(rho_to_delta(rho)) == pytest.approx(rho, abs=1e-12)
    assert rho_to_delta(delta_to_rho(rho)) == pytest.approx(rho, abs=1e-12)


def test_system_shapes():
    with pytest.raises(ValueError):
        LinearSystem(np.eye(2), np.ones((2, 2)))
    with pytest.raises(ValueError):
        LinearSystem(np.ones((2, 3)), np.ones(2))
    assert LinearSystem(np.eye(2), [1.0, 0.0]).B.shape == (2, 1)


def test_zero_dynamics():
    sys = LinearSystem(np.zeros((2, 2)), [1.0, 0.0])
    d = simulate_open_loop(sys, [0.0, 0.0], [1.0], np.zeros((1, 2)))
    assert np.array_equal(d.X_minus, np.zeros((2, 1)))
    assert np.array_equal(d.U, [[1.0]])
    assert np.array_equal(d.X_plus, [[1.0], [0.0]])


def test_identity_dynamics():
    sys = LinearSystem(np.eye(2), [1.0, 0.0])
    d = simulate_open_loop(sys, [0.0, 1.0], [0.0, 0.0], np.zeros((2, 2)))
    assert np.array_equal(d.X_plus[:, -1], [0.0, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_simulation_identity(seed):
    rng = np.random.default_rng(seed)
    n, T = 4, 30
    sys = LinearSystem(rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, n))
    d = simulate_open_loop(sys, rng.standard_normal(n), rng.standard_normal(T), 0.1 * rng.standard_normal((T, n)))
    resid = d.X_plus - sys.A @ d.X_minus - sys.B @ d.U - d.W
    assert np.abs(resid).max() <= 1e-12 * (1 + np.abs(d.X_plus).max())


def test_simulation_errors():
    sys = bench_system()
    with pytest.raises(ValueError):
        simulate_open_loop(sys, np.zeros(2), [1.0], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        simulate_open_loop(sys, np.zeros(3), [1.0, 2.0], np.zeros((1, 3)))


def test_quantized_loop_equilibrium_and_open_loop():
    sys = LinearSystem(0.5 * np.eye(2), [1.0, 1.0])
    cl = ClosedLoopSystem(sys, np.zeros(2), LogQuantizer(0.3))
    xs = simulate_quantized_closed_loop(cl, [1.0, -2.0], 30)
    assert np.allclose(xs[10], 0.5 ** 10 * xs[0])
    assert np.all(simulate_quantized_closed_loop(cl, np.zeros(2), 5) == 0)
    with pytest.raises(ValueError):
        simulate_quantized_closed_loop(ClosedLoopSystem(sys, np.zeros(2)), [1.0, 0.0], 3)


def test_frequency_norm_scalar():
    cl = ClosedLoopSystem(LinearSystem([[0.0]], [1.0]), [0.5])
    assert frequency_response_norm(cl) == pytest.approx(1.0, abs=1e-6)
    assert frequency_response_norm(ClosedLoopSystem(LinearSystem([[0.3]], [1.0]), [0.0])) == 0.0


def test_frequency_norm_rejects_unstable():
    with pytest.raises(ValueError, match="undefined"):
        frequency_response_norm(ClosedLoopSystem(bench_system(), np.zeros(3)))
    with pytest.raises(ValueError):
        frequency_response_norm(ClosedLoopSystem(LinearSystem([[0.0]], [1.0]), [0.5]), grid_size=10)


@pytest.mark.parametrize("seed", range(5))
def test_frequency_norm_similarity_invariant(seed):
    rng = np.random.default_rng(seed)
    n = 3
    Acl = rng.standard_normal((n, n))
    Acl *= 0.8 / max(abs(np.linalg.eigvals(Acl)))
    B = rng.standard_normal((n, 1))
    K = rng.standard_normal((1, n))
    Tm = rng.standard_normal((n, n)) + 3 * np.eye(n)
    Ti = np.linalg.inv(Tm)
    g1 = frequency_response_norm(ClosedLoopSystem(LinearSystem(Acl - B @ K, B), K))
    A2, B2, K2 = Ti @ Acl @ Tm, Ti @ B, K @ Tm
    g2 = frequency_response_norm(ClosedLoopSystem(LinearSystem(A2 - B2 @ K2, B2), K2))
    assert g2 == pytest.approx(g1, rel=1e-6)


def test_transfer_matches_definition():
    K = np.array([[0.1, -0.2, 0.3]])
    cl = ClosedLoopSystem(LinearSystem(BENCH_A, BENCH_B), K)
    z = 1.7 * np.exp(0.4j)
    direct = (K @ np.linalg.solve(z * np.eye(3) - cl.A_cl, BENCH_B))[0, 0]
    assert cl.transfer(z)[0] == pytest.approx(direct)
    assert math.isclose(abs(cl.transfer([z, z])[1]), abs(direct))
