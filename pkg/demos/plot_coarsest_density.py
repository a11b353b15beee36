"""
Coarsest quantization density from one experiment
=================================================

Collect twenty samples from an unstable three-state plant, then ask how
coarse a logarithmic quantizer in the feedback loop may be while a single
gain still stabilizes every plant consistent with the data.
"""

import numpy as np

from quantstab import (
    ClosedLoopSystem, LogQuantizer, NoiseBound, SynthesisError, build_ellipsoid, mahler_measure, maximize_density,
    simulate_quantized_closed_loop,
)
from quantstab.experiments import sample_ball_noise
from quantstab.fixtures import BENCH_B, bench_data, bench_system

###############################################################################
# Exact data
# ----------
# Without noise the data pin the plant down, and the best achievable sector
# radius is the reciprocal of the product of the unstable eigenvalue moduli.

sys = bench_system(corrected=True)
data = bench_data(sys, T=20, seed=0)
exact = NoiseBound(np.zeros((3, 3)), np.zeros((3, 20)), -np.eye(20))
res = maximize_density(build_ellipsoid(data, BENCH_B, exact), BENCH_B, check_slater=False)
print(f"delta* = {res.delta_star:.4f}, bound 1/M(A) = {1 / mahler_measure(sys.A):.4f}")
print(f"coarsest density rho* = {res.rho_star:.4f}")

###############################################################################
# Noisy data
# ----------
# With noise in a ball of squared radius ``omega`` every consistent plant must
# be stabilized at once, and the admissible radius shrinks.

for omega in (1e-3, 1e-2, 3e-2):
    noise = sample_ball_noise(3, omega, 20, seed=1)
    noisy = bench_data(sys, T=20, seed=0, noise=noise)
    ell = build_ellipsoid(noisy, BENCH_B, NoiseBound.ball(omega, 20, 3))
    try:
        r = maximize_density(ell, BENCH_B)
        print(f"omega={omega:g}: delta*^2 = {r.delta_sq:.4f}")
    except SynthesisError as exc:
        print(f"omega={omega:g}: {exc}")

###############################################################################
# Closing the loop
# ----------------
# The certified gain drives the quantized loop to the origin, and the
# certificate's quadratic function decreases at every step.

cert = res.certificate
cl = ClosedLoopSystem(sys, cert.K, LogQuantizer.from_delta(cert.delta))
xs = simulate_quantized_closed_loop(cl, np.array([1.0, -0.5, 0.3]), 400)
V = np.einsum("ki,ij,kj->k", xs, cert.P, xs)
print(f"|x(400)| = {np.linalg.norm(xs[-1]):.2e}, V strictly decreasing: {bool(np.all(np.diff(V) < 0))}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots()
    ax.semilogy(V)
    ax.set_xlabel("step")
    ax.set_ylabel("x' P x")
    ax.set_title("quantized closed loop")
    plt.show()
