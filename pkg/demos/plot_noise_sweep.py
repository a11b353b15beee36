"""
Feasibility versus noise level
==============================

A small Monte Carlo sweep: for each noise level, how often does a common
quantized stabilizer exist, and how coarse may its quantizer be?
"""

from quantstab.experiments import ExperimentConfig, run_noise_sweep, run_prior_sweep

###############################################################################
# Sweeps
# ------
# Twenty trials per point keep this under a minute; the CLI's ``sweep-noise``
# and ``sweep-prior`` run the full-size versions.

cfg = ExperimentConfig(trials=20, verify_count=0)
noise = run_noise_sweep(cfg)
prior = run_prior_sweep(cfg)
for r in noise:
    print(f"omega={r.grid_value:<8.3g} feasible={r.feasible_fraction:.2f} mean delta^2={r.mean_delta_sq}")
for r in prior:
    print(f"zeta={r.grid_value:<5g} feasible={r.feasible_fraction:.2f} mean delta^2={r.mean_delta_sq}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    pts = [r for r in noise if r.grid_value > 0]
    left.semilogx([r.grid_value for r in pts], [100 * r.feasible_fraction for r in pts], "o-")
    left.set_xlabel("omega")
    left.set_ylabel("feasible data sets (%)")
    right.semilogx([r.grid_value for r in pts if r.mean_delta_sq is not None],
                   [r.mean_delta_sq for r in pts if r.mean_delta_sq is not None], "o-")
    right.set_xlabel("omega")
    right.set_ylabel("mean delta^2")
    fig.tight_layout()
    plt.show()
