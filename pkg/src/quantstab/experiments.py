"""Monte Carlo sweeps over the noise level and over an inflated noise prior.

Every trial owns a generator seeded from ``(master_seed, trial)``.  The same
trial index therefore sees the same plant, initial state, inputs and noise
shape at every grid point; only the noise amplitude or the prior changes.
Such common random numbers make the sweep curves far smoother than
independent draws at equal cost.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_api
from .certificates import Infeasible, SynthesisError, maximize_density, verify_certificate
from .fixtures import BENCH_A, BENCH_A_CORRECTED, BENCH_B
from .lti import LinearSystem, simulate_open_loop, spectral_radius

log = logging.getLogger(__name__)

DEFAULT_OMEGA = (0.0,) + tuple(float(x) for x in np.logspace(-3, 0, 13))
DEFAULT_ZETA = (1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0)
PRIOR_OMEGA = 0.005
SOURCES = ("fixed", "fixed-corrected", "random-uniform")
CSV_HEADER = ["grid_value", "feasible_fraction", "mean_delta_sq", "slater_pass_fraction", "trials"]
MAX_DRAWS = 100


def seed_from_env(default=0):
    value = os.environ.get("QUANTSTAB_SEED")
    return default if value in (None, "") else int(value)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 3
    T: int = 20
    trials: int = 100
    omega_grid: tuple = DEFAULT_OMEGA
    zeta_grid: tuple = DEFAULT_ZETA
    system_source: str = "fixed"
    master_seed: int = 0
    prior_omega: float = PRIOR_OMEGA
    verify_count: int = 10
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "omega_grid", tuple(float(x) for x in self.omega_grid))
        object.__setattr__(self, "zeta_grid", tuple(float(x) for x in self.zeta_grid))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.T < 1 or self.n < 1:
            raise ValueError("n and T must be positive")
        if any(x < 0 for x in self.omega_grid + self.zeta_grid) or self.prior_omega < 0:
            raise ValueError("grid values must be nonnegative")
        if self.system_source not in SOURCES:
            raise ValueError(f"system_source must be one of {SOURCES}")
        if self.system_source != "random-uniform" and self.n != BENCH_A.shape[0]:
            raise ValueError(f"the fixed plant has n={BENCH_A.shape[0]}")

    @classmethod
    def from_dict(cls, doc):
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class SweepRecord:
    grid_value: float
    feasible_fraction: float
    mean_delta_sq: float | None
    slater_pass_fraction: float
    trial_outcomes: list = field(default_factory=list)

    @property
    def trials(self):
        return len(self.trial_outcomes)


def _unit_ball(n, T, rng):
    z = rng.standard_normal((T, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.uniform(size=(T, 1)) ** (1.0 / n)


def sample_ball_noise(n, omega_max, T, seed=None):
    """``T`` vectors drawn uniformly from the solid ball of squared radius ``omega_max``."""
    if omega_max < 0:
        raise ValueError("omega_max must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return math.sqrt(omega_max) * _unit_ball(n, T, rng)


def _plant(cfg, rng):
    if cfg.system_source == "fixed":
        return LinearSystem(BENCH_A, BENCH_B)
    if cfg.system_source == "fixed-corrected":
        return LinearSystem(BENCH_A_CORRECTED, BENCH_B)
    for _ in range(MAX_DRAWS):
        A = rng.uniform(-1.0, 1.0, (cfg.n, cfg.n))
        B = rng.uniform(-1.0, 1.0, (cfg.n, 1))
        if spectral_radius(A) > 1.0:
            return LinearSystem(A, B)
    raise RuntimeError(f"no open-loop unstable plant in {MAX_DRAWS} draws")


def _trial_inputs(cfg, trial):
    """Plant, initial state, inputs and unit-ball noise shape shared by all grid points."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, trial]))
    sys = _plant(cfg, rng)
    x0 = rng.standard_normal(cfg.n)
    u = rng.standard_normal(cfg.T)
    shape = _unit_ball(cfg.n, cfg.T, rng)
    return sys, x0, u, shape


def run_trial(cfg, trial, omega, zeta=1.0):
    out = {"trial": trial, "status": "error", "delta_sq": None, "slater": False,
           "noise_bound_ok": None, "verified": None, "error": None}
    try:
        sys, x0, u, shape = _trial_inputs(cfg, trial)
        noise = math.sqrt(omega) * shape
        data = simulate_open_loop(sys, x0, u, noise)
        bound = data_api.NoiseBound.ball(omega, cfg.T, cfg.n, zeta)
        out["noise_bound_ok"] = bound.contains(data.W)
        ell = data_api.build_ellipsoid(data, sys.B, bound)
        out["slater"] = data_api.slater_check(ell)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = maximize_density(ell, sys.B, check_slater=False)
    except Infeasible as exc:
        out["status"] = "infeasible"
        out["error"] = str(exc)
        return out
    except SynthesisError as exc:
        out["status"] = "numerical-failure"
        out["error"] = str(exc)
        return out
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out

    out["status"] = "feasible"
    out["delta_sq"] = res.delta_sq
    if cfg.verify_count > 0 and data_api.center_and_radius(ell) is not None:
        try:
            report = verify_certificate(res.certificate, ell, sys.B, count=cfg.verify_count,
                                        seed=trial, method="frequency")
            out["verified"] = report["passed"]
        except (ValueError, RuntimeError) as exc:
            out["verified"] = False
            out["error"] = f"verification: {exc}"
    return out


def _aggregate(value, outcomes):
    outcomes = sorted(outcomes, key=lambda o: o["trial"])
    feas = [o["delta_sq"] for o in outcomes if o["status"] == "feasible"]
    n = len(outcomes)
    return SweepRecord(
        grid_value=float(value),
        feasible_fraction=len(feas) / n,
        mean_delta_sq=float(np.mean(feas)) if feas else None,
        slater_pass_fraction=sum(bool(o["slater"]) for o in outcomes) / n,
        trial_outcomes=outcomes,
    )


def _run_job(args):
    cfg, trial, omega, zeta = args
    return run_trial(cfg, trial, omega, zeta)


def _sweep(cfg, points):
    """``points`` is a list of (grid_value, omega, zeta); results fold in grid then trial order."""
    jobs = [(cfg, t, omega, zeta) for _, omega, zeta in points for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (8 * cfg.workers))))
    else:
        results = [_run_job(j) for j in jobs]
    records = []
    for i, (value, _, _) in enumerate(points):
        rec = _aggregate(value, results[i * cfg.trials:(i + 1) * cfg.trials])
        log.info("grid %.4g: feasible %.2f, mean d %s", value, rec.feasible_fraction, rec.mean_delta_sq)
        records.append(rec)
    return records


def run_noise_sweep(cfg: ExperimentConfig):
    return _sweep(cfg, [(w, w, 1.0) for w in cfg.omega_grid])


def run_prior_sweep(cfg: ExperimentConfig):
    return _sweep(cfg, [(z, cfg.prior_omega, z) for z in cfg.zeta_grid])


def _fmt(x):
    return "nan" if x is None else f"{x:.10g}"


def emit_plot_data(records, path, config=None):
    """Write the summary CSV at ``path`` and the per-trial JSON next to it."""
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(r.grid_value), _fmt(r.feasible_fraction), _fmt(r.mean_delta_sq),
                        _fmt(r.slater_pass_fraction), r.trials])
    doc = {"config": config, "records": [asdict(r) for r in records]}
    companion = path.with_suffix(".json")
    companion.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path, companion


def read_plot_data(path):
    """Records back from the JSON companion of ``emit_plot_data``."""
    doc = json.loads(Path(path).with_suffix(".json").read_text())
    return [SweepRecord(**r) for r in doc["records"]]


def read_plot_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "trials" else float(v)) for k, v in row.items()} for row in rows]
