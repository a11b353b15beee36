"""Controller synthesis from data: fixed-density LMI, coarsest density, H-infinity oracles.

With ``Y = P^{-1}`` and ``X = K Y`` the robust H-infinity condition
``||K (zI - A - BK)^{-1} B|| < 1/delta`` for every ``A`` in the data-consistent
set becomes one LMI in ``(Y, X, alpha, beta)`` through two Schur complements
and the matrix S-procedure.  The squared sector radius ``d = delta**2`` enters
that LMI affinely, so the coarsest density is a plain SDP in ``d``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import data as data_api
from .lti import ClosedLoopSystem, LinearSystem, frequency_response_norm, spectral_radius
from .sdp import LmiProblem, SolverOptions, bmat, scaled

log = logging.getLogger(__name__)

DELTA_CAP = 1.0 - 1e-6
BACKOFF = 0.999


class SynthesisError(RuntimeError):
    def __init__(self, message, status, stats=None):
        super().__init__(message)
        self.status = status
        self.stats = stats or {}


class Infeasible(SynthesisError):
    pass


class NumericalFailure(SynthesisError):
    pass


@dataclass(frozen=True)
class StabilizationCertificate:
    Y: np.ndarray
    X: np.ndarray
    alpha: float
    beta: float
    delta: float
    status: str = "feasible"
    solver_stats: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def K(self):
        return np.linalg.solve(self.Y, self.X.T).T

    @property
    def rho(self):
        return (1.0 - self.delta) / (1.0 + self.delta)

    @property
    def P(self):
        P = np.linalg.inv(self.Y)
        return 0.5 * (P + P.T)

    @property
    def Z(self):
        return self.Y - self.X.T @ self.X


@dataclass(frozen=True)
class DensityResult:
    delta_sq: float
    certificate: StabilizationCertificate
    solver_stats: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def delta_star(self):
        return float(np.sqrt(self.delta_sq))

    @property
    def rho_star(self):
        d = self.delta_star
        return (1.0 - d) / (1.0 + d)


def _input_vector(ell, B):
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim == 1 else B
    if B.shape != (ell.n, 1):
        raise ValueError(f"B must be {ell.n}x1, got shape {B.shape}")
    return B


def _synthesis_lmi(ell, B, delta=None, form="auto"):
    """Build the synthesis LMI; ``delta=None`` makes ``d = delta**2`` a variable.

    ``form="literal"`` subtracts ``alpha * N`` as is.  ``form="centered"``
    applies the congruence ``[I, A_c; 0, H^{-1/2}]`` (``H = -N22``) to the
    first two block rows, which turns ``N`` into ``diag(S, -I)`` and the
    ``BX`` block into ``A_c Y + B X``.  Both forms have exactly the same
    feasible ``(Y, X, alpha, beta, d)``; the centered one stays well scaled
    when the data pin ``A`` down tightly.  ``"auto"`` picks it whenever the
    set is bounded.
    """
    B = _input_vector(ell, B)
    n = ell.n
    if form == "auto":
        form = "centered" if data_api.center_and_radius(ell) is not None else "literal"
    prob = LmiProblem()
    Y = prob.symmetric("Y", n)
    X = prob.matrix("X", 1, n)
    alpha = prob.scalar("alpha", lower=0.0)
    beta = prob.scalar("beta", lower=0.0, strict=True)
    if delta is None:
        d = prob.scalar("d", lower=0.0, upper=DELTA_CAP ** 2, strict=True)
        quant = scaled(d, B @ B.T)
    else:
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        d = None
        quant = delta ** 2 * (B @ B.T)

    BX = B @ X
    one = np.ones((1, 1))
    if form == "literal":
        first = bmat([
            [Y - quant - scaled(beta, np.eye(n)), 0, BX, 0],
            [0, np.zeros((n, n)), Y, 0],
            [BX.T, Y, Y, X.T],
            [0, 0, X, one],
        ])
        N_big = np.zeros((3 * n + 1, 3 * n + 1))
        N_big[: 2 * n, : 2 * n] = ell.N
        first = first - scaled(alpha, N_big)
    elif form == "centered":
        cr = data_api.center_and_radius(ell)
        if cr is None:
            raise ValueError("centered form needs a bounded uncertainty set")
        A_c, S = cr
        lam, V = np.linalg.eigh(-ell.N22)
        H_inv_half = (V / np.sqrt(lam)) @ V.T
        AYBX = A_c @ Y + BX
        HY = H_inv_half @ Y
        first = bmat([
            [Y - quant - scaled(beta, np.eye(n)) - scaled(alpha, S), 0, AYBX, 0],
            [0, scaled(alpha, np.eye(n)), HY, 0],
            [AYBX.T, HY.T, Y, X.T],
            [0, 0, X, one],
        ])
    else:
        raise ValueError(f"unknown form {form!r}")
    prob.add_psd(first, name="synthesis")
    prob.add_psd(bmat([[Y, X.T], [X, one]]), strict=True, name="Y - X^T X > 0")
    return prob, d


def assemble_synthesis_lmi(ell, B, delta, form="literal") -> LmiProblem:
    """Feasibility LMI certifying a common quantized stabilizer at sector radius ``delta``."""
    return _synthesis_lmi(ell, B, delta, form)[0]


def synthesis_residual(cert, ell, B):
    """Smallest eigenvalue of the literal synthesis LMI evaluated at a certificate.

    Scaled by the size of the constant data so that values near ``-1e-9``
    are rounding noise.
    """
    B = _input_vector(ell, B)
    prob = assemble_synthesis_lmi(ell, B, cert.delta, form="literal")
    values = {"Y": cert.Y, "X": cert.X, "alpha": cert.alpha, "beta": cert.beta}
    M = prob.constraints[0].expr.value(values)
    scale = 1.0 + cert.alpha * ell.scale + np.linalg.norm(cert.Y, 2)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0] / scale)


def _certificate(values, delta, stats):
    return StabilizationCertificate(
        Y=values["Y"], X=values["X"], alpha=float(values["alpha"]),
        beta=float(values["beta"]), delta=float(delta), solver_stats=stats,
    )


def _solve_once(ell, B, delta, options):
    return _synthesis_lmi(ell, B, delta)[0].solve(options)


def _precheck(ell, check_slater):
    """Warn when Slater fails; reject unbounded sets outright.

    An unbounded set means ``rank(X_minus) < n``, and then consistent plants
    with arbitrarily large unstable eigenvalues exist (see
    :mod:`quantstab.adversarial`), so no common stabilizer can exist.
    """
    if check_slater and not data_api.slater_check(ell):
        warnings.warn("generalized Slater condition fails; an infeasible LMI is then inconclusive",
                      RuntimeWarning, stacklevel=3)
    if data_api.center_and_radius(ell) is None:
        warnings.warn("uncertainty set is unbounded (rank-deficient data)", RuntimeWarning, stacklevel=3)
        raise Infeasible("uncertainty set is unbounded: the data are not informative",
                         "infeasible", {"reason": "unbounded"})


def solve_fixed_density(ell, B, delta, options=None, check_slater=True, probe=True):
    """Certificate for quantized stabilization at sector radius ``delta``.

    Raises :class:`Infeasible` or :class:`NumericalFailure`.  A numerical
    failure triggers a probe at ``0.95*delta`` and ``1.05*delta``: feasibility
    is monotone in ``delta``, so a feasible point at the larger radius also
    certifies ``delta`` and infeasibility at the smaller one rules it out.
    """
    _precheck(ell, check_slater)
    res = _solve_once(ell, B, delta, options)
    if res.ok:
        return _certificate(res.values, delta, res.solver_stats)
    if res.status in ("infeasible", "unbounded") or not probe:
        cls = Infeasible if res.status == "infeasible" else NumericalFailure
        raise cls(f"synthesis LMI {res.status} at delta={delta:.6g}", res.status, res.solver_stats)

    stats = dict(res.solver_stats)
    lo = _solve_once(ell, B, 0.95 * delta, options)
    hi = _solve_once(ell, B, min(1.05 * delta, DELTA_CAP), options)
    stats["probe"] = {"0.95": lo.status, "1.00": res.status, "1.05": hi.status}
    if hi.ok:
        return _certificate(hi.values, delta, stats)
    if lo.status == "infeasible":
        raise Infeasible(f"synthesis LMI infeasible near delta={delta:.6g}", "infeasible", stats)
    raise NumericalFailure(f"solver failed at delta={delta:.6g}", res.status, stats)


def maximize_density(ell, B, options=None, check_slater=True, backoff=BACKOFF) -> DensityResult:
    """Largest sector radius (coarsest density) admitting a common stabilizer.

    The density SDP is solved directly.  When the solver stalls, the radius
    is found instead by bisection on fixed-radius feasibility problems; the
    result then records ``"method": "bisection"`` in its stats.
    """
    _precheck(ell, check_slater)
    prob, d = _synthesis_lmi(ell, B, None)
    prob.maximize(d)
    res = prob.solve(options)
    if res.status == "infeasible":
        raise Infeasible("no quantized stabilizer for any density", res.status, res.solver_stats)
    if res.ok:
        d = float(res.values["d"])
        try:
            cert = solve_fixed_density(ell, B, backoff * np.sqrt(d), options, check_slater=False)
            return DensityResult(d, cert, dict(res.solver_stats, method="sdp"))
        except SynthesisError:
            log.info("back-off re-solve failed at d=%.6g; bisecting instead", d)
    return _bisect_density(ell, B, options, res)


def _bisect_density(ell, B, options, first, floor=1e-3, rtol=1e-4):
    """Bisection on ``delta``; a stalled solve counts as infeasible (conservative)."""
    low = _solve_once(ell, B, floor, options)
    stats = {"method": "bisection", "sdp_status": first.status, "solves": 1}
    if low.status == "infeasible":
        raise Infeasible("no quantized stabilizer for any density", "infeasible", stats)
    if not low.ok:
        raise NumericalFailure("density SDP and bisection both failed", first.status, stats)
    lo, best = floor, low
    hi = DELTA_CAP
    top = _solve_once(ell, B, hi, options)
    stats["solves"] += 1
    if top.ok:
        lo, best = hi, top
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        r = _solve_once(ell, B, mid, options)
        stats["solves"] += 1
        if r.ok:
            lo, best = mid, r
        else:
            hi = mid
    stats.update(best.solver_stats)
    return DensityResult(lo ** 2, _certificate(best.values, lo, stats), stats)


def mahler_measure(A):
    """Product of the moduli of the eigenvalues outside the unit circle (1 if none)."""
    lam = np.abs(np.linalg.eigvals(np.atleast_2d(np.asarray(A, dtype=float))))
    return float(np.prod(lam[lam > 1.0]))


def _brl_feasible(A_cl, B, K, gamma, options):
    """Bounded-real LMI, normalized by gamma**2, for ``||K (zI - A_cl)^{-1} B|| < gamma``."""
    n = A_cl.shape[0]
    prob = LmiProblem()
    P = prob.symmetric("P", n)
    prob.add_psd(P, strict=True)
    KK = K.T @ K / gamma ** 2
    prob.add_psd(-bmat([
        [A_cl.T @ P @ A_cl - P + KK, A_cl.T @ P @ B],
        [B.T @ P @ A_cl, B.T @ P @ B - np.ones((1, 1))],
    ]), strict=True)
    return prob.solve(options)


def hinf_norm_bisection(A, B, K, gamma_lo=None, atol=1e-4, rtol=1e-5, options=None):
    """H-infinity norm of ``K (zI - A - BK)^{-1} B`` by bisection on the bounded-real LMI."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, 1)
    K = np.asarray(K, dtype=float).reshape(1, n)
    A_cl = A + B @ K
    if spectral_radius(A_cl) >= 1.0 - 1e-9:
        raise ValueError("closed loop is not Schur stable: H-infinity norm undefined")
    if not np.any(K) or not np.any(B):
        return 0.0
    if gamma_lo is None:
        # any stabilizing gain pays at least the Mahler measure of the open loop
        gamma_lo = mahler_measure(A) * (1 - 1e-9) if spectral_radius(A) > 1.0 else 1e-6
    lo = gamma_lo
    hi = max(1.0, 2.0 * lo)
    while not _brl_feasible(A_cl, B, K, hi, options).ok:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise RuntimeError("no feasible bound below 1e8")
    while hi - lo > min(atol, rtol * hi):
        mid = 0.5 * (lo + hi)
        if _brl_feasible(A_cl, B, K, mid, options).ok:
            hi = mid
        else:
            lo = mid
    return float(hi)


def vertex_margin(cert, A, B):
    """Largest eigenvalue of the two vertex Lyapunov inequalities with ``P = Y^{-1}``.

    Negative means ``x^T P x`` decreases along ``A + B(1 + D)K`` for every
    ``|D| <= delta``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(-1, 1)
    P, K = cert.P, cert.K
    worst = -np.inf
    for s in (1.0 - cert.delta, 1.0 + cert.delta):
        M = A + s * (B @ K)
        L = M.T @ P @ M - P
        worst = max(worst, float(np.linalg.eigvalsh(0.5 * (L + L.T))[-1]))
    return worst


def verify_certificate(cert, ell, B, count=50, seed=0, method="bisection", tol=1e-6):
    """Check a certificate against ``count`` sampled members of the uncertainty set.

    ``method`` selects the H-infinity oracle: ``"bisection"`` (LMI) or
    ``"frequency"`` (frequency-grid sweep).
    """
    B = np.asarray(B, dtype=float).reshape(-1, 1)
    bound = 1.0 / cert.delta
    K = cert.K
    scale_P = np.linalg.norm(cert.P, 2)
    samples = []
    for A in data_api.sample_members(ell, count, seed):
        rho_cl = spectral_radius(A + B @ K)
        if rho_cl >= 1.0:
            samples.append({"spectral_radius": rho_cl, "hinf": None, "vertex": None, "ok": False})
            continue
        if method == "bisection":
            h = hinf_norm_bisection(A, B, K)
        elif method == "frequency":
            h = frequency_response_norm(ClosedLoopSystem(LinearSystem(A, B), K))
        else:
            raise ValueError(f"unknown method {method!r}")
        v = vertex_margin(cert, A, B)
        ok = h < bound * (1 + tol) and v < tol * scale_P
        samples.append({"spectral_radius": rho_cl, "hinf": h, "vertex": v, "ok": bool(ok)})
    hs = [s["hinf"] for s in samples if s["hinf"] is not None]
    return {
        "count": count,
        "seed": seed,
        "method": method,
        "hinf_bound": bound,
        "max_hinf": max(hs) if hs else None,
        "max_vertex_eig": max((s["vertex"] for s in samples if s["vertex"] is not None), default=None),
        "violations": sum(not s["ok"] for s in samples),
        "passed": all(s["ok"] for s in samples),
    }
