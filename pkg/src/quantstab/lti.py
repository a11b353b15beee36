"""Single-input discrete-time LTI plants and the logarithmic quantizer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import TrajectoryData

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LinearSystem:
    """``x(k+1) = A x(k) + B u(k) + w(k)`` with a scalar input."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.ndim == 1:
            B = B[:, None]
        if B.shape != (A.shape[0], 1):
            raise ValueError(f"B must be {A.shape[0]}x1 (single input), got shape {B.shape}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class LogQuantizer:
    """Logarithmic quantizer with levels ``u0 * rho**(-i)``, ``i`` in Z."""

    rho: float
    u0: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"density must lie in (0, 1), got {self.rho}")
        if not self.u0 > 0.0:
            raise ValueError(f"base level must be positive, got {self.u0}")

    @classmethod
    def from_delta(cls, delta, u0=1.0):
        return cls(delta_to_rho(delta), u0)

    @property
    def delta(self):
        return rho_to_delta(self.rho)

    def level(self, i):
        return self.u0 * self.rho ** (-i)

    def index(self, v):
        """Index of the level assigned to ``v > 0``.

        This is the smallest ``i`` with ``v (1 - delta) <= u_i``; a single
        monotone test keeps adjacent half-open intervals consistent under
        rounding.
        """
        target = v * (1.0 - self.delta)
        i = math.ceil(math.log(target / self.u0) / -math.log(self.rho))
        while target > self.level(i):
            i += 1
        while target <= self.level(i - 1):
            i -= 1
        return i

    def __call__(self, v):
        return quantize(self, v)


def rho_to_delta(rho):
    return (1.0 - rho) / (1.0 + rho)


def delta_to_rho(delta):
    return (1.0 - delta) / (1.0 + delta)


def quantize(q: LogQuantizer, v: float) -> float:
    v = float(v)
    if v == 0.0:
        return 0.0
    if v < 0.0:
        return -quantize(q, -v)
    return q.level(q.index(v))


@dataclass(frozen=True)
class ClosedLoopSystem:
    system: LinearSystem
    K: np.ndarray
    quantizer: Optional[LogQuantizer] = None

    def __post_init__(self):
        K = np.array(self.K, dtype=float).reshape(1, -1)
        if K.shape[1] != self.system.n:
            raise ValueError(f"K must have {self.system.n} columns, got {K.shape[1]}")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def A_cl(self):
        return self.system.A + self.system.B @ self.K

    def transfer(self, z):
        """``K (zI - A - BK)^{-1} B`` at the complex points ``z``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = self.system.n
        M = z[:, None, None] * np.eye(n) - self.A_cl
        rhs = np.broadcast_to(self.system.B.astype(complex), (z.size, n, 1))
        return (self.K @ np.linalg.solve(M, rhs))[:, 0, 0]


def spectral_radius(M):
    M = np.atleast_2d(M)
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def simulate_open_loop(sys: LinearSystem, x0, inputs, noise) -> TrajectoryData:
    x0 = np.asarray(x0, dtype=float).ravel()
    u = np.asarray(inputs, dtype=float).ravel()
    W = np.asarray(noise, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have {sys.n} entries")
    T = u.size
    if T < 1:
        raise ValueError("need at least one input sample")
    if W.size != T * sys.n:
        raise ValueError(f"noise must hold {T} vectors of length {sys.n}, got shape {W.shape}")
    W = W.reshape(T, sys.n)
    X = np.empty((sys.n, T + 1))
    X[:, 0] = x0
    for k in range(T):
        X[:, k + 1] = sys.A @ X[:, k] + sys.B[:, 0] * u[k] + W[k]
    return TrajectoryData(X[:, :-1], u[None, :], X[:, 1:], W.T)


def simulate_quantized_closed_loop(cl: ClosedLoopSystem, x0, steps, noise=None):
    """States ``x(0..steps)`` of ``x+ = A x + B f(K x) + w`` as a (steps+1, n) array."""
    if cl.quantizer is None:
        raise ValueError("closed loop has no quantizer")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    A, B, K = cl.system.A, cl.system.B[:, 0], cl.K[0]
    n = cl.system.n
    x = np.asarray(x0, dtype=float).ravel()
    if x.shape != (n,):
        raise ValueError(f"x0 must have {n} entries")
    if noise is not None:
        noise = np.asarray(noise, dtype=float).reshape(steps, n)
    xs = np.empty((steps + 1, n))
    xs[0] = x
    for k in range(steps):
        x = A @ x + B * quantize(cl.quantizer, K @ x)
        if noise is not None:
            x = x + noise[k]
        xs[k + 1] = x
    return xs


def _golden_max(f, a, b, tol):
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def frequency_response_norm(cl: ClosedLoopSystem, grid_size=4096, tol=1e-6):
    """Peak of ``|G(e^{j theta})|`` over ``[0, pi]``: grid search plus golden-section polish."""
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    if spectral_radius(cl.A_cl) >= 1.0:
        raise ValueError("closed loop is not Schur stable: H-infinity norm undefined")
    if not np.any(cl.K):
        return 0.0
    theta = np.linspace(0.0, np.pi, grid_size)
    mag = np.abs(cl.transfer(np.exp(1j * theta)))
    i = int(np.argmax(mag))
    lo, hi = theta[max(i - 1, 0)], theta[min(i + 1, grid_size - 1)]
    _, peak = _golden_max(lambda t: float(np.abs(cl.transfer(np.exp(1j * t)))[0]), lo, hi, tol)
    return float(max(peak, mag[i]))
