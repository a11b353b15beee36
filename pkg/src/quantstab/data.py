"""Trajectory data, quadratic noise bounds and the induced set of plants.

Every state matrix ``A`` that explains the data ``X_plus = A X_minus + B U + W``
with a noise sequence ``W`` obeying the quadratic bound

    [I; W^T]^T Phi [I; W^T] >= 0

is characterized by a single quadratic matrix inequality in ``[I; A^T]``
with the matrix ``N`` built in :func:`build_ellipsoid`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

TOL_PSD = 1e-8
TOL_EIG = 1e-9
TOL_RANK = 1e-10


def _mat(x, name, ndim=2):
    a = np.array(x, dtype=float)
    if a.ndim == 1 and ndim == 2:
        a = a[None, :]
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrajectoryData:
    """One experiment of horizon ``T``.

    ``U`` normally has a single row; several rows are accepted so that
    multi-input illustrations can still be fed to :func:`build_ellipsoid`.
    """

    X_minus: np.ndarray
    U: np.ndarray
    X_plus: np.ndarray
    W: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "X_minus", _mat(self.X_minus, "X_minus"))
        object.__setattr__(self, "X_plus", _mat(self.X_plus, "X_plus"))
        object.__setattr__(self, "U", _mat(self.U, "U"))
        if self.W is not None:
            object.__setattr__(self, "W", _mat(self.W, "W"))
        if self.X_minus.shape != self.X_plus.shape:
            raise ValueError(f"X_minus {self.X_minus.shape} and X_plus {self.X_plus.shape} differ")
        if self.U.shape[1] != self.T:
            raise ValueError(f"U has {self.U.shape[1]} columns, expected T={self.T}")
        if self.W is not None and self.W.shape != self.X_minus.shape:
            raise ValueError(f"W has shape {self.W.shape}, expected {self.X_minus.shape}")
        if self.T < 1:
            raise ValueError("horizon must be at least 1")

    @property
    def n(self):
        return self.X_minus.shape[0]

    @property
    def T(self):
        return self.X_minus.shape[1]


@dataclass(frozen=True)
class NoiseBound:
    """Partitioned bound ``Phi = [[Phi11, Phi12], [Phi12^T, Phi22]]`` with ``Phi22 < 0``."""

    Phi11: np.ndarray
    Phi12: np.ndarray
    Phi22: np.ndarray

    def __post_init__(self):
        for name in ("Phi11", "Phi12", "Phi22"):
            object.__setattr__(self, name, _mat(getattr(self, name), name))
        n, T = self.Phi12.shape
        if self.Phi11.shape != (n, n) or self.Phi22.shape != (T, T):
            raise ValueError("inconsistent Phi block sizes")
        if not np.allclose(self.Phi11, self.Phi11.T) or not np.allclose(self.Phi22, self.Phi22.T):
            raise ValueError("Phi11 and Phi22 must be symmetric")
        if np.linalg.eigvalsh(self.Phi22)[-1] >= -1e-10:
            raise ValueError("Phi22 must be negative definite")

    @classmethod
    def ball(cls, omega_max, T, n, zeta=1.0):
        """Energy bound ``W W^T <= zeta * T * omega_max * I`` for noise in a ball."""
        return cls(zeta * T * omega_max * np.eye(n), np.zeros((n, T)), -np.eye(T))

    @property
    def n(self):
        return self.Phi11.shape[0]

    @property
    def T(self):
        return self.Phi22.shape[0]

    @property
    def Phi(self):
        return np.block([[self.Phi11, self.Phi12], [self.Phi12.T, self.Phi22]])

    def contains(self, W, tol=1e-9):
        """Check the quadratic bound for a realized noise matrix ``W`` (n x T)."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        F = self.Phi11 + self.Phi12 @ W.T + W @ self.Phi12.T + W @ self.Phi22 @ W.T
        scale = 1.0 + np.linalg.norm(self.Phi11, 2) + np.linalg.norm(W, 2) ** 2
        return bool(np.linalg.eigvalsh(0.5 * (F + F.T))[0] >= -tol * scale)


@dataclass(frozen=True)
class UncertaintyEllipsoid:
    """Set of plants ``{A : N11 + N12 A^T + A N12^T + A N22 A^T >= 0}``."""

    N: np.ndarray
    X_U: np.ndarray

    @property
    def n(self):
        return self.N.shape[0] // 2

    @property
    def N11(self):
        return self.N[: self.n, : self.n]

    @property
    def N12(self):
        return self.N[: self.n, self.n:]

    @property
    def N22(self):
        return self.N[self.n:, self.n:]

    @property
    def scale(self):
        return max(np.linalg.norm(self.N, 2), np.finfo(float).tiny)


def build_ellipsoid(data: TrajectoryData, B, bound: NoiseBound) -> UncertaintyEllipsoid:
    B = np.asarray(B, dtype=float).reshape(data.n, -1)
    if B.shape[1] != data.U.shape[0]:
        raise ValueError(f"B has {B.shape[1]} columns but U has {data.U.shape[0]} rows")
    if bound.n != data.n or bound.T != data.T:
        raise ValueError(f"noise bound is for (n={bound.n}, T={bound.T}), data has (n={data.n}, T={data.T})")
    n = data.n
    X_U = data.X_plus - B @ data.U
    L = np.block([[np.eye(n), X_U], [np.zeros((n, n)), -data.X_minus]])
    N = L @ bound.Phi @ L.T
    N = 0.5 * (N + N.T)
    N.setflags(write=False)
    X_U.setflags(write=False)
    return UncertaintyEllipsoid(N, X_U)


def quadratic_form(ell, A):
    A = np.asarray(A, dtype=float)
    F = ell.N11 + ell.N12 @ A.T + A @ ell.N12.T + A @ ell.N22 @ A.T
    return 0.5 * (F + F.T)


def membership(ell, A, tol=TOL_PSD):
    """True when ``A`` is consistent with the data (form PSD up to ``tol * ||N||``)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (ell.n, ell.n):
        raise ValueError(f"A must be {ell.n}x{ell.n}")
    lam = np.linalg.eigvalsh(quadratic_form(ell, A))[0]
    # the form is quadratic in A, so the rounding scale grows with ||A||^2
    scale = ell.scale * (1.0 + np.linalg.norm(A, 2)) ** 2
    return bool(lam >= -tol * scale)


def kernel_inclusion(ell, tol=1e-8):
    """Numerical check of ``ker(N22) ⊆ ker(N12)``."""
    lam, V = np.linalg.eigh(ell.N22)
    kernel = V[:, np.abs(lam) <= tol * ell.scale]
    if kernel.shape[1] == 0:
        return True
    return bool(np.linalg.norm(ell.N12 @ kernel, 2) <= tol * max(np.linalg.norm(ell.N12, 2), 1.0))


def slater_check(ell, tol=TOL_EIG):
    """Generalized Slater condition via counting positive eigenvalues of ``N``."""
    lam = np.linalg.eigvalsh(ell.N)
    return int(np.sum(lam > tol * ell.scale)) >= ell.n


def positive_eigencount(ell, tol=TOL_EIG):
    return int(np.sum(np.linalg.eigvalsh(ell.N) > tol * ell.scale))


def data_rank(data, tol=TOL_RANK):
    s = np.linalg.svd(data.X_minus, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rank_condition(data, tol=TOL_RANK):
    """``rank(X_minus) == n``, necessary for any quantized stabilizer to exist."""
    return data_rank(data, tol) == data.n


def center_and_radius(ell, tol=TOL_EIG):
    """Complete the square: ``Sigma = {A_c + D : D (-N22) D^T <= S}``.

    Returns ``(A_c, S)``, or ``None`` when ``N22`` is singular and the set is
    unbounded.
    """
    lam = np.linalg.eigvalsh(ell.N22)
    if lam[-1] >= -tol * ell.scale:
        return None
    A_c = -np.linalg.solve(ell.N22, ell.N12.T).T
    S = ell.N11 - ell.N12 @ np.linalg.solve(ell.N22, ell.N12.T)
    return A_c, 0.5 * (S + S.T)


def generalized_center(ell):
    """Maximizer of the quadratic form in the Loewner order, using a pseudo-inverse.

    It lies in Sigma whenever Sigma is nonempty, bounded or not.
    """
    return -ell.N12 @ np.linalg.pinv(ell.N22, rcond=1e-12, hermitian=True)


def _psd_sqrt(M):
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def sample_members(ell, count, seed=0):
    """Deterministic sample of ``count`` members of a bounded set.

    Index 0 is the center; three out of every four later indices lie on the
    boundary, the rest in the interior.  Each index draws from its own
    generator keyed by ``(seed, index)``.
    """
    cr = center_and_radius(ell)
    if cr is None:
        raise ValueError("uncertainty set is unbounded; cannot sample it")
    A_c, S = cr
    n = ell.n
    S_half = _psd_sqrt(S)
    lam, V = np.linalg.eigh(-ell.N22)
    H_inv_half = (V / np.sqrt(lam)) @ V.T

    out = [A_c.copy()]
    for i in range(1, count):
        rng = np.random.default_rng([seed, i])
        R = rng.standard_normal((n, n))
        R /= np.linalg.norm(R, 2)
        boundary = i % 4 != 0
        if not boundary:
            R *= rng.uniform() ** (1.0 / (n * n))
        step = S_half @ R @ H_inv_half
        # boundary points can fall outside by rounding; pull them in minimally
        for shrink in (1.0, 1 - 1e-9, 1 - 1e-6, 1 - 1e-3):
            A = A_c + shrink * step
            if membership(ell, A):
                break
        else:
            raise RuntimeError("sampled matrix failed the membership check")
        out.append(A)
    return out[:count]
