"""Rank-deficient data: plants consistent with the data yet arbitrarily unstable.

If ``rank(X_minus) = r < n`` some directions of the state space were never
excited.  Any ``D`` with ``D @ X_minus = 0`` leaves the data-consistency form
untouched, so ``A0 + k * D`` stays consistent for every ``k`` while its
spectrum can be pushed out as far as we like.  No single gain stabilizes
such a family, quantized or not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data as data_api
from .lti import spectral_radius

FULL_RANK = "full-rank"
WITNESS_K = 1e3


@dataclass(frozen=True)
class RankDeficiencyWitness:
    """Family ``A0 + k * direction`` of consistent plants.

    ``E`` is orthogonal with ``E @ X_minus = [X_r; 0]`` and ``Lambda``
    selects the unexcited rows.  ``direction`` is ``Lambda @ E`` when the
    trailing block of ``E`` is well conditioned; otherwise it is the
    projector ``E.T @ Lambda @ E`` (``Lambda @ E`` can then be nilpotent and
    its eigenvalues would not grow).
    """

    E: np.ndarray
    Lambda: np.ndarray
    A0: np.ndarray
    k_scale: float
    rank: int
    direction: np.ndarray
    construction: str

    def matrix(self, k=None):
        k = self.k_scale if k is None else k
        return self.A0 + k * self.direction

    @property
    def spectral_radius(self):
        return spectral_radius(self.matrix())


def _orthogonal_split(X_minus):
    """Rows of ``E``: orthonormal basis of the column space of ``X_minus``, then its complement."""
    U, _, _ = np.linalg.svd(X_minus, full_matrices=True)
    return U.T


def build_witness(ell, data, k_scale=WITNESS_K, cond_max=1e6):
    """Witness family for rank-deficient data, or :data:`FULL_RANK`.

    Raises ``ValueError`` when no consistent base plant can be found.
    """
    n = data.n
    r = data_api.data_rank(data)
    if r == n:
        return FULL_RANK

    E = _orthogonal_split(data.X_minus)
    Lambda = np.diag([0.0] * r + [1.0] * (n - r))
    LE = Lambda @ E
    X_r = E[:r] @ data.X_minus
    E22 = E[r:, r:]
    if np.linalg.cond(E22) < cond_max:
        direction, construction = LE, "lambda-E"
    else:
        direction, construction = E.T @ LE, "projector"

    A0 = data_api.generalized_center(ell)
    if not data_api.membership(ell, A0):
        raise ValueError("no data-consistent plant found; the set looks empty")
    if np.linalg.matrix_rank(X_r) != r:
        raise RuntimeError("row compression of X_minus lost rank")
    return RankDeficiencyWitness(E, Lambda, A0, float(k_scale), r, direction, construction)


def informativity_report(data, ell, k_scale=WITNESS_K):
    """Rank, Slater and boundedness diagnostics, plus a witness when rank is short."""
    rank = data_api.data_rank(data)
    report = {
        "n": data.n,
        "T": data.T,
        "rank": rank,
        "rank_condition": rank == data.n,
        "positive_eigencount": data_api.positive_eigencount(ell),
        "slater": data_api.slater_check(ell),
        "sigma_bounded": data_api.center_and_radius(ell) is not None,
        "witness": None,
    }
    if rank < data.n:
        try:
            w = build_witness(ell, data, k_scale)
        except ValueError as exc:
            report["witness"] = {"error": str(exc)}
        else:
            report["witness"] = {
                "k": w.k_scale,
                "construction": w.construction,
                "spectral_radius": w.spectral_radius,
                "member": data_api.membership(ell, w.matrix()),
            }
    return report
