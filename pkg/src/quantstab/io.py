"""JSON documents for plants, data sets, noise bounds and certificates.

Floats are written with ``repr``, the shortest decimal string that reads
back to the identical double.  Keys are sorted and no timing information is
emitted, so the same inputs always produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .certificates import StabilizationCertificate
from .data import NoiseBound, TrajectoryData
from .lti import LinearSystem

# solver statistics that do not depend on wall-clock time
STABLE_STATS = ("solver_status", "iterations", "r_prim", "r_dual", "min_eig_margin", "rel_gap",
                "probe", "method", "sdp_status", "solves", "reason")


def to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def stable_stats(stats):
    return {k: stats[k] for k in STABLE_STATS if k in stats}


def system_to_dict(sys: LinearSystem):
    return {"A": sys.A, "B": sys.B[:, 0]}


def system_from_dict(doc):
    return LinearSystem(np.array(doc["A"], dtype=float), np.array(doc["B"], dtype=float))


def data_to_dict(data: TrajectoryData):
    doc = {"X_minus": data.X_minus, "U": data.U, "X_plus": data.X_plus}
    if data.W is not None:
        doc["W"] = data.W
    return doc


def data_from_dict(doc):
    U = np.array(doc["U"], dtype=float)
    return TrajectoryData(
        X_minus=np.array(doc["X_minus"], dtype=float),
        U=U[None, :] if U.ndim == 1 else U,
        X_plus=np.array(doc["X_plus"], dtype=float),
        W=None if doc.get("W") is None else np.array(doc["W"], dtype=float),
    )


def bound_to_dict(bound: NoiseBound):
    return {"Phi11": bound.Phi11, "Phi12": bound.Phi12, "Phi22": bound.Phi22}


def bound_from_dict(doc, n=None):
    """Full blocks, or the ball shorthand ``{"ball_squared_radius": w, "T": T}``."""
    if "ball_squared_radius" in doc:
        if n is None:
            raise ValueError("ball shorthand needs the state dimension")
        return NoiseBound.ball(float(doc["ball_squared_radius"]), int(doc["T"]), n,
                               float(doc.get("zeta", 1.0)))
    return NoiseBound(*(np.array(doc[k], dtype=float) for k in ("Phi11", "Phi12", "Phi22")))


def load_problem(doc):
    """``(data, B, bound, A_true)`` from a data document.

    ``A_true`` is ``None`` unless the generating plant was stored.  Without a
    ``noise_bound`` entry the data are taken as exact.
    """
    data = data_from_dict(doc)
    B = np.array(doc["B"], dtype=float).reshape(data.n, -1)
    if "noise_bound" in doc:
        bound = bound_from_dict(doc["noise_bound"], data.n)
    else:
        bound = NoiseBound(np.zeros((data.n, data.n)), np.zeros((data.n, data.T)), -np.eye(data.T))
    A = None if doc.get("A") is None else np.array(doc["A"], dtype=float)
    return data, B, bound, A


def certificate_to_dict(cert: StabilizationCertificate, verification=None):
    return {
        "K": cert.K[0],
        "Y": cert.Y,
        "X": cert.X[0],
        "delta": cert.delta,
        "rho": cert.rho,
        "alpha": cert.alpha,
        "beta": cert.beta,
        "status": cert.status,
        "solver_stats": stable_stats(cert.solver_stats),
        "verification": verification,
    }


def certificate_from_dict(doc):
    return StabilizationCertificate(
        Y=np.array(doc["Y"], dtype=float),
        X=np.array(doc["X"], dtype=float).reshape(1, -1),
        alpha=float(doc["alpha"]),
        beta=float(doc["beta"]),
        delta=float(doc["delta"]),
        status=doc.get("status", "feasible"),
    )
