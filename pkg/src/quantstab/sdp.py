"""Small LMI modeling layer on top of a conic interior-point solver.

Problems are written with :class:`Affine` expressions, i.e. matrix-valued
functions that are affine in the decision variables::

    prob = LmiProblem()
    P = prob.symmetric("P", 2)
    prob.add_psd(P, strict=True)
    prob.add_psd(P - A.T @ P @ A, strict=True)
    res = prob.solve()

Every PSD constraint is mapped to the scaled triangular vectorization used
by Clarabel's PSD cone (off-diagonals weighted by sqrt(2), so the trace
inner product is preserved).  Results are re-checked with a dense
eigensolver before a status is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import clarabel
import numpy as np
import scipy.sparse as sp

SQRT2 = math.sqrt(2.0)

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

ACCEPTABLE = ("Solved", "AlmostSolved", "InsufficientProgress", "MaxIterations")


# ---------------------------------------------------------------------------
# symmetric vectorization


def _svec_indices(m):
    # column-major upper triangle: (0,0), (0,1), (1,1), (0,2), ...
    rows, cols = np.tril_indices(m)
    return cols, rows


def svec(S):
    """Scaled upper-triangular vectorization of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    i, j = _svec_indices(S.shape[0])
    v = S[i, j].copy()
    v[i != j] *= SQRT2
    return v


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    m = int(round((math.sqrt(8 * v.size + 1) - 1) / 2))
    if m * (m + 1) // 2 != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    i, j = _svec_indices(m)
    w = v.copy()
    w[i != j] /= SQRT2
    S = np.zeros((m, m))
    S[i, j] = w
    S[j, i] = w
    return S


# ---------------------------------------------------------------------------
# affine expressions


class Affine:
    """Matrix expression ``const + sum_k x_k * coef_k``.

    ``terms`` maps a variable name to an array of shape ``(k, rows, cols)``,
    one slice per scalar parameter of that variable.
    """

    __array_ufunc__ = None

    def __init__(self, const, terms=None):
        const = np.atleast_2d(np.asarray(const, dtype=float))
        self.const = const
        self.terms: Dict[str, np.ndarray] = {}
        for name, c in (terms or {}).items():
            c = np.asarray(c, dtype=float)
            if c.shape[1:] != const.shape:
                raise ValueError(f"term {name!r} has shape {c.shape[1:]}, expected {const.shape}")
            self.terms[name] = c

    @property
    def shape(self):
        return self.const.shape

    @property
    def T(self):
        return Affine(self.const.T, {k: c.transpose(0, 2, 1) for k, c in self.terms.items()})

    def __neg__(self):
        return Affine(-self.const, {k: -c for k, c in self.terms.items()})

    def __add__(self, other):
        other = as_affine(other, self.shape)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms[k] + c if k in terms else c
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-as_affine(other, self.shape))

    def __rsub__(self, other):
        return as_affine(other, self.shape) - self

    def __mul__(self, s):
        if isinstance(s, Affine) or np.ndim(s) != 0:
            raise TypeError("only scalar multiplication is affine; use @ for products")
        s = float(s)
        return Affine(s * self.const, {k: s * c for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, M):
        if isinstance(M, Affine):
            raise TypeError("product of two affine expressions is not affine")
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return Affine(self.const @ M, {k: c @ M for k, c in self.terms.items()})

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return Affine(M @ self.const, {k: M @ c for k, c in self.terms.items()})

    def value(self, values):
        out = self.const.copy()
        for k, c in self.terms.items():
            out += np.tensordot(_params(values[k], c.shape[0]), c, axes=1)
        return out

    def __repr__(self):
        return f"Affine(shape={self.shape}, vars={sorted(self.terms)})"


def _params(v, k):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim == 2 and v.shape[0] == v.shape[1] and v.size != k:
        # symmetric variables are parameterized by their row-major upper triangle
        return v[np.triu_indices(v.shape[0])]
    return v.ravel()


def as_affine(x, shape=None):
    if isinstance(x, Affine):
        return x
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and shape is not None:
        if float(x) != 0.0:
            raise ValueError("nonzero scalar cannot be broadcast to a matrix expression")
        x = np.zeros(shape)
    return Affine(x)


def bmat(blocks):
    """Assemble a block matrix from Affine expressions, arrays and zeros.

    A literal ``0`` (or ``None``) entry is expanded to a zero block whose size
    is inferred from the rest of its block row and column.
    """
    nr, nc = len(blocks), len(blocks[0])
    heights = [None] * nr
    widths = [None] * nc
    for r, row in enumerate(blocks):
        if len(row) != nc:
            raise ValueError("ragged block matrix")
        for c, b in enumerate(row):
            if b is None or (not isinstance(b, Affine) and np.ndim(b) == 0):
                continue
            h, w = np.atleast_2d(b.const if isinstance(b, Affine) else np.asarray(b)).shape
            if heights[r] not in (None, h) or widths[c] not in (None, w):
                raise ValueError(f"inconsistent block size at ({r}, {c})")
            heights[r], widths[c] = h, w
    if None in heights or None in widths:
        raise ValueError("cannot infer the size of an all-zero block row or column")
    grid = [[as_affine(0 if b is None else b, (heights[r], widths[c])) for c, b in enumerate(row)]
            for r, row in enumerate(blocks)]
    const = np.block([[g.const for g in row] for row in grid])
    names = {k for row in grid for g in row for k in g.terms}
    terms = {}
    for k in names:
        nk = next(g.terms[k].shape[0] for row in grid for g in row if k in g.terms)
        terms[k] = np.concatenate(
            [np.concatenate([g.terms.get(k, np.zeros((nk,) + g.shape)) for g in row], axis=2)
             for row in grid],
            axis=1,
        )
    return Affine(const, terms)


def scaled(s, M):
    """``s * M`` for a scalar (1x1) expression ``s`` and a constant matrix ``M``."""
    s = as_affine(s)
    if s.shape != (1, 1):
        raise ValueError("scaled() needs a 1x1 expression")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return Affine(s.const[0, 0] * M, {k: c[:, 0, 0][:, None, None] * M for k, c in s.terms.items()})


# ---------------------------------------------------------------------------
# problem description


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "symmetric", "matrix" or "scalar"
    shape: tuple
    lower: Optional[float] = None
    upper: Optional[float] = None
    strict_lower: bool = False

    @property
    def size(self):
        if self.kind == "symmetric":
            return self.shape[0] * (self.shape[0] + 1) // 2
        return int(np.prod(self.shape))

    def unflatten(self, x):
        if self.kind == "symmetric":
            n = self.shape[0]
            S = np.zeros((n, n))
            S[np.triu_indices(n)] = x
            return S + np.triu(S, 1).T
        if self.kind == "scalar":
            return float(x[0])
        return np.asarray(x).reshape(self.shape)


@dataclass(frozen=True)
class PsdConstraint:
    expr: Affine
    strict: bool = False
    name: str = ""


@dataclass
class SolverOptions:
    eps_margin: float = 1e-6
    tol_feas: float = 1e-8
    gap_optimal: float = 1e-7
    max_iter: int = 200
    tol_gap: float = 1e-9
    tol_solver_feas: float = 1e-9
    verbose: bool = False


@dataclass
class SolveResult:
    status: str
    values: dict = field(default_factory=dict)
    objective_value: Optional[float] = None
    solver_stats: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status in (OPTIMAL, FEASIBLE)


def strict_margin(eps) -> Callable:
    """Return a transformer turning strict constraints into margin constraints.

    ``M > 0`` becomes ``M >= eps*I`` and a strict scalar bound ``s > lo``
    becomes ``s >= lo + eps``.  Non-strict items are returned unchanged.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")

    def transform(item):
        if isinstance(item, PsdConstraint):
            if not item.strict:
                return item
            m = item.expr.shape[0]
            return PsdConstraint(item.expr - eps * np.eye(m), strict=False, name=item.name)
        if isinstance(item, Variable):
            if not item.strict_lower:
                return item
            return replace(item, lower=item.lower + eps, strict_lower=False)
        raise TypeError(f"cannot apply a margin to {type(item).__name__}")

    return transform


class LmiProblem:
    """Affine PSD constraints over symmetric, dense matrix and scalar variables."""

    def __init__(self):
        self.variables: Dict[str, Variable] = {}
        self.constraints: List[PsdConstraint] = []
        self.objective: Optional[Affine] = None
        self.sense = "feasibility"

    def _register(self, var):
        if var.name in self.variables:
            raise ValueError(f"duplicate variable name {var.name!r}")
        self.variables[var.name] = var
        k = var.size
        rows, cols = (var.shape if var.kind != "scalar" else (1, 1))
        coef = np.zeros((k, rows, cols))
        if var.kind == "symmetric":
            for t, (i, j) in enumerate(zip(*np.triu_indices(rows))):
                coef[t, i, j] = coef[t, j, i] = 1.0
        else:
            coef.reshape(k, -1)[np.arange(k), np.arange(k)] = 1.0
        return Affine(np.zeros((rows, cols)), {var.name: coef})

    def symmetric(self, name, dim):
        return self._register(Variable(name, "symmetric", (dim, dim)))

    def matrix(self, name, rows, cols):
        return self._register(Variable(name, "matrix", (rows, cols)))

    def scalar(self, name, lower=None, upper=None, strict=False):
        if strict and lower is None:
            raise ValueError("a strict bound needs a lower value")
        return self._register(Variable(name, "scalar", (), lower, upper, strict))

    def add_psd(self, expr, strict=False, name=""):
        expr = as_affine(expr)
        if expr.shape[0] != expr.shape[1]:
            raise ValueError(f"PSD constraint must be square, got {expr.shape}")
        if not np.allclose(expr.const, expr.const.T, atol=1e-12) or any(
            not np.allclose(c, c.transpose(0, 2, 1), atol=1e-12) for c in expr.terms.values()
        ):
            raise ValueError(f"constraint {name!r} is not symmetric")
        unknown = set(expr.terms) - set(self.variables)
        if unknown:
            raise ValueError(f"unknown variables {sorted(unknown)}")
        self.constraints.append(PsdConstraint(expr, strict, name))

    def maximize(self, expr):
        self.objective, self.sense = as_affine(expr), "maximize"

    def minimize(self, expr):
        self.objective, self.sense = as_affine(expr), "minimize"

    # -- conic translation --------------------------------------------------

    def _offsets(self):
        off, pos = {}, 0
        for name, var in self.variables.items():
            off[name] = pos
            pos += var.size
        return off, pos

    def _coef_matrix(self, expr, offsets, nvar, vec):
        """Columns: vec of the coefficient slice for each scalar parameter."""
        rows = len(vec(np.zeros(expr.shape)))
        G = np.zeros((rows, nvar))
        for name, c in expr.terms.items():
            o = offsets[name]
            for t in range(c.shape[0]):
                G[:, o + t] = vec(c[t])
        return G

    def solve(self, options: Optional[SolverOptions] = None) -> SolveResult:
        opts = options or SolverOptions()
        margin = strict_margin(opts.eps_margin)
        variables = [margin(v) for v in self.variables.values()]
        constraints = [margin(c) for c in self.constraints]
        offsets, nvar = self._offsets()

        A_blocks, b_blocks, cones = [], [], []
        nonneg = []
        for var in variables:
            if var.kind != "scalar":
                continue
            col = np.zeros(nvar)
            col[offsets[var.name]] = 1.0
            if var.lower is not None:
                nonneg.append((-col, -var.lower))
            if var.upper is not None:
                nonneg.append((col, var.upper))
        if nonneg:
            A_blocks.append(np.array([r for r, _ in nonneg]))
            b_blocks.append(np.array([b for _, b in nonneg]))
            cones.append(clarabel.NonnegativeConeT(len(nonneg)))
        for con in constraints:
            m = con.expr.shape[0]
            A_blocks.append(-self._coef_matrix(con.expr, offsets, nvar, svec))
            b_blocks.append(svec(con.expr.const))
            cones.append(clarabel.PSDTriangleConeT(m))

        q = np.zeros(nvar)
        obj_const = 0.0
        if self.objective is not None:
            if self.objective.shape != (1, 1):
                raise ValueError("objective must be scalar")
            sign = -1.0 if self.sense == "maximize" else 1.0
            q = sign * self._coef_matrix(self.objective, offsets, nvar, np.ravel)[0]
            obj_const = float(self.objective.const[0, 0])

        A = sp.csc_matrix(np.vstack(A_blocks)) if A_blocks else sp.csc_matrix((0, nvar))
        b = np.concatenate(b_blocks) if b_blocks else np.zeros(0)
        P = sp.csc_matrix((nvar, nvar))

        settings = clarabel.DefaultSettings()
        settings.verbose = opts.verbose
        settings.max_iter = opts.max_iter
        settings.tol_gap_abs = settings.tol_gap_rel = opts.tol_gap
        settings.tol_feas = opts.tol_solver_feas
        try:
            sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
        except BaseException as exc:  # Rust panics surface as BaseException subclasses
            if isinstance(exc, (KeyboardInterrupt, SystemExit)):
                raise
            return SolveResult(NUMERICAL_FAILURE, solver_stats={"solver_status": f"panic: {exc}"})
        raw = str(sol.status)

        stats = {
            "solver_status": raw,
            "iterations": int(sol.iterations),
            "solve_time": float(sol.solve_time),
            "r_prim": float(sol.r_prim),
            "r_dual": float(sol.r_dual),
        }
        if "PrimalInfeasible" in raw:
            return SolveResult(INFEASIBLE, solver_stats=stats)
        if "DualInfeasible" in raw:
            return SolveResult(UNBOUNDED, solver_stats=stats)

        x = np.asarray(sol.x)
        if not np.all(np.isfinite(x)):
            return SolveResult(NUMERICAL_FAILURE, solver_stats=stats)
        values = {}
        for name, var in self.variables.items():
            o = offsets[name]
            values[name] = var.unflatten(x[o:o + var.size])

        ok, worst = _revalidate(variables, constraints, values, opts.tol_feas)
        stats["min_eig_margin"] = worst
        if raw not in ACCEPTABLE or not ok:
            return SolveResult(NUMERICAL_FAILURE, values, solver_stats=stats)
        if raw != "Solved":
            # a stalled run whose iterate still passes the re-check is a feasible point
            return SolveResult(FEASIBLE, values,
                               None if self.objective is None else float(self.objective.value(values)[0, 0]),
                               stats)

        if self.objective is None:
            return SolveResult(FEASIBLE, values, solver_stats=stats)
        primal, dual = float(sol.obj_val), float(sol.obj_val_dual)
        gap = abs(primal - dual) / max(1.0, min(abs(primal), abs(dual)))
        stats["rel_gap"] = gap
        objective = float(self.objective.value(values)[0, 0])
        status = OPTIMAL if gap < opts.gap_optimal else FEASIBLE
        return SolveResult(status, values, objective, stats)

    def to_json(self):
        """Debug dump of the problem (after no margin transform)."""
        return {
            "variables": [
                {"name": v.name, "kind": v.kind, "shape": list(v.shape), "lower": v.lower,
                 "upper": v.upper, "strict": v.strict_lower}
                for v in self.variables.values()
            ],
            "constraints": [
                {"name": c.name, "strict": c.strict, "constant": c.expr.const.tolist(),
                 "coefficients": {k: v.tolist() for k, v in c.expr.terms.items()}}
                for c in self.constraints
            ],
            "objective": None if self.objective is None else {
                "sense": self.sense,
                "constant": float(self.objective.const[0, 0]),
                "coefficients": {k: v.ravel().tolist() for k, v in self.objective.terms.items()},
            },
        }


def _revalidate(variables, constraints, values, tol):
    """Independent dense re-check of every (margin-shifted) constraint."""
    worst = math.inf
    ok = True
    for var in variables:
        if var.kind != "scalar":
            continue
        s = values[var.name]
        if var.lower is not None:
            slack = s - var.lower
            worst = min(worst, slack)
            ok &= slack >= -tol * (1 + abs(var.lower))
        if var.upper is not None:
            slack = var.upper - s
            worst = min(worst, slack)
            ok &= slack >= -tol * (1 + abs(var.upper))
    for con in constraints:
        M = con.expr.value(values)
        lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        worst = min(worst, lam)
        ok &= lam >= -tol * (1 + np.linalg.norm(con.expr.const, 2))
    return bool(ok), float(worst)
