"""Fractional vertex packing LP with verified optimality certificates.

Primal:  max p^T q   s.t.  0 <= q <= 1,  B q <= 1
Dual:    min 1^T z + 1^T y   s.t.  z, y >= 0,  B^T z + y >= p

where B is the hyperedge incidence matrix. The q <= 1 box rows play the
role of the degree-1 (singleton) hyperedges, so the full fractional cover
of the vertices is ``B^T z + y``. One minus the primal optimum is the
optimal soft-classification loss for the hypergraph.

Every solve is certified: feasibility residuals and the duality gap are
recomputed from the returned vectors, and a solve that cannot be certified
raises instead of returning silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .hypergraph import IncidenceMatrix

__all__ = [
    "Tolerances",
    "PackingLp",
    "LpSolution",
    "CertificateReport",
    "LpNonConvergenceError",
    "UncertifiedSolveError",
    "solve_packing",
    "verify_certificates",
    "export_lp_text",
]


@dataclass(frozen=True)
class Tolerances:
    feasibility_abs: float = 1e-8
    gap_rel: float = 1e-6
    max_iterations: int = 200_000

    def __post_init__(self):
        if self.feasibility_abs <= 0 or self.gap_rel <= 0 or self.max_iterations <= 0:
            raise ValueError("all tolerances must be positive")


@dataclass
class PackingLp:
    """Vertex masses plus incidence structure; the whole LP instance."""

    masses: np.ndarray
    incidence: IncidenceMatrix

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.masses.ndim != 1:
            raise ValueError("masses must be a vector")
        if self.incidence.matrix.shape[1] != self.masses.shape[0]:
            raise ValueError(
                f"incidence has {self.incidence.matrix.shape[1]} columns, "
                f"masses has {self.masses.shape[0]} entries"
            )
        if np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative")


@dataclass
class LpSolution:
    """Certified primal-dual pair for one packing solve.

    ``edge_cover`` is indexed by incidence rows; ``singleton_cover`` holds the
    duals of the q <= 1 bounds, one per vertex. ``objective`` is p^T q, i.e.
    one minus the optimal loss.
    """

    q: np.ndarray
    edge_cover: np.ndarray
    singleton_cover: np.ndarray
    objective: float
    dual_objective: float
    duality_gap: float
    primal_residual: float
    dual_residual: float
    lp: PackingLp = field(repr=False)

    @property
    def loss(self) -> float:
        return 1.0 - self.objective

    def vertex_cover_totals(self) -> np.ndarray:
        """(B^T z + y)_v, the full fractional coverage of each vertex."""
        return self.lp.incidence.matrix.T @ self.edge_cover + self.singleton_cover


@dataclass
class CertificateReport:
    primal_residual: float
    dual_residual: float
    duality_gap: float
    gap_bound: float
    feasible: bool
    gap_ok: bool
    complementary_slackness_violations: list[int]

    @property
    def ok(self) -> bool:
        return self.feasible and self.gap_ok


class LpNonConvergenceError(RuntimeError):
    """Solver stopped before optimality; carries whatever bounds it reached."""

    def __init__(self, message: str, status: int, best_objective: float | None = None):
        super().__init__(message)
        self.status = status
        self.best_objective = best_objective


class UncertifiedSolveError(RuntimeError):
    """Solver claimed success but the returned vectors fail certification."""

    def __init__(self, message: str, solution: "LpSolution"):
        super().__init__(message)
        self.solution = solution


def _residuals(p: np.ndarray, B: sp.csr_matrix, q: np.ndarray,
               z: np.ndarray, y: np.ndarray, active: np.ndarray):
    """Feasibility residuals and gap, restricted to positive-mass vertices."""
    primal = max(
        float(np.max(-q[active], initial=0.0)),
        float(np.max(q[active] - 1.0, initial=0.0)),
    )
    if B.shape[0]:
        qa = np.where(active, q, 0.0)
        primal = max(primal, float(np.max(B @ qa - 1.0, initial=0.0)))
    cover = B.T @ z + y
    dual = max(
        float(np.max(-z, initial=0.0)),
        float(np.max(-y[active], initial=0.0)),
        float(np.max((p - cover)[active], initial=0.0)),
    )
    objective = float(p[active] @ q[active])
    dual_objective = float(z.sum() + y[active].sum())
    gap = abs(objective - dual_objective)
    return max(primal, 0.0), max(dual, 0.0), objective, dual_objective, gap


def solve_packing(lp: PackingLp, tol: Tolerances = Tolerances()) -> LpSolution:
    """Solve the packing LP and return a certified primal-dual pair.

    Deterministic for a fixed instance and tolerance configuration. Vertices
    with zero mass are excluded from the solve and reported with q = 1.
    Raises :class:`LpNonConvergenceError` if the solver hits its iteration
    limit and :class:`UncertifiedSolveError` if the certificates fail.
    """
    p = lp.masses
    B = lp.incidence.matrix
    n = p.shape[0]
    active = p > 0.0

    if B.shape[0] == 0:
        # no constraints beyond the box: q = 1 and the singleton cover pays p
        q = np.ones(n)
        z = np.zeros(0)
        y = p.copy()
        objective = float(p.sum())
        sol = LpSolution(q, z, y, objective, objective, 0.0, 0.0, 0.0, lp)
        _certify(lp, sol, tol)
        return sol

    if active.all():
        B_act = B
        p_act = p
    else:
        B_act = B[:, active]
        p_act = p[active]

    res = linprog(
        c=-p_act,
        A_ub=B_act,
        b_ub=np.ones(B_act.shape[0]),
        bounds=(0.0, 1.0),
        method="highs",
        options={"maxiter": tol.max_iterations},
    )
    if res.status == 1:
        raise LpNonConvergenceError(
            f"iteration limit reached: {res.message}",
            status=res.status,
            best_objective=(-res.fun if res.fun is not None else None),
        )
    if res.status != 0:
        raise LpNonConvergenceError(
            f"solver failed (status {res.status}): {res.message}", status=res.status
        )

    q = np.ones(n)
    q[active] = res.x
    z = -np.asarray(res.ineqlin.marginals, dtype=float)
    y = np.zeros(n)
    y[active] = -np.asarray(res.upper.marginals, dtype=float)
    np.maximum(z, 0.0, out=z)
    np.maximum(y, 0.0, out=y)

    primal, dual, objective, dual_objective, gap = _residuals(p, B, q, z, y, active)
    sol = LpSolution(q, z, y, objective, dual_objective, gap, primal, dual, lp)
    _certify(lp, sol, tol)
    return sol


def _certify(lp: PackingLp, sol: LpSolution, tol: Tolerances) -> None:
    gap_bound = tol.gap_rel * max(1.0, abs(sol.objective))
    if sol.primal_residual > tol.feasibility_abs or sol.dual_residual > tol.feasibility_abs:
        raise UncertifiedSolveError(
            f"feasibility residuals too large: primal={sol.primal_residual:.3e}, "
            f"dual={sol.dual_residual:.3e} (tol {tol.feasibility_abs:.1e})",
            sol,
        )
    if sol.duality_gap > gap_bound:
        raise UncertifiedSolveError(
            f"duality gap {sol.duality_gap:.3e} exceeds bound {gap_bound:.3e}", sol
        )


def verify_certificates(lp: PackingLp, sol: LpSolution,
                        tol: Tolerances = Tolerances()) -> CertificateReport:
    """Recompute all residuals from scratch, independently of the solver.

    Also reports complementary-slackness violations: vertices with q above
    tolerance that are strictly over-covered (an optimal classifier gives up
    on over-covered vertices, so both cannot hold at an exact optimum).
    """
    p = lp.masses
    B = lp.incidence.matrix
    active = p > 0.0
    primal, dual, objective, dual_objective, gap = _residuals(
        p, B, sol.q, sol.edge_cover, sol.singleton_cover, active
    )
    gap_bound = tol.gap_rel * max(1.0, abs(objective))
    cover = B.T @ sol.edge_cover + sol.singleton_cover
    violations = [
        int(v)
        for v in np.nonzero(
            active & (sol.q > tol.feasibility_abs) & (cover > p + tol.feasibility_abs)
        )[0]
    ]
    return CertificateReport(
        primal_residual=primal,
        dual_residual=dual,
        duality_gap=gap,
        gap_bound=gap_bound,
        feasible=(primal <= tol.feasibility_abs and dual <= tol.feasibility_abs),
        gap_ok=(gap <= gap_bound),
        complementary_slackness_violations=violations,
    )


def export_lp_text(lp: PackingLp, name: str = "vertex_packing") -> str:
    """Render the instance in LP interchange format for external solvers."""
    p = lp.masses
    B = lp.incidence.matrix.tocsr()
    lines = [f"\\ {name}", "Maximize", " obj: " + _linear_expr(p, "q")]
    lines.append("Subject To")
    for r in range(B.shape[0]):
        cols = B.indices[B.indptr[r]:B.indptr[r + 1]]
        expr = " + ".join(f"q{c}" for c in cols)
        lines.append(f" e{r}: {expr} <= 1")
    lines.append("Bounds")
    for v in range(p.shape[0]):
        lines.append(f" 0 <= q{v} <= 1")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _linear_expr(coeffs: np.ndarray, prefix: str) -> str:
    terms = [f"{coeffs[i]!r} {prefix}{i}" for i in range(coeffs.shape[0])]
    return " + ".join(terms) if terms else "0"
