"""SOLVE step: Krylov solvers, Newton's method and inverse iteration.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted, unique
column indices per row).  The iterative methods themselves are written out
here so that their stopping rules and statistics are under our control.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .fem import (CoefficientField, FeFunction, FeSpace, apply_dirichlet,
                  assemble_load, assemble_mass, assemble_operator,
                  quadrature_points, transfer)
from .problems import ProblemSpec, Variant, linearized_coefficients

__all__ = [
    "SolverError", "NewtonError", "EigenError", "SolverConfig", "NewtonConfig",
    "EigenConfig", "SolveStats", "NewtonStats", "EigenStats", "krylov_solve",
    "conjugate_gradient", "bicgstab", "solve_linear_problem",
    "solve_nonlinear_problem", "solve_eigen_problem", "solve",
]


class SolverError(RuntimeError):
    """An iterative solve failed; ``residual`` is the best relative residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NewtonError(SolverError):
    pass


class EigenError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    method: Optional[str] = None          # "cg", "bicgstab" or None (by symmetry)
    tol: float = 1e-10
    max_iterations: Optional[int] = None  # default 10 * size
    jacobi: bool = True

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("solver tolerance must lie in (0, 1)")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.method not in (None, "cg", "bicgstab"):
            raise ValueError(f"unknown Krylov method {self.method!r}")


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iterations: int = 30
    damping: float = 1.0
    min_damping: float = 1.0 / 64

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol <= 0 or self.max_iterations < 1:
            raise ValueError("Newton needs a positive tolerance and iteration limit")


@dataclass(frozen=True)
class EigenConfig:
    tol: float = 1e-10
    max_iterations: int = 1000
    shift: Optional[float] = None         # default: the problem's shift

    def __post_init__(self):
        if self.tol <= 0 or self.max_iterations < 1:
            raise ValueError("inverse iteration needs a positive tolerance and iteration limit")


@dataclass
class SolveStats:
    method: str
    iterations: int
    residual: float
    converged: bool
    history: List[float] = field(default_factory=list)


@dataclass
class NewtonStats:
    iterations: int
    residuals: List[float]
    linear_iterations: int


@dataclass
class EigenStats:
    iterations: int
    updates: List[float]
    linear_iterations: int


# -- Krylov methods -----------------------------------------------------------

def _jacobi(A, enabled):
    if not enabled:
        return None
    d = A.diagonal().astype(float)
    d[d == 0] = 1.0
    return 1.0 / d


def conjugate_gradient(A, rhs, x0=None, tol=1e-10, max_iterations=None, jacobi=True):
    """Preconditioned conjugate gradients for symmetric positive definite ``A``."""
    n = A.shape[0]
    maxit = max_iterations or 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats("cg", 0, 0.0, True, [0.0])
    minv = _jacobi(A, jacobi)
    target = tol * bnorm
    history = []
    it = 0
    # restarts guard against drift between recursive and true residual
    for _ in range(5):
        r = rhs - A @ x
        res = np.linalg.norm(r)
        history.append(res / bnorm)
        if res <= target:
            return x, SolveStats("cg", it, res / bnorm, True, history)
        z = r * minv if minv is not None else r
        p = z.copy()
        rz = r @ z
        while it < maxit:
            it += 1
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise SolverError("matrix is not positive definite", res / bnorm, it)
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            res = np.linalg.norm(r)
            history.append(res / bnorm)
            if res <= target:
                break
            z = r * minv if minv is not None else r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        if it >= maxit:
            break
    res = np.linalg.norm(rhs - A @ x)
    if res <= target:
        return x, SolveStats("cg", it, res / bnorm, True, history)
    raise SolverError(f"CG did not converge in {it} iterations "
                      f"(relative residual {res / bnorm:.3e})", res / bnorm, it)


def bicgstab(A, rhs, x0=None, tol=1e-10, max_iterations=None, jacobi=True):
    """Jacobi-preconditioned BiCGStab for general square ``A``."""
    n = A.shape[0]
    maxit = max_iterations or 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats("bicgstab", 0, 0.0, True, [0.0])
    minv = _jacobi(A, jacobi)

    def prec(v):
        return v * minv if minv is not None else v

    target = tol * bnorm
    history = []
    it = 0
    for _ in range(20):
        r = rhs - A @ x
        res = np.linalg.norm(r)
        history.append(res / bnorm)
        if res <= target:
            return x, SolveStats("bicgstab", it, res / bnorm, True, history)
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        while it < maxit:
            it += 1
            rho_new = r_hat @ r
            if rho_new == 0.0 or omega == 0.0:
                break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            phat = prec(p)
            v = A @ phat
            denom = r_hat @ v
            if denom == 0.0:
                break
            alpha = rho_new / denom
            s = r - alpha * v
            if np.linalg.norm(s) <= target:
                x += alpha * phat
                history.append(np.linalg.norm(s) / bnorm)
                break
            shat = prec(s)
            t = A @ shat
            tt = t @ t
            omega = (t @ s) / tt if tt > 0 else 0.0
            x += alpha * phat + omega * shat
            r = s - omega * t
            rho = rho_new
            res = np.linalg.norm(r)
            history.append(res / bnorm)
            if res <= target:
                break
        if it >= maxit:
            break
        # restart from the current iterate after breakdown or residual drift
    res = np.linalg.norm(rhs - A @ x)
    if res <= target:
        return x, SolveStats("bicgstab", it, res / bnorm, True, history)
    raise SolverError(f"BiCGStab did not converge in {it} iterations "
                      f"(relative residual {res / bnorm:.3e})", res / bnorm, it)


def krylov_solve(A, rhs, x0=None, cfg: SolverConfig | None = None, symmetric=True):
    """Solve ``A x = rhs`` to relative residual ``cfg.tol``.

    Returns ``(x, stats)``; raises :class:`SolverError` on failure.
    """
    cfg = cfg or SolverConfig()
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    method = cfg.method or ("cg" if symmetric else "bicgstab")
    fn = conjugate_gradient if method == "cg" else bicgstab
    return fn(A, np.asarray(rhs, dtype=float), x0, cfg.tol, cfg.max_iterations, cfg.jacobi)


# -- SOLVE --------------------------------------------------------------------

def _boundary_values(p: ProblemSpec, space: FeSpace):
    if p.dirichlet is None:
        return np.zeros(space.num_dofs)
    return space.interpolate(p.dirichlet).coefficients.copy()


def _source_load(p: ProblemSpec, space: FeSpace):
    x, y, _ = quadrature_points(space)
    return assemble_load(space, p.coefficients.scalar("f", x, y, space.mesh.roots[:, None]))


def _initial_guess(space, prev, boundary):
    if prev is None:
        x0 = np.zeros(space.num_dofs)
    else:
        x0 = transfer(prev, space).coefficients.copy()
    bd = space.boundary_dofs
    x0[bd] = boundary[bd]
    return x0


def solve_linear_problem(p: ProblemSpec, space: FeSpace, prev: FeFunction | None = None,
                         cfg: SolverConfig | None = None, return_stats=False):
    """Galerkin solution of a boundary value or nonsymmetric problem."""
    if p.variant not in (Variant.BOUNDARY_VALUE, Variant.NONSYMMETRIC):
        raise ValueError(f"{p.variant.value} problems are not linear source problems")
    K = assemble_operator(space, p.coefficients)
    F = _source_load(p, space)
    g = _boundary_values(p, space)
    Ke, Fe = apply_dirichlet(K, F, space, g)
    x, stats = krylov_solve(Ke, Fe, _initial_guess(space, prev, g), cfg, symmetric=p.symmetric)
    u = FeFunction(space, x)
    return (u, stats) if return_stats else u


def nonlinear_residual(p: ProblemSpec, u: FeFunction, K=None):
    """Discrete residual ``(grad u, grad v) + (f(u), v)`` on interior DOFs."""
    space = u.space
    if K is None:
        K = assemble_operator(space, CoefficientField(A=p.coefficients.A))
    x, y, _ = quadrature_points(space)
    F = K @ u.coefficients + assemble_load(space, p.nonlinearity(x, y, u.values()))
    F[space.boundary_dofs] = 0.0
    return F


def solve_nonlinear_problem(p: ProblemSpec, space: FeSpace, prev: FeFunction | None = None,
                            cfg: NewtonConfig | None = None,
                            linear: SolverConfig | None = None):
    """Newton's method with backtracking; returns ``(u_h, NewtonStats)``."""
    if p.variant is not Variant.NONLINEAR:
        raise ValueError("Newton's method applies to the nonlinear variant only")
    cfg = cfg or NewtonConfig()
    g = _boundary_values(p, space)
    u = FeFunction(space, _initial_guess(space, prev, g))
    K = assemble_operator(space, CoefficientField(A=p.coefficients.A))
    F = nonlinear_residual(p, u, K)
    res = float(np.linalg.norm(F))
    residuals = [res]
    lin_its = 0
    for _ in range(cfg.max_iterations):
        if res <= cfg.tol:
            return u, NewtonStats(len(residuals) - 1, residuals, lin_its)
        jac = linearized_coefficients(p, u)
        J = K + assemble_operator(space, CoefficientField(A=None, c=jac.c))
        Je, rhs = apply_dirichlet(J, -F, space, None)
        delta, st = krylov_solve(Je, rhs, None, linear, symmetric=True)
        lin_its += st.iterations
        step = cfg.damping
        while True:
            trial = FeFunction(space, u.coefficients + step * delta)
            F_trial = nonlinear_residual(p, trial, K)
            res_trial = float(np.linalg.norm(F_trial))
            if res_trial < res or step / 2 < cfg.min_damping:
                break
            step /= 2
        if not res_trial < res:
            raise NewtonError(f"Newton residual stalled at {res:.3e}", res, len(residuals) - 1)
        u, F, res = trial, F_trial, res_trial
        residuals.append(res)
    if res <= cfg.tol:
        return u, NewtonStats(len(residuals) - 1, residuals, lin_its)
    raise NewtonError(f"Newton did not converge in {cfg.max_iterations} steps "
                      f"(residual {res:.3e})", res, cfg.max_iterations)


def solve_eigen_problem(p: ProblemSpec, space: FeSpace, prev: FeFunction | None = None,
                        cfg: EigenConfig | None = None, linear: SolverConfig | None = None,
                        return_stats=False):
    """Smallest eigenpair by shifted inverse iteration.

    The eigenvector is normalised in L2 and signed so that its integral is
    positive.  Returns ``(lambda_h, u_h)`` (plus stats on request).
    """
    if p.variant is not Variant.EIGENVALUE:
        raise ValueError("inverse iteration applies to the eigenvalue variant only")
    cfg = cfg or EigenConfig()
    shift = p.eigen_shift if cfg.shift is None else cfg.shift
    interior = np.flatnonzero(~space.boundary_dofs)
    if len(interior) == 0:
        raise EigenError("space has no interior degrees of freedom")
    K = assemble_operator(space, p.coefficients)[interior][:, interior].tocsr()
    M = assemble_mass(space)[interior][:, interior].tocsr()
    S = (K - shift * M).tocsr()

    if prev is None:
        u = np.ones(len(interior))
    else:
        u = transfer(prev, space).coefficients[interior]
        if not np.any(u):
            u = np.ones(len(interior))
    u = u / np.sqrt(u @ (M @ u))
    lam = float(u @ (K @ u))
    updates = []
    lin_its = 0
    for it in range(1, cfg.max_iterations + 1):
        x0 = u / (lam - shift) if lam != shift else None
        y, st = krylov_solve(S, M @ u, x0, linear, symmetric=True)
        lin_its += st.iterations
        u = y / np.sqrt(y @ (M @ y))
        lam_new = float(u @ (K @ u))
        upd = abs(lam_new - lam)
        updates.append(upd)
        lam = lam_new
        if upd <= cfg.tol * max(1.0, abs(lam)):
            break
    else:
        raise EigenError(f"inverse iteration did not converge in {cfg.max_iterations} "
                         f"steps (last update {updates[-1]:.3e})", updates[-1], cfg.max_iterations)
    full = np.zeros(space.num_dofs)
    full[interior] = u
    if assemble_load(space, 1.0) @ full < 0:
        full = -full
    uh = FeFunction(space, full)
    stats = EigenStats(it, updates, lin_its)
    return (lam, uh, stats) if return_stats else (lam, uh)


def solve(p: ProblemSpec, space: FeSpace, prev=None, solver=None, newton=None, eigen=None):
    """Dispatch on the problem variant.

    Returns ``(u_h, lambda_h or None, krylov_iterations, extra)`` where
    ``extra`` holds the Newton or eigen statistics.
    """
    if p.variant in (Variant.BOUNDARY_VALUE, Variant.NONSYMMETRIC):
        u, st = solve_linear_problem(p, space, prev, solver, return_stats=True)
        return u, None, st.iterations, st
    if p.variant is Variant.NONLINEAR:
        u, st = solve_nonlinear_problem(p, space, prev, newton, solver)
        return u, None, st.linear_iterations, st
    lam, u, st = solve_eigen_problem(p, space, prev, eigen, solver, return_stats=True)
    return u, lam, st.linear_iterations, st
