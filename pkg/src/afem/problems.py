"""Catalog of benchmark problems.

Every problem carries the coefficient field of its (linear or linearised)
operator, the data that enters the element residual, an initial mesh and,
when known, the exact solution.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fem import CoefficientField, FeFunction, quadrature_points
from .fem.quadrature import TRIANGLE_RULE
from .mesh import Triangulation, lshape_mesh, square_mesh

__all__ = [
    "Variant", "ExactSolution", "ProblemSpec", "catalog", "problem_ids",
    "describe_problems", "residual_source", "linearized_coefficients",
]


class Variant(str, enum.Enum):
    BOUNDARY_VALUE = "BoundaryValue"
    NONSYMMETRIC = "Nonsymmetric"
    NONLINEAR = "Nonlinear"
    EIGENVALUE = "Eigenvalue"


@dataclass(frozen=True)
class ExactSolution:
    u: Optional[Callable] = None
    grad: Optional[Callable] = None
    eigenvalue: Optional[float] = None


@dataclass(frozen=True)
class ProblemSpec:
    """A model problem.

    ``coefficients`` hold the principal operator: ``A, b, c, f`` for the
    linear variants, ``A = I`` for the nonlinear one and ``A = I/2, c = V``
    for the eigenvalue problem.  The nonlinear problem reads
    ``-lap u + nonlinearity(x, y, u) = 0``.
    """
    name: str
    variant: Variant
    coefficients: CoefficientField
    initial_mesh: Callable[[], Triangulation]
    description: str = ""
    nonlinearity: Optional[Callable] = None
    nonlinearity_du: Optional[Callable] = None
    potential: Optional[Callable] = None
    dirichlet: Optional[Callable] = None
    exact: Optional[ExactSolution] = None
    eigen_shift: float = 0.0
    declared_divergence_free: bool = field(default=False)

    def __post_init__(self):
        if self.variant is Variant.NONLINEAR and (self.nonlinearity is None
                                                  or self.nonlinearity_du is None):
            raise ValueError("nonlinear problem needs f(x, u) and its u-derivative")
        if self.variant is Variant.NONSYMMETRIC and not self.declared_divergence_free:
            raise ValueError("nonsymmetric problem requires a divergence-free b")

    @property
    def symmetric(self) -> bool:
        return self.coefficients.b is None


# -- residual data ------------------------------------------------------------

def residual_source(p: ProblemSpec, u_h: FeFunction, lam_h: float | None = None,
                    points=None):
    """Values of ``r`` with element residual ``r + div(A grad u_h)``.

    Evaluated at barycentric ``points`` (default: element quadrature points);
    returns an array of shape (ne, nq).
    """
    if (p.variant is Variant.EIGENVALUE) != (lam_h is not None):
        raise ValueError("an eigenvalue is required exactly for the eigenvalue variant")
    lam = TRIANGLE_RULE.points if points is None else points
    from .fem.space import map_points
    xy = map_points(u_h.mesh, lam)
    x, y = xy[..., 0], xy[..., 1]
    root = u_h.mesh.roots[:, None]
    uh = u_h.values(lam)
    co = p.coefficients
    if p.variant in (Variant.BOUNDARY_VALUE, Variant.NONSYMMETRIC):
        r = co.scalar("f", x, y, root) - co.scalar("c", x, y, root) * uh
        if co.b is not None:
            r = r - np.einsum("eqd,eqd->eq", co.vector("b", x, y, root), u_h.gradients(lam))
        return r
    if p.variant is Variant.NONLINEAR:
        return -np.asarray(p.nonlinearity(x, y, uh), dtype=float)
    return (lam_h - co.scalar("c", x, y, root)) * uh


def linearized_coefficients(p: ProblemSpec, w: FeFunction) -> CoefficientField:
    """Coefficients of ``-lap + f_u(x, w)`` at the element quadrature points."""
    if p.variant is not Variant.NONLINEAR:
        raise ValueError("linearisation applies to the nonlinear variant only")
    x, y, _ = quadrature_points(w.space)
    c = np.asarray(p.nonlinearity_du(x, y, w.values()), dtype=float)
    return CoefficientField(A=p.coefficients.A, c=np.broadcast_to(c, x.shape))


# -- lshape_poisson -----------------------------------------------------------

def _polar(x, y):
    r = np.hypot(x, y)
    theta = np.mod(np.arctan2(y, x), 2 * np.pi)
    return r, theta


def _lshape_u(x, y):
    r, t = _polar(x, y)
    return r ** (2 / 3) * np.sin(2 * t / 3)


def _lshape_grad(x, y):
    r, t = _polar(x, y)
    with np.errstate(divide="ignore"):
        s = (2 / 3) * r ** (-1 / 3)
    return np.stack([-s * np.sin(t / 3), s * np.cos(t / 3)], axis=-1)


def _lshape():
    return ProblemSpec(
        name="lshape_poisson",
        variant=Variant.BOUNDARY_VALUE,
        description="Laplace on the L-shaped domain, u = r^(2/3) sin(2 theta/3)",
        coefficients=CoefficientField(A=1.0, f=0.0),
        initial_mesh=lshape_mesh,
        dirichlet=_lshape_u,
        exact=ExactSolution(u=_lshape_u, grad=_lshape_grad),
    )


# -- conv_diffusion_2d --------------------------------------------------------

EPS = 1e-2
VELOCITY = (2.0, 3.0)


def _cd_factors(x, y):
    ex = np.exp(2 * (x - 1) / EPS)
    ey = np.exp(3 * (y - 1) / EPS)
    X, dX = x ** 3 - ex, 3 * x ** 2 - (2 / EPS) * ex
    Y, dY = y ** 2 - ey, 2 * y - (3 / EPS) * ey
    return X, dX, Y, dY


def _cd_u(x, y):
    X, _, Y, _ = _cd_factors(x, y)
    return X * Y


def _cd_grad(x, y):
    X, dX, Y, dY = _cd_factors(x, y)
    return np.stack([dX * Y, X * dY], axis=-1)


def _cd_f(x, y):
    # -eps X'' + 2 X' and -eps Y'' + 3 Y' annihilate the exponential layers
    X, _, Y, _ = _cd_factors(x, y)
    return (6 * x ** 2 - 6 * EPS * x) * Y + X * (6 * y - 2 * EPS)


def _conv_diffusion():
    return ProblemSpec(
        name="conv_diffusion_2d",
        variant=Variant.NONSYMMETRIC,
        description="eps=1e-2 convection-diffusion, b=(2,3), boundary layers at x=1, y=1",
        coefficients=CoefficientField(A=EPS, b=np.array(VELOCITY), f=_cd_f),
        initial_mesh=lambda: square_mesh(4),
        dirichlet=_cd_u,
        exact=ExactSolution(u=_cd_u, grad=_cd_grad),
        declared_divergence_free=True,
    )


# -- nonlinear_sine_2d --------------------------------------------------------

DELTA0 = 1e-1


def _ns_parts(x, y):
    rho2 = x ** 2 + y ** 2 + DELTA0 ** 2
    rho = np.sqrt(rho2)
    sx, sy = np.sin(np.pi * x), np.sin(np.pi * y)
    cx, cy = np.cos(np.pi * x), np.cos(np.pi * y)
    return rho, rho2, sx, sy, cx, cy


def _ns_u(x, y):
    rho, _, sx, sy, _, _ = _ns_parts(x, y)
    return sx * sy / rho


def _ns_grad(x, y):
    rho, rho2, sx, sy, cx, cy = _ns_parts(x, y)
    s = sx * sy
    gx = np.pi * cx * sy / rho - s * x / (rho * rho2)
    gy = np.pi * sx * cy / rho - s * y / (rho * rho2)
    return np.stack([gx, gy], axis=-1)


def _ns_source(x, y):
    """``-lap u + u^3`` for the exact solution."""
    rho, rho2, sx, sy, cx, cy = _ns_parts(x, y)
    s = sx * sy
    g = 1 / rho
    grad_s_dot_grad_g = -np.pi * (cx * sy * x + sx * cy * y) / (rho * rho2)
    lap_g = (x ** 2 + y ** 2 - 2 * DELTA0 ** 2) / (rho2 * rho2 * rho)
    lap_u = -2 * np.pi ** 2 * s * g + 2 * grad_s_dot_grad_g + s * lap_g
    u = s * g
    return -lap_u + u ** 3


def _nonlinear_sine():
    return ProblemSpec(
        name="nonlinear_sine_2d",
        variant=Variant.NONLINEAR,
        description="-lap u + u^3 = f on the unit square, u = sin sin / sqrt(x^2+y^2+0.01)",
        coefficients=CoefficientField(A=1.0, f=_ns_source),
        initial_mesh=lambda: square_mesh(2),
        nonlinearity=lambda x, y, u: u ** 3 - _ns_source(x, y),
        nonlinearity_du=lambda x, y, u: 3 * u ** 2,
        exact=ExactSolution(u=_ns_u, grad=_ns_grad),
    )


# -- eigenvalue problems ------------------------------------------------------

def _sq_eig_u(x, y):
    return 2 * np.sin(np.pi * x) * np.sin(np.pi * y)


def _sq_eig_grad(x, y):
    return 2 * np.pi * np.stack([np.cos(np.pi * x) * np.sin(np.pi * y),
                                 np.sin(np.pi * x) * np.cos(np.pi * y)], axis=-1)


def _square_eigen():
    return ProblemSpec(
        name="square_laplace_eigen",
        variant=Variant.EIGENVALUE,
        description="-lap u / 2 = lambda u on the unit square, lambda_min = pi^2",
        coefficients=CoefficientField(A=0.5),
        initial_mesh=lambda: square_mesh(4),
        potential=None,
        exact=ExactSolution(u=_sq_eig_u, grad=_sq_eig_grad, eigenvalue=float(np.pi ** 2)),
    )


def _coulomb(x, y):
    with np.errstate(divide="ignore"):
        return -2.0 / np.hypot(x, y)


def _singular_eigen():
    return ProblemSpec(
        name="singular_potential_eigen",
        variant=Variant.EIGENVALUE,
        description="-lap u / 2 - 2/|x| u = lambda u on (-10,10)^2 (no exact solution)",
        coefficients=CoefficientField(A=0.5, c=_coulomb),
        initial_mesh=lambda: square_mesh(2, -10.0, 10.0, -10.0, 10.0),
        potential=_coulomb,
        # the 2D ground state of -lap/2 - 2/r is -8; stay below it
        eigen_shift=-16.0,
    )


_CATALOG = {
    "lshape_poisson": _lshape,
    "conv_diffusion_2d": _conv_diffusion,
    "nonlinear_sine_2d": _nonlinear_sine,
    "square_laplace_eigen": _square_eigen,
    "singular_potential_eigen": _singular_eigen,
}


def problem_ids():
    return list(_CATALOG)


def catalog(problem_id: str) -> ProblemSpec:
    try:
        return _CATALOG[problem_id]()
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; choose from "
                       + ", ".join(_CATALOG)) from None


def describe_problems():
    return [(pid, catalog(pid).description) for pid in _CATALOG]
