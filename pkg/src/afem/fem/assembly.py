"""Assembly of bilinear and linear forms, error norms and mesh transfer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.sparse as sp

from .quadrature import TRIANGLE_RULE
from .space import (FeFunction, FeSpace, local_nodes, map_points,
                    shape_bary_derivatives, shape_values)


class AssemblyError(ArithmeticError):
    """A coefficient produced a non-finite value at a quadrature point."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True)
class CoefficientField:
    """Data of ``-div(A grad u) + b.grad u + c u = f``.

    Each entry may be ``None`` (zero), a constant, an array of values at the
    element quadrature points (shape ``(ne, nq)`` or ``(ne, nq, ...)``), or a
    vectorised callable ``fn(x, y)``.  When ``piecewise`` is set, callables
    are called as ``fn(x, y, root)`` with the id of the initial-mesh ancestor
    of the element holding each point, so data may jump across T0 edges.

    ``A`` may be scalar-valued (isotropic) or 2x2-valued.  ``div_A`` returns
    the row divergence of ``A`` as a 2-vector; the estimator falls back to
    finite differences when it is missing and ``A`` is variable.
    """
    A: Any = 1.0
    b: Any = None
    c: Any = None
    f: Any = None
    div_A: Any = None
    piecewise: bool = False

    @property
    def constant_A(self) -> bool:
        return not callable(self.A) and (self.A is None or np.ndim(self.A) == 0
                                         or np.shape(self.A) == (2, 2))

    def _call(self, fn, x, y, root):
        if self.piecewise:
            return fn(x, y, np.broadcast_to(root, x.shape))
        return fn(x, y)

    def scalar(self, name, x, y, root=None):
        val = getattr(self, name)
        if val is None:
            return np.zeros(x.shape)
        if callable(val):
            val = self._call(val, x, y, root)
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape)

    def vector(self, name, x, y, root=None):
        val = getattr(self, name)
        if val is None:
            return np.zeros(x.shape + (2,))
        if callable(val):
            val = self._call(val, x, y, root)
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape + (2,))

    def matrix(self, x, y, root=None):
        val = self.A
        if val is None:
            return np.zeros(x.shape + (2, 2))
        if callable(val):
            val = self._call(val, x, y, root)
        val = np.asarray(val, dtype=float)
        if val.shape == (2, 2) or val.shape[-2:] == (2, 2) and val.shape != x.shape:
            return np.broadcast_to(val, x.shape + (2, 2))
        return np.broadcast_to(val, x.shape)[..., None, None] * np.eye(2)


def quadrature_points(space: FeSpace, rule=TRIANGLE_RULE):
    """Physical quadrature points and their integration weights.

    Returns ``x, y`` of shape (ne, nq) and ``dx`` with ``sum(dx) = |Omega|``.
    """
    xy = map_points(space.mesh, rule.points)
    dx = 2.0 * space.mesh.areas[:, None] * rule.weights[None, :]
    return xy[..., 0], xy[..., 1], dx


def _roots(space):
    return space.mesh.roots[:, None]


def _check_finite(name, values):
    bad = ~np.isfinite(values)
    if bad.any():
        el = int(np.argwhere(bad)[0][0])
        raise AssemblyError(f"coefficient {name} not finite in element {el}", element=el)


def _to_csr(space, local):
    dofs = space.cell_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.num_dofs
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def element_matrices(space: FeSpace, coeffs: CoefficientField, rule=TRIANGLE_RULE):
    """Local matrices of ``(A grad u, grad v) + (b.grad u, v) + (c u, v)``."""
    deg = space.degree
    G = space.jacobian_data[0]
    x, y, dx = quadrature_points(space, rule)
    root = _roots(space)
    phi = shape_values(deg, rule.points)                               # (nq, k)
    grad = np.einsum("qki,eid->eqkd", shape_bary_derivatives(deg, rule.points), G)
    ne, nloc = space.mesh.num_elements, phi.shape[1]
    local = np.zeros((ne, nloc, nloc))
    if coeffs.A is not None:
        A = coeffs.matrix(x, y, root)
        _check_finite("A", A)
        AG = np.einsum("eqij,eqlj->eqli", A, grad)
        local += np.einsum("eq,eqli,eqki->ekl", dx, AG, grad)
    if coeffs.b is not None:
        b = coeffs.vector("b", x, y, root)
        _check_finite("b", b)
        bg = np.einsum("eqj,eqlj->eql", b, grad)
        local += np.einsum("eq,eql,qk->ekl", dx, bg, phi)
    if coeffs.c is not None:
        c = coeffs.scalar("c", x, y, root)
        _check_finite("c", c)
        local += np.einsum("eq,ql,qk->ekl", dx * c, phi, phi)
    return local


def assemble_operator(space: FeSpace, coeffs: CoefficientField) -> sp.csr_matrix:
    """Global matrix of the bilinear form defined by ``coeffs`` (f ignored)."""
    return _to_csr(space, element_matrices(space, coeffs))


def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    return assemble_operator(space, CoefficientField(A=None, c=1.0))


def assemble_load(space: FeSpace, r) -> np.ndarray:
    """Vector of ``(r, phi_i)``.

    ``r`` is a callable ``r(x, y)``, a constant, or values at the element
    quadrature points with shape (ne, nq).
    """
    x, y, dx = quadrature_points(space)
    if callable(r):
        vals = np.asarray(r(x, y), dtype=float)
    else:
        vals = np.asarray(r, dtype=float)
    vals = np.broadcast_to(vals, x.shape)
    _check_finite("r", vals)
    phi = shape_values(space.degree, TRIANGLE_RULE.points)
    local = np.einsum("eq,qk->ek", dx * vals, phi)
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(),
                       minlength=space.num_dofs)


def apply_dirichlet(matrix, rhs, space: FeSpace, boundary_values=None):
    """Symmetric elimination of the boundary DOFs.

    Boundary rows and columns are cleared with unit diagonal; the right-hand
    side is corrected by the lifted boundary data and carries the boundary
    values in the boundary rows.
    """
    bd = space.boundary_dofs
    g = np.zeros(space.num_dofs)
    if boundary_values is not None:
        g[bd] = np.asarray(boundary_values)[bd]
    interior = sp.diags((~bd).astype(float))
    rhs = np.asarray(rhs, dtype=float) - matrix @ g
    rhs[bd] = g[bd]
    mat = (interior @ matrix @ interior + sp.diags(bd.astype(float))).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat, rhs


def energy_error(exact_grad, u_h: FeFunction, coeffs: CoefficientField | None = None) -> float:
    """``sqrt(sum_T int_T A (grad u - grad u_h).(grad u - grad u_h))``."""
    coeffs = coeffs or CoefficientField()
    space = u_h.space
    x, y, dx = quadrature_points(space)
    e = np.asarray(exact_grad(x, y), dtype=float) - u_h.gradients()
    A = coeffs.matrix(x, y, _roots(space))
    return float(np.sqrt(np.sum(dx * np.einsum("eqi,eqij,eqj->eq", e, A, e))))


def l2_norm(values_fn, space: FeSpace) -> float:
    x, y, dx = quadrature_points(space)
    return float(np.sqrt(np.sum(dx * np.asarray(values_fn(x, y)) ** 2)))


def transfer(u: FeFunction, target: FeSpace) -> FeFunction:
    """Represent ``u`` exactly in a space on a refinement of its mesh.

    Each node of the target space is evaluated in the source-mesh ancestor
    of an element containing it, so the result agrees with ``u`` pointwise.
    """
    source_mesh = u.space.mesh
    fine = target.mesh
    if not fine.is_refinement_of(source_mesh):
        from ..mesh import MeshError
        raise MeshError("target mesh is not a refinement of the source mesh")
    if target.degree < u.space.degree:
        raise ValueError("target degree must not be lower than the source degree")
    anc = fine.ancestors_in(source_mesh)                        # (ne_f,)
    nodes = local_nodes(target.degree)                          # (nloc, 3)
    pts = map_points(fine, nodes)                               # (ne_f, nloc, 2)
    lam = source_mesh.barycentric(anc[:, None], pts)            # (ne_f, nloc, 3)
    phi = shape_values(u.space.degree, lam)                     # (ne_f, nloc, k)
    vals = np.einsum("enk,ek->en", phi, u.local_coefficients(anc))
    out = np.empty(target.num_dofs)
    out[target.cell_dofs.ravel()] = vals.ravel()
    return FeFunction(target, out)
