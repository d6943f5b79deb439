"""Continuous P1/P2 Lagrange spaces on a :class:`~afem.mesh.Triangulation`.

Local degrees of freedom: the three vertices, then (P2 only) the midpoints
of local edges 0, 1, 2, where local edge ``k`` is opposite vertex ``k``.
Global numbering is all vertices in mesh order followed by all edges in
the mesh's sorted edge order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..mesh import LOCAL_EDGES, Triangulation
from .quadrature import TRIANGLE_RULE

SUPPORTED_DEGREES = (1, 2)


def num_local_dofs(degree: int) -> int:
    return 3 if degree == 1 else 6


def local_nodes(degree: int):
    """Barycentric coordinates of the local Lagrange nodes."""
    nodes = np.eye(3)
    if degree == 2:
        mids = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
        nodes = np.vstack([nodes, mids])
    return nodes


def shape_values(degree, lam):
    """Basis values at barycentric points ``lam`` (..., 3) -> (..., nloc)."""
    lam = np.asarray(lam, dtype=float)
    if degree == 1:
        return lam.copy()
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1], axis=-1)


def shape_bary_derivatives(degree, lam):
    """Derivatives with respect to the barycentric coordinates.

    Returns an array of shape (..., nloc, 3).
    """
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape[:-1]
    if degree == 1:
        return np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    d = np.zeros(shape + (6, 3))
    for i in range(3):
        d[..., i, i] = 4 * lam[..., i] - 1
    for k, (a, b) in enumerate(LOCAL_EDGES):
        d[..., 3 + k, a] = 4 * lam[..., b]
        d[..., 3 + k, b] = 4 * lam[..., a]
    return d


def shape_bary_hessians(degree):
    """Constant second barycentric derivatives, shape (nloc, 3, 3)."""
    if degree == 1:
        return np.zeros((3, 3, 3))
    h = np.zeros((6, 3, 3))
    for i in range(3):
        h[i, i, i] = 4.0
    for k, (a, b) in enumerate(LOCAL_EDGES):
        h[3 + k, a, b] = h[3 + k, b, a] = 4.0
    return h


def barycentric_gradients(mesh: Triangulation):
    """Gradients of the barycentric coordinates, shape (ne, 3, 2)."""
    p = mesh.vertices[mesh.elements]
    twice_area = 2.0 * mesh.areas
    g = np.empty((mesh.num_elements, 3, 2))
    for i in range(3):
        d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        g[:, i, 0] = -d[:, 1] / twice_area
        g[:, i, 1] = d[:, 0] / twice_area
    return g


def map_points(mesh: Triangulation, lam, elements=None):
    """Physical coordinates of barycentric points.

    ``lam`` is (nq, 3) shared by all elements or (ne, nq, 3) per element.
    """
    tri = mesh.elements if elements is None else mesh.elements[elements]
    p = mesh.vertices[tri]                                   # (ne, 3, 2)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 2:
        return np.einsum("qi,eid->eqd", lam, p)
    return np.einsum("eqi,eid->eqd", lam, p)


class FeSpace:
    """Continuous Lagrange space of degree 1 or 2 on a triangulation."""

    def __init__(self, mesh: Triangulation, degree: int = 1):
        if degree not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported degree {degree}; choose 1 or 2")
        self.mesh = mesh
        self.degree = degree
        nv = mesh.num_vertices
        if degree == 1:
            dofs = mesh.elements.copy()
            self.num_dofs = nv
        else:
            dofs = np.concatenate([mesh.elements, nv + mesh.element_edges], axis=1)
            self.num_dofs = nv + mesh.num_edges
        dofs.flags.writeable = False
        self.cell_dofs = dofs

    def __repr__(self):
        return f"FeSpace(P{self.degree}, dofs={self.num_dofs})"

    @property
    def num_local(self) -> int:
        return num_local_dofs(self.degree)

    @cached_property
    def boundary_dofs(self):
        """Boolean mask of the DOFs whose nodes lie on the boundary."""
        mesh = self.mesh
        mask = np.zeros(self.num_dofs, dtype=bool)
        mask[mesh.boundary_edges.ravel()] = True
        if self.degree == 2:
            bed = mesh.edge_index(mesh.boundary_edges)
            mask[mesh.num_vertices + bed] = True
        mask.flags.writeable = False
        return mask

    @cached_property
    def dof_coordinates(self):
        mesh = self.mesh
        if self.degree == 1:
            return mesh.vertices
        e = mesh.edges
        mids = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
        return np.concatenate([mesh.vertices, mids])

    @cached_property
    def jacobian_data(self):
        """Barycentric gradients and areas, cached per space."""
        return barycentric_gradients(self.mesh), self.mesh.areas

    def interpolate(self, fn) -> "FeFunction":
        """Nodal interpolant of ``fn(x, y)``; exact for degree-n polynomials."""
        xy = self.dof_coordinates
        vals = np.asarray(fn(xy[:, 0], xy[:, 1]), dtype=float)
        vals = np.broadcast_to(vals, (self.num_dofs,)).copy()
        return FeFunction(self, vals)

    def zero(self) -> "FeFunction":
        return FeFunction(self, np.zeros(self.num_dofs))


def build_space(mesh: Triangulation, degree: int = 1) -> FeSpace:
    return FeSpace(mesh, degree)


@dataclass(frozen=True, eq=False)
class FeFunction:
    """A coefficient vector over an :class:`FeSpace`."""
    space: FeSpace
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.space.num_dofs,):
            raise ValueError(f"expected {self.space.num_dofs} coefficients, got {c.shape}")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def mesh(self):
        return self.space.mesh

    def local_coefficients(self, elements=None):
        dofs = self.space.cell_dofs if elements is None else self.space.cell_dofs[elements]
        return self.coefficients[dofs]

    def values(self, lam=None, elements=None):
        """Values at barycentric points, shape (ne, nq).

        ``lam`` is (nq, 3) shared or (ne, nq, 3) per element; defaults to the
        element quadrature points.
        """
        lam = TRIANGLE_RULE.points if lam is None else lam
        phi = shape_values(self.space.degree, lam)
        c = self.local_coefficients(elements)
        if phi.ndim == 2:
            return c @ phi.T
        return np.einsum("eqk,ek->eq", phi, c)

    def gradients(self, lam=None, elements=None):
        """Gradients at barycentric points, shape (ne, nq, 2)."""
        lam = TRIANGLE_RULE.points if lam is None else lam
        G = self.space.jacobian_data[0]
        if elements is not None:
            G = G[elements]
        dphi = shape_bary_derivatives(self.space.degree, lam)  # (.., nq, nloc, 3)
        c = self.local_coefficients(elements)
        if dphi.ndim == 3:
            dl = np.einsum("qki,ek->eqi", dphi, c)
        else:
            dl = np.einsum("eqki,ek->eqi", dphi, c)
        return np.einsum("eqi,eid->eqd", dl, G)

    def hessians(self, elements=None):
        """Element-wise constant Hessians, shape (ne, 2, 2)."""
        G = self.space.jacobian_data[0]
        if elements is not None:
            G = G[elements]
        H = shape_bary_hessians(self.space.degree)
        c = self.local_coefficients(elements)
        Hl = np.einsum("kij,ek->eij", H, c)
        return np.einsum("eij,eid,ejf->edf", Hl, G, G)

    def __call__(self, points):
        """Point evaluation by brute-force location (testing aid)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        el = self.mesh.locate(points)
        if np.any(el < 0):
            raise ValueError("point outside the mesh")
        lam = self.mesh.barycentric(el, points)
        phi = shape_values(self.space.degree, lam)
        return np.sum(phi * self.local_coefficients(el), axis=1)
