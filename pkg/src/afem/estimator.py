"""ESTIMATE step: residual indicators and oscillation.

For every active element ``T``::

    eta_T^2 = h_T^2 ||R_T||_T^2 + sum_{interior e in dT} h_e ||J_e||_e^2
    osc_T^2 = h_T^2 ||R_T - P R_T||_T^2 + sum_{interior e in dT} h_e ||J_e - P J_e||_e^2

with ``R_T = r + div(A grad u_h)``, ``J_e`` the normal jump of
``A grad u_h`` and ``P`` the L2 projection onto polynomials of degree
``n - 1`` (computed in the discrete inner product of the quadrature rule).
Each interior edge contributes its full term to both neighbours.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fem import CoefficientField, FeFunction
from .fem.quadrature import EDGE_RULE, TRIANGLE_RULE
from .fem.space import map_points
from .mesh import LOCAL_EDGES, Triangulation
from .problems import ProblemSpec, residual_source

__all__ = ["Indicators", "indicators", "oscillation", "global_estimate",
           "coefficient_oscillation", "divergence_flux", "write_indicators"]

# relative step of the central differences for div(A) when A varies
FD_STEP = 1e-6


@dataclass(frozen=True)
class Indicators:
    """Per-element squared indicators and their global sums."""
    eta2: np.ndarray
    osc2: np.ndarray
    total_eta2: float
    total_osc2: float
    num_elements: int
    num_dofs: int

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.total_eta2))

    @property
    def osc(self) -> float:
        return float(np.sqrt(self.total_osc2))


def _frozen(a):
    a = np.asarray(a, dtype=float).copy()
    a.flags.writeable = False
    return a


def _fd_div_A(co: CoefficientField, x, y, root, h):
    """Row divergence of ``A`` by central differences, shape (..., 2)."""
    step = FD_STEP * np.broadcast_to(h, x.shape)
    dAx = (co.matrix(x + step, y, root) - co.matrix(x - step, y, root)) / (2 * step)[..., None, None]
    dAy = (co.matrix(x, y + step, root) - co.matrix(x, y - step, root)) / (2 * step)[..., None, None]
    # (div A)_j = d/dx A_xj + d/dy A_yj
    return dAx[..., 0, :] + dAy[..., 1, :]


def divergence_flux(co: CoefficientField, u_h: FeFunction, lam=None):
    """``div(A grad u_h)`` at barycentric points, shape (ne, nq)."""
    lam = TRIANGLE_RULE.points if lam is None else lam
    mesh = u_h.mesh
    hess = u_h.hessians()                                    # (ne, 2, 2)
    nq = len(lam)
    if co.A is None:
        return np.zeros((mesh.num_elements, nq))
    xy = map_points(mesh, lam)
    x, y = xy[..., 0], xy[..., 1]
    root = mesh.roots[:, None]
    A = co.matrix(x, y, root)
    out = np.einsum("eqij,eij->eq", A, hess)
    if not co.constant_A:
        if co.div_A is not None:
            div_A = co.vector("div_A", x, y, root)
        else:
            div_A = _fd_div_A(co, x, y, root, mesh.diameters[:, None])
        out = out + np.einsum("eqj,eqj->eq", div_A, u_h.gradients(lam))
    return out


def _element_terms(p, u_h, lam_h):
    mesh = u_h.mesh
    R = residual_source(p, u_h, lam_h) + divergence_flux(p.coefficients, u_h)
    w = 2.0 * mesh.areas[:, None] * TRIANGLE_RULE.weights[None, :]
    h2 = mesh.diameters ** 2
    eta = h2 * np.sum(w * R ** 2, axis=1)
    degree = u_h.space.degree
    if degree == 1:
        mean = np.sum(w * R, axis=1) / np.sum(w, axis=1)
        dev = R - mean[:, None]
    else:
        # projection onto P1 spanned by the barycentric coordinates
        B = TRIANGLE_RULE.points                             # (nq, 3)
        gram = (B * TRIANGLE_RULE.weights[:, None]).T @ B    # (3, 3), affine invariant
        rhs = np.einsum("q,qi,eq->ei", TRIANGLE_RULE.weights, B, R)
        coef = np.linalg.solve(gram, rhs.T).T
        dev = R - coef @ B.T
    osc = h2 * np.sum(w * dev ** 2, axis=1)
    return eta, osc


def _edge_bary(mesh: Triangulation, elements, local_edge, a, t):
    """Barycentric coordinates of the points ``a + t (b - a)`` on a side."""
    tri = mesh.elements[elements]
    ne = len(elements)
    lam = np.zeros((ne, len(t), 3))
    i = LOCAL_EDGES[local_edge, 0]
    j = LOCAL_EDGES[local_edge, 1]
    forward = tri[np.arange(ne), i] == a
    s = np.where(forward[:, None], t[None, :], 1.0 - t[None, :])
    rows = np.arange(ne)[:, None]
    lam[rows, np.arange(len(t))[None, :], i[:, None]] = 1.0 - s
    lam[rows, np.arange(len(t))[None, :], j[:, None]] = s
    return lam


def _edge_terms(p, u_h):
    mesh = u_h.mesh
    ne = mesh.num_elements
    eta = np.zeros(ne)
    osc = np.zeros(ne)
    inner = np.flatnonzero(mesh.edge_elements[:, 1] >= 0)
    if len(inner) == 0:
        return eta, osc
    edges = mesh.edges[inner]
    a, b = edges[:, 0], edges[:, 1]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    tangent = pb - pa
    length = np.linalg.norm(tangent, axis=1)
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]
    t = EDGE_RULE.points
    pts = pa[:, None, :] + t[None, :, None] * tangent[:, None, :]
    x, y = pts[..., 0], pts[..., 1]
    co = p.coefficients
    flux = []
    for side in range(2):
        el = mesh.edge_elements[inner, side]
        local = np.argmax(mesh.element_edges[el] == inner[:, None], axis=1)
        lam = _edge_bary(mesh, el, local, a, t)
        grad = u_h.gradients(lam, elements=el)
        A = co.matrix(x, y, mesh.roots[el][:, None])
        flux.append(np.einsum("eqij,eqj,ei->eq", A, grad, normal))
    J = flux[0] - flux[1]
    w = EDGE_RULE.weights
    term = length * length * np.sum(w * J ** 2, axis=1)
    if u_h.space.degree == 1:
        dev = J - np.sum(w * J, axis=1)[:, None]
    else:
        B = np.stack([1.0 - t, t], axis=1)
        gram = (B * w[:, None]).T @ B
        coef = np.linalg.solve(gram, np.einsum("q,qi,eq->ei", w, B, J).T).T
        dev = J - coef @ B.T
    term_osc = length * length * np.sum(w * dev ** 2, axis=1)
    for side in range(2):
        el = mesh.edge_elements[inner, side]
        eta += np.bincount(el, weights=term, minlength=ne)
        osc += np.bincount(el, weights=term_osc, minlength=ne)
    return eta, osc


def indicators(p: ProblemSpec, u_h: FeFunction, lam_h: float | None = None) -> Indicators:
    """Squared indicators ``eta_T^2`` and oscillations ``osc_T^2``."""
    e_el, o_el = _element_terms(p, u_h, lam_h)
    e_ed, o_ed = _edge_terms(p, u_h)
    eta2 = e_el + e_ed
    osc2 = o_el + o_ed
    if not (np.all(np.isfinite(eta2)) and np.all(np.isfinite(osc2))):
        bad = int(np.flatnonzero(~np.isfinite(eta2))[0]) if not np.all(np.isfinite(eta2)) else -1
        raise ArithmeticError(f"non-finite indicator in element {bad}")
    return Indicators(_frozen(eta2), _frozen(osc2), float(np.sum(eta2)),
                      float(np.sum(osc2)), u_h.mesh.num_elements, u_h.space.num_dofs)


def oscillation(p: ProblemSpec, u_h: FeFunction, lam_h: float | None = None):
    """Per-element ``osc_T^2``."""
    return indicators(p, u_h, lam_h).osc2


def global_estimate(ind: Indicators, subset=None):
    """``(eta(omega), osc(omega))`` over a set of element positions."""
    if subset is None:
        return ind.eta, ind.osc
    subset = np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset,
                        dtype=np.int64)
    return (float(np.sqrt(np.sum(ind.eta2[subset]))),
            float(np.sqrt(np.sum(ind.osc2[subset]))))


def coefficient_oscillation(co: CoefficientField, mesh: Triangulation):
    """``osc_h(A, T)`` per element and its maximum over the mesh.

    The sup norms are sampled at the quadrature points and vertices; the
    best constant approximation in the sup norm is the entrywise midrange.
    """
    lam = np.vstack([TRIANGLE_RULE.points, np.eye(3)])
    xy = map_points(mesh, lam)
    x, y = xy[..., 0], xy[..., 1]
    root = mesh.roots[:, None]
    h = mesh.diameters
    A = np.array(co.matrix(x, y, root))                       # (ne, ns, 2, 2)
    if co.constant_A:
        div = np.zeros(x.shape + (2,))
    elif co.div_A is not None:
        div = co.vector("div_A", x, y, root)
    else:
        div = _fd_div_A(co, x, y, root, h[:, None])
    mid = 0.5 * (div.max(axis=1) + div.min(axis=1))
    div_dev = np.max(np.linalg.norm(div - mid[:, None, :], axis=-1), axis=1)

    # patch: the element and its side neighbours
    ne = mesh.num_elements
    nb = mesh.edge_elements[mesh.element_edges]               # (ne, 3, 2)
    patch = np.where(nb < 0, np.arange(ne)[:, None, None], nb).reshape(ne, 6)
    patch = np.concatenate([np.arange(ne)[:, None], patch], axis=1)
    PA = A[patch].reshape(ne, -1, 2, 2)
    Abar = 0.5 * (PA.max(axis=1) + PA.min(axis=1))
    dev = np.linalg.norm(PA - Abar[:, None], ord=2, axis=(-2, -1)).max(axis=1)
    osc = np.sqrt(h ** 2 * div_dev ** 2 + dev ** 2)
    return osc, float(osc.max())


def write_indicators(ind: Indicators, path):
    """CSV dump with columns ``element_id,eta2,osc2``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element_id", "eta2", "osc2"])
        for i, (e, o) in enumerate(zip(ind.eta2, ind.osc2)):
            w.writerow([i, repr(float(e)), repr(float(o))])
