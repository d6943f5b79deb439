"""Conforming triangulations refined by newest-vertex bisection.

Every element stores its vertices so that the refinement edge is the one
opposite local vertex 0.  Bisecting ``(v0, v1, v2)`` through the midpoint
``m`` of ``(v1, v2)`` yields the children ``(m, v0, v1)`` and ``(m, v2, v0)``,
whose refinement edges are the two remaining sides of the parent.  Both
children keep the parent's orientation.

Refinement follows the edge-marking scheme: the refinement edges of the
marked elements are flagged, the flag set is closed under "an element with
a flagged side also flags its refinement edge", and then every element is
bisected until none of its sides is flagged.  This never leaves a hanging
node and needs no compatibility assumption on the initial labeling.

Meshes are immutable.  ``refine`` returns a new :class:`Triangulation`
that shares the genealogy of its input, so functions can be transferred
exactly between any two meshes of the same refinement history.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "MeshError",
    "MeshQuality",
    "Triangulation",
    "load_initial",
    "read_mesh",
    "write_mesh",
    "format_mesh",
    "refine",
    "uniform_refine",
    "quality",
    "complexity_ratio",
    "square_mesh",
    "lshape_mesh",
]

# local edge k is opposite local vertex k
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

# closure rounds before giving up; each round flags at least one new edge
MAX_CLOSURE_ROUNDS = 10_000


class MeshError(ValueError):
    """Invalid mesh input or a failed refinement invariant."""


class _Lineage:
    """Identity token shared by all meshes refined from one initial mesh."""

    __slots__ = ()


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _signed_area(p, tri):
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _edge_keys(pairs, nv):
    lo = np.minimum(pairs[..., 0], pairs[..., 1]).astype(np.int64)
    hi = np.maximum(pairs[..., 0], pairs[..., 1]).astype(np.int64)
    return lo * nv + hi


class Triangulation:
    """An immutable conforming triangulation with bisection genealogy.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
    elements : ndarray, shape (ne, 3)
        Active triangles; the refinement edge is opposite column 0.
    element_ids : ndarray, shape (ne,)
        Genealogy ids of the active triangles.
    boundary_edges : ndarray, shape (nb, 2)
    boundary_markers : ndarray, shape (nb,)

    Element sets passed to :func:`refine` and produced by the estimator are
    positions in ``elements`` (0..ne-1), not genealogy ids.
    """

    def __init__(self, vertices, all_elements, parent, generation, root,
                 element_ids, boundary_edges, boundary_markers, lineage=None,
                 domain_area=None):
        self.vertices = _readonly(np.asarray(vertices, dtype=float))
        self._all = _readonly(np.asarray(all_elements, dtype=np.int64))
        self._parent = _readonly(np.asarray(parent, dtype=np.int64))
        self._generation = _readonly(np.asarray(generation, dtype=np.int64))
        self._root = _readonly(np.asarray(root, dtype=np.int64))
        self.element_ids = _readonly(np.asarray(element_ids, dtype=np.int64))
        self.elements = _readonly(self._all[self.element_ids])
        self.boundary_edges = _readonly(np.asarray(boundary_edges, dtype=np.int64).reshape(-1, 2))
        self.boundary_markers = _readonly(np.asarray(boundary_markers, dtype=np.int64))
        self._lineage = lineage if lineage is not None else _Lineage()
        self._domain_area = (float(np.sum(self.areas)) if domain_area is None
                             else domain_area)

    # -- sizes -------------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def __len__(self):
        return self.num_elements

    def __repr__(self):
        return (f"Triangulation(vertices={self.num_vertices}, "
                f"elements={self.num_elements}, edges={self.num_edges})")

    # -- genealogy ---------------------------------------------------------
    @property
    def parents(self):
        """Parent genealogy id of each active element (-1 for roots)."""
        return self._parent[self.element_ids]

    @property
    def generations(self):
        return self._generation[self.element_ids]

    @property
    def roots(self):
        """Id of the initial-mesh ancestor of each active element."""
        return self._root[self.element_ids]

    @property
    def num_genealogy(self) -> int:
        return self._all.shape[0]

    # -- geometry ----------------------------------------------------------
    @cached_property
    def areas(self):
        return _readonly(_signed_area(self.vertices, self.elements))

    @cached_property
    def diameters(self):
        """Element diameters (longest side)."""
        p = self.vertices[self.elements]
        d = np.stack([np.linalg.norm(p[:, j] - p[:, i], axis=1)
                      for i, j in LOCAL_EDGES], axis=1)
        return _readonly(d.max(axis=1))

    @cached_property
    def _edge_table(self):
        nv = self.num_vertices
        pairs = self.elements[:, LOCAL_EDGES]           # (ne, 3, 2)
        keys = _edge_keys(pairs, nv).ravel()
        ukeys, inverse = np.unique(keys, return_inverse=True)
        edges = np.stack([ukeys // nv, ukeys % nv], axis=1)
        element_edges = inverse.reshape(-1, 3)
        counts = np.bincount(inverse, minlength=len(ukeys))
        # first and second adjacent element, in element order
        order = np.argsort(inverse, kind="stable")
        owner = order // 3
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_elements = np.full((len(ukeys), 2), -1, dtype=np.int64)
        edge_elements[:, 0] = owner[start]
        two = counts >= 2
        edge_elements[two, 1] = owner[start[two] + 1]
        return (_readonly(edges), _readonly(element_edges),
                _readonly(edge_elements), _readonly(counts), ukeys)

    @property
    def edges(self):
        """Unique undirected edges ``(a, b)`` with ``a < b``, sorted."""
        return self._edge_table[0]

    @property
    def element_edges(self):
        """Edge index of each local edge, shape (ne, 3)."""
        return self._edge_table[1]

    @property
    def edge_elements(self):
        """Adjacent active elements of each edge; -1 marks a boundary side."""
        return self._edge_table[2]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def edge_lengths(self):
        p = self.vertices
        return _readonly(np.linalg.norm(p[self.edges[:, 1]] - p[self.edges[:, 0]], axis=1))

    @cached_property
    def boundary_edge_mask(self):
        return _readonly(self._edge_table[3] == 1)

    def edge_index(self, pairs):
        """Edge indices of vertex pairs; raises if a pair is not an edge."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        ukeys = self._edge_table[4]
        keys = _edge_keys(pairs, self.num_vertices)
        idx = np.searchsorted(ukeys, keys)
        idx = np.minimum(idx, len(ukeys) - 1)
        if len(keys) and not np.all(ukeys[idx] == keys):
            raise MeshError("vertex pair is not an edge of the mesh")
        return idx

    # -- checks ------------------------------------------------------------
    def check_conformity(self):
        """Audit the edge table; raise :class:`MeshError` on any violation.

        Interior edges must have exactly two active neighbours, boundary
        edges exactly one, the one-sided edges must coincide with the stored
        boundary edges, and the active elements must tile the domain.
        """
        counts = self._edge_table[3]
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two elements")
        if np.any(self.areas <= 0):
            bad = int(np.flatnonzero(self.areas <= 0)[0])
            raise MeshError(f"element {bad} has non-positive area")
        one_sided = np.sort(self._edge_table[4][counts == 1])
        declared = np.sort(_edge_keys(self.boundary_edges, self.num_vertices))
        if one_sided.shape != declared.shape or np.any(one_sided != declared):
            raise MeshError("hanging node: one-sided edges differ from the boundary")
        total = float(np.sum(self.areas))
        if abs(total - self._domain_area) > 1e-10 * self._domain_area:
            raise MeshError("active elements do not tile the domain")
        return True

    def is_refinement_of(self, coarse: "Triangulation") -> bool:
        """True if this mesh is a (possibly trivial) refinement of ``coarse``."""
        if self._lineage is not coarse._lineage:
            return False
        n = coarse.num_genealogy
        if self.num_genealogy < n or self.num_vertices < coarse.num_vertices:
            return False
        if not np.array_equal(self._all[:n], coarse._all):
            return False
        if not np.array_equal(self.vertices[:coarse.num_vertices], coarse.vertices):
            return False
        try:
            self.ancestors_in(coarse)
        except MeshError:
            return False
        return True

    def ancestors_in(self, coarse: "Triangulation"):
        """Position in ``coarse.elements`` of each active element's ancestor."""
        n = coarse.num_genealogy
        pos = np.full(n, -1, dtype=np.int64)
        pos[coarse.element_ids] = np.arange(coarse.num_elements)
        gid = self.element_ids.copy()
        while True:
            up = gid >= n
            if not up.any():
                break
            gid[up] = self._parent[gid[up]]
            if np.any(gid < 0):
                raise MeshError("meshes are not nested")
        out = pos[gid]
        if np.any(out < 0):
            raise MeshError("meshes are not nested")
        return out

    # -- locating points ---------------------------------------------------
    def barycentric(self, elements, points):
        """Barycentric coordinates of ``points[i]`` in ``elements[i]``."""
        tri = self.elements[np.asarray(elements)]
        p = self.vertices
        a, b, c = p[tri[..., 0]], p[tri[..., 1]], p[tri[..., 2]]
        points = np.asarray(points, dtype=float)
        v0, v1, v2 = b - a, c - a, points - a
        det = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
        l1 = (v2[..., 0] * v1[..., 1] - v2[..., 1] * v1[..., 0]) / det
        l2 = (v0[..., 0] * v2[..., 1] - v0[..., 1] * v2[..., 0]) / det
        return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)

    def locate(self, points, tol=1e-12):
        """Element containing each point (brute force; -1 when outside)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(points), -1, dtype=np.int64)
        ne = self.num_elements
        chunk = max(1, 2_000_000 // max(ne, 1))
        allel = np.arange(ne)
        for s in range(0, len(points), chunk):
            pts = points[s:s + chunk]
            lam = self.barycentric(allel[None, :], pts[:, None, :])
            inside = np.all(lam >= -tol, axis=-1)
            hit = inside.any(axis=1)
            out[s:s + chunk] = np.where(hit, inside.argmax(axis=1), -1)
        return out


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    angles: np.ndarray
    num_elements: int
    num_vertices: int


# -- construction -------------------------------------------------------------

def _label_longest_edge(p, tri):
    """Rotate each triangle so its longest side is opposite local vertex 0.

    Ties go to the side whose opposite vertex has the smallest id.  Cyclic
    rotation keeps the orientation.
    """
    tri = np.array(tri, dtype=np.int64)
    sq = np.stack([np.sum((p[tri[:, j]] - p[tri[:, i]]) ** 2, axis=1)
                   for i, j in LOCAL_EDGES], axis=1)
    longest = sq.max(axis=1, keepdims=True)
    candidate = sq >= longest * (1.0 - 1e-12)
    opp = np.where(candidate, tri, np.iinfo(np.int64).max)
    k = opp.argmin(axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(tri, idx, axis=1)


def load_initial(vertices, triangles, boundary=None) -> Triangulation:
    """Build the initial mesh T0 from vertex and triangle lists.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    triangles : array_like, shape (ne, 3)
        Counter-clockwise vertex triples, 0-based.
    boundary : array_like, shape (nb, 3), optional
        Rows ``(va, vb, marker)``.  When omitted the one-sided edges are
        used, all with marker 1.

    Raises
    ------
    MeshError
        On out-of-range or repeated indices, zero-area or inverted
        triangles, unused vertices, or a non-conforming configuration.
    """
    p = np.asarray(vertices, dtype=float).reshape(-1, 2)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    nv = len(p)
    if not np.all(np.isfinite(p)):
        raise MeshError("vertex coordinates must be finite")
    if len(t) == 0:
        raise MeshError("mesh has no triangles")
    if t.min() < 0 or t.max() >= nv:
        raise MeshError("triangle references a vertex out of range")
    if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
        raise MeshError("triangle with repeated vertex ids")
    used = np.zeros(nv, dtype=bool)
    used[t.ravel()] = True
    if not used.all():
        raise MeshError(f"dangling vertex {int(np.flatnonzero(~used)[0])}")
    area = _signed_area(p, t)
    scale = np.ptp(p, axis=0).max() ** 2
    if np.any(np.abs(area) <= 1e-14 * scale):
        raise MeshError(f"zero-area triangle {int(np.flatnonzero(np.abs(area) <= 1e-14 * scale)[0])}")
    if np.any(area < 0):
        raise MeshError(f"inverted (clockwise) triangle {int(np.flatnonzero(area < 0)[0])}")

    keys = _edge_keys(t[:, LOCAL_EDGES], nv).ravel()
    ukeys, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming input: edge shared by more than two triangles")
    one_sided = ukeys[counts == 1]

    if boundary is None or len(boundary) == 0:
        bedges = np.stack([one_sided // nv, one_sided % nv], axis=1)
        markers = np.ones(len(bedges), dtype=np.int64)
        # a vertex inside a one-sided edge is a hanging node
        a, b = p[bedges[:, 0]], p[bedges[:, 1]]
        d = b - a
        rel = p[None, :, :] - a[:, None, :]
        s = np.einsum("ijk,ik->ij", rel, d) / np.sum(d * d, axis=1)[:, None]
        cross = rel[..., 0] * d[:, None, 1] - rel[..., 1] * d[:, None, 0]
        on = (np.abs(cross) <= 1e-12 * np.sum(d * d, axis=1)[:, None]) & (s > 1e-12) & (s < 1 - 1e-12)
        if on.any():
            raise MeshError("non-conforming input: hanging node on a boundary side")
    else:
        bd = np.asarray(boundary, dtype=np.int64).reshape(-1, 3)
        bedges, markers = bd[:, :2], bd[:, 2]
        declared = np.sort(_edge_keys(bedges, nv))
        if len(np.unique(declared)) != len(declared):
            raise MeshError("repeated boundary edge")
        if declared.shape != one_sided.shape or np.any(declared != one_sided):
            raise MeshError("non-conforming input: one-sided edges do not match boundary list")

    t = _label_longest_edge(p, t)
    ne = len(t)
    mesh = Triangulation(p, t, parent=np.full(ne, -1), generation=np.zeros(ne),
                         root=np.arange(ne), element_ids=np.arange(ne),
                         boundary_edges=bedges, boundary_markers=markers)
    mesh.check_conformity()
    return mesh


def format_mesh(mesh: Triangulation) -> str:
    """Text form: ``nv ne nb`` header, vertices, triangles, boundary edges."""
    out = io.StringIO()
    out.write(f"{mesh.num_vertices} {mesh.num_elements} {len(mesh.boundary_edges)}\n")
    for x, y in mesh.vertices:
        out.write(f"{float(x)!r} {float(y)!r}\n")
    for a, b, c in mesh.elements:
        out.write(f"{a} {b} {c}\n")
    for (a, b), m in zip(mesh.boundary_edges, mesh.boundary_markers):
        out.write(f"{a} {b} {m}\n")
    return out.getvalue()


def write_mesh(mesh: Triangulation, path):
    with open(path, "w") as fh:
        fh.write(format_mesh(mesh))


def read_mesh(source) -> Triangulation:
    """Read the text mesh format from a path or an open file."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    tokens = text.split()
    try:
        nv, ne, nb = (int(v) for v in tokens[:3])
        pos = 3
        verts = np.array(tokens[pos:pos + 2 * nv], dtype=float).reshape(nv, 2)
        pos += 2 * nv
        tris = np.array(tokens[pos:pos + 3 * ne], dtype=np.int64).reshape(ne, 3)
        pos += 3 * ne
        bd = np.array(tokens[pos:pos + 3 * nb], dtype=np.int64).reshape(nb, 3)
        pos += 3 * nb
    except ValueError as exc:
        raise MeshError(f"malformed mesh file: {exc}") from None
    if pos != len(tokens):
        raise MeshError("malformed mesh file: trailing or missing entries")
    return load_initial(verts, tris, bd if nb else None)


# -- refinement ---------------------------------------------------------------

def _bisect(mesh: Triangulation, marked):
    """One closure-and-bisection pass; returns the refined mesh."""
    if len(marked) == 0:
        return mesh
    ne = mesh.num_elements
    tri = mesh.elements
    elem_edges = mesh.element_edges
    flagged = np.zeros(mesh.num_edges, dtype=bool)
    flagged[elem_edges[marked, 0]] = True
    for _ in range(MAX_CLOSURE_ROUNDS):
        need = flagged[elem_edges].any(axis=1) & ~flagged[elem_edges[:, 0]]
        if not need.any():
            break
        flagged[elem_edges[need, 0]] = True
    else:
        raise MeshError("refinement closure did not terminate")

    nv = mesh.num_vertices
    split_edges = np.flatnonzero(flagged)
    midpoint = np.full(mesh.num_edges, -1, dtype=np.int64)
    midpoint[split_edges] = nv + np.arange(len(split_edges))
    e = mesh.edges[split_edges]
    new_vertices = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
    vertices = np.concatenate([mesh.vertices, new_vertices])

    all_el = [mesh._all]
    parent = [mesh._parent]
    generation = [mesh._generation]
    root = [mesh._root]
    next_id = mesh.num_genealogy

    cur_tri = tri
    cur_mid = midpoint[elem_edges]
    cur_gid = mesh.element_ids
    keep = [cur_gid[cur_mid[:, 0] < 0]]
    split = cur_mid[:, 0] >= 0
    # a triangle has at most three flagged sides, so three rounds suffice
    for _ in range(3):
        if not split.any():
            break
        t = cur_tri[split]
        mid = cur_mid[split]
        gid = cur_gid[split]
        m = mid[:, 0]
        c1 = np.stack([m, t[:, 0], t[:, 1]], axis=1)
        c2 = np.stack([m, t[:, 2], t[:, 0]], axis=1)
        none = np.full(len(t), -1, dtype=np.int64)
        c1_mid = np.stack([mid[:, 2], none, none], axis=1)
        c2_mid = np.stack([mid[:, 1], none, none], axis=1)
        kids = np.stack([c1, c2], axis=1).reshape(-1, 3)
        kids_mid = np.stack([c1_mid, c2_mid], axis=1).reshape(-1, 3)
        kids_parent = np.repeat(gid, 2)
        kids_gid = next_id + np.arange(len(kids))
        next_id += len(kids)
        all_el.append(kids)
        parent.append(kids_parent)
        par_all_gen = np.concatenate(generation)
        par_all_root = np.concatenate(root)
        generation.append(par_all_gen[kids_parent] + 1)
        root.append(par_all_root[kids_parent])
        cur_tri, cur_mid, cur_gid = kids, kids_mid, kids_gid
        split = cur_mid[:, 0] >= 0
        keep.append(cur_gid[~split])
    if split.any():
        raise MeshError("bisection did not resolve all flagged edges")

    # boundary sides that were bisected are replaced by their halves
    bidx = mesh.edge_index(mesh.boundary_edges)
    bmid = midpoint[bidx]
    whole = bmid < 0
    be = mesh.boundary_edges
    halves = np.concatenate([np.stack([be[~whole, 0], bmid[~whole]], axis=1),
                             np.stack([bmid[~whole], be[~whole, 1]], axis=1)], axis=0)
    bedges = np.concatenate([be[whole], halves])
    bmark = np.concatenate([mesh.boundary_markers[whole],
                            mesh.boundary_markers[~whole],
                            mesh.boundary_markers[~whole]])
    order = np.lexsort((bedges[:, 1], bedges[:, 0]))

    active = np.sort(np.concatenate(keep))
    return Triangulation(vertices, np.concatenate(all_el), np.concatenate(parent),
                         np.concatenate(generation), np.concatenate(root), active,
                         bedges[order], bmark[order], lineage=mesh._lineage,
                         domain_area=mesh._domain_area)


def refine(mesh: Triangulation, marked, b: int = 1) -> Triangulation:
    """Bisect every marked element at least ``b`` times, keeping conformity.

    Parameters
    ----------
    mesh : Triangulation
    marked : iterable of int
        Positions in ``mesh.elements``.
    b : int
        Number of bisections applied to each marked element.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray)
                                  else marked, dtype=np.int64))
    if b < 1:
        raise MeshError("number of bisections must be at least 1")
    if len(marked) and (marked[0] < 0 or marked[-1] >= mesh.num_elements):
        bad = marked[(marked < 0) | (marked >= mesh.num_elements)][0]
        raise MeshError(f"unknown element id {int(bad)}")
    if len(marked) == 0:
        return mesh
    target_gids = mesh.element_ids[marked]
    out = mesh
    for rnd in range(b):
        if rnd == 0:
            sel = marked
        else:
            # descendants of the originally marked elements
            n0 = mesh.num_genealogy
            gid = out.element_ids.copy()
            while np.any(gid >= n0):
                up = gid >= n0
                gid[up] = out._parent[gid[up]]
            sel = np.flatnonzero(np.isin(gid, target_gids))
        out = _bisect(out, sel)
    return out


def uniform_refine(mesh: Triangulation) -> Triangulation:
    """Bisect every element once."""
    return refine(mesh, np.arange(mesh.num_elements), 1)


# -- instrumentation ----------------------------------------------------------

def _angles(mesh):
    p = mesh.vertices[mesh.elements]
    out = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        dot = np.sum(a * b, axis=1)
        out.append(np.arctan2(cross, dot))
    return np.concatenate(out)


def _dedup(values, tol=1e-12):
    v = np.sort(values)
    if len(v) == 0:
        return v
    keep = np.concatenate([[True], np.diff(v) > tol])
    return v[keep]


def quality(mesh: Triangulation) -> MeshQuality:
    """Minimum angle and the set of distinct angles (deduplicated at 1e-12)."""
    angles = _angles(mesh)
    return MeshQuality(min_angle=float(angles.min()), angles=_dedup(angles),
                       num_elements=mesh.num_elements, num_vertices=mesh.num_vertices)


def complexity_ratio(history) -> float:
    """``(#T_k - #T_0) / sum_{j<k} #M_j`` for a history of ``(#T_j, #M_j)``.

    ``history[j]`` holds the element count of mesh ``j`` and the number of
    elements marked on it; the marked count of the last entry is ignored.
    """
    history = list(history)
    if len(history) < 2:
        raise ValueError("complexity ratio needs at least two meshes")
    marked = sum(m for _, m in history[:-1])
    if marked == 0:
        raise ZeroDivisionError("no elements were marked; ratio undefined")
    return (history[-1][0] - history[0][0]) / marked


# -- structured meshes --------------------------------------------------------

def _grid(x0, x1, y0, y1, nx, ny):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return verts, tris


def square_mesh(n=1, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> Triangulation:
    """``n x n`` cells of a rectangle, each split along its SW-NE diagonal.

    Vertices are numbered row by row from ``(x0, y0)``.  With ``n == 1`` on
    the unit square both triangles share the diagonal as refinement edge.
    """
    verts, tris = _grid(x0, x1, y0, y1, n, n)
    return load_initial(verts, tris)


def lshape_mesh() -> Triangulation:
    """``(-1,1)^2`` minus the closed fourth quadrant, as six triangles."""
    verts = np.array([[-1, -1], [0, -1], [-1, 0], [0, 0], [1, 0],
                      [-1, 1], [0, 1], [1, 1]], dtype=float)
    tris = np.array([[0, 1, 3], [0, 3, 2], [2, 3, 6], [2, 6, 5],
                     [3, 4, 7], [3, 7, 6]])
    return load_initial(verts, tris)
