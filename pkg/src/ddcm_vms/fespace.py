"""Continuous Lagrange spaces CG1/CG2 on triangles.

Scalar dofs are numbered vertices first, then (for CG2) one dof per edge in
the mesh's edge order. A vector space stacks ``components`` copies of the
scalar numbering, component-major.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import SingularElement, UnsupportedDegree
from .mesh import BOTTOM, LEFT, RIGHT, TOP, Mesh

OUTWARD_NORMALS = {
    LEFT: (-1.0, 0.0),
    RIGHT: (1.0, 0.0),
    BOTTOM: (0.0, -1.0),
    TOP: (0.0, 1.0),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle ``{x, y >= 0, x + y <= 1}``.

    ``points`` are barycentric ``(l0, l1, l2)`` with ``x = l1, y = l2``;
    ``weights`` sum to the reference area 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def quadrature(degree):
    """Conical-product Gauss rule exact for polynomials of total degree ``degree``.

    Collapses the unit square onto the triangle, using Gauss-Jacobi(1, 0)
    points in the collapsed direction and Gauss-Legendre in the other.
    """
    m = max(1, (degree + 2) // 2)
    t, wt = roots_jacobi(m, 1.0, 0.0)
    u = 0.5 * (1.0 + t)
    wu = 0.25 * wt
    s, ws = roots_legendre(m)
    v = 0.5 * (1.0 + s)
    wv = 0.5 * ws
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu.ravel()
    y = ((1.0 - uu) * vv).ravel()
    w = np.outer(wu, wv).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    rule = QuadratureRule(bary, w, degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def shape_functions(degree, bary):
    """Reference basis values and barycentric derivatives.

    Returns ``values`` of shape (npts, nloc) and ``dvalues`` of shape
    (npts, nloc, 3), the derivatives with respect to ``l0, l1, l2``.
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    l = bary.T
    npts = bary.shape[0]
    if degree == 1:
        values = bary.copy()
        dvalues = np.broadcast_to(np.eye(3), (npts, 3, 3)).copy()
        return values, dvalues
    if degree == 2:
        values = np.empty((npts, 6))
        dvalues = np.zeros((npts, 6, 3))
        for i in range(3):
            values[:, i] = l[i] * (2.0 * l[i] - 1.0)
            dvalues[:, i, i] = 4.0 * l[i] - 1.0
        for k in range(3):
            i, j = k, (k + 1) % 3
            values[:, 3 + k] = 4.0 * l[i] * l[j]
            dvalues[:, 3 + k, i] = 4.0 * l[j]
            dvalues[:, 3 + k, j] = 4.0 * l[i]
        return values, dvalues
    raise UnsupportedDegree(f"degree {degree} not supported (1 or 2)")


def barycentric_gradients(mesh, elements=None):
    """Physical gradients of the three barycentric coordinates, (M, 3, 2)."""
    tri = mesh.triangles if elements is None else mesh.triangles[np.atleast_1d(elements)]
    p = mesh.nodes[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(np.abs(det) <= 1e-300):
        raise SingularElement("degenerate element Jacobian")
    # rows of J^{-1}, with J = [d1 d2]
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1)


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh
    degree: int
    components: int = 1

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise UnsupportedDegree(f"degree {self.degree} not supported (1 or 2)")
        if self.components not in (1, 2):
            raise ValueError("components must be 1 or 2")

    @property
    def n_local(self):
        """Scalar basis functions per element."""
        return 3 if self.degree == 1 else 6

    @property
    def n_scalar(self):
        m = self.mesh
        return m.n_nodes if self.degree == 1 else m.n_nodes + m.n_edges

    @property
    def dof_count(self):
        return self.components * self.n_scalar

    @cached_property
    def scalar_dof_map(self):
        m = self.mesh
        if self.degree == 1:
            dm = m.triangles.copy()
        else:
            dm = np.hstack([m.triangles, m.n_nodes + m.element_edges])
        dm.setflags(write=False)
        return dm

    @cached_property
    def element_dof_map(self):
        """(M, components * n_local) global dofs, component-major per element."""
        sd = self.scalar_dof_map
        dm = np.hstack([sd + c * self.n_scalar for c in range(self.components)])
        dm.setflags(write=False)
        return dm

    @cached_property
    def dof_points(self):
        """Coordinates of each scalar dof (vertex or edge midpoint)."""
        m = self.mesh
        if self.degree == 1:
            pts = m.nodes.copy()
        else:
            pts = np.vstack([m.nodes, m.nodes[m.edges].mean(axis=1)])
        pts.setflags(write=False)
        return pts

    def tabulate(self, rule):
        """Basis data at the quadrature points of every element.

        Returns ``(phi, grad, wdet, xq)``: values (nq, nloc), physical
        gradients (M, nq, nloc, 2), weights times Jacobian (M, nq) and
        physical points (M, nq, 2).
        """
        phi, dphi = shape_functions(self.degree, rule.points)
        gl = barycentric_gradients(self.mesh)
        grad = np.einsum("qai,eid->eqad", dphi, gl)
        wdet = np.outer(2.0 * self.mesh.areas, rule.weights)
        xq = np.einsum("qi,eid->eqd", rule.points, self.mesh.nodes[self.mesh.triangles])
        return phi, grad, wdet, xq


def build_space(mesh, degree, components=1):
    return FeSpace(mesh, degree, components)


def eval_basis(space, element, ref_point):
    """Local scalar basis values (nloc,) and physical gradients (nloc, 2) at a barycentric point."""
    vals, dvals = shape_functions(space.degree, np.asarray(ref_point, dtype=float)[None, :])
    gl = barycentric_gradients(space.mesh, element)[0]
    return vals[0], dvals[0] @ gl


@dataclass(frozen=True)
class BoundaryDof:
    dof: int
    point: tuple
    normal: tuple | None


def _boundary_scalar_dofs(space):
    """Map scalar dof -> set of markers of the boundary edges it lies on."""
    m = space.mesh
    markers = {}
    if space.degree == 2:
        key = {tuple(e): k for k, e in enumerate(m.edges.tolist())}
    for i, j, mk in m.boundary_edges.tolist():
        dofs = [i, j]
        if space.degree == 2:
            dofs.append(m.n_nodes + key[(min(i, j), max(i, j))])
        for d in dofs:
            markers.setdefault(d, set()).add(mk)
    return markers


def boundary_dofs(space, mode="scalar-trace"):
    """Boundary dofs of ``space``.

    ``scalar-trace`` lists every global dof located on the boundary (all
    components). ``normal-trace`` requires a 2-vector space and lists, per
    boundary location, the scalar location index with the outward unit
    normal of its boundary edge; a corner location appears once per normal.
    """
    markers = _boundary_scalar_dofs(space)
    pts = space.dof_points
    out = []
    if mode == "scalar-trace":
        for c in range(space.components):
            for d in sorted(markers):
                out.append(BoundaryDof(c * space.n_scalar + d, tuple(pts[d]), None))
        return out
    if mode == "normal-trace":
        if space.components != 2:
            raise ValueError("normal-trace mode needs a 2-vector space")
        for d in sorted(markers):
            for mk in sorted(markers[d]):
                out.append(BoundaryDof(d, tuple(pts[d]), OUTWARD_NORMALS[mk]))
        return out
    raise ValueError(f"unknown mode {mode!r}")


def interpolate(space, f):
    """Nodal interpolant; ``f(x, y)`` returns a scalar array or a 2-sequence of arrays."""
    pts = space.dof_points
    val = f(pts[:, 0], pts[:, 1])
    if space.components == 1:
        return np.broadcast_to(np.asarray(val, dtype=float), (space.n_scalar,)).copy()
    comps = [np.broadcast_to(np.asarray(v, dtype=float), (space.n_scalar,)) for v in val]
    return np.concatenate(comps)
