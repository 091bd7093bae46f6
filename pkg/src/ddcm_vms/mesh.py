"""Triangulations of the unit square.

Two generators are provided: a structured mesh with every cell split along
the lower-left to upper-right diagonal, and an inclusion-aligned variant in
which the mesh nodes on the interface between inside and outside elements
are projected radially onto a circle, so that a closed polyline of element
edges follows the circle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import InvalidArgument, ParseError

LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3
MAGIC = "ddcm-mesh 1"


def _signed_areas(nodes, triangles):
    p0 = nodes[triangles[:, 0]]
    p1 = nodes[triangles[:, 1]]
    p2 = nodes[triangles[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _longest_edges(nodes, triangles):
    p = nodes[triangles]
    lengths = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ], axis=1)
    return lengths.max(axis=1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with boundary markers and region tags.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (M, 3) int array, counterclockwise
    boundary_edges : (B, 3) int array of ``(i, j, marker)``
    element_region : (M,) int array, 0 = matrix, 1 = inclusion
    h : float, max over elements of the longest edge
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    element_region: np.ndarray
    h: float = field(default=float("nan"))
    unsnapped: int = 0

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        bnd = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 3)
        region = np.ascontiguousarray(self.element_region, dtype=np.int64)
        for a in (nodes, tris, bnd, region):
            a.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", bnd)
        object.__setattr__(self, "element_region", region)
        if not math.isfinite(self.h):
            object.__setattr__(self, "h", float(_longest_edges(nodes, tris).max()))

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @cached_property
    def areas(self):
        return _signed_areas(self.nodes, self.triangles)

    @cached_property
    def element_sizes(self):
        """Longest edge of each triangle."""
        return _longest_edges(self.nodes, self.triangles)

    @cached_property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def edges(self):
        """Unique edges as sorted node pairs, in order of first appearance."""
        local = self.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
        local = np.sort(local, axis=1)
        _, first, inverse = np.unique(local, axis=0, return_index=True, return_inverse=True)
        # renumber by first appearance for a traversal-order numbering
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        edges = local[np.sort(first)]
        element_edges = rank[inverse.ravel()].reshape(-1, 3)
        object.__setattr__(self, "_element_edges", element_edges)
        return edges

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def element_edges(self):
        """(M, 3) edge indices; local edge i joins local vertices i and i+1."""
        self.edges
        return self._element_edges

    def edge_counts(self):
        """Number of triangles sharing each edge."""
        return np.bincount(self.element_edges.ravel(), minlength=self.n_edges)

    def validate(self):
        """Raise InvalidArgument if any mesh invariant is violated."""
        if np.any(self.areas <= 0):
            bad = int(np.flatnonzero(self.areas <= 0)[0])
            raise InvalidArgument(f"triangle {bad} has non-positive area")
        if np.any(self.nodes < -1e-12) or np.any(self.nodes > 1 + 1e-12):
            raise InvalidArgument("node outside the unit square")
        counts = self.edge_counts()
        if np.any(counts > 2):
            raise InvalidArgument("edge shared by more than two triangles")
        keys = {tuple(sorted(e)) for e in self.boundary_edges[:, :2].tolist()}
        boundary = {tuple(e) for e in self.edges[counts == 1].tolist()}
        if keys != boundary:
            raise InvalidArgument("boundary edge list does not match mesh boundary")


def _structured(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    t = np.arange(n + 1) / n
    xx, yy = np.meshgrid(t, t)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    a = j * (n + 1) + i
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1, np.full(n, BOTTOM)])
    right = np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n, np.full(n, RIGHT)])
    top = np.column_stack([n * (n + 1) + k + 1, n * (n + 1) + k, np.full(n, TOP)])
    left = np.column_stack([(k + 1) * (n + 1), k * (n + 1), np.full(n, LEFT)])
    bnd = np.vstack([bottom, right, top, left])
    return nodes, tris, bnd


def generate_unit_square_mesh(n):
    """Structured triangulation with ``(n+1)**2`` nodes and ``2 n**2`` triangles."""
    nodes, tris, bnd = _structured(n)
    return Mesh(nodes, tris, bnd, np.zeros(len(tris), dtype=np.int64), h=math.sqrt(2.0) / n)


def generate_inclusion_mesh(n, center=(0.5, 0.5), radius=0.25):
    """Structured mesh whose element edges follow the circle ``|x - center| = radius``.

    Elements are first classified by whether their centroid lies inside the
    circle; every node shared by an inside and an outside element is then
    projected radially onto the circle. A projection that would invert an
    adjacent element is undone and counted in ``Mesh.unsnapped``.
    """
    center = np.asarray(center, dtype=float)
    if not (0.0 < radius < 0.5):
        raise InvalidArgument(f"radius must lie in (0, 0.5), got {radius!r}")
    if np.any(center - radius <= 0.0) or np.any(center + radius >= 1.0):
        raise InvalidArgument("circle must lie strictly inside the unit square")
    nodes, tris, bnd = _structured(n)

    cent = nodes[tris].mean(axis=1)
    inside = np.linalg.norm(cent - center, axis=1) < radius
    # a triangle with all three vertices on the interface would collapse onto
    # the circle; move it to the other side and reclassify
    for _ in range(10):
        on_itf = _interface_nodes(tris, inside, len(nodes))
        flat = on_itf[tris].all(axis=1)
        if not flat.any():
            break
        # flip one side only, flipping both would just swap them
        pick = flat & inside if np.any(flat & inside) else flat
        inside[pick] = ~inside[pick]
    interface = np.flatnonzero(_interface_nodes(tris, inside, len(nodes)))

    node_tris = [[] for _ in range(len(nodes))]
    for k, tri in enumerate(tris):
        for v in tri:
            node_tris[v].append(k)

    nodes = nodes.copy()
    unsnapped = 0
    # closest-first so that large moves see already-placed neighbours
    dist = np.abs(np.linalg.norm(nodes[interface] - center, axis=1) - radius)
    for v in interface[np.argsort(dist, kind="stable")]:
        d = nodes[v] - center
        r = np.linalg.norm(d)
        if r == 0.0:
            unsnapped += 1
            continue
        old = nodes[v].copy()
        nodes[v] = center + d * (radius / r)
        adj = tris[node_tris[v]]
        if np.any(_signed_areas(nodes, adj) <= 0.0):
            nodes[v] = old
            unsnapped += 1

    return Mesh(nodes, tris, bnd, inside.astype(np.int64), unsnapped=unsnapped)


def _interface_nodes(tris, inside, n_nodes):
    touch_in = np.zeros(n_nodes, dtype=bool)
    touch_out = np.zeros(n_nodes, dtype=bool)
    touch_in[tris[inside].ravel()] = True
    touch_out[tris[~inside].ravel()] = True
    return touch_in & touch_out


def interface_edges(mesh):
    """Edges separating region 0 from region 1."""
    reg = mesh.element_region
    ee = mesh.element_edges
    owner = np.full((mesh.n_edges, 2), -1, dtype=np.int64)
    for k in range(3):
        e = ee[:, k]
        slot = (owner[e, 0] >= 0).astype(int)
        owner[e, slot] = np.arange(mesh.n_elements)
    both = np.all(owner >= 0, axis=1)
    cross = both.copy()
    cross[both] = reg[owner[both, 0]] != reg[owner[both, 1]]
    return mesh.edges[cross]


def save_mesh(mesh):
    """Serialize to the line-oriented ASCII mesh format."""
    out = [MAGIC, f"nodes {mesh.n_nodes}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out.append(f"triangles {mesh.n_elements}")
    out += [f"{i} {j} {k} {r}" for (i, j, k), r in zip(mesh.triangles.tolist(), mesh.element_region.tolist())]
    out.append(f"boundary_edges {len(mesh.boundary_edges)}")
    out += [f"{i} {j} {m}" for i, j, m in mesh.boundary_edges.tolist()]
    return "\n".join(out) + "\n"


def load_mesh(text):
    """Parse the ASCII mesh format; raises ParseError with a 1-based line number."""
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of document", pos + 1)
        pos += 1
        return lines[pos - 1].split()

    def header(name):
        tok = next_line()
        if len(tok) != 2 or tok[0] != name:
            raise ParseError(f"expected '{name} <count>'", pos)
        try:
            count = int(tok[1])
        except ValueError:
            raise ParseError(f"bad count {tok[1]!r}", pos) from None
        if count < 0:
            raise ParseError("negative count", pos)
        return count

    def row(width, conv):
        tok = next_line()
        if len(tok) != width:
            raise ParseError(f"expected {width} fields, got {len(tok)}", pos)
        try:
            return [conv(t) for t in tok]
        except ValueError:
            raise ParseError(f"unparsable entry in {' '.join(tok)!r}", pos) from None

    if next_line() != MAGIC.split():
        raise ParseError(f"missing '{MAGIC}' header", 1)
    nn = header("nodes")
    nodes = np.array([row(2, float) for _ in range(nn)], dtype=float).reshape(-1, 2)
    nt = header("triangles")
    tri_start = pos + 1
    trows = [row(4, int) for _ in range(nt)]
    nb = header("boundary_edges")
    bnd_start = pos + 1
    brows = [row(3, int) for _ in range(nb)]

    tris = np.array(trows, dtype=np.int64).reshape(-1, 4)
    for k, t in enumerate(trows):
        if min(t[:3]) < 0 or max(t[:3]) >= nn:
            raise ParseError(f"triangle {k} references node out of range", tri_start + k)
    for k, b in enumerate(brows):
        if min(b[:2]) < 0 or max(b[:2]) >= nn:
            raise ParseError(f"boundary edge {k} references node out of range", bnd_start + k)
        if b[2] not in (LEFT, RIGHT, BOTTOM, TOP):
            raise ParseError(f"unknown boundary marker {b[2]}", bnd_start + k)
    if nt:
        areas = _signed_areas(nodes, tris[:, :3])
        bad = np.flatnonzero(areas <= 0)
        if bad.size:
            k = int(bad[0])
            raise ParseError(f"triangle {k} has non-positive signed area (clockwise or degenerate)", tri_start + k)
    return Mesh(nodes, tris[:, :3], np.array(brows, dtype=np.int64).reshape(-1, 3), tris[:, 3])
