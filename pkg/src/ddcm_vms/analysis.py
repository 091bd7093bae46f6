"""Error norms, discrete stability norms, convergence rates, profiles and export."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, LocationError
from .fespace import quadrature, shape_functions
from .formulation import FIELDS, L, U

ERROR_QUAD_DEGREE = 8
SCALARS = ("u", "lam")
VECTORS = ("e", "s", "mu")
CSV_COLUMNS = ("h", "ndof", "err_u_L2", "err_u_H1", "err_lam_L2", "err_lam_H1",
               "err_e_L2", "err_s_L2", "err_mu_L2", "err_e_Hdiv", "err_s_Hdiv", "err_mu_Hdiv")
ERROR_COLUMNS = CSV_COLUMNS[2:]


def _tables(space, rule):
    phi, g, wdet, xq = space.tabulate(rule)
    return phi, g, wdet, xq


def _local(space, coeffs, comp):
    return np.asarray(coeffs)[comp * space.n_scalar + space.scalar_dof_map]


def field_at_quadrature(space, coeffs, comp, rule):
    """Values (M, nq) and gradients (M, nq, 2) of a scalar component."""
    phi, g, _, _ = _tables(space, rule)
    loc = _local(space, coeffs, comp)
    return loc @ phi.T, np.einsum("eqad,ea->eqd", g, loc)


@dataclass(frozen=True)
class ErrorReport:
    h: float
    ndof: int
    errors: dict
    h1_flagged: bool = False

    def __getitem__(self, key):
        if key == "h":
            return self.h
        if key == "ndof":
            return self.ndof
        return self.errors[key]

    def row(self):
        return {"h": self.h, "ndof": self.ndof, **{k: self.errors[k] for k in ERROR_COLUMNS}}


def _as_vec(v, shape):
    return [np.broadcast_to(np.asarray(c, dtype=float), shape) for c in v]


def error_norms(solution, exact, quad_degree=ERROR_QUAD_DEGREE):
    """L2, H1-seminorm and divergence errors against analytic fields.

    ``exact`` provides ``u, grad_u, lam, grad_lam, e, div_e, s, div_s, mu,
    div_mu`` as callables of ``(x, y)``.
    """
    space, x = solution.space, solution.coefficients
    rule = quadrature(quad_degree)
    _, _, wdet, xq = _tables(space, rule)
    X, Y = xq[..., 0], xq[..., 1]
    shape = X.shape
    integ = lambda a: float(np.sqrt(max(np.sum(a * wdet), 0.0)))
    errs = {}
    for name, comp in (("u", U), ("lam", L)):
        v, g = field_at_quadrature(space, x, comp, rule)
        ex = np.broadcast_to(getattr(exact, name)(X, Y), shape)
        gx, gy = _as_vec(getattr(exact, "grad_" + name)(X, Y), shape)
        errs[f"err_{name}_L2"] = integ((v - ex) ** 2)
        errs[f"err_{name}_H1"] = integ((g[..., 0] - gx) ** 2 + (g[..., 1] - gy) ** 2)
    for name in VECTORS:
        cx, cy = FIELDS[name]
        vx, gxh = field_at_quadrature(space, x, cx, rule)
        vy, gyh = field_at_quadrature(space, x, cy, rule)
        ex, ey = _as_vec(getattr(exact, name)(X, Y), shape)
        dv = np.broadcast_to(getattr(exact, "div_" + name)(X, Y), shape)
        errs[f"err_{name}_L2"] = integ((vx - ex) ** 2 + (vy - ey) ** 2)
        errs[f"err_{name}_Hdiv"] = integ((gxh[..., 0] + gyh[..., 1] - dv) ** 2)
    return ErrorReport(float(solution.mesh.h), int(solution.layout.dimension), errs,
                       h1_flagged=solution.config.formulation == "dual")


def _elementwise_sq(space, coeffs, rule):
    """Per-element integrals of squared values, gradients and divergences."""
    _, _, wdet, _ = _tables(space, rule)
    out = {}
    for name, comp in (("u", U), ("lam", L)):
        v, g = field_at_quadrature(space, coeffs, comp, rule)
        out[name] = np.sum(v**2 * wdet, axis=1)
        out["grad_" + name] = np.sum((g**2).sum(-1) * wdet, axis=1)
    for name in VECTORS:
        cx, cy = FIELDS[name]
        vx, gx = field_at_quadrature(space, coeffs, cx, rule)
        vy, gy = field_at_quadrature(space, coeffs, cy, rule)
        out[name] = np.sum((vx**2 + vy**2) * wdet, axis=1)
        out["div_" + name] = np.sum((gx[..., 0] + gy[..., 1]) ** 2 * wdet, axis=1)
    return out


def discrete_norm(solution, config=None, coefficients=None):
    """Mesh-dependent stability norm of the primal or dual discrete problem.

    Broken terms use the element size ``h_K`` inside each element integral.
    """
    config = solution.config if config is None else config
    x = solution.coefficients if coefficients is None else coefficients
    space = solution.space
    sq = _elementwise_sq(space, x, quadrature(2 * space.degree))
    h2 = solution.mesh.element_sizes ** 2
    k, l2 = config.kappa, config.ell**2
    S = lambda name, w=1.0: float(np.sum(w * sq[name]))
    if config.formulation == "primal":
        total = (S("u") / l2 + S("grad_u") + S("e") + k * S("s") + k * S("div_s", h2)
                 + S("lam") / (k * l2) + S("grad_lam") / k + S("mu") + S("div_mu", h2))
    else:
        total = (S("u") / l2 + S("grad_u", h2) / l2 + S("e") + k * S("s")
                 + k * l2 * S("div_s") + S("lam") / (k * l2) + S("grad_lam", h2) / (k * l2)
                 + S("mu") + l2 * S("div_mu"))
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class RateTable:
    h: np.ndarray
    ndof: np.ndarray
    errors: dict  # column -> (n,) array
    rates: dict  # column -> (n,) array, first entry nan

    def rate(self, column, level=-1):
        return float(self.rates[column][level])

    def rows(self):
        out = []
        for i in range(len(self.h)):
            r = {"h": float(self.h[i]), "ndof": int(self.ndof[i])}
            for c in self.errors:
                r[c] = float(self.errors[c][i])
            for c in self.errors:
                r[c + "_rate"] = float(self.rates[c][i])
            out.append(r)
        return out

    @property
    def columns(self):
        return ("h", "ndof") + tuple(self.errors) + tuple(c + "_rate" for c in self.errors)


def observed_rates(h, err):
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2:
        raise InvalidArgument("need at least two levels")
    if np.any(np.diff(h) >= 0):
        raise InvalidArgument("mesh sizes must be strictly decreasing")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])
    return np.concatenate([[np.nan], r])


def convergence_rates(reports, columns=ERROR_COLUMNS):
    """Observed orders ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})`` per column."""
    if len(reports) < 2:
        raise InvalidArgument("need at least two reports")
    h = np.array([r["h"] for r in reports], dtype=float)
    ndof = np.array([r["ndof"] for r in reports], dtype=np.int64)
    errs = {c: np.array([r[c] for r in reports], dtype=float) for c in columns}
    rates = {c: observed_rates(h, e) for c, e in errs.items()}
    return RateTable(h, ndof, errs, rates)


class PointLocator:
    """Bucket-grid point location with a barycentric containment test."""

    def __init__(self, mesh, tol=1e-12):
        self.mesh = mesh
        self.tol = tol
        p = mesh.nodes[mesh.triangles]
        self._lo = mesh.nodes.min(axis=0)
        span = np.maximum(mesh.nodes.max(axis=0) - self._lo, 1e-300)
        self._nb = max(1, int(math.sqrt(mesh.n_elements / 2)))
        self._cell = span / self._nb
        bmin = np.floor((p.min(axis=1) - self._lo) / self._cell - 1e-9).astype(int)
        bmax = np.floor((p.max(axis=1) - self._lo) / self._cell + 1e-9).astype(int)
        bmin = np.clip(bmin, 0, self._nb - 1)
        bmax = np.clip(bmax, 0, self._nb - 1)
        buckets = {}
        for e in range(mesh.n_elements):
            for i in range(bmin[e, 0], bmax[e, 0] + 1):
                for j in range(bmin[e, 1], bmax[e, 1] + 1):
                    buckets.setdefault((i, j), []).append(e)
        self._buckets = {k: np.array(v) for k, v in buckets.items()}
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self._p0 = p[:, 0]
        self._inv = np.stack([np.column_stack([d2[:, 1], -d2[:, 0]]),
                              np.column_stack([-d1[:, 1], d1[:, 0]])], axis=1) / det[:, None, None]

    def bary(self, elements, point):
        rel = np.asarray(point, dtype=float) - self._p0[elements]
        l12 = np.einsum("eij,ej->ei", self._inv[elements], rel)
        return np.column_stack([1.0 - l12.sum(axis=1), l12])

    def locate(self, points):
        """Element index and barycentric coordinates of each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        elems = np.empty(len(pts), dtype=np.int64)
        bary = np.empty((len(pts), 3))
        for k, pt in enumerate(pts):
            ij = np.floor((pt - self._lo) / self._cell).astype(int)
            ij = np.clip(ij, 0, self._nb - 1)
            cand = self._buckets.get((int(ij[0]), int(ij[1])))
            found = False
            if cand is not None:
                b = self.bary(cand, np.broadcast_to(pt, (len(cand), 2)))
                ok = np.flatnonzero(b.min(axis=1) >= -self.tol)
                if ok.size:
                    best = ok[np.argmax(b[ok].min(axis=1))]
                    elems[k], bary[k] = cand[best], b[best]
                    found = True
            if not found:
                raise LocationError(f"point ({pt[0]:.17g}, {pt[1]:.17g}) lies outside the mesh")
        return elems, bary


def evaluate_at_points(solution, comps, points, locator=None):
    """Point values of scalar components, shape (len(comps), npts)."""
    loc = PointLocator(solution.mesh) if locator is None else locator
    elems, bary = loc.locate(points)
    vals, _ = shape_functions(solution.space.degree, bary)
    dm = solution.space.scalar_dof_map[elems]
    N = solution.space.n_scalar
    x = solution.coefficients
    return np.array([np.sum(vals * x[c * N + dm], axis=1) for c in comps])


def path_points(path, n=512, center=(0.5, 0.5)):
    """``'diagonal'`` (0,0)-(1,1) or ``('circle', r)`` around ``center``; ``n`` samples."""
    if path == "diagonal":
        t = np.linspace(0.0, 1.0, n)
        return np.column_stack([t, t])
    if isinstance(path, tuple) and len(path) == 2 and path[0] == "circle":
        r = float(path[1])
        th = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)])
    raise InvalidArgument(f"unknown path {path!r}")


@dataclass(frozen=True)
class Profile:
    points: np.ndarray
    values: np.ndarray
    reference: np.ndarray
    rmse: float


def rmse(values, reference):
    d = np.asarray(values, dtype=float) - np.asarray(reference, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def profile(source, path, reference=None, quantity="u", n=512, locator=None):
    """Sample ``quantity`` along ``path`` and compare with ``reference``.

    ``source`` is a Solution (``quantity`` is ``'u'``, ``'lam'`` or
    ``'|s|'``-style magnitude of a vector field) or a callable of points.
    ``reference`` is a callable of points or None (zero).
    """
    pts = path_points(path, n)
    if callable(source):
        vals = np.asarray(source(pts), dtype=float)
    else:
        name = quantity.strip("|")
        comps = FIELDS[name]
        v = evaluate_at_points(source, comps, pts, locator)
        vals = v[0] if len(comps) == 1 else np.sqrt((v**2).sum(axis=0))
    ref = np.zeros_like(vals) if reference is None else np.asarray(reference(pts), dtype=float)
    return Profile(pts, vals, ref, rmse(vals, ref))


def export_csv(table, path, columns=None):
    """Write rows (dicts or a RateTable) with 17-significant-digit floats and LF endings."""
    if isinstance(table, RateTable):
        columns = table.columns if columns is None else columns
        rows = table.rows()
    else:
        rows = list(table)
        columns = tuple(rows[0]) if columns is None else columns
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, [{k: float(v) for k, v in zip(header, r)} for r in body]


def export_vtk(mesh, path, point_data=None, cell_data=None, title="ddcm_vms"):
    """Legacy ASCII VTK unstructured grid of linear triangles (cell type 5).

    ``point_data`` values have one entry (or 2-vector) per mesh node,
    ``cell_data`` one per element. Vectors are padded to 3 components.
    """
    point_data = point_data or {}
    cell_data = cell_data or {}
    nn, ne = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nn} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {ne} {4 * ne}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {ne}")
    lines += ["5"] * ne

    def block(kind, n, data):
        if not data:
            return []
        out = [f"{kind} {n}"]
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape[0] != n:
                if arr.ndim == 2 and arr.shape[1] == n:
                    arr = arr.T
                else:
                    raise InvalidArgument(f"field {name!r}: expected {n} entries")
            key = name.replace(" ", "_")
            if arr.ndim == 1:
                out += [f"SCALARS {key} double 1", "LOOKUP_TABLE default"]
                out += ["%.17g" % v for v in arr]
            else:
                out.append(f"VECTORS {key} double")
                out += [f"{a:.17g} {b:.17g} 0" for a, b in arr[:, :2]]
        return out

    lines += block("POINT_DATA", nn, point_data)
    lines += block("CELL_DATA", ne, cell_data)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_vtk(path):
    """Structural reader for files written by ``export_vtk``."""
    with open(path) as fh:
        tok = fh.read().split("\n")
    out = {"header": tok[0], "format": tok[2], "dataset": tok[3].split()[1],
           "point_data": {}, "cell_data": {}}
    i = 4
    section = None
    while i < len(tok):
        words = tok[i].split()
        if not words:
            i += 1
            continue
        key = words[0]
        if key == "POINTS":
            n = int(words[1])
            out["points"] = np.array([list(map(float, t.split())) for t in tok[i + 1:i + 1 + n]])
            i += 1 + n
        elif key == "CELLS":
            n = int(words[1])
            out["cells"] = np.array([list(map(int, t.split())) for t in tok[i + 1:i + 1 + n]])
            out["cells_size"] = int(words[2])
            i += 1 + n
        elif key == "CELL_TYPES":
            n = int(words[1])
            out["cell_types"] = np.array([int(t) for t in tok[i + 1:i + 1 + n]])
            i += 1 + n
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = "point_data" if key == "POINT_DATA" else "cell_data"
            out[section + "_count"] = int(words[1])
            i += 1
        elif key == "SCALARS":
            n = out[section + "_count"]
            out[section][words[1]] = np.array([float(t) for t in tok[i + 2:i + 2 + n]])
            i += 2 + n
        elif key == "VECTORS":
            n = out[section + "_count"]
            out[section][words[1]] = np.array(
                [list(map(float, t.split())) for t in tok[i + 1:i + 1 + n]])
            i += 1 + n
        else:
            raise ValueError(f"unexpected VTK keyword {key!r}")
    return out
