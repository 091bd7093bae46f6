"""Primal and dual five-field DDCM systems with VMS stabilization.

Unknowns ``(u, e, s, lam, mu)`` are discretized with one equal-order CG_k
scalar space, giving eight scalar components (see ``COMPONENTS``). With
the orthogonal-subscale method, one projection field ``xi_w`` per
stabilized residual is appended and solved monolithically.

Residual operators (strong form, with data ``F_w`` on the right):

    R_u   = zeta lam + div mu        F_u   = f
    R_e   = e + mu                   F_e   = e~
    R_s   = kappa s - grad lam       F_s   = kappa s~
    R_lam = zeta u + div s           F_lam = q
    R_mu  = grad u - e               F_mu  = 0

The stabilization adds ``-sum_w tau_w <P'(R_w(x) - F_w), R_w(dx)>``.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.sparse as sp

from .errors import ConfigWarning, InconsistentBC, InvalidConfig
from .fespace import boundary_dofs, build_space
from .forms import Assembler, Term, add, div, evaluate, grad, scale, val, vec
from .sparse import compress, solve_direct

U, EX, EY, SX, SY, L, MX, MY = range(8)
COMPONENTS = ("u", "e_x", "e_y", "s_x", "s_y", "lam", "mu_x", "mu_y")
FIELDS = {"u": (U,), "e": (EX, EY), "s": (SX, SY), "lam": (L,), "mu": (MX, MY)}
FIELD_ORDER = ("u", "e", "s", "lam", "mu")
K_NAMES = {"u": "k_u", "e": "k_e", "s": "k_s", "lam": "k_lam", "mu": "k_mu"}

FORMULATIONS = ("primal", "dual")
METHODS = ("asgs", "osgs", "none")
BC_MODES = ("dirichlet", "neumann")


@dataclass(frozen=True)
class ProblemConfig:
    formulation: str = "primal"
    method: str = "asgs"
    kappa: float = 1.0
    zeta: float = 1.0
    ell: float = 1.0
    k_u: float = 0.0
    k_e: float = 0.125
    k_s: float = 0.125
    k_lam: float = 0.0
    k_mu: float = 0.125
    degree: int = 1
    bc_mode: str = "dirichlet"

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise InvalidConfig(f"formulation must be one of {FORMULATIONS}")
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}")
        if self.bc_mode not in BC_MODES:
            raise InvalidConfig(f"bc_mode must be one of {BC_MODES}")
        if self.degree not in (1, 2):
            raise InvalidConfig("degree must be 1 or 2")
        for name in ("kappa", "zeta", "ell") + tuple(K_NAMES.values()):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise InvalidConfig(f"{name} must be finite")
        if not self.kappa > 0:
            raise InvalidConfig("kappa must be positive")
        if not self.ell > 0:
            raise InvalidConfig("ell must be positive")
        if self.zeta < 0:
            raise InvalidConfig("zeta must be non-negative")
        for name in K_NAMES.values():
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be non-negative")
        if self.formulation == "dual" and self.dimensionless_group >= 2.0:
            warnings.warn(
                f"kappa*zeta^2*ell^4 = {self.dimensionless_group:g} >= 2: outside the "
                "range where the dual problem is known to be stable", ConfigWarning,
                stacklevel=3)

    @property
    def dimensionless_group(self):
        return self.kappa * self.zeta**2 * self.ell**4

    @property
    def stab_constants(self):
        return {w: getattr(self, K_NAMES[w]) for w in FIELD_ORDER}

    def with_(self, **kw):
        return replace(self, **kw)


def default_constants(formulation, example=1):
    """Stabilization constants used in the two benchmark studies."""
    if formulation == "primal":
        base = dict(k_u=0.0, k_lam=0.0) if example == 1 else dict(k_u=1.0, k_lam=1.0)
        return dict(base, k_e=0.125, k_s=0.125, k_mu=0.125)
    if formulation == "dual":
        return dict(k_u=0.25, k_lam=0.25, k_e=0.25, k_s=1.0,
                    k_mu=0.25 if example == 1 else 0.125)
    raise InvalidConfig(f"unknown formulation {formulation!r}")


def make_config(formulation="primal", method="asgs", example=1, **kw):
    """ProblemConfig with benchmark defaults; keyword arguments override."""
    base = dict(formulation=formulation, method=method,
                bc_mode="dirichlet" if formulation == "primal" else "neumann")
    base.update(default_constants(formulation, example))
    base.update(kw)
    return ProblemConfig(**base)


@dataclass(frozen=True)
class TauSet:
    tau_u: object
    tau_e: object
    tau_s: object
    tau_lam: object
    tau_mu: object

    def __getitem__(self, w):
        return getattr(self, "tau_" + w)


def stabilization_params(config, h):
    """Stabilization parameters for element size ``h`` (scalar or per-element array)."""
    c = config
    h = np.asarray(h, dtype=float)
    if c.k_lam > 0 and c.zeta == 0:
        raise InvalidConfig("k_lam > 0 requires zeta > 0")
    inv_z2 = 1.0 / c.zeta**2 if c.zeta > 0 else 0.0
    if c.formulation == "primal":
        t = dict(tau_u=c.k_u * h**2, tau_e=c.k_e + 0 * h, tau_s=c.k_s / c.kappa + 0 * h,
                 tau_lam=-c.k_lam * h**2 * inv_z2 / c.ell**4, tau_mu=-c.k_mu + 0 * h)
    else:
        t = dict(tau_u=c.k_u * c.ell**2 + 0 * h, tau_e=c.k_e + 0 * h,
                 tau_s=c.k_s * h**2 / (c.kappa * c.ell**2),
                 tau_lam=-c.k_lam * inv_z2 / c.ell**2 + 0 * h,
                 tau_mu=-c.k_mu * h**2 / c.ell**2)
    if h.ndim == 0:
        t = {k: float(v) for k, v in t.items()}
    else:
        for v in t.values():
            v.setflags(write=False)
    return TauSet(**t)


@dataclass(frozen=True)
class SystemLayout:
    """Block layout: 8 primary scalar components, then OSGS projection components."""

    n_scalar: int
    xi_fields: tuple = ()

    @property
    def xi_components(self):
        out, c = {}, len(COMPONENTS)
        for w in self.xi_fields:
            k = len(FIELDS[w])
            out[w] = tuple(range(c, c + k))
            c += k
        return out

    @property
    def n_components(self):
        return len(COMPONENTS) + sum(len(FIELDS[w]) for w in self.xi_fields)

    @property
    def blocks(self):
        """Ordered ``name -> (offset, size)``."""
        N = self.n_scalar
        out = {w: (FIELDS[w][0] * N, len(FIELDS[w]) * N) for w in FIELD_ORDER}
        for w, comps in self.xi_components.items():
            out["xi_" + w] = (comps[0] * N, len(comps) * N)
        return out

    @property
    def dimension(self):
        return self.n_components * self.n_scalar

    def slice(self, name):
        off, size = self.blocks[name]
        return slice(off, off + size)


def make_layout(space, config):
    xi = ()
    if config.method == "osgs":
        xi = tuple(w for w in FIELD_ORDER if config.stab_constants[w] != 0)
    return SystemLayout(space.n_scalar, xi)


class _Elementwise:
    """Per-element constant data of shape (M,) or (M, 2)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)


@dataclass(frozen=True)
class DataFields:
    """Problem data: analytic callables ``g(x, y)``, per-element arrays, or None (zero)."""

    e_tilde: object = None
    s_tilde: object = None
    q: object = None
    f: object = None

    @classmethod
    def elementwise(cls, e_tilde=None, s_tilde=None, q=None, f=None):
        wrap = lambda v: None if v is None else _Elementwise(v)
        return cls(wrap(e_tilde), wrap(s_tilde), wrap(q), wrap(f))

    def rows(self, name, xq, n_rows):
        """Values at quadrature points ``xq`` (M, nq, 2): list of (M, nq) arrays or None."""
        g = getattr(self, name)
        if g is None:
            return [None] * n_rows
        shape = xq.shape[:2]
        if isinstance(g, (_Elementwise, np.ndarray)):
            v = g.values if isinstance(g, _Elementwise) else np.asarray(g, dtype=float)
            if v.shape[0] != shape[0]:
                raise InvalidConfig(f"{name}: expected one value per element ({shape[0]})")
            v = v.reshape(shape[0], -1)
            if v.shape[1] != n_rows:
                raise InvalidConfig(f"{name}: expected {n_rows} components per element")
            return [np.broadcast_to(v[:, k:k + 1], shape) for k in range(n_rows)]
        out = g(xq[..., 0], xq[..., 1])
        if n_rows == 1:
            return [np.broadcast_to(np.asarray(out, dtype=float), shape)]
        return [np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out]

    def is_zero(self):
        return all(getattr(self, f.name) is None for f in fields(self))


def residual_operators(config):
    z, k = config.zeta, config.kappa
    return {
        "u": add(val(L, z), div(MX, MY)),
        "e": add(vec(EX, EY), vec(MX, MY)),
        "s": add(vec(SX, SY, k), grad(L, -1.0)),
        "lam": add(val(U, z), div(SX, SY)),
        "mu": add(grad(U), vec(EX, EY, -1.0)),
    }


def residual_data(config, data, xq):
    """Data ``F_w`` per residual at quadrature points."""
    srows = data.rows("s_tilde", xq, 2)
    return {
        "u": data.rows("f", xq, 1),
        "e": data.rows("e_tilde", xq, 2),
        "s": [None if r is None else config.kappa * r for r in srows],
        "lam": data.rows("q", xq, 1),
        "mu": [None, None],
    }


def galerkin_pairs(config):
    """(trial, test) pairings of the Galerkin bilinear form."""
    z, k = config.zeta, config.kappa
    R = residual_operators(config)
    if config.formulation == "primal":
        return [
            (val(L, z), val(U)), (vec(MX, MY, -1.0), grad(U)),
            (R["e"], vec(EX, EY)),
            (R["s"], vec(SX, SY)),
            (val(U, z), val(L)), (vec(SX, SY, -1.0), grad(L)),
            (scale(R["mu"], -1.0), vec(MX, MY)),
        ]
    return [
        (R["u"], val(U)),
        (R["e"], vec(EX, EY)),
        (vec(SX, SY, k), vec(SX, SY)), (val(L), div(SX, SY)),
        (R["lam"], val(L)),
        (val(U), div(MX, MY)), (vec(EX, EY), vec(MX, MY)),
    ]


class System:
    """Assembly context: space, layout, quadrature tables and tau values."""

    def __init__(self, mesh, config, quad_degree=None):
        self.mesh = mesh
        self.config = config
        self.space = build_space(mesh, config.degree)
        self.layout = make_layout(self.space, config)
        self.quad_degree = quad_degree
        self.tau = stabilization_params(config, mesh.element_sizes)

    def assembler(self):
        return Assembler(self.space, self.layout.n_components, self.quad_degree)


def assemble_galerkin(system, transpose=False):
    asm = system.assembler()
    for trial, test in galerkin_pairs(system.config):
        asm.pair(trial, test, transpose=transpose)
    return asm.triplets()


def _stabilized_fields(config):
    if config.method == "none":
        return ()
    return tuple(w for w in FIELD_ORDER if config.stab_constants[w] != 0)


def assemble_stabilization(system, data=None, transpose=False):
    """Stabilization matrix triplets and its right-hand-side contribution."""
    config = system.config
    data = DataFields() if data is None else data
    asm = system.assembler()
    R = residual_operators(config)
    F = residual_data(config, data, asm.xq)
    xi = system.layout.xi_components
    for w in _stabilized_fields(config):
        tau = system.tau[w]
        asm.pair(R[w], R[w], -tau, transpose)
        asm.load(F[w], R[w], -tau)
        if config.method == "osgs":
            comps = xi[w]
            xe = [[Term(1.0, c)] for c in comps]
            asm.pair(xe, R[w], tau, transpose)
            asm.pair(xe, xe, 1.0, transpose)
            asm.pair(R[w], xe, -1.0, transpose)
            asm.load(F[w], xe, -1.0)
    return asm.triplets(), asm.vector()


def assemble_rhs(system, data=None, include_stabilization=True):
    """Load vector ``L`` plus, optionally, the stabilization modification."""
    config = system.config
    data = DataFields() if data is None else data
    asm = system.assembler()
    xq = asm.xq
    asm.load(data.rows("e_tilde", xq, 2), vec(EX, EY))
    asm.load(data.rows("s_tilde", xq, 2), vec(SX, SY), config.kappa)
    asm.load(data.rows("q", xq, 1), val(L))
    asm.load(data.rows("f", xq, 1), val(U))
    b = asm.vector()
    if include_stabilization and config.method != "none":
        b = b + assemble_stabilization(system, data)[1]
    return b


@dataclass(frozen=True)
class BoundaryData:
    """Prescribed boundary values; None means homogeneous.

    ``u`` and ``lam`` are scalar callables ``g(x, y)``; ``s`` and ``mu`` are
    vector callables whose normal component is imposed.
    """

    u: object = None
    lam: object = None
    s: object = None
    mu: object = None


@dataclass
class ConstrainedSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    T: sp.csr_matrix
    fixed: np.ndarray
    values: np.ndarray

    def recover(self, y):
        return self.T @ y


def _scalar_constraints(space, comp, g, N):
    locs = sorted({b.dof for b in boundary_dofs(space, "scalar-trace")})
    locs = np.array(locs, dtype=np.int64)
    pts = space.dof_points[locs]
    vals = np.zeros(len(locs)) if g is None else np.broadcast_to(
        np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float), (len(locs),))
    return comp * N + locs, vals


def normal_trace_rotation(entries, cx, cy, N, tol=1e-12):
    """Local rotations and constraints from ``(location, normal, value)`` entries.

    Returns ``(T_rows, T_cols, T_vals, fixed, values, touched)`` for the
    rotated coordinates, ``touched`` marking the dofs the rotation replaces.
    """
    by_loc = {}
    for d, n, g in entries:
        by_loc.setdefault(int(d), []).append((np.asarray(n, dtype=float), float(g)))
    rows, cols, tv, fixed, values, touched = [], [], [], [], [], []
    for d, items in by_loc.items():
        ix, iy = cx * N + d, cy * N + d
        uniq = []
        for n, g in items:
            n = n / np.linalg.norm(n)
            for m, h in uniq:
                if abs(m[0] * n[1] - m[1] * n[0]) <= tol:
                    same = m @ n > 0
                    if abs((h if same else -h) - g) > tol * max(1.0, abs(g)):
                        raise InconsistentBC(
                            f"conflicting normal values at boundary location {d}")
                    break
            else:
                uniq.append((n, g))
        touched += [ix, iy]
        if len(uniq) == 1:
            (n, g), = uniq
            t = np.array([-n[1], n[0]])
            rows += [ix, ix, iy, iy]
            cols += [ix, iy, ix, iy]
            tv += [n[0], t[0], n[1], t[1]]
            fixed.append(ix)
            values.append(g)
        else:
            Nm = np.array([m for m, _ in uniq[:2]])
            gv = np.array([h for _, h in uniq[:2]])
            sv = np.linalg.solve(Nm, gv)
            for m, h in uniq[2:]:
                if abs(m @ sv - h) > 1e-10 * max(1.0, abs(h)):
                    raise InconsistentBC(
                        f"conflicting normal values at boundary location {d}")
            rows += [ix, iy]
            cols += [ix, iy]
            tv += [1.0, 1.0]
            fixed += [ix, iy]
            values += list(sv)
    return rows, cols, tv, fixed, values, touched


def constraint_set(system, bc=None, modes=None):
    """Rotation ``T`` and fixed (rotated) dofs with their prescribed values."""
    bc = BoundaryData() if bc is None else bc
    modes = (system.config.bc_mode,) if modes is None else tuple(modes)
    space, N, dim = system.space, system.space.n_scalar, system.layout.dimension
    rows, cols, tv, fixed, values, touched = [], [], [], [], [], []
    if "dirichlet" in modes:
        for comp, g in ((U, bc.u), (L, bc.lam)):
            idx, v = _scalar_constraints(space, comp, g, N)
            fixed += idx.tolist()
            values += v.tolist()
    if "neumann" in modes:
        entries = boundary_dofs(build_space(system.mesh, system.config.degree, 2),
                                "normal-trace")
        for (cx, cy), g in (((SX, SY), bc.s), ((MX, MY), bc.mu)):
            ent = []
            for b in entries:
                if g is None:
                    gn = 0.0
                else:
                    gx, gy = g(np.array(b.point[0]), np.array(b.point[1]))
                    gn = float(gx) * b.normal[0] + float(gy) * b.normal[1]
                ent.append((b.dof, b.normal, gn))
            r, c, t, fx, vv, tc = normal_trace_rotation(ent, cx, cy, N)
            rows += r
            cols += c
            tv += t
            fixed += fx
            values += vv
            touched += tc
    keep = np.ones(dim, dtype=bool)
    keep[np.array(touched, dtype=np.int64)] = False
    ident = np.flatnonzero(keep)
    T = sp.csr_matrix((np.concatenate([tv, np.ones(ident.size)]),
                       (np.concatenate([rows, ident]).astype(np.int64),
                        np.concatenate([cols, ident]).astype(np.int64))), shape=(dim, dim))
    fixed = np.asarray(fixed, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    order = np.argsort(fixed, kind="stable")
    return T, fixed[order], values[order]


def apply_boundary_conditions(system, A, b, bc=None):
    """Strong imposition by rotation and symmetric elimination.

    Constrained rows and columns of ``T^T A T`` are replaced by identity
    entries; their known contribution is moved to the right-hand side.
    """
    config = system.config
    if config.formulation == "primal" and config.bc_mode != "dirichlet" or \
            config.formulation == "dual" and config.bc_mode != "neumann":
        warnings.warn(f"{config.bc_mode} boundary conditions with the {config.formulation} "
                      "formulation", ConfigWarning, stacklevel=2)
    T, fixed, values = constraint_set(system, bc)
    dim = A.shape[0]
    At = (T.T @ A @ T).tocsr()
    bt = T.T @ b
    g = np.zeros(dim)
    g[fixed] = values
    bt = bt - At @ g
    free = np.ones(dim)
    free[fixed] = 0.0
    D = sp.diags(free)
    Ar = (D @ At @ D + sp.diags(1.0 - free)).tocsr()
    Ar.eliminate_zeros()
    bt = free * bt + g
    return ConstrainedSystem(Ar, bt, T.tocsr(), fixed, values)


@dataclass(frozen=True, eq=False)
class Solution:
    config: ProblemConfig
    mesh: object
    space: object
    layout: SystemLayout
    coefficients: np.ndarray
    report: dict = field(default_factory=dict)

    def field(self, name):
        """Coefficients of a field, shape (ncomp, n_scalar)."""
        off, size = self.layout.blocks[name]
        return self.coefficients[off:off + size].reshape(-1, self.layout.n_scalar)

    @property
    def u(self):
        return self.field("u")[0]

    @property
    def e(self):
        return self.field("e")

    @property
    def s(self):
        return self.field("s")

    @property
    def lam(self):
        return self.field("lam")[0]

    @property
    def mu(self):
        return self.field("mu")

    def evaluate(self, expr, rule=None):
        return evaluate(self.space, self.coefficients, expr, self.layout.n_components, rule)


def assemble_system(system, data=None):
    """Full matrix (CSR) and right-hand side before boundary conditions."""
    buf = assemble_galerkin(system)
    b = assemble_rhs(system, data, include_stabilization=False)
    if system.config.method != "none":
        sbuf, sb = assemble_stabilization(system, data)
        buf.extend(sbuf)
        b = b + sb
    return compress(buf), b


def solve_ddcm(config, mesh, data=None, bc=None, quad_degree=None):
    """Assemble, constrain and solve; returns an immutable Solution.

    ``report`` holds dof counts, assembly/solve timings and any
    configuration warnings.
    """
    msgs = []
    if config.formulation == "dual" and config.dimensionless_group >= 2.0:
        msgs.append(f"kappa*zeta^2*ell^4 = {config.dimensionless_group:g} >= 2")
    t0 = time.perf_counter()
    system = System(mesh, config, quad_degree)
    A, b = assemble_system(system, data)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConfigWarning)
        cs = apply_boundary_conditions(system, A, b, bc)
    for w in caught:
        msgs.append(str(w.message))
        warnings.warn(w.message, w.category, stacklevel=2)
    t1 = time.perf_counter()
    x = cs.recover(solve_direct(cs.matrix, cs.rhs))
    t2 = time.perf_counter()
    x.setflags(write=False)
    report = dict(ndof=system.layout.dimension, n_free=system.layout.dimension - cs.fixed.size,
                  t_assembly=t1 - t0, t_solve=t2 - t1, warnings=msgs)
    return Solution(config, mesh, system.space, system.layout, x, report)


def constrained_galerkin(system, modes=("dirichlet", "neumann")):
    """Galerkin matrix in rotated coordinates restricted to the unconstrained dofs.

    With both constraint families active, the primal and dual forms agree
    on this subspace (the integration-by-parts boundary terms vanish).
    """
    A = compress(assemble_galerkin(system))
    T, fixed, _ = constraint_set(system, modes=modes)
    free = np.setdiff1d(np.arange(A.shape[0]), fixed)
    return (T.T @ A @ T).tocsr()[free][:, free]


def _identities(config):
    R = residual_operators(config)
    if config.formulation == "primal":
        return [("s", R["s"], "s", vec(SX, SY)),
                ("e", R["e"], "e", vec(EX, EY)),
                ("mu", scale(R["mu"], -1.0), "mu", vec(MX, MY))]
    return [("u", R["u"], "u", val(U)),
            ("e", R["e"], "e", vec(EX, EY)),
            ("lam", R["lam"], "lam", val(L))]


def residual_orthogonality_check(solution, data=None):
    """Normalized residual orthogonality per identity.

    For each identity ``<R(x_h) - F, v_h> = 0`` the value is
    ``max_a |<R(x_h) - F, phi_a>| / (max_a ||phi_a|| (||R(x_h)|| + ||F||))``
    over the unconstrained basis functions ``phi_a`` of the test field.
    """
    config = solution.config
    data = DataFields() if data is None else data
    system = System(solution.mesh, config)
    asm = system.assembler()
    F_all = residual_data(config, data, asm.xq)
    x = solution.coefficients
    N = system.space.n_scalar
    boundary = np.array(sorted({b.dof for b in boundary_dofs(system.space)}), dtype=np.int64)
    constrained = {"dirichlet": (U, L), "neumann": (SX, SY, MX, MY)}[config.bc_mode]
    out = {}
    for name, Rx, fname, test in _identities(config):
        F = F_all[fname]
        if fname == "mu":
            F = [None, None]
        a = Assembler(system.space, system.layout.n_components)
        a.pair(Rx, test)
        a.load(F, test, -1.0)
        A = compress(a.triplets())
        v = A @ x + a.vector()
        comps = [t.comp for row in test for t in row]
        rows = []
        for c in comps:
            mask = np.ones(N, dtype=bool)
            if c in constrained:
                mask[boundary] = False
            rows.append(c * N + np.flatnonzero(mask))
        rows = np.concatenate(rows)
        num = np.abs(v[rows]).max(initial=0.0)
        rvals = evaluate(system.space, x, Rx, system.layout.n_components,
                         tables=a._tables)
        rnorm = np.sqrt(sum(np.sum(r**2 * a.wdet) for r in rvals))
        fnorm = np.sqrt(sum(np.sum(r**2 * a.wdet) for r in F if r is not None))
        phinorm = np.sqrt(np.bincount(system.space.scalar_dof_map.ravel(),
                                      weights=np.einsum("eqa,eq->ea", a.table(0)**2,
                                                        a.wdet).ravel(),
                                      minlength=N).max())
        denom = phinorm * (rnorm + fnorm)
        out[name] = 0.0 if denom == 0.0 else float(num / denom)
    return out
