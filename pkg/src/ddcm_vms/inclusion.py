"""Reaction-dominated circular inclusion: exact solution, synthetic data, checks.

The model problem is ``-div(gamma grad u) + zeta u = q`` with ``q = zeta``
inside the disc of radius R and 0 outside, homogeneous Neumann data on the
square boundary. Its radially symmetric solution (for the unbounded plane)
decays like ``K0(alpha r)`` with ``alpha = sqrt(zeta / gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bessel
from .errors import InvalidArgument, InvalidConfig
from .fespace import barycentric_gradients, build_space, quadrature
from .forms import Assembler, grad, val, vec
from .formulation import EX, EY, SX, SY, BoundaryData, DataFields, make_config, solve_ddcm
from .mesh import generate_inclusion_mesh
from .rng import Xoshiro256StarStar
from .sparse import compress, solve_direct


@dataclass(frozen=True)
class InclusionConfig:
    gamma: float = 1.0
    zeta: float = 1000.0
    radius: float = 0.25
    center: tuple = (0.5, 0.5)
    noise: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not (self.gamma > 0 and self.zeta > 0):
            raise InvalidConfig("gamma and zeta must be positive")
        if not self.radius > 0:
            raise InvalidConfig("radius must be positive")
        if self.noise < 0:
            raise InvalidConfig("noise level must be non-negative")

    @property
    def alpha(self):
        return math.sqrt(self.zeta / self.gamma)


def exact_inclusion(r, cfg=None):
    """Exact ``u(r)`` and radial flux ``s_r = -gamma u'(r)``."""
    cfg = InclusionConfig() if cfg is None else cfg
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidArgument("radius must be non-negative")
    a, R = cfg.alpha, cfg.radius
    aR = a * R
    cin = aR * bessel.k1(aR)
    cout = aR * bessel.i1(aR)
    inner = r <= R
    u = np.empty_like(r)
    du = np.empty_like(r)
    ri, ro = r[inner], r[~inner]
    u[inner] = 1.0 - cin * bessel.i0(a * ri)
    du[inner] = -cin * a * bessel.i1(a * ri)
    if ro.size:
        u[~inner] = cout * bessel.k0(a * ro)
        du[~inner] = -cout * a * bessel.k1(a * ro)
    s_r = -cfg.gamma * du
    if r.ndim == 0:
        return float(u), float(s_r)
    return u, s_r


def exact_u(points, cfg=None):
    cfg = InclusionConfig() if cfg is None else cfg
    r = np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(cfg.center), axis=-1)
    return exact_inclusion(r, cfg)[0]


def exact_flux_magnitude(points, cfg=None):
    cfg = InclusionConfig() if cfg is None else cfg
    r = np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(cfg.center), axis=-1)
    return np.abs(exact_inclusion(r, cfg)[1])


def region_source(mesh, zeta):
    """Per-element source: ``zeta`` on region 1, 0 elsewhere."""
    return np.where(mesh.element_region == 1, float(zeta), 0.0)


def reference_matrix(mesh, gamma, zeta):
    space = build_space(mesh, 1)
    asm = Assembler(space, 1)
    asm.pair(grad(0), grad(0), gamma)
    asm.pair(val(0), val(0), zeta)
    return compress(asm.triplets())


def reference_galerkin_solve(mesh, gamma=1.0, zeta=1000.0, q=None):
    """P1 Galerkin solution of the diffusion-reaction problem (nodal values).

    ``q`` is a per-element source array; default is the region source.
    Neumann data is homogeneous and imposed naturally.
    """
    space = build_space(mesh, 1)
    q = region_source(mesh, zeta) if q is None else np.asarray(q, dtype=float)
    asm = Assembler(space, 1)
    asm.pair(grad(0), grad(0), gamma)
    asm.pair(val(0), val(0), zeta)
    asm.load([np.broadcast_to(q[:, None], asm.wdet.shape)], val(0))
    return solve_direct(compress(asm.triplets()), asm.vector())


@dataclass(frozen=True)
class ElementData:
    """One constant (e~, s~) pair per element, arrays of shape (M, 2)."""

    e_tilde: np.ndarray
    s_tilde: np.ndarray

    def __post_init__(self):
        if self.e_tilde.shape != self.s_tilde.shape or self.e_tilde.ndim != 2 \
                or self.e_tilde.shape[1] != 2:
            raise InvalidArgument("element data must be two (M, 2) arrays")

    @property
    def n_elements(self):
        return self.e_tilde.shape[0]

    def as_data_fields(self, q=None):
        return DataFields.elementwise(self.e_tilde, self.s_tilde, q=q)


def sample_element_data(u_nodal, mesh, gamma=1.0):
    """Elementwise gradient of a P1 field and the matching linear flux."""
    g = barycentric_gradients(mesh)
    e = np.einsum("eid,ei->ed", g, np.asarray(u_nodal, dtype=float)[mesh.triangles])
    return ElementData(e, -gamma * e)


def add_noise(data, delta, seed):
    """Uniform noise in [-delta, delta] on every component, drawn in element order.

    Per element the draw order is (e~_x, e~_y, s~_x, s~_y).
    """
    if delta < 0:
        raise InvalidArgument("noise level must be non-negative")
    if delta == 0:
        return data
    rng = Xoshiro256StarStar(seed)
    xi = np.array(rng.uniform_symmetric(float(delta), 4 * data.n_elements)).reshape(-1, 4)
    return ElementData(data.e_tilde + xi[:, :2], data.s_tilde + xi[:, 2:])


def thermo_field(solution):
    """Per-element mean of ``s_h . e_h`` and the fraction of elements where it is positive.

    An element counts as violating when its mean exceeds
    ``1e-10 * max|s_h| * max|e_h|`` (nodal maxima).
    """
    space = solution.space
    rule = quadrature(2 * space.degree)
    ev = solution.evaluate(vec(EX, EY), rule)
    sv = solution.evaluate(vec(SX, SY), rule)
    w = rule.weights / rule.weights.sum()
    values = np.sum((ev[0] * sv[0] + ev[1] * sv[1]) * w, axis=1)
    smax = np.sqrt((solution.s**2).sum(axis=0)).max(initial=0.0)
    emax = np.sqrt((solution.e**2).sum(axis=0)).max(initial=0.0)
    eps = 1e-10 * smax * emax
    frac = float(np.mean(values > eps)) if values.size else 0.0
    return values, frac


@dataclass
class InclusionRun:
    mesh: object
    reference: np.ndarray
    data: ElementData
    solutions: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)
    thermo: dict = field(default_factory=dict)


PROFILE_PATHS = ("diagonal", ("circle", 0.1), ("circle", 0.2), ("circle", 0.4))


def path_label(path):
    return path if isinstance(path, str) else f"circle_r{path[1]:g}"


def run_inclusion(n=40, cfg=None, formulations=("primal", "dual"), kappa=1.0, ell=1.0,
                  overrides=None, paths=PROFILE_PATHS, n_samples=512):
    """Mesh, reference solve, sampling, noise, data-driven solves and diagnostics."""
    from .analysis import PointLocator, profile

    cfg = InclusionConfig() if cfg is None else cfg
    if cfg.noise > 0 and cfg.seed is None:
        raise InvalidConfig("a seed is required when noise is added")
    mesh = generate_inclusion_mesh(n, cfg.center, cfg.radius)
    uref = reference_galerkin_solve(mesh, cfg.gamma, cfg.zeta)
    data = sample_element_data(uref, mesh, cfg.gamma)
    data = add_noise(data, cfg.noise, cfg.seed)
    run = InclusionRun(mesh, uref, data)
    fields_ = data.as_data_fields(q=region_source(mesh, cfg.zeta))
    locator = PointLocator(mesh)
    for form in formulations:
        kw = dict(kappa=kappa, zeta=cfg.zeta, ell=ell)
        kw.update((overrides or {}).get(form, {}))
        config = make_config(form, kw.pop("method", "asgs"), example=2, **kw)
        sol = solve_ddcm(config, mesh, fields_, BoundaryData())
        run.solutions[form] = sol
        run.thermo[form] = thermo_field(sol)
        for p in paths:
            run.profiles[(form, path_label(p), "u")] = profile(
                sol, p, lambda x: exact_u(x, cfg), "u", n_samples, locator)
            run.profiles[(form, path_label(p), "|s|")] = profile(
                sol, p, lambda x: exact_flux_magnitude(x, cfg), "|s|", n_samples, locator)
    return run
