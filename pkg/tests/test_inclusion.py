import math

import mpmath
import numpy as np
import pytest
import scipy.linalg

from ddcm_vms.errors import InvalidArgument, InvalidConfig
from ddcm_vms.fespace import build_space, interpolate
from ddcm_vms.formulation import Solution, make_config, make_layout
from ddcm_vms.inclusion import (ElementData, InclusionConfig, exact_inclusion, exact_u,
                                reference_galerkin_solve, reference_matrix, region_source,
                                sample_element_data, thermo_field)
from ddcm_vms.mesh import generate_inclusion_mesh, generate_unit_square_mesh
from ddcm_vms.mms import MmsFields

CFG = InclusionConfig()


def test_config():
    assert CFG.alpha == pytest.approx(math.sqrt(1000.0), rel=1e-14)
    for bad in (dict(gamma=0.0), dict(zeta=-1.0), dict(radius=0.0), dict(noise=-1.0)):
        with pytest.raises(InvalidConfig):
            InclusionConfig(**bad)


def test_u_origin_against_mpmath():
    a, R = mpmath.sqrt(1000), mpmath.mpf(1) / 4
    ref = float(1 - a * R * mpmath.besselk(1, a * R))
    u0, s0 = exact_inclusion(0.0)
    assert u0 == pytest.approx(ref, rel=1e-14)
    assert u0 == pytest.approx(0.9986415209163044, rel=1e-15)
    assert s0 == 0.0


def test_interface_continuity():
    eps = 1e-12
    (um, sm), (up, sp_) = exact_inclusion(0.25 - eps), exact_inclusion(0.25 + eps)
    assert abs(um - up) <= 1e-10
    assert abs(sm - sp_) <= 1e-9
    u, s = exact_inclusion(np.array([0.25]))
    # the two branch formulas agree at r = R
    a, R = CFG.alpha, CFG.radius
    from ddcm_vms.bessel import i0, i1, k0, k1
    inner = 1 - a * R * k1(a * R) * i0(a * R)
    outer = a * R * i1(a * R) * k0(a * R)
    assert inner == pytest.approx(outer, abs=1e-12)
    assert a * R * k1(a * R) * a * i1(a * R) == pytest.approx(a * R * i1(a * R) * a * k1(a * R),
                                                              rel=1e-12)


def test_decay():
    r = np.linspace(0.2501, 0.7, 200)
    u, _ = exact_inclusion(r)
    assert np.all(np.diff(u) < 0)
    # frozen value at the square's edge midpoint distance
    assert exact_inclusion(0.5)[0] == pytest.approx(1.229265256246657e-4, rel=1e-12)
    with pytest.raises(InvalidArgument):
        exact_inclusion(-0.1)


def test_reference_zero_source():
    m = generate_inclusion_mesh(8)
    assert np.all(reference_galerkin_solve(m, q=np.zeros(m.n_elements)) == 0)


def test_reference_matrix_spd():
    A = reference_matrix(generate_inclusion_mesh(8), 1.0, 1000.0).toarray()
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    scipy.linalg.cholesky(A)


def test_reference_accuracy_n40():
    m = generate_inclusion_mesh(40)
    uh = reference_galerkin_solve(m, 1.0, 1000.0)
    assert np.abs(uh - exact_u(m.nodes)).max() <= 0.05


def test_region_source():
    m = generate_inclusion_mesh(8)
    q = region_source(m, 1000.0)
    assert set(np.unique(q)) == {0.0, 1000.0}
    assert np.array_equal(q == 1000.0, m.element_region == 1)


def test_sampling():
    m = generate_unit_square_mesh(4)
    d = sample_element_data(np.full(m.n_nodes, 3.0), m)
    assert np.all(d.e_tilde == 0) and np.all(d.s_tilde == 0)
    d = sample_element_data(m.nodes[:, 0], m, gamma=2.0)
    assert np.allclose(d.e_tilde, [1.0, 0.0], rtol=0, atol=1e-13)
    assert np.allclose(d.s_tilde, [-2.0, 0.0], rtol=0, atol=1e-13)
    mi = generate_inclusion_mesh(10)
    d = sample_element_data(reference_galerkin_solve(mi), mi)
    assert d.n_elements == mi.n_elements
    assert np.array_equal(d.s_tilde, -d.e_tilde)
    with pytest.raises(InvalidArgument):
        ElementData(np.zeros((3, 2)), np.zeros((4, 2)))


def _solution_from(mesh, f_u, f_e, f_s):
    config = make_config("primal")
    space = build_space(mesh, 1)
    layout = make_layout(space, config)
    N = space.n_scalar
    x = np.zeros(layout.dimension)
    x[:N] = interpolate(space, f_u)
    x[N:3 * N] = interpolate(build_space(mesh, 1, 2), f_e)
    x[3 * N:5 * N] = interpolate(build_space(mesh, 1, 2), f_s)
    return Solution(config, mesh, space, layout, x)


def test_thermo_zero_solution():
    m = generate_unit_square_mesh(4)
    z = lambda x, y: 0 * x
    vals, frac = thermo_field(_solution_from(m, z, lambda x, y: (z(x, y), z(x, y)),
                                             lambda x, y: (z(x, y), z(x, y))))
    assert np.all(vals == 0) and frac == 0.0


def test_thermo_mms_admissible():
    mms = MmsFields()
    vals, frac = thermo_field(_solution_from(generate_unit_square_mesh(16), mms.u, mms.e, mms.s))
    assert frac == 0.0
    assert vals.shape == (2 * 16 * 16,)
