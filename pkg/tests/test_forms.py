import numpy as np
import pytest

from ddcm_vms.fespace import build_space, interpolate, quadrature
from ddcm_vms.forms import Assembler, add, div, evaluate, grad, scale, val, vec
from ddcm_vms.mesh import generate_unit_square_mesh
from ddcm_vms.sparse import compress


@pytest.fixture
def space():
    return build_space(generate_unit_square_mesh(3), 2)


def test_expression_builders():
    assert add(val(0), val(1, 2.0)) == [[(1.0, 0, 0), (2.0, 1, 0)]]
    assert div(2, 3) == [[(1.0, 2, 1), (1.0, 3, 2)]]
    assert scale(grad(1), -2.0) == [[(-2.0, 1, 1)], [(-2.0, 1, 2)]]
    assert len(vec(0, 1)) == 2


def test_stiffness_kernel(space):
    asm = Assembler(space, 1)
    asm.pair(grad(0), grad(0))
    K = compress(asm.triplets())
    assert np.abs(K @ np.ones(space.n_scalar)).max() <= 1e-13
    x = interpolate(space, lambda x, y: x)
    assert x @ K @ x == pytest.approx(1.0, rel=1e-13)


def test_div_pairing_integrates_divergence(space):
    # <div w, 1> for w = (x^2, x y) equals the integral of 3x = 3/2
    asm = Assembler(space, 3)
    asm.pair(div(0, 1), val(2))
    A = compress(asm.triplets())
    N = space.n_scalar
    w = np.concatenate([interpolate(space, lambda x, y: x**2),
                        interpolate(space, lambda x, y: x * y), np.zeros(N)])
    assert (A @ w)[2 * N:].sum() == pytest.approx(1.5, rel=1e-13)


def test_zero_coefficient_skipped(space):
    asm = Assembler(space, 1)
    asm.pair(val(0), val(0), 0.0)
    assert len(asm.triplets()) == 0


def test_elementwise_coefficient(space):
    m = space.mesh
    asm = Assembler(space, 1)
    c = np.where(m.centroids[:, 0] < 0.5, 2.0, 0.0)
    asm.pair(val(0), val(0), c)
    one = np.ones(space.n_scalar)
    total = one @ compress(asm.triplets()) @ one
    assert total == pytest.approx(2.0 * np.sum(m.areas[m.centroids[:, 0] < 0.5]), rel=1e-13)


def test_evaluate_gradient(space):
    x = interpolate(space, lambda x, y: x * y)
    rule = quadrature(4)
    gx, gy = evaluate(space, x, grad(0), 1, rule)
    _, _, _, xq = space.tabulate(rule)
    assert np.abs(gx - xq[..., 1]).max() <= 1e-13
    assert np.abs(gy - xq[..., 0]).max() <= 1e-13


def test_load_vector(space):
    asm = Assembler(space, 1)
    asm.load([np.ones_like(asm.wdet)], val(0))
    assert asm.vector().sum() == pytest.approx(1.0, rel=1e-14)
