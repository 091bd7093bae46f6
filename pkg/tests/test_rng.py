import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddcm_vms.errors import InvalidArgument
from ddcm_vms.inclusion import ElementData, add_noise
from ddcm_vms.rng import Xoshiro256StarStar, splitmix64

U64 = np.uint64


def _oracle(seed, count):
    """xoshiro256** in numpy uint64 arithmetic (wrapping), seeded by splitmix64."""
    with np.errstate(over="ignore"):
        st_ = U64(seed)
        s = []
        for _ in range(4):
            st_ = st_ + U64(0x9E3779B97F4A7C15)
            z = st_
            z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
            s.append(z ^ (z >> U64(31)))
        rotl = lambda x, k: (x << U64(k)) | (x >> U64(64 - k))
        out = []
        for _ in range(count):
            out.append(int(rotl(s[1] * U64(5), 7) * U64(9)))
            t = s[1] << U64(17)
            s[2] ^= s[0]
            s[3] ^= s[1]
            s[1] ^= s[2]
            s[0] ^= s[3]
            s[2] ^= t
            s[3] = rotl(s[3], 45)
    return out


def test_splitmix_reference_value():
    # published first output of splitmix64 from state 0
    assert splitmix64(0)[1] == 0xE220A8397B1DCDAF


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_matches_oracle(seed):
    r = Xoshiro256StarStar(seed)
    assert [r.next_u64() for _ in range(8)] == _oracle(seed, 8)


def test_frozen_stream_seed42():
    r = Xoshiro256StarStar(42)
    assert [r.next_u64() for _ in range(3)] == [0x15780B2E0C2EC716, 0x6104D9866D113A7E,
                                                0xAE17533239E499A1]
    vals = Xoshiro256StarStar(42).uniform_symmetric(1.0, 4)
    assert vals == [-0.8322740578802357, -0.2420394986746628, 0.36008682205627873,
                    0.8493858906507752]


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, True])
def test_bad_seed(seed):
    with pytest.raises(InvalidArgument):
        Xoshiro256StarStar(seed)


def test_uniform_range():
    r = Xoshiro256StarStar(7)
    u = np.array([r.uniform() for _ in range(5000)])
    assert u.min() >= 0 and u.max() < 1


def _data(m):
    return ElementData(np.zeros((m, 2)), np.zeros((m, 2)))


def test_noise_moments():
    d = add_noise(_data(10_000), 1.0, 12345)
    for a in (d.e_tilde, d.s_tilde):
        for c in range(2):
            assert abs(a[:, c].mean()) <= 0.05
            assert abs(a[:, c].var() - 1 / 3) <= 0.1 / 3


def test_noise_draw_order():
    base = ElementData(np.arange(6.0).reshape(3, 2), -np.arange(6.0).reshape(3, 2))
    d = add_noise(base, 0.5, 99)
    xi = np.array(Xoshiro256StarStar(99).uniform_symmetric(0.5, 12)).reshape(3, 4)
    assert np.array_equal(d.e_tilde, base.e_tilde + xi[:, :2])
    assert np.array_equal(d.s_tilde, base.s_tilde + xi[:, 2:])
    assert d.n_elements == 3


def test_noise_zero_and_determinism():
    base = ElementData(np.ones((5, 2)), np.ones((5, 2)))
    assert add_noise(base, 0.0, 1) is base
    a, b = add_noise(base, 1.0, 3), add_noise(base, 1.0, 3)
    assert np.array_equal(a.e_tilde, b.e_tilde) and np.array_equal(a.s_tilde, b.s_tilde)
    with pytest.raises(InvalidArgument):
        add_noise(base, -1.0, 3)
