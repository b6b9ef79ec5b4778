import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from kreinlab import _propagator

entry = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def _as_matrix(t):
    return np.array([[t[0], t[1]], [t[2], t[3]]])


@given(entry, entry, entry, entry, st.floats(0.0, 2.0))
@settings(max_examples=200, deadline=None)
def test_matches_scipy_expm(m00, m01, m10, m11, t):
    m = np.array([[m00, m01], [m10, m11]])
    got = _as_matrix(_propagator.expm2(m00, m01, m10, m11, t))
    ref = linalg.expm(m * t)
    assert np.allclose(got, ref, rtol=1e-11, atol=1e-11 * max(1.0, np.abs(ref).max()))


@given(entry, entry, entry, entry, st.floats(0.01, 1.0))
@settings(max_examples=100, deadline=None)
def test_determinant_is_exp_trace(m00, m01, m10, m11, t):
    got = np.linalg.det(_as_matrix(_propagator.expm2(m00, m01, m10, m11, t)))
    ref = np.exp((m00 + m11) * t)
    assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))


def test_nilpotent_generator_uses_series():
    # d = 0 exactly: exp(N t) = I + N t
    got = _as_matrix(_propagator.expm2(0.0, 1.0, 0.0, 0.0, 0.7))
    assert np.allclose(got, [[1.0, 0.7], [0.0, 1.0]], rtol=0, atol=1e-15)


@given(st.floats(-1e-6, 1e-6), st.floats(0.1, 1.0))
def test_near_degenerate_is_continuous(eps, t):
    m = np.array([[0.5j, -0.25], [-(0.25 + eps), 0.0]])
    got = _as_matrix(_propagator.expm2(m[0, 0], m[0, 1], m[1, 0], m[1, 1], t))
    assert np.allclose(got, linalg.expm(m * t), rtol=1e-12, atol=1e-12)


def test_vectorized_broadcast():
    t = np.linspace(0.0, 1.0, 5)
    out = _propagator.expm2(1j, -0.3, -0.3, 0.0, t[:, None] * np.ones((1, 3)))
    assert out[0].shape == (5, 3)


def test_chain_equals_matrix_products():
    rng = np.random.default_rng(3)
    mats = rng.normal(size=(6, 2, 2)) + 1j * rng.normal(size=(6, 2, 2))
    for tail in [(), (4,)]:
        t = [np.broadcast_to(mats[:, i, j].reshape((6,) + (1,) * len(tail)), (6,) + tail) for i in (0, 1) for j in (0, 1)]
        u, w = _propagator.chain(*t, np.ones(tail), np.ones(tail))
        v = np.array([1.0, 1.0], dtype=complex)
        for k in range(6):
            v = mats[k] @ v
            assert np.allclose(u[k + 1], v[0]) and np.allclose(w[k + 1], v[1])
