import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from nlft import su11
from nlft.cantor import RootPower
from nlft.su11 import Su11Generator, Su11Matrix

finite = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


@st.composite
def elements(draw, max_rho=20.0):
    rho = draw(st.floats(0, max_rho))
    phi = draw(st.floats(0, 2 * math.pi))
    theta = draw(st.floats(0, 2 * math.pi))
    return Su11Matrix(math.sqrt(1 + rho * rho) * complex(np.exp(1j * phi)),
                      rho * complex(np.exp(1j * theta)))


def close(g, h, tol=1e-9):
    scale = max(1.0, abs(g.a), abs(h.a))
    return abs(g.a - h.a) <= tol * scale and abs(g.b - h.b) <= tol * scale


def test_constructor_rejects_non_unimodular():
    with pytest.raises(ValueError):
        Su11Matrix(2.0 + 0j, 0j)


@given(elements(), elements())
def test_compose_matches_matrix_product(g, h):
    m = g.matrix() @ h.matrix()
    p = su11.compose(g, h)
    assert np.allclose(p.matrix(), m, rtol=1e-10, atol=1e-10 * np.abs(m).max())


@given(elements())
def test_identity_and_inverse(g):
    e = Su11Matrix.identity()
    assert close(g @ e, g) and close(e @ g, g)
    assert close(g @ su11.inverse(g), e, 1e-8)


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_hyperbolic_addition(s, t):
    # real generators commute, so lengths add
    g = su11.exp_generator(Su11Generator(1.0, abs(s)))
    h = su11.exp_generator(Su11Generator(1.0, abs(t)))
    gh = g @ h
    assert gh.a.real == pytest.approx(math.cosh(abs(s) + abs(t)), rel=1e-12)
    assert gh.b.real == pytest.approx(math.sinh(abs(s) + abs(t)), rel=1e-12)


@given(elements(), elements())
def test_inverse_adjoint(g, h):
    ia = su11.inverse_adjoint
    assert ia(ia(g)) == g
    assert close(ia(g @ h), ia(g) @ ia(h))
    assert np.allclose(ia(g).matrix(), np.linalg.inv(g.matrix()).conj().T,
                       rtol=1e-9, atol=1e-9 * abs(g.a) ** 2)


@given(elements())
def test_norms(g):
    sv = np.linalg.svd(g.matrix(), compute_uv=False)
    assert su11.op_norm(g) == pytest.approx(sv[0], rel=1e-10)
    assert su11.hs_norm(g) == pytest.approx(np.linalg.norm(g.matrix()) / math.sqrt(2), rel=1e-12)
    assert su11.hs_norm(Su11Matrix.identity()) == 1
    assert math.log(su11.op_norm(g)) == pytest.approx(math.asinh(abs(g.b)), rel=1e-9, abs=1e-12)
    assert su11.log_a(su11.inverse(g)) == su11.log_a(g)


def test_log_a_small_b():
    g = Su11Matrix(complex(math.sqrt(1 + 1e-40)), 1e-20 + 0j)
    assert su11.log_a(g) == pytest.approx(0.5e-40, rel=1e-12)


@given(cplx, st.floats(0, 2))
def test_exp_generator_vs_expm(z, length):
    g = su11.exp_generator(Su11Generator(z, length))
    ref = expm(length * np.array([[0, z], [np.conj(z), 0]]))
    assert np.allclose(g.matrix(), ref, rtol=1e-10, atol=1e-12)
    mp = su11.exp_generator(Su11Generator(z, length), mp=True)
    assert abs(complex(mp.a) - g.a) < 1e-10 * abs(g.a)


@given(elements(), elements(), st.integers(0, 6))
def test_phase_twist(g, h, j):
    d = 7
    tw = lambda m: su11.phase_twist(m, RootPower(j, d))  # noqa: E731
    assert abs(tw(g).a - g.a) == 0 and abs(abs(tw(g).b) - abs(g.b)) < 1e-12 * (1 + abs(g.b))
    assert close(tw(g @ h), tw(g) @ tw(h))
    assert su11.op_norm(tw(g)) == pytest.approx(su11.op_norm(g))


@given(elements(), elements())
def test_quasi_triangle(g, h):
    assert su11.log_a(g @ h) <= 2 * su11.log_a(g) + 2 * su11.log_a(h) + 1e-12
    # submultiplicativity of the operator norm
    assert su11.op_norm(g @ h) <= su11.op_norm(g) * su11.op_norm(h) * (1 + 1e-12)


@given(elements(), elements())
def test_mixed_triangle(g, h):
    # |b(GH)| <= |a_G||b_H| + |b_G||a_H|
    p = g @ h
    assert abs(p.b) <= (abs(g.a) * abs(h.b) + abs(g.b) * abs(h.a)) * (1 + 1e-12) + 1e-12


def test_renormalize_restores_determinant():
    g = Su11Matrix.unchecked(1.01 + 0j, 0.1 + 0j)
    r = su11.renormalize(g)
    assert abs(r.det() - 1) < 1e-14


def test_mp_product():
    with gmpy2.context(gmpy2.get_context(), precision=300):
        gens = [su11.exp_generator(Su11Generator(complex(np.exp(0.3j * i)), 0.4), mp=True)
                for i in range(20)]
        p = su11.product(gens, mp=True)
        assert abs(p.det() - 1) < gmpy2.mpfr(2) ** -250


def test_array_helpers_agree_with_scalar(rng):
    z = rng.normal(size=16) + 1j * rng.normal(size=16)
    a, b = su11.expgen_arr(z, 0.3)
    mats = [su11.exp_generator(Su11Generator(zi, 0.3)) for zi in z]
    pa, pb = su11.prefix_products_desc(a, b)
    g = Su11Matrix.identity()
    for i, m in enumerate(mats):
        g = m @ g
        assert abs(pa[i] - g.a) < 1e-9 * abs(g.a) and abs(pb[i] - g.b) < 1e-9 * abs(g.a)
    ra, rb = su11.block_product_desc(a, b, 4)
    h = mats[3] @ mats[2] @ mats[1] @ mats[0]
    assert abs(ra[0] - h.a) < 1e-10 * abs(h.a)
