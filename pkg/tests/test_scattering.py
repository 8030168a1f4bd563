import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlft import su11
from nlft.cantor import (DadicInterval, DadicScalar, Multitile, character_exponent,
                         multitiles_in_square, root_of_unity, tiles_in_square)
from nlft.scattering import (StepPotential, TileTable, carleson_sup, cascade_check, evolve,
                             grid_final, grid_sup, plancherel_integral, tile_matrix,
                             transfer_interval, twist_exponent, vertical_from_horizontal,
                             walsh_fourier)
from nlft.su11 import Su11Matrix


def random_potential(rng, d, K, cell_scale=0, amp=0.5, real=False):
    n = d ** (K - cell_scale)
    v = rng.normal(size=n) * amp
    if not real:
        v = v + 1j * rng.normal(size=n) * amp
    return StepPotential(d, cell_scale, K, v)


def k_points(d, K, scale):
    return [DadicScalar(i, scale, d) for i in range(d ** (K - scale))]


def close(g, h, tol=1e-10):
    s = max(1.0, abs(g.a))
    return abs(g.a - h.a) <= tol * s and abs(g.b - h.b) <= tol * s


def test_zero_potential_is_identity():
    F = StepPotential.zero(3, 2)
    for k in k_points(3, 1, -1):
        g = evolve(F, k).final
        assert g.a == 1 and g.b == 0
    assert plancherel_integral(F) == 0


@pytest.mark.parametrize("d", [2, 3])
def test_partition_multiplicativity(rng, d):
    F = random_potential(rng, d, 2)
    for k in k_points(d, 1, -2)[:12]:
        whole = transfer_interval(F, k, DadicInterval(2, 0, d))
        parts = [transfer_interval(F, k, DadicInterval(1, j, d)) for j in range(d)]
        g = Su11Matrix.identity()
        for p in parts:
            g = p @ g
        assert close(whole, g)


def test_evolve_matches_fine_ode_oracle(rng):
    # independent oracle: brute-force product over many sub-steps with exact characters
    d, K = 2, 1
    F = random_potential(rng, d, K, amp=0.3)
    k = DadicScalar(3, -2, d)
    n_sub = 8
    length = 1.0 / n_sub
    g = Su11Matrix.identity()
    for step in range(d**K * n_sub):
        x = DadicScalar(step, -3, d)
        z = F.values[step // n_sub] * root_of_unity(d, character_exponent(k, x))
        g = su11.exp_generator(su11.Su11Generator(z, length)) @ g
    assert close(evolve(F, k).final, g, 1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_tile_constance_and_twist(rng, d):
    # G_omega(k) depends on k in I_p only through the phase twist
    F = random_potential(rng, d, 1, cell_scale=-1)
    p = next(t for t in tiles_in_square(d, 1, 0) if t.space.index == 1)
    base = tile_matrix(F, p)
    for i in range(d**2):
        k = p.freq.left + DadicScalar(i, -2, d)
        j = twist_exponent(k, p)
        g = transfer_interval(F, k, p.space)
        assert close(g, su11.phase_twist(base, root_of_unity(d, j)))


@pytest.mark.parametrize("d", [2, 3])
def test_vertical_from_horizontal(rng, d):
    F = random_potential(rng, d, 2)
    for P in multitiles_in_square(d, 2)[::5]:
        hs = [tile_matrix(F, h) for h in P.horizontal()]
        vs = vertical_from_horizontal(P, hs)
        for v, p in zip(vs, P.vertical()):
            assert close(v, tile_matrix(F, p), 1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_tile_table_matches_direct(rng, d):
    F = random_potential(rng, d, 2)
    T = TileTable(F)
    for s in T.scales():
        for p in tiles_in_square(d, 2, s):
            assert close(T.matrix(p), tile_matrix(F, p), 1e-9)


def test_real_d2_closed_form(rng):
    F = random_potential(rng, 2, 2, amp=0.4, real=True)
    for k in k_points(2, 1, -3):
        fh = walsh_fourier(F, k)
        assert abs(fh.imag) < 1e-14
        g = evolve(F, k).final
        assert g.a.real == pytest.approx(math.cosh(fh.real), rel=1e-12)
        assert g.b.real == pytest.approx(math.sinh(fh.real), rel=1e-12, abs=1e-14)


def test_walsh_examples():
    F = StepPotential.from_cells(2, 1, 0, {0: 1.0, 1: 1.0})
    assert walsh_fourier(F, DadicScalar(0, 0, 2)) == pytest.approx(2)
    assert walsh_fourier(F, DadicScalar(1, -1, 2)) == pytest.approx(0)
    G = StepPotential.from_cells(3, 1, 0, {0: 1.0})
    assert walsh_fourier(G, DadicScalar(1, -2, 3)) == pytest.approx(1)


@pytest.mark.parametrize("d,K", [(2, 2), (3, 1), (5, 1)])
def test_walsh_parseval(rng, d, K):
    F = random_potential(rng, d, K)
    vals = [walsh_fourier(F, k) for k in k_points(d, 0, -K)]
    assert sum(abs(v) ** 2 for v in vals) * d**-K == pytest.approx(F.l2_sq(), rel=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gronwall(rng, d):
    F = random_potential(rng, d, 2, amp=0.7)
    for k in k_points(d, 0, -2)[::3]:
        prof = evolve(F, k)
        assert np.all(np.abs(prof.a) + np.abs(prof.b) <= np.exp(F.l1()) * (1 + 1e-12))


def test_carleson_single_cell():
    F = StepPotential.from_cells(2, 1, 0, {1: 0.8j})
    for k in k_points(2, 0, -2):
        expect = math.log(math.cosh(0.8))
        assert carleson_sup(F, k) == pytest.approx(expect, rel=1e-12)
        assert carleson_sup(F, k, refine=True) == pytest.approx(expect, rel=1e-12)


def test_grid_matches_evolve(rng):
    F = random_potential(rng, 3, 1, cell_scale=-1)
    a, b = grid_final(F)
    sup = grid_sup(F)
    for i, k in enumerate(k_points(3, 1, -1)):
        prof = evolve(F, k)
        assert abs(a[i] - prof.final.a) < 1e-10 and abs(b[i] - prof.final.b) < 1e-10
        assert sup[i] == pytest.approx(float(np.max(su11.log_a_arr(prof.b))), rel=1e-10)


def test_cascade_zero_potential():
    rep = cascade_check(StepPotential.zero(2, 2))
    assert rep.passed and all(r[1] == 0 and r[2] == 0 for r in rep.rows)


@pytest.mark.parametrize("d,beta", [(2, "piecewise"), (2, "loghs"), (3, "piecewise")])
def test_cascade_random(rng, d, beta):
    F = random_potential(rng, d, 2, amp=0.3)
    rep = cascade_check(F, beta=beta)
    assert rep.passed
    assert rep.loga_lhs == pytest.approx(rep.loga_rhs, rel=1e-10)


@given(st.floats(0.01, 1.0))
def test_plancherel_integral_refines_consistently(amp):
    # for a unit-cell potential the integrand is constant on intervals of length d^-K
    F = StepPotential(2, 0, 2, np.array([amp, -amp, 0.5 * amp, 1j * amp]))
    assert plancherel_integral(F) == pytest.approx(plancherel_integral(F, 3), rel=1e-12)


def test_potential_validation():
    with pytest.raises(ValueError):
        StepPotential(2, 0, 2, np.zeros(3))
    F = StepPotential(2, 0, 1, np.array([1.0, 2.0]))
    assert list(F.refined(-1)) == [1, 1, 2, 2]
    assert F.extended(2).values.size == 4
