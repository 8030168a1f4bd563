import math

import numpy as np
import pytest

from nlft.cantor import DadicScalar
from nlft.continuous import (SampledPotential, asymptotic_phase_check, default_bump,
                             integrate_many, integrate_scattering, integrate_step_potential,
                             monotone_quantity_check, plancherel_check)
from nlft.scattering import StepPotential, evolve


@pytest.fixture(scope="module")
def bump():
    return default_bump(1001)


def test_bump_normalised(bump):
    assert bump.l2_sq() == pytest.approx(1.0, rel=1e-6)
    assert bump.is_compact()
    assert bump(0.0) > 0 and bump(1.0) == pytest.approx(0.0, abs=1e-12)


def test_zero_potential_identity():
    p = integrate_scattering(SampledPotential.zero(), 3.0)
    assert p.a == 1 and p.b == 0


@pytest.mark.parametrize("k", [0.0, 0.7, -4.0, 15.0])
def test_determinant_and_gronwall(bump, k):
    p = integrate_scattering(bump, k, tol=1e-10)
    assert p.det_deviation <= 1e-9
    assert p.op_norm <= math.exp(bump.l1()) * (1 + 1e-12)


def test_real_even_potential_at_zero(bump):
    # at k = 0 with real F the generators commute: a = cosh, |b| = sinh of the integral
    p = integrate_scattering(bump, 0.0, tol=1e-12)
    m = bump.l1()
    assert abs(p.a) == pytest.approx(math.cosh(m), rel=1e-8)
    assert abs(p.b) == pytest.approx(math.sinh(m), rel=1e-8)


def test_asymptotic_phase(bump):
    rows = asymptotic_phase_check(bump, [10.0, 20.0, 40.0])
    assert all(r.measured > 0 for r in rows)
    # the leading term is exact to O(k^-3)
    assert all(r.scaled_deviation * r.k < 6 for r in rows)
    assert rows[-1].scaled_deviation < 0.3 * rows[0].scaled_deviation


@pytest.mark.parametrize("k", [1 + 0.5j, -3 + 2j, 0.1j])
def test_monotone_quantity(bump, k):
    res = monotone_quantity_check(bump, k)
    assert res.passed and res.derivative_error < 1e-5


def test_monotone_zero_potential():
    res = monotone_quantity_check(SampledPotential.zero(), 0.5j)
    assert res.passed and np.all(np.diff(res.quantity) > 0)


def test_rejects_lower_half_plane(bump):
    with pytest.raises(ValueError):
        integrate_many(bump, [1 - 1j])
    with pytest.raises(ValueError):
        monotone_quantity_check(bump, 2.0)


@pytest.mark.parametrize("d", [2, 3])
def test_step_potential_against_exact(rng, d):
    F = StepPotential(d, 0, 2, 0.4 * (rng.normal(size=d**2) + 1j * rng.normal(size=d**2)))
    for i in range(0, d**2, 3):
        k = DadicScalar(i, -2, d)
        a, b = integrate_step_potential(F, k)
        g = evolve(F, k).final
        assert abs(a - g.a) < 1e-9 and abs(b - g.b) < 1e-9


def test_plancherel_coarse(bump):
    res = plancherel_check(bump, k_max=20.0, dk=0.05, tol=1e-8)
    assert res.relative_error < 0.01
    assert res.max_det_deviation < 1e-6
    assert res.decay_exponent > 2
    z = plancherel_check(SampledPotential.zero(), k_max=5.0)
    assert z.integral == 0
