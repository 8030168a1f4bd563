import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlft.cantor import DadicInterval, DadicScalar, Tile, character_exponent, root_of_unity
from nlft.multilinear import (GAMMA3_IM, build_wave_packet, counterexample,
                              counterexample_report, maximal_quadratic, ones_count,
                              ones_distribution, packet_self_terms, picard_matrix, picard_term,
                              truncated_quadratic, truncated_quadratic_direct,
                              truncated_quadratic_table)
from nlft.scattering import StepPotential, evolve


def phased(F, k, scale):
    # oracle values f_c = F_c w(k, c d^scale) computed point by point
    n = F.d ** (F.K - scale)
    vals = F.value_at_cells(np.arange(n), scale)
    return [vals[c] * root_of_unity(F.d, character_exponent(k, DadicScalar(c, scale, F.d)))
            for c in range(n)]


def pair_sum(f, L):
    tot = 0j
    for i in range(len(f)):
        tot += 0.5 * abs(f[i]) ** 2 * L * L
        for j in range(i + 1, len(f)):
            tot += f[i] * np.conj(f[j]) * L * L
    return tot


@pytest.mark.parametrize("d", [2, 3])
def test_picard_terms_against_pair_sums(rng, d):
    F = StepPotential(d, 0, 2, rng.normal(size=d**2) + 1j * rng.normal(size=d**2))
    for i in range(0, d**2, 2):
        k = DadicScalar(i, -2, d)
        f = phased(F, k, 0)
        assert picard_term(F, k, None, 1) == pytest.approx(sum(f), abs=1e-12)
        assert picard_term(F, k, None, 2) == pytest.approx(pair_sum(f, 1.0), rel=1e-12)
        x = DadicScalar(3, 0, d)
        assert picard_term(F, k, x, 2) == pytest.approx(pair_sum(f[:3], 1.0), rel=1e-12)


@given(st.integers(0, 2**32))
def test_quadratic_real_part(seed):
    rng = np.random.default_rng(seed)
    F = StepPotential(3, -1, 1, rng.normal(size=9) + 1j * rng.normal(size=9))
    k = DadicScalar(int(rng.integers(0, 27)), -2, 3)
    p1, q = picard_term(F, k, None, 1), picard_term(F, k, None, 2)
    assert q.real == pytest.approx(0.5 * abs(p1) ** 2, rel=1e-10, abs=1e-12)


def test_picard_order_three_rejected():
    with pytest.raises(ValueError):
        picard_term(StepPotential.zero(2, 1), DadicScalar(0, 0, 2), None, 3)


def test_picard_matrix_cubic_remainder(rng):
    F = StepPotential(2, 0, 3, 0.01 * (rng.normal(size=8) + 1j * rng.normal(size=8)))
    l1 = F.l1()
    for i in range(8):
        k = DadicScalar(i, -3, 2)
        G = evolve(F, k).final.matrix()
        assert np.max(np.abs(G - picard_matrix(F, k))) <= l1**3 * math.exp(l1)


def test_maximal_quadratic_single_cell():
    F = StepPotential.from_cells(3, 1, 0, {2: 0.3 - 0.4j})
    k = DadicScalar(0, 0, 3)
    assert maximal_quadratic(F, k) == pytest.approx(0.5 * 0.25)


@pytest.mark.parametrize("tile", [
    Tile(DadicInterval(0, 0, 3), DadicInterval(0, 0, 3)),
    Tile(DadicInterval(-1, 4, 3), DadicInterval(1, 2, 3)),
    Tile(DadicInterval(1, 1, 2), DadicInterval(-1, 3, 2)),
])
def test_wave_packets(tile):
    wp = build_wave_packet(tile)
    assert wp.packet.l2_sq() == pytest.approx(1.0)
    assert wp.transform.l2_sq() == pytest.approx(1.0)
    d = tile.base
    om = tile.space
    fine = om.scale - 2
    for c in range(0, (om.index + 2) * d ** (om.scale - fine), 1):
        x = DadicScalar(c, fine, d)
        assert abs(wp.reproduce(x) - wp.transform_at(x)) < 1e-12


@pytest.mark.parametrize("N", [1, 2, 3])
def test_counterexample_structure(N):
    cp = counterexample(N)
    F = cp.potential
    assert F.l2_sq() == pytest.approx(cp.norm_sq)
    tiles = cp.tiles()
    assert len(tiles) == 3**N
    assert sum(t.space.length for t in tiles) == 3 ** (2 * N)
    assert all(not a.intersects(b) for i, a in enumerate(tiles) for b in tiles[i + 1:])
    # each packet has unit modulus density 3^-N on its own interval
    assert np.allclose(np.abs(F.values), 3.0**-N)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_table_matches_direct(N):
    cp = counterexample(N)
    tab = truncated_quadratic_table(N)
    for J in range(3**N):
        k = DadicScalar(J * 3 + 1, -N - 1, 3)
        direct = truncated_quadratic_direct(cp, k)
        assert abs(direct - tab[J]) < 1e-13
        assert abs(truncated_quadratic(cp, k) - tab[J]) < 1e-13


def test_packet_self_terms_first_packet():
    # J = 0: only the empty sum; q[0] is the self-term of a packet of unit mass
    q = packet_self_terms(2)
    assert q[0] == pytest.approx(0.5)
    assert truncated_quadratic_table(2)[0] == 0


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
def test_measured_closed_forms(N):
    rep = counterexample_report(N)
    ch = rep.checks()
    assert ch["per_k_corrected"] and ch["mean_corrected"] and ch["sup_corrected"]
    assert ch["level_set"]
    assert rep.sup == pytest.approx(N * GAMMA3_IM / 9)


def test_stated_closed_forms_differ():
    # the alternative constants do not describe the computed values
    ch = counterexample_report(3).checks()
    assert not ch["per_k_reference"] and not ch["sup_reference"]


@pytest.mark.parametrize("positions", [3, 5, 7])
def test_ones_binomial(positions):
    for m, (obs, pred) in ones_distribution(positions, positions).items():
        assert obs == pytest.approx(pred)


def test_ones_count():
    # 0.1021 in base 3 -> digits 1,0,2,1 at positions -1..-4
    idx = np.array([1 * 27 + 0 * 9 + 2 * 3 + 1])
    assert ones_count(idx, -4, [-1, -2, -3, -4])[0] == 2


def test_memory_guard():
    with pytest.raises(MemoryError):
        counterexample(8).potential
    with pytest.raises(ValueError):
        counterexample(0)
