"""Exact scattering data for d-adic step potentials.

On a cell where both ``F`` and ``w(k, .)`` are constant the ODE
``G' = W G`` has a closed-form solution, so every transfer matrix here is a
finite ordered product of generator exponentials.  Later cells act on the
left.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import su11
from .cantor import (DadicInterval, DadicScalar, Multitile, Tile, exponent_table,
                     exponents_for_point, root_of_unity)
from .su11 import Su11Matrix


@dataclass
class StepPotential:
    """``F`` constant on cells ``[c d^s, (c+1) d^s)`` of ``[0, d^K)`` with ``s = cell_scale``."""

    d: int
    cell_scale: int
    K: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.d ** (self.K - self.cell_scale)
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} cell values, got shape {self.values.shape}")
        if self.cell_scale > self.K:
            raise ValueError("cell scale exceeds support bound")

    @classmethod
    def zero(cls, d: int, K: int, cell_scale: int = 0) -> "StepPotential":
        return cls(d, cell_scale, K, np.zeros(d ** (K - cell_scale), dtype=complex))

    @classmethod
    def from_cells(cls, d: int, K: int, cell_scale: int, cells: dict) -> "StepPotential":
        vals = np.zeros(d ** (K - cell_scale), dtype=complex)
        for c, v in cells.items():
            vals[c] = v
        return cls(d, cell_scale, K, vals)

    @property
    def cell_length(self) -> float:
        return float(self.d) ** self.cell_scale

    def l2_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2)) * self.cell_length

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values))) * self.cell_length

    def refined(self, scale: int) -> np.ndarray:
        """Cell values repeated down to a finer ``scale``."""
        if scale > self.cell_scale:
            raise ValueError("can only refine to finer scales")
        return np.repeat(self.values, self.d ** (self.cell_scale - scale))

    def extended(self, K: int) -> "StepPotential":
        """Same function viewed with a larger support bound."""
        if K < self.K:
            raise ValueError("cannot shrink support bound")
        vals = np.zeros(self.d ** (K - self.cell_scale), dtype=complex)
        vals[: self.values.size] = self.values
        return StepPotential(self.d, self.cell_scale, K, vals)

    def value_at_cells(self, idx, scale: int) -> np.ndarray:
        """F on cells ``idx`` of a finer ``scale`` (zero outside the support)."""
        idx = np.asarray(idx, dtype=np.int64)
        parent = idx // self.d ** (self.cell_scale - scale)
        inside = parent < self.values.size
        out = np.zeros(idx.shape, dtype=complex)
        out[inside] = self.values[parent[inside]]
        return out


@dataclass
class ScatteringProfile:
    """``G(k, x)`` at the boundaries ``x = c d^scale`` of the refined cells."""

    k: DadicScalar
    scale: int
    a: np.ndarray
    b: np.ndarray

    @property
    def final(self) -> Su11Matrix:
        return Su11Matrix.unchecked(complex(self.a[-1]), complex(self.b[-1]))

    def checkpoints(self):
        d = self.k.base
        for c in range(self.a.size):
            yield DadicScalar(c, self.scale, d), Su11Matrix.unchecked(
                complex(self.a[c]), complex(self.b[c]))

    def to_json(self) -> str:
        d = self.k.base
        rows = [[str(DadicScalar(c, self.scale, d)), [self.a[c].real, self.a[c].imag],
                 [self.b[c].real, self.b[c].imag]] for c in range(self.a.size)]
        return json.dumps({"k": str(self.k), "profile": rows})


def _refine_scale(F: StepPotential, k: DadicScalar, extra: int | None = None) -> int:
    s = F.cell_scale
    top = k.top_position()
    if top is not None:
        s = min(s, -top - 1)
    if extra is not None:
        s = min(s, extra)
    return s


def reduce_desc(a: np.ndarray, b: np.ndarray):
    """Product ``G_{n-1} ... G_0`` over the last axis by pairwise reduction."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[-1] == 0:
        shape = a.shape[:-1]
        return np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex)
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            pad = a.shape[:-1] + (1,)
            a = np.concatenate([a, np.ones(pad, dtype=complex)], axis=-1)
            b = np.concatenate([b, np.zeros(pad, dtype=complex)], axis=-1)
        a, b = su11.mul_arr(a[..., 1::2], b[..., 1::2], a[..., 0::2], b[..., 0::2])
    return a[..., 0], b[..., 0]


def _cell_generators(F: StepPotential, k: DadicScalar, lo: int, hi: int, s: int):
    """Per-cell exponentials on cells ``lo..hi-1`` at scale ``s``."""
    idx = np.arange(lo, hi, dtype=np.int64)
    vals = F.value_at_cells(idx, s)
    e = exponents_for_point(k, idx, s)
    z = vals * root_of_unity(F.d, e)
    return su11.expgen_arr(z, float(F.d) ** s)


def transfer_interval(F: StepPotential, k: DadicScalar, omega: DadicInterval) -> Su11Matrix:
    """``G_omega(k, infinity)``: the solution driven by ``F 1_omega``."""
    s = _refine_scale(F, k, omega.scale)
    cells = omega.descendants(s)
    hi_support = F.d ** (F.K - s)
    lo, hi = cells.start, min(cells.stop, hi_support)
    if lo >= hi:
        return Su11Matrix.identity()
    a, b = _cell_generators(F, k, lo, hi, s)
    a, b = reduce_desc(a, b)
    return Su11Matrix.unchecked(complex(a), complex(b))


def tile_matrix(F: StepPotential, p: Tile) -> Su11Matrix:
    return transfer_interval(F, p.freq.left, p.space)


def twist_exponent(k: DadicScalar, p: Tile) -> int:
    """The ``j`` with ``G_omega(k) = phase_twist(G_p, j)`` for ``k`` in ``I_p``."""
    from .cantor import character_exponent
    if not p.freq.contains_point(k):
        raise ValueError("k outside the tile's frequency interval")
    return character_exponent(k, p.space.left)


def vertical_from_horizontal(P: Multitile, horizontals) -> list[Su11Matrix]:
    d = P.base
    if len(horizontals) != d:
        raise ValueError(f"expected {d} horizontal matrices")
    out = []
    for m in range(d):
        g = Su11Matrix.identity()
        for j in range(d - 1, -1, -1):
            g = su11.compose(g, su11.phase_twist(horizontals[j], root_of_unity(d, m * j)))
        out.append(g)
    return out


def evolve(F: StepPotential, k: DadicScalar) -> ScatteringProfile:
    s = _refine_scale(F, k)
    n = F.d ** (F.K - s)
    a, b = _cell_generators(F, k, 0, n, s)
    a, b = su11.prefix_products_desc(a, b)
    a = np.concatenate([[1.0 + 0j], a])
    b = np.concatenate([[0j], b])
    return ScatteringProfile(k, s, a, b)


def walsh_fourier(F: StepPotential, k: DadicScalar) -> complex:
    """``integral of F(x) w(k, x) dx`` as an exact finite sum."""
    s = _refine_scale(F, k)
    idx = np.arange(F.d ** (F.K - s), dtype=np.int64)
    e = exponents_for_point(k, idx, s)
    vals = F.value_at_cells(idx, s)
    return complex(np.sum(vals * root_of_unity(F.d, e))) * float(F.d) ** s


def carleson_sup(F: StepPotential, k: DadicScalar, refine: bool = False,
                 tol: float = 1e-6, max_sub: int = 1 << 12) -> float:
    """``sup_x log|a(k, x)|`` over cell boundaries.

    With ``refine`` each cell is also sampled at ``n`` equally spaced interior
    points, ``n`` chosen so that ``|F_c| len / n <= tol`` (capped at ``max_sub``).
    """
    prof = evolve(F, k)
    best = float(np.max(su11.log_a_arr(prof.b)))
    if not refine:
        return best
    s = prof.scale
    length = float(F.d) ** s
    n_cells = prof.a.size - 1
    idx = np.arange(n_cells, dtype=np.int64)
    z = F.value_at_cells(idx, s) * root_of_unity(F.d, exponents_for_point(k, idx, s))
    for c in np.nonzero(z)[0]:
        n = int(min(max_sub, np.ceil(abs(z[c]) * length / tol)))
        t = np.arange(1, n) * (length / n)
        ea, eb = su11.expgen_arr(np.full(t.size, z[c]), t)
        ga, gb = su11.mul_arr(ea, eb, prof.a[c], prof.b[c])
        if gb.size:
            best = max(best, float(np.max(su11.log_a_arr(gb))))
    return best


# ---------------------------------------------------------------------------
# grid computations

def grid_generators(F: StepPotential, k_scale: int, K: int | None = None,
                    k_idx=None):
    """Cell exponentials for grid points ``k = i d^k_scale < d^K`` and every cell ``x``.

    Returns arrays of shape ``(n_k, n_x)`` and the x-cell scale.
    """
    d = F.d
    K = F.K if K is None else K
    s = min(F.cell_scale, -K)
    n_x = d ** (F.K - s)
    if k_idx is None:
        k_idx = np.arange(d ** (K - k_scale))
    e = exponent_table(d, k_idx, k_scale, K - k_scale, np.arange(n_x), s, F.K - s)
    # the phase only rotates b, so exponentiate each cell once
    ca, cb = su11.expgen_arr(F.value_at_cells(np.arange(n_x), s), float(d) ** s)
    roots = root_of_unity(d, np.arange(d))
    a = np.broadcast_to(ca, e.shape).copy()
    b = cb[None, :] * roots[e]
    return a, b, s


def _k_chunks(F: StepPotential, k_scale: int, K: int, budget: int = 1 << 22):
    n_k = F.d ** (K - k_scale)
    n_x = F.d ** (F.K - min(F.cell_scale, -K))
    step = max(1, budget // n_x)
    for lo in range(0, n_k, step):
        yield np.arange(lo, min(n_k, lo + step))


def grid_final(F: StepPotential, k_scale: int | None = None, K: int | None = None):
    """``(a, b)`` of ``G(k, infinity)`` on the grid ``k = i d^k_scale < d^K``."""
    K = F.K if K is None else K
    k_scale = -K if k_scale is None else k_scale
    parts_a, parts_b = [], []
    for idx in _k_chunks(F, k_scale, K):
        a, b, _ = grid_generators(F, k_scale, K, idx)
        a, b = reduce_desc(a, b)
        parts_a.append(a)
        parts_b.append(b)
    return np.concatenate(parts_a), np.concatenate(parts_b)


def grid_sup(F: StepPotential, k_scale: int | None = None, K: int | None = None) -> np.ndarray:
    """``sup_x log|a(k, x)|`` over cell boundaries for every grid point."""
    K = F.K if K is None else K
    k_scale = -K if k_scale is None else k_scale
    out = []
    for idx in _k_chunks(F, k_scale, K):
        a, b, _ = grid_generators(F, k_scale, K, idx)
        _, b = su11.prefix_products_desc(a, b)
        out.append(np.maximum(np.max(su11.log_a_arr(b), axis=-1), 0.0))
    return np.concatenate(out)


class TileTable:
    """``G_p`` for every tile ``p`` in ``[0, d^K)^2`` at scales ``-K..K``.

    ``table[kappa]`` holds arrays of shape ``(d^(K-kappa), d^(K+kappa))``
    indexed by the frequency and space interval indices.  The top scale is
    computed directly (there ``k_0 = 0`` so no phases occur); coarser-in-x
    scales follow from the twisted product identity applied multitile by
    multitile.
    """

    def __init__(self, F: StepPotential):
        if F.cell_scale > -F.K:
            F = _refine_potential(F, -F.K)
        self.F = F
        d, K = F.d, F.K
        self.d, self.K = d, K
        self.a: dict[int, np.ndarray] = {}
        self.b: dict[int, np.ndarray] = {}
        # top scale: I = [0, d^K), omega of length d^-K
        cells = F.values
        a, b = su11.expgen_arr(cells, F.cell_length)
        group = d ** (-K - F.cell_scale)
        a, b = reduce_desc(a.reshape(-1, group), b.reshape(-1, group))
        self.a[K], self.b[K] = a[None, :], b[None, :]
        tw = root_of_unity(d, np.outer(np.arange(d), np.arange(d)))  # [m, j]
        for kap in range(K - 1, -K - 1, -1):
            ha, hb = self.a[kap + 1], self.b[kap + 1]
            n_i, n_w = ha.shape
            ha = ha.reshape(n_i, n_w // d, d)
            hb = hb.reshape(n_i, n_w // d, d)
            va = np.empty((n_i, d, n_w // d), dtype=complex)
            vb = np.empty_like(va)
            for m in range(d):
                ra, rb = ha[..., 0], hb[..., 0] * tw[m, 0]
                for j in range(1, d):
                    ra, rb = su11.mul_arr(ha[..., j], hb[..., j] * tw[m, j], ra, rb)
                va[:, m, :], vb[:, m, :] = ra, rb
            self.a[kap] = va.reshape(n_i * d, n_w // d)
            self.b[kap] = vb.reshape(n_i * d, n_w // d)

    def matrix(self, p: Tile) -> Su11Matrix:
        return Su11Matrix.unchecked(complex(self.a[p.scale][p.freq.index, p.space.index]),
                                    complex(self.b[p.scale][p.freq.index, p.space.index]))

    def scales(self) -> range:
        return range(-self.K, self.K + 1)


def _refine_potential(F: StepPotential, scale: int) -> StepPotential:
    return StepPotential(F.d, scale, F.K, F.refined(scale))


@dataclass
class CascadeReport:
    rows: list  # (scale, lhsSum, rhsSum, slack, pass)
    loga_lhs: float
    loga_rhs: float
    loga_pass: bool
    final_bound: float
    final_bound_pass: bool
    small_cell_pass: bool
    plancherel_integral: float
    c_measured: float

    @property
    def passed(self) -> bool:
        return (all(r[4] for r in self.rows) and self.loga_pass
                and self.small_cell_pass)

    def to_csv(self) -> str:
        lines = ["scale,lhsSum,rhsSum,slack"]
        lines += [f"{s},{l!r},{r!r},{sl!r}" for s, l, r, sl, _ in self.rows]
        return "\n".join(lines) + "\n"


def cascade_check(F: StepPotential, beta="piecewise", params=None,
                  rtol: float = 1e-9, table: TileTable | None = None) -> CascadeReport:
    """Per-scale swapping sums for all tiles in ``[0, d^K)^2``.

    ``beta`` is ``"piecewise"`` (default parameters unless ``params`` given),
    ``"loghs"`` (only valid for d = 2) or a callable on ``|b|`` arrays.
    """
    from . import swapping

    d, K = F.d, F.K
    table = table or TileTable(F)
    if callable(beta):
        bfun = beta
    elif beta == "piecewise":
        params = params or swapping.SwappingParams.default(d)
        bfun = lambda r: swapping.beta_float(r, params)  # noqa: E731
    elif beta == "loghs":
        bfun = swapping.beta_loghs_float
    else:
        raise ValueError(f"unknown beta {beta!r}")

    sums = {kap: float(np.sum(bfun(np.abs(table.b[kap])))) for kap in table.scales()}
    rows = []
    for kap in range(-K, K):
        lhs, rhs = sums[kap], d * sums[kap + 1]
        rows.append((kap, lhs, rhs, rhs - lhs, lhs <= rhs * (1 + rtol) + 1e-300))

    # endpoint identity: p_{-K} tiles cover [0,d^K) in k with omega = [0, d^K)
    loga_bottom = su11.log_a_arr(table.b[-K])
    loga_lhs = float(d) ** (-K) * float(np.sum(loga_bottom))
    _, gb = grid_final(F)
    integral = float(np.sum(su11.log_a_arr(gb))) * float(d) ** (-K)
    loga_pass = abs(loga_lhs - integral) <= 1e-10 * max(1.0, abs(integral))

    final = float(d) ** K * float(np.sum(su11.log_a_arr(table.b[K])))
    norm = F.l2_sq()
    final_pass = final <= 4 * norm * (1 + 1e-12) + 1e-300

    bK = np.abs(table.b[K])
    small = bK <= 1.0
    opn = np.log(np.sqrt(1 + bK**2) + bK)
    chain1 = opn[small] >= 0.5 * bK[small] * (1 - 1e-12)
    chain2 = 0.5 * bK[small] >= 0.25 * np.sqrt(su11.log_a_arr(bK[small])) * (1 - 1e-12)
    small_pass = bool(np.all(chain1) and np.all(chain2))

    c = integral / norm if norm > 0 else 0.0
    return CascadeReport(rows, loga_lhs, integral, loga_pass, final, final_pass,
                         small_pass, integral, c)


def plancherel_integral(F: StepPotential, K: int | None = None) -> float:
    """``integral over [0, d^K) of log|a(k, infinity)| dk`` on the exact grid."""
    K = F.K if K is None else K
    G = F.extended(K) if K > F.K else F
    _, b = grid_final(G, -K, K)
    return float(np.sum(su11.log_a_arr(b))) * float(F.d) ** (-K)
