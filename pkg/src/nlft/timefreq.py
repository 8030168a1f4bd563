"""Trees of multitiles, sizes, ordered splittings and tree maximal functions.

Everything here works on a :class:`TileField`, which holds ``G_p`` and the
swapping function ``beta(G_p)`` for every tile of ``[0, d^K)^2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable

import numpy as np

from . import su11
from .cantor import (DadicInterval, DadicScalar, Multitile, Tile, character_exponent,
                     convexify, is_convex, multitiles_between, multitiles_in_square,
                     root_of_unity, tile_less)
from .scattering import StepPotential, TileTable, grid_sup
from .su11 import Su11Matrix


class TileField:
    """Tile matrices and swapping-function values for a fixed potential."""

    def __init__(self, F: StepPotential, beta: str | Callable = "piecewise",
                 params=None, gamma: float | None = None, table: TileTable | None = None):
        from . import swapping

        self.F = F
        self.d, self.K = F.d, F.K
        self.table = table or TileTable(F)
        if callable(beta):
            fn, default_gamma = beta, None
        elif beta == "piecewise":
            params = params or swapping.SwappingParams.default(F.d)
            fn = lambda r: swapping.beta_float(r, params)  # noqa: E731
            default_gamma = None
        elif beta == "loghs":
            fn, default_gamma = swapping.beta_loghs_float, 2.0
        elif beta == "loga":
            fn, default_gamma = su11.log_a_arr, 1.0
        else:
            raise ValueError(f"unknown beta {beta!r}")
        self.beta_name = beta if isinstance(beta, str) else "custom"
        self.params = params
        self.values = {k: fn(np.abs(self.table.b[k])) for k in self.table.scales()}
        if gamma is None:
            gamma = default_gamma
        if gamma is None:
            gamma = swapping.comparability_estimate(params, 2000, seed=0).gamma
        self.gamma = float(gamma)

    def beta(self, p: Tile) -> float:
        return float(self.values[p.scale][p.freq.index, p.space.index])

    def matrix(self, p: Tile) -> Su11Matrix:
        return self.table.matrix(p)

    def matrix_at(self, p: Tile, k: DadicScalar) -> Su11Matrix:
        """``G_{omega_p}(k)`` for ``k`` in ``I_p``: a phase twist of ``G_p``."""
        j = character_exponent(k, p.space.left)
        return su11.phase_twist(self.matrix(p), root_of_unity(self.d, j))


# ---------------------------------------------------------------------------
# trees

def j_index(P: Multitile, top: Multitile) -> int:
    if P == top:
        return P.base - 1
    if not tile_less(P, top):
        raise ValueError("multitile is not below the top")
    hits = [j for j, p in enumerate(P.horizontal()) if p.space.contains(top.space)]
    assert len(hits) == 1, "horizontal subtiles must partition omega_P"
    return hits[0]


@dataclass(frozen=True)
class Tree:
    top: Multitile
    members: frozenset

    def __post_init__(self):
        if self.top not in self.members:
            raise ValueError("top must be a member")
        for P in self.members:
            if not tile_less(P, self.top):
                raise ValueError(f"{P} is not below the top {self.top}")

    def j(self, P: Multitile) -> int:
        return j_index(P, self.top)

    def counting_tiles(self) -> list[tuple[Multitile, Tile]]:
        """Horizontal subtiles ``p_j`` with ``j < j_P`` over all members."""
        out = []
        for P in self.members:
            hs = P.horizontal()
            out.extend((P, hs[j]) for j in range(self.j(P)))
        return out

    @property
    def length(self) -> float:
        return float(self.top.freq.length)


def tiles_disjoint(tiles: Iterable[Tile]) -> bool:
    tiles = list(tiles)
    for i in range(len(tiles)):
        for j in range(i + 1, len(tiles)):
            if tiles[i].intersects(tiles[j]):
                return False
    return True


def tree_weight(T: Tree, fld: TileField, check: bool = False) -> float:
    tiles = T.counting_tiles()
    if check and not tiles_disjoint(p for _, p in tiles):
        raise AssertionError("counting tiles of a tree overlap")
    total = math.fsum(float(P.freq.length) * fld.beta(p) for P, p in tiles)
    return total / T.length


def maximal_tree(S: Iterable[Multitile], top: Multitile) -> Tree:
    return Tree(top, frozenset(P for P in S if tile_less(P, top)))


def collection_size(S: Iterable[Multitile], fld: TileField) -> float:
    S = list(S)
    return max((tree_weight(maximal_tree(S, P), fld) for P in S), default=0.0)


def brute_force_size(S: Iterable[Multitile], fld: TileField) -> float:
    """Supremum of the tree weight over every subset of ``S`` that is a tree."""
    S = list(S)
    best = 0.0
    for n in range(1, len(S) + 1):
        for sub in combinations(S, n):
            tops = [P for P in sub if all(tile_less(Q, P) for Q in sub)]
            if tops:
                best = max(best, tree_weight(Tree(tops[0], frozenset(sub)), fld))
    return best


def _upper_key(P: Multitile):
    from fractions import Fraction
    return (Fraction(P.space.index + 1) * Fraction(P.base) ** P.space.scale,
            -P.scale, P.freq.index)


def select_trees(S: Iterable[Multitile], alpha: float, fld: TileField,
                 check_convex: bool = True):
    """Greedy tree selection at threshold ``alpha``.

    Returns ``(trees, candidates, remainder)`` where ``trees`` are maximal in
    ``S`` and ``candidates`` are the trees that qualified in the shrinking
    remaining set (the ones whose counting tiles are pairwise disjoint).
    """
    S = set(S)
    if check_convex and not is_convex(S):
        raise ValueError("tree selection requires a convex collection")
    remaining = set(S)
    trees, cands = [], []
    while True:
        best = None
        for P in remaining:
            cand = maximal_tree(remaining, P)
            if tree_weight(cand, fld) > alpha:
                key = _upper_key(P)
                if best is None or key < best[0]:
                    best = (key, cand)
        if best is None:
            break
        cand = best[1]
        T = maximal_tree(S, cand.top)
        trees.append(T)
        cands.append(cand)
        remaining -= T.members
    return trees, cands, remaining


@dataclass
class TreeSplitting:
    components: list  # (level, members: frozenset, trees: list[Tree], candidates)
    residual: frozenset
    scale: float

    def levels(self):
        return [c[0] for c in self.components]

    def level_of(self) -> dict:
        out = {P: math.inf for P in self.residual}
        for lvl, members, _, _ in self.components:
            for P in members:
                out[P] = lvl
        return out

    def verify(self, S: Iterable[Multitile], fld: TileField) -> dict:
        S = set(S)
        union = set(self.residual)
        parts_disjoint = True
        for _, members, _, _ in self.components:
            if union & members:
                parts_disjoint = False
            union |= members
        lvl = self.level_of()
        ordered = all(lvl[P] <= lvl[Q] for P in S for Q in S if P != Q and tile_less(P, Q))
        saturated = all(
            P in T.members
            for _, members, trees, _ in self.components for T in trees
            for P in members if tile_less(P, T.top))
        size_ok = all(collection_size(members, fld) <= 2.0 ** (-4 * k) * self.scale * (1 + 1e-12)
                      for k, members, _, _ in self.components)
        counting_disjoint = all(
            tiles_disjoint(p for T in cands for _, p in T.counting_tiles())
            for _, _, _, cands in self.components)
        residual_zero = collection_size(self.residual, fld) == 0.0
        return {"partition": parts_disjoint and union == S, "ordered": ordered,
                "saturated": saturated, "size_decay": size_ok,
                "counting_disjoint": counting_disjoint, "residual_zero": residual_zero}

    def tops_measure(self) -> list[tuple[int, float]]:
        return [(k, math.fsum(T.length for T in trees)) for k, _, trees, _ in self.components]

    def to_json(self) -> str:
        comps = [{"level": k, "trees": [{"top": str(T.top), "members": sorted(map(str, T.members))}
                                        for T in trees]}
                 for k, _, trees, _ in self.components]
        return json.dumps({"scale": self.scale, "components": comps,
                           "residual": sorted(map(str, self.residual))}, indent=1)


def ordered_splitting(S: Iterable[Multitile], fld: TileField,
                      scale: float | None = None, max_levels: int = 400) -> TreeSplitting:
    """Split ``S`` into levels of size at most ``2^{-4k} scale`` (default: size of S)."""
    S = set(S)
    if not is_convex(S):
        raise ValueError("ordered splitting requires a convex collection")
    if scale is None:
        scale = collection_size(S, fld)
    comps = []
    remaining = set(S)
    k = 0
    while remaining and k < max_levels and scale > 0:
        if collection_size(remaining, fld) == 0.0:
            break
        trees, cands, rest = select_trees(remaining, 2.0 ** (-4 * (k + 1)) * scale, fld,
                                          check_convex=False)
        if trees:
            comps.append((k, frozenset(remaining - rest), trees, cands))
        remaining = rest
        k += 1
    return TreeSplitting(comps, frozenset(remaining), scale)


# ---------------------------------------------------------------------------
# tree maximal function

def _chain_factors(T: Tree, fld: TileField, k: DadicScalar):
    """``(scale, prod_{j<j_P} G_{p_j}(k))`` for members with ``k`` in ``I_P``, top excluded."""
    out = []
    for P in T.members:
        if P == T.top or not P.freq.contains_point(k):
            continue
        hs = P.horizontal()
        g = Su11Matrix.identity()
        for j in range(T.j(P) - 1, -1, -1):
            g = su11.compose(g, fld.matrix_at(hs[j], k))
        out.append((P.scale, g))
    out.sort(key=lambda t: -t[0])
    return out


def tree_maximal(T: Tree, fld: TileField, k: DadicScalar, upper_only: bool = False) -> float:
    """``M_T(k)`` (or the variant with the upper cutoff fixed when ``upper_only``)."""
    if not T.top.freq.contains_point(k):
        raise ValueError("k outside I_T")
    chain = _chain_factors(T, fld, k)
    best = 0.0
    starts = [0] if upper_only else range(len(chain))
    for i in starts:
        g = Su11Matrix.identity()
        for _, f in chain[i:]:
            g = su11.compose(g, f)
            best = max(best, float(su11.log_a(g)))
    return best


def tree_k_grid(T: Tree, K: int) -> list[DadicScalar]:
    """Grid of scale ``-K`` on ``I_T`` (M_T is constant on its cells)."""
    d = T.top.base
    return [DadicScalar(i, -K, d) for i in T.top.freq.descendants(-K)]


@dataclass
class JohnNirenbergProfile:
    rows: list  # (mu, fraction, threshold)
    c_fit: float
    nonincreasing: bool
    superexponential: bool

    def to_csv(self) -> str:
        return "mu,fraction,threshold\n" + "".join(
            f"{m},{f!r},{t!r}\n" for m, f, t in self.rows)


def fit_quadratic_decay(mus, fracs) -> float:
    """Least-squares ``c`` in ``log2 f = b - c mu^2`` over the positive fractions."""
    pts = [(m, math.log2(f)) for m, f in zip(mus, fracs) if f > 0]
    if len(pts) < 2:
        return math.inf if any(f == 0 for f in fracs) else 0.0
    x = np.array([m * m for m, _ in pts], dtype=float)
    y = np.array([v for _, v in pts])
    A = np.vstack([np.ones_like(x), -x]).T
    (_, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(c)


def john_nirenberg_profile(T: Tree, fld: TileField, mu_max: int = 6, unit: str = "gamma",
                           values: np.ndarray | None = None) -> JohnNirenbergProfile:
    """Level-set fractions of ``M_T`` at thresholds growing like ``4^mu``.

    ``unit="gamma"`` uses ``4 d Gamma 4^mu size(T)``; ``unit="size"`` drops
    the ``4 d Gamma`` factor.
    """
    size = collection_size(T.members, fld)
    if values is None:
        values = np.array([tree_maximal(T, fld, k) for k in tree_k_grid(T, fld.K)])
    base = 4 * fld.d * fld.gamma if unit == "gamma" else 1.0
    rows = []
    for mu in range(mu_max + 1):
        thr = base * 4.0**mu * size
        rows.append((mu, float(np.mean(values > thr)) if values.size else 0.0, thr))
    fr = [f for _, f, _ in rows]
    noninc = all(a >= b for a, b in zip(fr, fr[1:]))
    c = fit_quadratic_decay([m for m, _, _ in rows], fr)
    superexp = (c > 0) or fr[-1] == 0.0
    return JohnNirenbergProfile(rows, c, noninc, superexp)


# ---------------------------------------------------------------------------
# Bessel-type inequality

@dataclass
class BesselResult:
    lhs: float
    rhs: float
    passed: bool
    problems: list = field(default_factory=list)


def _covers(q: Tile, ps: list[Tile]) -> bool:
    omegas = [p.space for p in ps if p.intersects(q)]
    maximal = [w for w in omegas if not any(v != w and v.contains(w) for v in omegas)]
    maximal = set(maximal)
    total = sum(w.length for w in maximal)
    return total >= q.space.length


def bessel_check(q: Iterable[Tile], p: Iterable[Tile], fld: TileField,
                 rtol: float = 1e-9) -> BesselResult:
    q, p = list(q), list(p)
    problems = []
    if not tiles_disjoint(q):
        problems.append("q not pairwise disjoint")
    for t in q:
        if not _covers(t, p):
            problems.append(f"{t} not covered")
        for s in p:
            if s.intersects(t) and not tile_less(t, s):
                problems.append(f"{t} meets {s} without q < p")
    lhs = math.fsum(float(t.freq.length) * fld.beta(t) for t in q)
    rhs = math.fsum(float(t.freq.length) * fld.beta(t) for t in p)
    return BesselResult(lhs, rhs, not problems and lhs <= rhs * (1 + rtol), problems)


def random_bessel_configuration(d: int, K: int, rng: np.random.Generator,
                                max_swaps: int = 12):
    """A valid ``(q, p)`` pair: ``p`` is a disjoint family at one scale, ``q``
    results from replacing horizontal subtiles of multitiles by vertical ones."""
    kap = int(rng.integers(1 - K + 1, K + 1)) if K > 1 else K
    # full horizontal sibling groups of random multitiles at scale kap
    groups = []
    for n in range(d ** (K - kap)):
        for L in range(d ** (K + kap - 1)):
            if rng.random() < 0.5:
                M = Multitile(DadicInterval(kap, n, d), DadicInterval(1 - kap, L, d))
                groups.extend(M.horizontal())
    p = list(groups)
    q = set(p)
    for _ in range(int(rng.integers(0, max_swaps + 1))):
        options = []
        for t in q:
            if t.scale - 1 < -K or 1 - t.scale > K:
                continue
            M = Multitile(t.freq, t.space.ancestor(1 - t.scale))
            if all(h in q for h in M.horizontal()):
                options.append(M)
        if not options:
            break
        options.sort()
        M = options[int(rng.integers(len(options)))]
        q -= set(M.horizontal())
        q |= set(M.vertical())
    return sorted(q), p


# ---------------------------------------------------------------------------
# weak-type experiment

@dataclass
class WeakTypeResult:
    rows: list  # (lambda, measure, normalized)
    norm_sq: float

    @property
    def constant(self) -> float:
        return max((r[2] for r in self.rows), default=0.0)

    def to_csv(self) -> str:
        return "lambda,measure,constant\n" + "".join(
            f"{l!r},{m!r},{c!r}\n" for l, m, c in self.rows)


def weak_type_experiment(F: StepPotential, lambdas, K: int | None = None,
                         sups: np.ndarray | None = None) -> WeakTypeResult:
    """``|{k < d^K : sup_x log|a(k, x)| > lambda}|`` for each lambda.

    The k-grid has scale ``-K`` which resolves every phase of the potential
    on ``[0, d^K)``.
    """
    K = F.K if K is None else K
    G = F.extended(K) if K > F.K else F
    if sups is None:
        sups = grid_sup(G, -K, K)
    cell = float(F.d) ** (-K)
    norm = F.l2_sq()
    rows = []
    for lam in lambdas:
        meas = float(np.count_nonzero(sups > lam)) * cell
        rows.append((float(lam), meas, lam * meas / norm if norm > 0 else 0.0))
    return WeakTypeResult(rows, norm)


def exceptional_set(F: StepPotential, fld: TileField, k_cut: int,
                    splitting: TreeSplitting | None = None) -> dict:
    """Diagnostic assembly of the exceptional set from an ordered splitting.

    Levels below ``k_cut`` contribute whole tree intervals; later levels
    contribute the points where ``M_T`` exceeds ``4 d 4^(k - k_cut) 2^(-4k)``
    times the splitting scale.  Returns, per grid point, the first level
    that fired (or None).
    """
    d, K = F.d, F.K
    if splitting is None:
        S = multitiles_in_square(d, K)
        splitting = ordered_splitting(S, fld)
    grid = [DadicScalar(i, -K, d) for i in range(d ** (2 * K))]
    fired = {}
    for lvl, _, trees, _ in splitting.components:
        for T in trees:
            for kk in grid:
                if kk in fired or not T.top.freq.contains_point(kk):
                    continue
                if lvl < k_cut:
                    fired[kk] = lvl
                else:
                    thr = 4 * d * 4.0 ** (lvl - k_cut) * 2.0 ** (-4 * lvl) * splitting.scale
                    if tree_maximal(T, fld, kk) >= thr:
                        fired[kk] = lvl
    measure = len(fired) * float(d) ** (-K)
    return {"measure": measure, "fired": {str(k): v for k, v in fired.items()}}


# ---------------------------------------------------------------------------
# convex collections

def window_collection(d: int, K: int, freq: DadicInterval, space: DadicInterval,
                      scales: tuple[int, int]) -> set[Multitile]:
    """Multitiles of ``[0,d^K)^2`` with ``I in freq``, ``omega in space`` and scale in range.

    Each of these predicates is preserved by intermediate multitiles, so the
    result is convex.
    """
    lo, hi = scales
    return {P for P in multitiles_in_square(d, K)
            if lo <= P.scale <= hi and freq.contains(P.freq) and space.contains(P.space)}


def random_window(d: int, K: int, rng: np.random.Generator) -> set[Multitile]:
    fs = int(rng.integers(1 - K, K + 1))
    ss = int(rng.integers(1 - K, K + 1))
    freq = DadicInterval(fs, int(rng.integers(d ** (K - fs))), d)
    space = DadicInterval(ss, int(rng.integers(d ** (K - ss))), d)
    a, b = sorted(int(x) for x in rng.integers(1 - K, K + 1, 2))
    return window_collection(d, K, freq, space, (a, b))


def exhaustive_size_check(fld: TileField, max_size: int = 6, chunk: int = 1 << 16) -> dict:
    """Compare the maximal-tree formula with brute force on every convex
    collection of at most ``max_size`` multitiles in ``[0, d^K)^2``.

    Subsets are encoded as bitmasks; tree weights of all tree-shaped subsets
    are tabulated once and looked up with ``searchsorted``.
    """
    d, K = fld.d, fld.K
    tiles = multitiles_in_square(d, K)
    n = len(tiles)
    if n > 62:
        raise ValueError("too many multitiles for bitmask enumeration")
    index = {P: i for i, P in enumerate(tiles)}
    below = [[j for j, Q in enumerate(tiles) if tile_less(Q, P)] for P in tiles]
    # contribution of member Q in a tree with top P
    contrib = {}
    for i, P in enumerate(tiles):
        for j in below[i]:
            Q = tiles[j]
            hs = Q.horizontal()
            contrib[i, j] = math.fsum(float(Q.freq.length) * fld.beta(hs[t])
                                      for t in range(j_index(Q, P))) / float(P.freq.length)
    # tabulate weights of every tree subset, keyed by mask (max over possible tops)
    table: dict[int, float] = {}
    for i in range(n):
        others = [j for j in below[i] if j != i]
        for r in range(len(others) + 1):
            for sub in combinations(others, r):
                mask = (1 << i) | sum(1 << j for j in sub)
                w = contrib[i, i] + math.fsum(contrib[i, j] for j in sub)
                table[mask] = max(table.get(mask, 0.0), w)
    keys = np.array(sorted(table), dtype=np.int64)
    vals = np.array([table[k] for k in keys])
    # convexity constraints: pairs with intermediates
    constraints = []
    for i, P in enumerate(tiles):
        for j in below[i]:
            if j != i and P.scale - tiles[j].scale >= 2:
                mid = sum(1 << index[R] for R in multitiles_between(tiles[j], P))
                constraints.append(((1 << i) | (1 << j), mid))
    down = np.array([sum(1 << j for j in below[i]) for i in range(n)], dtype=np.int64)
    checked, mismatches, worst = 0, 0, 0.0
    bits = np.array([1 << i for i in range(n)], dtype=np.int64)
    for size in range(1, max_size + 1):
        combos = combinations(range(n), size)
        while True:
            block = np.array(list(_take(combos, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            masks = np.bitwise_or.reduce(bits[block], axis=1)
            ok = np.ones(masks.size, dtype=bool)
            for pair, mid in constraints:
                has = (masks & pair) == pair
                ok &= ~has | ((masks & mid) == mid)
            block, masks = block[ok], masks[ok]
            if masks.size == 0:
                continue
            brute = np.zeros(masks.size)
            for pattern in range(1, 1 << size):
                sel = [t for t in range(size) if pattern >> t & 1]
                sub = np.bitwise_or.reduce(bits[block[:, sel]], axis=1)
                pos = np.clip(np.searchsorted(keys, sub), 0, keys.size - 1)
                hit = keys[pos] == sub
                brute = np.maximum(brute, np.where(hit, vals[pos], 0.0))
            fast = np.zeros(masks.size)
            for t in range(size):
                top = block[:, t]
                sub = masks & down[top]
                pos = np.clip(np.searchsorted(keys, sub), 0, keys.size - 1)
                fast = np.maximum(fast, np.where(keys[pos] == sub, vals[pos], 0.0))
            diff = np.abs(fast - brute)
            tol = 1e-12 * np.maximum(np.abs(brute), 1e-300)
            mismatches += int(np.count_nonzero(diff > tol))
            worst = max(worst, float(np.max(diff)))
            checked += int(masks.size)
    return {"checked": checked, "mismatches": mismatches, "max_diff": worst}


def _take(it, n):
    for _ in range(n):
        try:
            yield next(it)
        except StopIteration:
            return
