"""The swapping function and the inequalities it satisfies over roots of unity.

All checks at the default parameters run in ``gmpy2`` arithmetic: the
piecewise function mixes O(1) quantities with terms of size ``eps**10`` and
``eps**20``, far below double precision.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from . import su11
from .su11 import Su11Matrix

REGIMES = ("all-small", "two-large", "one-large-rest-tiny", "one-large-one-mid")


def default_epsilon(d: int) -> float:
    if d < 2:
        raise ValueError("d must be at least 2")
    return 1e-3 / d


def _radius_residual(r, eps):
    return r * r - r**3 - eps**10 - eps**20 * gmpy2.asinh(r)


def solve_radius(eps, precision_bits: int = 400):
    """Smallest positive root of ``r^2 - r^3 = eps^10 + eps^20 asinh(r)``."""
    with gmpy2.context(gmpy2.get_context(), precision=precision_bits):
        eps = gmpy2.mpfr(eps)
        if not 0 < eps <= gmpy2.mpfr(0.1):
            raise ValueError("eps must lie in (0, 0.1]")
        lo, hi = eps**5 / 2, 2 * eps**5
        for _ in range(8):
            if _radius_residual(lo, eps) < 0 < _radius_residual(hi, eps):
                break
            lo, hi = lo / 2, hi * 2
        else:
            raise ArithmeticError("could not bracket the radius")
        # the residual is negative on (0, r) so bisection finds the smallest root
        for _ in range(precision_bits + 8):
            mid = (lo + hi) / 2
            if mid == lo or mid == hi:
                break
            if _radius_residual(mid, eps) < 0:
                lo = mid
            else:
                hi = mid
        return hi


@dataclass(frozen=True)
class SwappingParams:
    d: int
    eps: object  # gmpy2.mpfr
    r: object
    precision_bits: int = 400
    exploratory: bool = False

    @classmethod
    def create(cls, d: int, eps=None, precision_bits: int = 400) -> "SwappingParams":
        default_eps = eps is None
        with gmpy2.context(gmpy2.get_context(), precision=precision_bits):
            e = gmpy2.mpfr(default_epsilon(d) if default_eps else eps)
            if default_eps:
                e = gmpy2.mpfr(1) / 1000 / d
            r = solve_radius(e, precision_bits)
        return cls(d, e, r, precision_bits, exploratory=not default_eps)

    @classmethod
    def default(cls, d: int, precision_bits: int = 400) -> "SwappingParams":
        return cls.create(d, None, precision_bits)

    @property
    def slack(self):
        return gmpy2.mpfr(2) ** (-(self.precision_bits // 4))

    def context(self):
        return gmpy2.context(gmpy2.get_context(), precision=self.precision_bits)


def beta_abs(rho, params: SwappingParams):
    """Piecewise swapping function of ``|z| = rho`` (mp)."""
    if rho <= params.r:
        return rho * rho - rho**3
    return params.eps**10 + params.eps**20 * gmpy2.asinh(rho)


def beta_scalar(z, params: SwappingParams):
    with params.context():
        return beta_abs(abs(gmpy2.mpc(z)), params)


def beta_matrix(g: Su11Matrix, params: SwappingParams):
    return beta_scalar(g.b, params)


def beta_float(rho, params: SwappingParams) -> np.ndarray:
    """Double-precision version on arrays of ``|b|``."""
    rho = np.asarray(rho, dtype=float)
    r, eps = float(params.r), float(params.eps)
    small = rho * rho - rho**3
    large = eps**10 + eps**20 * np.arcsinh(rho)
    return np.where(rho <= r, small, large)


def beta_loghs_float(rho) -> np.ndarray:
    """``log ||G||_HS = log1p(2|b|^2)/2`` (admissible for d = 2 only)."""
    rho = np.asarray(rho, dtype=float)
    return 0.5 * np.log1p(2 * rho * rho)


def beta_loghs(g: Su11Matrix):
    bb = su11.abs2(g.b)
    if isinstance(bb, float):
        return 0.5 * math.log1p(2 * bb)
    return gmpy2.log1p(2 * bb) / 2


# ---------------------------------------------------------------------------
# twisted products

def _roots(d: int, mp: bool):
    if mp:
        return [su11.mp_root(d, j) for j in range(d)]
    return [complex(np.exp(2j * np.pi * j / d)) if j else 1 + 0j for j in range(d)]


def twisted_products(mats, d: int | None = None) -> dict[int, Su11Matrix]:
    """``B_m = prod_{i=1..d} phase_twist(G_i, m i)`` in ascending order, keyed by m."""
    d = len(mats) if d is None else d
    if len(mats) != d:
        raise ValueError(f"expected {d} matrices")
    mp = su11._is_mp(mats[0].a)
    roots = _roots(d, mp)
    out = {}
    for m in range(d):
        a, b = mats[0].a, roots[m % d] * mats[0].b
        for i in range(2, d + 1):
            g = mats[i - 1]
            gb = roots[(m * i) % d] * g.b
            a, b = a * g.a + b * su11.conj(gb), a * gb + b * su11.conj(g.a)
        out[m] = Su11Matrix.unchecked(a, b)
    return out


@dataclass
class SwapResult:
    lhs: object
    rhs: object
    passed: bool

    @property
    def slack(self):
        return self.rhs - self.lhs


def swapping_inequality_check(mats, params: SwappingParams, beta: str = "piecewise") -> SwapResult:
    """``sum_m beta(B_m) <= d sum_i beta(G_i)`` up to a relative slack."""
    d = params.d
    with params.context():
        mats = [g if su11._is_mp(g.a) else g.to_mp() for g in mats]
        prods = twisted_products(mats, d)
        if beta == "piecewise":
            f = lambda g: beta_abs(abs(g.b), params)  # noqa: E731
        elif beta == "loghs":
            f = beta_loghs
        else:
            raise ValueError(f"unknown beta {beta!r}")
        lhs = sum((f(g) for g in prods.values()), gmpy2.mpfr(0))
        rhs = d * sum((f(g) for g in mats), gmpy2.mpfr(0))
        return SwapResult(lhs, rhs, bool(lhs <= rhs * (1 + params.slack)))


# ---------------------------------------------------------------------------
# sampling

def random_su11(rho, rng: np.random.Generator, mp: bool = True) -> Su11Matrix:
    """SU(1,1) element with ``|b| = rho`` and uniform phases for a and b."""
    theta, phi = rng.uniform(0, 2 * np.pi, 2)
    if mp:
        rho = gmpy2.mpfr(rho)
        ua = gmpy2.mpc(gmpy2.cos(phi), gmpy2.sin(phi))
        ub = gmpy2.mpc(gmpy2.cos(theta), gmpy2.sin(theta))
        return Su11Matrix.unchecked(gmpy2.sqrt(1 + rho * rho) * ua, rho * ub)
    return Su11Matrix.unchecked(math.sqrt(1 + rho * rho) * complex(np.exp(1j * phi)),
                                rho * complex(np.exp(1j * theta)))


def _log_uniform(rng, lo: float, hi: float) -> float:
    return 10.0 ** rng.uniform(lo, hi)


def sample_regime(regime: str, params: SwappingParams, rng: np.random.Generator,
                  big_range: float = 3.0, depth: float = 12.0) -> list[Su11Matrix]:
    """A d-tuple whose ``|b_i|`` fall in one of the four regimes.

    ``|b|`` is log-uniform inside each band; bands are ``(0, eps r]`` (tiny),
    ``(eps r, r)`` (mid), ``[r, 10^big_range]`` (large).
    """
    d = params.d
    lr = math.log10(float(params.r))
    ler = lr + math.log10(float(params.eps))
    tiny = lambda: _log_uniform(rng, ler - depth, ler)  # noqa: E731
    mid = lambda: _log_uniform(rng, ler, lr)  # noqa: E731
    small = lambda: _log_uniform(rng, ler - depth, lr)  # noqa: E731
    large = lambda: _log_uniform(rng, lr, big_range)  # noqa: E731
    order = rng.permutation(d)
    if regime == "all-small":
        rhos = [small() for _ in range(d)]
    elif regime == "two-large":
        rhos = [large(), large()] + [
            (large() if rng.random() < 0.5 else small()) for _ in range(d - 2)]
    elif regime == "one-large-rest-tiny":
        rhos = [large()] + [tiny() for _ in range(d - 1)]
    elif regime == "one-large-one-mid":
        rhos = [large(), mid()] + [small() for _ in range(d - 2)]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    rhos = [rhos[i] for i in np.argsort(order)]
    with params.context():
        out = []
        for rho in rhos:
            out.append(random_su11(gmpy2.mpfr(rho), rng))
        return out


def mp_hex(x) -> str:
    """Exact hex representation of an mpfr/mpc."""
    if isinstance(x, type(gmpy2.mpc(0))):
        return f"{mp_hex(x.real)}{'+' if x.imag >= 0 else ''}{mp_hex(x.imag)}j"
    num, den = gmpy2.mpfr(x).as_integer_ratio()
    sign = "-" if num < 0 else ""
    return f"{sign}{hex(abs(num))}/{hex(den)}"


@dataclass
class SwappingRun:
    d: int
    samples: int
    violations: list = field(default_factory=list)
    per_regime: dict = field(default_factory=dict)
    min_relative_slack: float = math.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "samples": self.samples,
                           "violations": self.violations, "perRegime": self.per_regime,
                           "minRelativeSlack": self.min_relative_slack}, indent=1)


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, batch]))


def swapping_sweep(params: SwappingParams, samples: int, seed: int = 0,
                   beta: str = "piecewise", batch_size: int = 1000) -> SwappingRun:
    """Stratified random test of the swapping inequality (regimes round-robin)."""
    run = SwappingRun(params.d, samples)
    done = 0
    batch = 0
    while done < samples:
        rng = batch_rng(seed, batch)
        n = min(batch_size, samples - done)
        for i in range(n):
            regime = REGIMES[(done + i) % len(REGIMES)]
            mats = sample_regime(regime, params, rng)
            res = swapping_inequality_check(mats, params, beta)
            stats = run.per_regime.setdefault(regime, {"samples": 0, "violations": 0})
            stats["samples"] += 1
            if res.rhs > 0:
                run.min_relative_slack = min(run.min_relative_slack,
                                             float(res.slack / res.rhs))
            if not res.passed:
                stats["violations"] += 1
                run.violations.append({
                    "regime": regime, "batch": batch,
                    "a": [mp_hex(g.a) for g in mats], "b": [mp_hex(g.b) for g in mats],
                    "lhs": mp_hex(res.lhs), "rhs": mp_hex(res.rhs),
                    "slack": float(res.slack)})
        done += n
        batch += 1
    return run


# ---------------------------------------------------------------------------
# linear terms, comparability, the d = 3 Hilbert-Schmidt example

def linear_term_check(mats, m: int, params: SwappingParams | None = None):
    """Deviation of ``B_m`` from its part linear in the ``b_i``, and the cubic bound."""
    d = len(mats)
    if params is not None and any(abs(g.b) > params.r for g in mats):
        raise ValueError("linear term check requires |b_i| <= r")
    mp = su11._is_mp(mats[0].a)
    roots = _roots(d, mp)
    B = twisted_products(mats, d)[m].b
    lin = 0
    for i in range(1, d + 1):
        t = roots[(m * i) % d] * mats[i - 1].b
        for j in range(1, i):
            t = t * mats[j - 1].a
        for j in range(i + 1, d + 1):
            t = t * su11.conj(mats[j - 1].a)
        lin = lin + t
    dev = abs(B - lin)
    mags = sorted((abs(g.b) for g in mats), reverse=True)
    bound = 2 * d**3 * mags[0] * mags[1] ** 2
    return dev, bound


@dataclass
class ComparabilityConstant:
    gamma: float
    method: str = "empirical"


def comparability_estimate(params: SwappingParams, sample_count: int, seed: int = 0,
                           log_range=(-30.0, 3.0)) -> ComparabilityConstant:
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    worst = gmpy2.mpfr(1)
    with params.context():
        for u in rng.uniform(*log_range, sample_count):
            rho = gmpy2.mpfr(10) ** gmpy2.mpfr(u)
            la = gmpy2.log1p(rho * rho) / 2
            b = beta_abs(rho, params)
            if la > 0 and b > 0:
                worst = max(worst, b / la, la / b)
    return ComparabilityConstant(float(worst))


def cubic_identity(K, L, M) -> tuple[complex, complex]:
    """``(prod_gamma (K + L g + M g^2), K^3 + L^3 + M^3 - 3KLM)``."""
    g = np.exp(2j * np.pi / 3)
    lhs = 1 + 0j
    for j in range(3):
        lhs *= K + L * g**j + M * g ** (2 * j)
    return lhs, K**3 + L**3 + M**3 - 3 * K * L * M


@dataclass
class HsCounterexample:
    A: Su11Matrix
    B: Su11Matrix
    C: Su11Matrix
    alpha: float
    q: float
    product: float  # prod_gamma ||B_gamma||_HS / prod_i ||G_i||_HS^3
    klm: float  # K^3+L^3+M^3-3KLM, the squared product predicted in closed form


def _sym(s: float) -> tuple[float, float]:
    """``(x, y)`` with ``x^2 + y^2 = 1`` and ``x y = s``, ``x > y >= 0``."""
    u, v = math.sqrt(1 + 2 * s), math.sqrt(1 - 2 * s)
    return (u + v) / 2, (u - v) / 2


def hs_counter_matrices(alpha: float, q: float):
    """Real symmetric matrices of the construction, normalized into SU(1,1)."""
    a, b = _sym(alpha)
    e, f = _sym(q)
    c = 1 / math.sqrt(1 + alpha**2)
    dd = -alpha * c
    mats = []
    for x, y in ((a, b), (c, dd), (e, f)):
        s = math.sqrt(x * x - y * y)
        mats.append(Su11Matrix(complex(x / s), complex(y / s)))
    K = 1 + 4 * alpha * q * dd**2
    L = 2 * alpha * q * c**2 + 2 * alpha * c * dd + 2 * q * c * dd
    return mats, (K, L, L)


def hs_counterexample_search(tolerance: float = 1e-6, q: float = 0.3,
                             alpha0: float = 1e-3) -> HsCounterexample:
    """Scale alpha up from ``alpha0`` until the HS product exceeds ``1 + tolerance``."""
    if not 0 < q < 0.5:
        raise ValueError("q must lie in (0, 1/2)")
    alpha = alpha0
    while alpha < 0.5:
        mats, (K, L, M) = hs_counter_matrices(alpha, q)
        prods = twisted_products(mats, 3)
        num = math.prod(float(su11.hs_norm(g)) for g in prods.values())
        den = math.prod(float(su11.hs_norm(g)) for g in mats) ** 3
        if num / den > 1 + tolerance:
            klm = K**3 + L**3 + M**3 - 3 * K * L * M
            return HsCounterexample(*mats, alpha, q, num / den, klm)
        alpha *= 1.5
    raise ArithmeticError("no counterexample found")


def hs_pair_check(A: Su11Matrix, B: Su11Matrix):
    """d = 2 Hilbert-Schmidt identity and log inequality for ``(A, B)``.

    Returns ``(relative identity error, log lhs, log rhs)`` where the identity
    is ``|AB|^2 + |A B^{-*}|^2 = 2 |A|^2 |B|^2`` and the inequality is
    ``log|AB| + log|A B^{-*}| <= 2 log|A| + 2 log|B|``.
    """
    P = su11.compose(A, B)
    Q = su11.compose(A, su11.inverse_adjoint(B))
    hp, hq = su11.hs_norm(P), su11.hs_norm(Q)
    ha, hb = su11.hs_norm(A), su11.hs_norm(B)
    lhs = hp * hp + hq * hq
    rhs = 2 * ha * ha * hb * hb
    err = abs(lhs - rhs) / rhs
    # log |G|_HS = log1p(2|b|^2)/2 keeps the small-b regime accurate
    return err, beta_loghs(P) + beta_loghs(Q), 2 * beta_loghs(A) + 2 * beta_loghs(B)


def loga_pair_counterexample(b: float = 0.5, t: float = 0.5):
    """``(A, B, lhs, rhs)`` with ``log|a|`` failing the d = 2 pair inequality.

    With ``a, b, c > 0`` and ``d = i t`` the two products share
    ``|a|^2 = a^2 c^2 + b^2 t^2``, which exceeds ``a^2 c^2``.
    """
    if b <= 0 or t <= 0:
        raise ValueError("b and t must be positive")
    A = Su11Matrix(complex(math.sqrt(1 + b * b)), complex(b))
    B = Su11Matrix(complex(math.sqrt(1 + t * t)), 1j * t)
    P = su11.compose(A, B)
    Q = su11.compose(A, su11.inverse_adjoint(B))
    lhs = su11.log_a(P) + su11.log_a(Q)
    rhs = 2 * su11.log_a(A) + 2 * su11.log_a(B)
    return A, B, lhs, rhs
