"""Scattering on the real line: ``G' = W G`` with ``W = [[0, F e^{2ikx}], [conj F e^{-2ikx}, 0]]``.

The integrator tracks the first column ``(a, c)`` of ``G``; for real ``k``
``c = conj(b)``.  Phases are evaluated analytically at every stage, and the
step is bounded by ``0.2/|k|`` so the oscillation is resolved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .cantor import DadicScalar, exponents_for_point, root_of_unity
from .scattering import StepPotential, _refine_scale


@dataclass
class SampledPotential:
    """Samples of ``F`` on a uniform grid of ``[x0, x1]``; ``F`` vanishes at both ends."""

    x0: float
    x1: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.size < 4:
            raise ValueError("need at least four samples")
        if self.x1 <= self.x0:
            raise ValueError("empty window")

    @classmethod
    def from_function(cls, f, x0: float, x1: float, n: int = 4001) -> "SampledPotential":
        x = np.linspace(x0, x1, n)
        return cls(x0, x1, f(x))

    @classmethod
    def zero(cls, x0: float = -1.0, x1: float = 1.0, n: int = 101) -> "SampledPotential":
        return cls(x0, x1, np.zeros(n, complex))

    @property
    def h(self) -> float:
        return (self.x1 - self.x0) / (self.samples.size - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.samples.size)

    @cached_property
    def _spline(self):
        return CubicSpline(self.grid, self.samples)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._spline(np.clip(x, self.x0, self.x1))
        return np.where((x < self.x0) | (x > self.x1), 0, out)

    def l2_sq(self) -> float:
        return float(integrate.simpson(np.abs(self.samples) ** 2, x=self.grid))

    def l1(self) -> float:
        return float(integrate.simpson(np.abs(self.samples), x=self.grid))

    def is_compact(self, tol: float = 1e-12) -> bool:
        return abs(self.samples[0]) <= tol and abs(self.samples[-1]) <= tol


def _bump(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    out = np.zeros(x.shape)
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def default_bump(n: int = 4001, norm_sq: float = 1.0) -> SampledPotential:
    """``A exp(-1/(1-x^2))`` on ``(-1, 1)`` with ``A`` fixed by ``||F||_2^2``."""
    mass, _ = integrate.quad(lambda t: float(_bump(t)) ** 2, -1, 1, epsabs=1e-14, epsrel=1e-13)
    A = math.sqrt(norm_sq / mass)
    return SampledPotential.from_function(lambda x: A * _bump(x), -1.0, 1.0, n)


@dataclass
class ContinuousProfile:
    """Final first column of ``G(infinity)``.

    ``b`` is the upper-right entry for real ``k`` (``conj`` of the lower-left
    entry); for complex ``k`` it holds the lower-left entry itself.
    """

    k: complex
    a: complex
    b: complex
    det_deviation: float
    steps: int

    @property
    def log_abs_a(self) -> float:
        return 0.5 * math.log1p(abs(self.b) ** 2) if self.k.imag == 0 else math.log(abs(self.a))

    @property
    def op_norm(self) -> float:
        return abs(self.a) + abs(self.b)


def _rk4(coef, x0: float, x1: float, n: int, a, c, trace: bool = False):
    """Classical RK4 on ``a' = f c, c' = g a`` with ``coef(x, mid) -> (f, g)``."""
    hs = (x1 - x0) / n
    xs, As, Cs = [x0], [a], [c]
    for i in range(n):
        x = x0 + i * hs
        mid = x + 0.5 * hs
        f0, g0 = coef(x, mid)
        fm, gm = coef(mid, mid)
        f1, g1 = coef(x + hs, mid)
        k1a, k1c = f0 * c, g0 * a
        k2a, k2c = fm * (c + 0.5 * hs * k1c), gm * (a + 0.5 * hs * k1a)
        k3a, k3c = fm * (c + 0.5 * hs * k2c), gm * (a + 0.5 * hs * k2a)
        k4a, k4c = f1 * (c + hs * k3c), g1 * (a + hs * k3a)
        a = a + hs / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        c = c + hs / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
        if trace:
            xs.append(x0 + (i + 1) * hs)
            As.append(a)
            Cs.append(c)
    if trace:
        return np.array(xs), np.array(As), np.array(Cs)
    return a, c


def _smooth_coef(F: SampledPotential, ks: np.ndarray):
    def coef(x, mid):
        Fx = complex(F(x))
        return Fx * np.exp(2j * ks * x), np.conj(Fx) * np.exp(-2j * ks * x)
    return coef


def _initial_steps(F: SampledPotential, ks: np.ndarray, h: float | None) -> int:
    h = F.h if h is None else h
    kmax = float(np.max(np.abs(ks))) if ks.size else 0.0
    step = min(h, 0.2 / kmax) if kmax > 0 else h
    return max(1, math.ceil((F.x1 - F.x0) / step))


def _adaptive(coef, x0, x1, n, shape, tol, max_steps):
    one = np.ones(shape, complex)
    zero = np.zeros(shape, complex)
    a1, c1 = _rk4(coef, x0, x1, n, one, zero)
    while True:
        a2, c2 = _rk4(coef, x0, x1, 2 * n, one, zero)
        err = max(float(np.max(np.abs(a2 - a1))), float(np.max(np.abs(c2 - c1)))) / 15
        n *= 2
        if err <= tol:
            return a2, c2, n
        if n > max_steps:
            raise ArithmeticError(f"step underflow: {n} steps still give error {err:.3g}")
        a1, c1 = a2, c2


def integrate_many(F: SampledPotential, ks, tol: float = 1e-10, h: float | None = None,
                   max_steps: int = 1 << 20):
    """Final ``(a, c, steps)`` for an array of spectral values ``ks``."""
    ks = np.asarray(ks, dtype=complex)
    if np.any(ks.imag < 0):
        raise ValueError("Im k must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = _initial_steps(F, ks, h)
    return _adaptive(_smooth_coef(F, ks), F.x0, F.x1, n, ks.shape, tol, max_steps)


def integrate_scattering(F: SampledPotential, k: complex, tol: float = 1e-10,
                         h: float | None = None) -> ContinuousProfile:
    k = complex(k)
    a, c, n = integrate_many(F, np.array([k]), tol, h)
    a, c = complex(a[0]), complex(c[0])
    b = np.conj(c) if k.imag == 0 else c
    dev = abs(abs(a) ** 2 - abs(c) ** 2 - 1) if k.imag == 0 else float("nan")
    return ContinuousProfile(k, a, complex(b), float(dev), n)


@dataclass
class PlancherelResult:
    integral: float
    target: float
    relative_error: float
    tail: float
    decay_exponent: float
    max_det_deviation: float
    ks: np.ndarray = field(repr=False)
    log_a: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        return {"integral": self.integral, "target": self.target,
                "relativeError": self.relative_error, "tail": self.tail,
                "decayExponent": self.decay_exponent,
                "maxDetDeviation": self.max_det_deviation}

    def to_csv(self) -> str:
        lines = ["k,ReA,ImA,ReB,ImB,detDeviation"]
        for k, a, c in zip(self.ks, self.a, self.c):
            b = np.conj(c)
            dev = abs(abs(a) ** 2 - abs(c) ** 2 - 1)
            lines.append(f"{k!r},{a.real!r},{a.imag!r},{b.real!r},{b.imag!r},{dev!r}")
        return "\n".join(lines) + "\n"


def _tail_fit(ks: np.ndarray, vals: np.ndarray, kmax: float):
    """``c/k^2`` tail model and a power-law decay exponent on ``[kmax/10, kmax]``.

    ``c`` is matched on the outermost tenth of the decade so faster-than-``k^-2``
    decay does not inflate the tail.
    """
    sel = (np.abs(ks) >= kmax / 10) & (vals > 0)
    kk, vv = np.abs(ks[sel]), vals[sel]
    if kk.size < 2:
        return 0.0, math.inf
    outer = kk >= 0.9 * kmax
    c = float(np.median(vv[outer] * kk[outer] ** 2)) if np.any(outer) else 0.0
    slope = np.polyfit(np.log(kk), np.log(vv), 1)[0]
    return c, float(-slope)


def plancherel_check(F: SampledPotential, k_max: float = 40.0, dk: float = 0.02,
                     tol: float = 1e-10, h: float | None = None) -> PlancherelResult:
    """``int log|a(k)| dk`` against ``(pi/2) ||F||_2^2``."""
    n = int(round(2 * k_max / dk))
    if n % 2:
        n += 1
    ks = np.linspace(-k_max, k_max, n + 1)
    target = math.pi / 2 * F.l2_sq()
    if not np.any(F.samples):
        z = np.zeros_like(ks)
        return PlancherelResult(0.0, target, 0.0, 0.0, math.inf, 0.0, ks, z,
                                np.ones_like(ks, complex), z.astype(complex))
    a, c, _ = integrate_many(F, ks, tol, h)
    vals = 0.5 * np.log1p(np.abs(c) ** 2)
    body = float(integrate.simpson(vals, x=ks))
    coef, expo = _tail_fit(ks, vals, k_max)
    tail = 2 * coef / k_max
    total = body + tail
    dev = float(np.max(np.abs(np.abs(a) ** 2 - np.abs(c) ** 2 - 1)))
    rel = abs(total - target) / target if target else abs(total)
    return PlancherelResult(total, target, rel, tail, expo, dev, ks, vals, a, c)


@dataclass
class PhaseRow:
    k: float
    measured: float
    predicted: float

    @property
    def scaled_deviation(self) -> float:
        return abs(self.measured - self.predicted) * self.k**2


def asymptotic_phase_check(F: SampledPotential, ks, tol: float = 1e-11) -> list[PhaseRow]:
    """``arg a(k)`` against ``||F||^2/(2k)``, the leading term of ``log a = -||F||^2/(2ik)``."""
    ks = np.asarray(ks, dtype=float)
    a, _, _ = integrate_many(F, ks.astype(complex), tol)
    m2 = F.l2_sq()
    return [PhaseRow(float(k), float(np.angle(ai)), m2 / (2 * k)) for k, ai in zip(ks, a)]


@dataclass
class MonotoneResult:
    k: complex
    passed: bool
    x: np.ndarray
    quantity: np.ndarray
    min_increment: float
    derivative_error: float


def monotone_quantity_check(F: SampledPotential, k: complex, n: int | None = None,
                            tol: float = 1e-10) -> MonotoneResult:
    """Trace ``|a|^2 |e^{-2ikx}|^2 - |c|^2`` and check that it never decreases."""
    k = complex(k)
    if k.imag <= 0:
        raise ValueError("needs Im k > 0")
    tau = k.imag
    n = n or 4 * _initial_steps(F, np.array([k]), None)
    ks = np.array([k])
    x, A, C = _rk4(_smooth_coef(F, ks), F.x0, F.x1, n, np.ones(1, complex),
                   np.zeros(1, complex), trace=True)
    A, C = A[:, 0], C[:, 0]
    q = np.abs(A) ** 2 * np.exp(4 * tau * x) - np.abs(C) ** 2
    inc = np.diff(q)
    # derivative identity: q' = 4 tau |a|^2 e^{4 tau x}
    deriv = 4 * tau * np.abs(A) ** 2 * np.exp(4 * tau * x)
    pred = integrate.cumulative_trapezoid(deriv, x, initial=0) + q[0]
    scale = float(np.max(np.abs(q)))
    derr = float(np.max(np.abs(pred - q))) / scale
    passed = bool(np.min(inc) >= -tol * scale)
    return MonotoneResult(k, passed, x, q, float(np.min(inc)), derr)


def integrate_step_potential(F: StepPotential, k: DadicScalar, tol: float = 1e-11):
    """Run the ODE integrator with the character ``w(k, x)`` in place of ``e^{2ikx}``.

    The coefficient is constant on refined cells, so stages use the cell of the
    step midpoint; steps are aligned with cell boundaries.
    """
    s = _refine_scale(F, k)
    ncell = F.d ** (F.K - s)
    idx = np.arange(ncell, dtype=np.int64)
    vals = F.value_at_cells(idx, s) * root_of_unity(F.d, exponents_for_point(k, idx, s))
    length = float(F.d) ** s

    def coef(x, mid):
        c = min(int(mid // length), ncell - 1)
        v = vals[c]
        return np.array([v]), np.array([np.conj(v)])

    x1 = ncell * length
    a, c, n = _adaptive(coef, 0.0, x1, ncell, (1,), tol, 1 << 22)
    return complex(a[0]), complex(np.conj(c[0]))
