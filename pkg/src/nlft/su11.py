"""SU(1,1) matrices ``[[a, b], [conj b, conj a]]`` stored as the pair (a, b).

Scalars may be Python/numpy complex numbers or ``gmpy2.mpc`` values; the
arithmetic below only uses operations both support.  The ``*_arr`` helpers
work on numpy arrays of a and b entries and are what the grid experiments
use.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import gmpy2
import numpy as np

from .cantor import RootPower, root_of_unity

log = logging.getLogger(__name__)

DET_TOL = 1e-9
DRIFT_TOL = 1e-6


def _is_mp(z) -> bool:
    return isinstance(z, (type(gmpy2.mpc(0)), type(gmpy2.mpfr(0))))


def conj(z):
    return z.conjugate()


def absval(z):
    return abs(z)


def abs2(z):
    if _is_mp(z):
        return gmpy2.norm(gmpy2.mpc(z))
    return z.real * z.real + z.imag * z.imag


def _log(x):
    return gmpy2.log(x) if _is_mp(x) else math.log(x)


def _sqrt(x):
    return gmpy2.sqrt(x) if _is_mp(x) else math.sqrt(x)


@dataclass(frozen=True)
class Su11Matrix:
    a: complex
    b: complex

    def __post_init__(self):
        if _det_error(self.a, self.b) > DET_TOL:
            raise ValueError(
                f"|a|^2-|b|^2 = {float(abs2(self.a) - abs2(self.b))!r} is not 1")

    @classmethod
    def unchecked(cls, a, b) -> "Su11Matrix":
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", a)
        object.__setattr__(obj, "b", b)
        return obj

    @classmethod
    def identity(cls, mp: bool = False) -> "Su11Matrix":
        if mp:
            return cls.unchecked(gmpy2.mpc(1), gmpy2.mpc(0))
        return cls.unchecked(1.0 + 0j, 0j)

    def __matmul__(self, other: "Su11Matrix") -> "Su11Matrix":
        return compose(self, other)

    def det(self):
        return abs2(self.a) - abs2(self.b)

    def as_floats(self) -> tuple[float, float, float, float]:
        a, b = complex(self.a), complex(self.b)
        return (a.real, a.imag, b.real, b.imag)

    def to_complex(self) -> "Su11Matrix":
        return Su11Matrix.unchecked(complex(self.a), complex(self.b))

    def to_mp(self) -> "Su11Matrix":
        return Su11Matrix.unchecked(gmpy2.mpc(self.a), gmpy2.mpc(self.b))

    def matrix(self) -> np.ndarray:
        a, b = complex(self.a), complex(self.b)
        return np.array([[a, b], [b.conjugate(), a.conjugate()]])


def _det_error(a, b) -> float:
    # relative to |a|^2 so large products are judged fairly
    aa = abs2(a)
    return float(abs(aa - abs2(b) - 1) / max(aa, 1))


@dataclass(frozen=True)
class Su11Generator:
    """``length * [[0, z], [conj z, 0]]``."""

    z: complex
    length: float

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("generator length must be nonnegative")


def compose(g1: Su11Matrix, g2: Su11Matrix) -> Su11Matrix:
    a = g1.a * g2.a + g1.b * conj(g2.b)
    b = g1.a * g2.b + g1.b * conj(g2.a)
    return renormalize(Su11Matrix.unchecked(a, b))


def renormalize(g: Su11Matrix, tol: float = DRIFT_TOL) -> Su11Matrix:
    """Rescale by ``1/sqrt(|a|^2-|b|^2)`` when the determinant drifts past ``tol``."""
    if _det_error(g.a, g.b) <= tol:
        return g
    det = g.det()
    if det <= 0:
        raise ArithmeticError("SU(1,1) product lost the determinant entirely")
    log.warning("renormalizing SU(1,1) matrix, det=%r", float(det))
    s = _sqrt(det)
    return Su11Matrix.unchecked(g.a / s, g.b / s)


def product(mats, mp: bool = False) -> Su11Matrix:
    """Left-to-right product ``mats[0] @ mats[1] @ ...``."""
    out = Su11Matrix.identity(mp)
    for m in mats:
        out = compose(out, m)
    return out


def inverse(g: Su11Matrix) -> Su11Matrix:
    return Su11Matrix.unchecked(conj(g.a), -g.b)


def inverse_adjoint(g: Su11Matrix) -> Su11Matrix:
    """``(G^{-1})^*``, which for SU(1,1) is ``(a, -b)``."""
    return Su11Matrix.unchecked(g.a, -g.b)


def hs_norm(g: Su11Matrix):
    return _sqrt(abs2(g.a) + abs2(g.b))


def op_norm(g: Su11Matrix):
    return absval(g.a) + absval(g.b)


def log_a(g: Su11Matrix):
    """``log|a|``; computed as ``log1p(|b|^2)/2`` to keep accuracy for small b."""
    bb = abs2(g.b)
    if _is_mp(bb):
        return gmpy2.log1p(bb) / 2
    return 0.5 * math.log1p(bb)


def exp_generator(gen: Su11Generator, mp: bool = False) -> Su11Matrix:
    z = gmpy2.mpc(gen.z) if mp else complex(gen.z)
    length = gmpy2.mpfr(gen.length) if mp else float(gen.length)
    s = length * absval(z)
    if mp:
        a = gmpy2.mpc(gmpy2.cosh(s))
        shc = gmpy2.sinh(s) / s if s != 0 else gmpy2.mpfr(1)
    else:
        a = complex(math.cosh(s))
        shc = math.sinh(s) / s if s != 0 else 1.0
    return Su11Matrix.unchecked(a, length * z * shc)


def phase_twist(g: Su11Matrix, j) -> Su11Matrix:
    """Conjugation by ``diag(gamma^j, 1)``: returns ``(a, gamma^j b)``."""
    if isinstance(j, RootPower):
        if j.j == 0:
            return g
        w = root_of_unity(j.base, j.j)
    else:
        w = j
    if _is_mp(g.b):
        w = gmpy2.mpc(w)
    return Su11Matrix.unchecked(g.a, w * g.b)


def mp_root(d: int, j: int):
    """``exp(2 pi i j / d)`` at the current gmpy2 precision."""
    j %= d
    if j == 0:
        return gmpy2.mpc(1)
    t = 2 * gmpy2.const_pi() * j / d
    return gmpy2.mpc(gmpy2.cos(t), gmpy2.sin(t))


# ---------------------------------------------------------------------------
# array versions: a and b are complex ndarrays of equal shape

def mul_arr(a1, b1, a2, b2):
    return a1 * a2 + b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def expgen_arr(z, length):
    """Closed-form generator exponentials for arrays of z (broadcast length)."""
    z = np.asarray(z, dtype=complex)
    s = np.abs(z) * length
    safe = np.where(s > 0, s, 1.0)
    shc = np.where(s > 0, np.sinh(safe) / safe, 1.0)
    return np.cosh(s).astype(complex), length * z * shc


def log_a_arr(b):
    return 0.5 * np.log1p(np.abs(b) ** 2)


def block_product_desc(a, b, d: int):
    """Collapse the last axis in consecutive groups of ``d`` into descending products.

    For entries ``G_0..G_{d-1}`` in a group the result is ``G_{d-1} ... G_0``,
    i.e. later positions act on the left.
    """
    shape = a.shape[:-1] + (a.shape[-1] // d, d)
    a = a.reshape(shape)
    b = b.reshape(shape)
    ra, rb = a[..., 0], b[..., 0]
    for j in range(1, d):
        ra, rb = mul_arr(a[..., j], b[..., j], ra, rb)
    return ra, rb


def prefix_products_desc(a, b):
    """Running products ``P_n = G_n ... G_0`` along the last axis (Hillis-Steele scan)."""
    a = np.array(a, dtype=complex)
    b = np.array(b, dtype=complex)
    n = a.shape[-1]
    step = 1
    while step < n:
        na, nb = mul_arr(a[..., step:], b[..., step:], a[..., :-step], b[..., :-step])
        a[..., step:] = na
        b[..., step:] = nb
        step *= 2
    return a, b
