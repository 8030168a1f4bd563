"""Exact d-adic arithmetic on the Cantor group.

Positions ``k`` and ``x`` are nonnegative d-adic rationals stored as
``mantissa * d**exponent`` with arbitrary-precision integers, so digit
extraction and character exponents are exact at any scale.  Intervals and
tiles are stored as ``(scale, index)`` pairs; all containment tests are
integer comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator

import numpy as np


def _check_base(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"base must be an integer >= 2, got {d!r}")


@total_ordering
@dataclass(frozen=True, init=False)
class DadicScalar:
    """Nonnegative number ``mantissa * base**exponent`` in canonical form.

    Canonical means ``mantissa == 0`` (then ``exponent == 0``) or the
    mantissa is not divisible by the base.
    """

    mantissa: int
    exponent: int
    base: int

    def __init__(self, mantissa: int, exponent: int = 0, base: int = 2):
        _check_base(base)
        mantissa = int(mantissa)
        exponent = int(exponent)
        if mantissa < 0:
            raise ValueError("DadicScalar must be nonnegative")
        if mantissa == 0:
            exponent = 0
        else:
            while mantissa % base == 0:
                mantissa //= base
                exponent += 1
        object.__setattr__(self, "mantissa", mantissa)
        object.__setattr__(self, "exponent", exponent)
        object.__setattr__(self, "base", int(base))

    @classmethod
    def from_fraction(cls, value, base: int) -> "DadicScalar":
        """Build from an int/Fraction whose denominator is a power of ``base``."""
        fr = Fraction(value)
        if fr < 0:
            raise ValueError("DadicScalar must be nonnegative")
        num, den = fr.numerator, fr.denominator
        exp = 0
        while den != 1:
            if den % base:
                raise ValueError(f"{value} is not a {base}-adic rational")
            den //= base
            exp -= 1
        return cls(num, exp, base)

    @classmethod
    def parse(cls, text: str) -> "DadicScalar":
        """Inverse of ``str``: ``"5*3^-2"``."""
        mant, rest = text.strip().split("*")
        base, exp = rest.split("^")
        return cls(int(mant), int(exp), int(base))

    @property
    def value(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa * self.base**self.exponent)
        return Fraction(self.mantissa, self.base ** (-self.exponent))

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return f"{self.mantissa}*{self.base}^{self.exponent}"

    def __repr__(self) -> str:
        return f"DadicScalar({self})"

    def _same_base(self, other: "DadicScalar") -> None:
        if self.base != other.base:
            raise ValueError("mixed bases")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DadicScalar):
            return NotImplemented
        return (self.mantissa, self.exponent, self.base) == (
            other.mantissa, other.exponent, other.base)

    def __hash__(self) -> int:
        return hash((self.mantissa, self.exponent, self.base))

    def __lt__(self, other: "DadicScalar") -> bool:
        self._same_base(other)
        return self.value < other.value

    def __add__(self, other: "DadicScalar") -> "DadicScalar":
        self._same_base(other)
        e = min(self.exponent, other.exponent)
        d = self.base
        m = (self.mantissa * d ** (self.exponent - e)
             + other.mantissa * d ** (other.exponent - e))
        return DadicScalar(m, e, d)

    def __sub__(self, other: "DadicScalar") -> "DadicScalar":
        self._same_base(other)
        e = min(self.exponent, other.exponent)
        d = self.base
        m = (self.mantissa * d ** (self.exponent - e)
             - other.mantissa * d ** (other.exponent - e))
        return DadicScalar(m, e, d)

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def digit(self, n: int) -> int:
        return digit(self, n)

    def digits(self) -> dict[int, int]:
        """Nonzero digits as ``{position: digit}``."""
        out = {}
        m, pos = self.mantissa, self.exponent
        while m:
            m, r = divmod(m, self.base)
            if r:
                out[pos] = r
            pos += 1
        return out

    def top_position(self) -> int | None:
        """Position of the highest nonzero digit (None for zero)."""
        if self.mantissa == 0:
            return None
        m, pos = self.mantissa, self.exponent
        while m >= self.base:
            m //= self.base
            pos += 1
        return pos

    def bottom_position(self) -> int | None:
        return None if self.mantissa == 0 else self.exponent

    def floor_to(self, scale: int) -> "DadicScalar":
        """Largest multiple of ``base**scale`` not exceeding self."""
        d = self.base
        if self.exponent >= scale or self.mantissa == 0:
            return self
        n = self.mantissa // d ** (scale - self.exponent)
        return DadicScalar(n, scale, d)

    def index_at(self, scale: int) -> int:
        """``floor(self / base**scale)`` as an integer."""
        d = self.base
        if self.exponent >= scale:
            return self.mantissa * d ** (self.exponent - scale)
        return self.mantissa // d ** (scale - self.exponent)


def scalar(value, base: int) -> DadicScalar:
    if isinstance(value, DadicScalar):
        if value.base != base:
            raise ValueError("mixed bases")
        return value
    return DadicScalar.from_fraction(value, base)


def digit(v: DadicScalar, n: int) -> int:
    """Coefficient of ``d**n`` in the canonical expansion of ``v``."""
    if v.mantissa == 0 or n < v.exponent:
        return 0
    return (v.mantissa // v.base ** (n - v.exponent)) % v.base


@dataclass(frozen=True)
class RootPower:
    """The root of unity ``gamma**j`` with ``gamma = exp(2*pi*i/base)``."""

    j: int
    base: int

    def __post_init__(self):
        _check_base(self.base)
        object.__setattr__(self, "j", int(self.j) % self.base)

    def __mul__(self, other: "RootPower") -> "RootPower":
        if self.base != other.base:
            raise ValueError("mixed bases")
        return RootPower(self.j + other.j, self.base)

    def __pow__(self, n: int) -> "RootPower":
        return RootPower(self.j * n, self.base)

    def conjugate(self) -> "RootPower":
        return RootPower(-self.j, self.base)

    def __complex__(self) -> complex:
        return complex(root_of_unity(self.base, self.j))


def root_of_unity(d: int, j=1):
    """Principal root powers ``exp(2*pi*i*j/d)`` (scalar or array)."""
    out = np.exp(2j * np.pi * (np.mod(j, d) / d))
    return complex(out) if np.ndim(out) == 0 else out


def character_exponent(k: DadicScalar, x: DadicScalar) -> int:
    """``sum_n k_n * x_{-1-n} mod d`` (finite by canonical form)."""
    if k.base != x.base:
        raise ValueError("mixed bases")
    d = k.base
    if k.mantissa == 0 or x.mantissa == 0:
        return 0
    total = 0
    for n, kn in k.digits().items():
        xd = digit(x, -1 - n)
        if xd:
            total += kn * xd
    return total % d


def character(k: DadicScalar, x: DadicScalar) -> RootPower:
    """The Cantor group character ``w(k, x)`` as a root power."""
    return RootPower(character_exponent(k, x), k.base)


@dataclass(frozen=True, order=True)
class DadicInterval:
    """Half-open interval ``[index * d**scale, (index + 1) * d**scale)``."""

    scale: int
    index: int
    base: int = 2

    def __post_init__(self):
        _check_base(self.base)
        if self.index < 0:
            raise ValueError("interval index must be nonnegative")

    @property
    def left(self) -> DadicScalar:
        return DadicScalar(self.index, self.scale, self.base)

    @property
    def right(self) -> DadicScalar:
        return DadicScalar(self.index + 1, self.scale, self.base)

    @property
    def length(self) -> Fraction:
        return Fraction(self.base) ** self.scale

    def contains_point(self, v: DadicScalar) -> bool:
        return v.index_at(self.scale) == self.index

    def ancestor(self, scale: int) -> "DadicInterval":
        if scale < self.scale:
            raise ValueError("ancestor scale below interval scale")
        return DadicInterval(scale, self.index // self.base ** (scale - self.scale),
                             self.base)

    def contains(self, other: "DadicInterval") -> bool:
        """Whether ``other`` is a subset of self."""
        if other.scale > self.scale:
            return False
        return other.index // self.base ** (self.scale - other.scale) == self.index

    def intersects(self, other: "DadicInterval") -> bool:
        return self.contains(other) or other.contains(self)

    def children(self) -> list["DadicInterval"]:
        d = self.base
        return [DadicInterval(self.scale - 1, self.index * d + m, d) for m in range(d)]

    def descendants(self, scale: int) -> range:
        """Indices of the sub-intervals at a finer ``scale``."""
        f = self.base ** (self.scale - scale)
        return range(self.index * f, (self.index + 1) * f)

    def __str__(self) -> str:
        return f"[{self.index},{self.scale}]"


def interval_containing(v: DadicScalar, scale: int) -> DadicInterval:
    return DadicInterval(scale, v.index_at(scale), v.base)


@dataclass(frozen=True, order=True)
class Tile:
    """Rectangle ``I x omega`` of area one (``I`` in k, ``omega`` in x)."""

    freq: DadicInterval
    space: DadicInterval

    def __post_init__(self):
        if self.freq.base != self.space.base:
            raise ValueError("mixed bases")
        if self.freq.scale + self.space.scale != 0:
            raise ValueError("tile must have area 1")

    @property
    def base(self) -> int:
        return self.freq.base

    @property
    def scale(self) -> int:
        """Scale of the frequency interval: ``|I| = d**scale``."""
        return self.freq.scale

    def intersects(self, other: "Tile") -> bool:
        return self.freq.intersects(other.freq) and self.space.intersects(other.space)

    def __str__(self) -> str:
        return f"I={self.freq};w={self.space}"

    @classmethod
    def parse(cls, text: str, base: int) -> "Tile":
        return _parse_rect(cls, text, base)


@dataclass(frozen=True, order=True)
class Multitile:
    """Rectangle ``I x omega`` of area ``d``."""

    freq: DadicInterval
    space: DadicInterval

    def __post_init__(self):
        if self.freq.base != self.space.base:
            raise ValueError("mixed bases")
        if self.freq.scale + self.space.scale != 1:
            raise ValueError("multitile must have area d")

    @property
    def base(self) -> int:
        return self.freq.base

    @property
    def scale(self) -> int:
        return self.freq.scale

    def horizontal(self) -> list[Tile]:
        return subtiles(self, "horizontal")

    def vertical(self) -> list[Tile]:
        return subtiles(self, "vertical")

    def __str__(self) -> str:
        return f"I={self.freq};w={self.space}"

    @classmethod
    def parse(cls, text: str, base: int) -> "Multitile":
        return _parse_rect(cls, text, base)


def _parse_rect(cls, text: str, base: int):
    parts = dict(p.split("=") for p in text.strip().split(";"))

    def iv(s: str) -> DadicInterval:
        n, k = s.strip("[]").split(",")
        return DadicInterval(int(k), int(n), base)

    return cls(iv(parts["I"]), iv(parts["w"]))


def subtiles(P: Multitile, direction: str) -> list[Tile]:
    """The d subtiles of a multitile, in ascending order."""
    if direction == "horizontal":
        return [Tile(P.freq, w) for w in P.space.children()]
    if direction == "vertical":
        return [Tile(i, P.space) for i in P.freq.children()]
    raise ValueError(f"unknown direction {direction!r}")


def tile_less(p, q) -> bool:
    """``p <= q`` in the tile (or multitile) order: I_p in I_q and w_q in w_p."""
    return q.freq.contains(p.freq) and p.space.contains(q.space)


multitile_less = tile_less


def multitiles_between(P: Multitile, Q: Multitile) -> list[Multitile]:
    """All multitiles R with P < R < Q strictly, for P < Q.

    Between two comparable multitiles there is exactly one multitile per
    intermediate scale (the ancestors of I_P and of w_Q at that scale).
    """
    if not tile_less(P, Q):
        raise ValueError("multitiles are not comparable")
    out = []
    for s in range(P.scale + 1, Q.scale):
        out.append(Multitile(P.freq.ancestor(s), Q.space.ancestor(1 - s)))
    return out


def is_convex(S: Iterable[Multitile]) -> bool:
    members = set(S)
    for P in members:
        for Q in members:
            if Q.scale - P.scale >= 2 and tile_less(P, Q):
                if any(R not in members for R in multitiles_between(P, Q)):
                    return False
    return True


def convexify(S: Iterable[Multitile]) -> set[Multitile]:
    """Smallest convex superset of ``S``."""
    members = set(S)
    extra = set()
    for P in members:
        for Q in members:
            if Q.scale - P.scale >= 2 and tile_less(P, Q):
                extra.update(multitiles_between(P, Q))
    return members | extra


def tiles_in_square(d: int, K: int, scale: int) -> Iterator[Tile]:
    """All tiles of the given scale inside ``[0, d**K) x [0, d**K)``."""
    for n in range(d ** (K - scale)):
        for l in range(d ** (K + scale)):
            yield Tile(DadicInterval(scale, n, d), DadicInterval(-scale, l, d))


def multitiles_in_square(d: int, K: int) -> list[Multitile]:
    out = []
    for s in range(1 - K, K + 1):
        for n in range(d ** (K - s)):
            for l in range(d ** (K - 1 + s)):
                out.append(Multitile(DadicInterval(s, n, d), DadicInterval(1 - s, l, d)))
    return out


# ---------------------------------------------------------------------------
# vectorized helpers for regular grids

def digit_array(indices, ndigits: int, d: int) -> np.ndarray:
    """Base-d digits of integer ``indices`` (least significant first)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.empty(idx.shape + (ndigits,), dtype=np.int64)
    for i in range(ndigits):
        out[..., i] = idx % d
        idx = idx // d
    return out


def exponent_table(d: int, k_idx, k_scale: int, k_ndigits: int,
                   x_idx, x_scale: int, x_ndigits: int) -> np.ndarray:
    """Character exponents for grid points ``k = i*d**k_scale``, ``x = c*d**x_scale``.

    ``k_ndigits``/``x_ndigits`` bound the number of digits of the indices.
    Returns an int array of shape ``(len(k_idx), len(x_idx))``.
    """
    kd = digit_array(k_idx, k_ndigits, d)
    xd = digit_array(x_idx, x_ndigits, d)
    # k digit at position n = kd[:, n - k_scale]; pairs with x digit at -1-n,
    # i.e. xd[:, -1 - n - x_scale].
    cols_k, cols_x = [], []
    for a in range(k_ndigits):
        n = a + k_scale
        b = -1 - n - x_scale
        if 0 <= b < x_ndigits:
            cols_k.append(a)
            cols_x.append(b)
    if not cols_k:
        return np.zeros((kd.shape[0], xd.shape[0]), dtype=np.int64)
    return (kd[:, cols_k] @ xd[:, cols_x].T) % d


def exponents_for_point(k: DadicScalar, x_idx, x_scale: int) -> np.ndarray:
    """Exponents of ``w(k, c * d**x_scale)`` for an array of cell indices ``c``."""
    d = k.base
    c = np.asarray(x_idx, dtype=np.int64)
    total = np.zeros(c.shape, dtype=np.int64)
    for n, kn in k.digits().items():
        b = -1 - n - x_scale
        if b < 0 or d**b > np.iinfo(np.int64).max:
            continue
        total += kn * ((c // d**b) % d)
    return total % d
