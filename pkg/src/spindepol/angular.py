"""Angular-momentum coupling coefficients, spherical harmonics and spin matrices.

Quantum numbers are carried as :class:`HalfInt`, which stores twice the value
so that half-integer spins never go through floating point. Clebsch-Gordan
coefficients are evaluated with Racah's closed formula in exact rational
arithmetic and converted to ``float`` once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real

import numpy as np


@dataclass(frozen=True, order=True)
class HalfInt:
    """A half-integer quantum number, stored as ``twice = 2 * value``."""

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        """Build from an int, a Fraction, a float such as 1.5, or a HalfInt."""
        if isinstance(value, HalfInt):
            return value
        doubled = Fraction(value) * 2 if not isinstance(value, float) else value * 2
        if isinstance(doubled, float):
            if not doubled.is_integer():
                raise ValueError(f"{value!r} is not a multiple of 1/2")
            return cls(int(doubled))
        if doubled.denominator != 1:
            raise ValueError(f"{value!r} is not a multiple of 1/2")
        return cls(int(doubled))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.twice / 2

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice)

    def __add__(self, other) -> "HalfInt":
        return HalfInt(self.twice + HalfInt.of(other).twice)

    def __sub__(self, other) -> "HalfInt":
        return HalfInt(self.twice - HalfInt.of(other).twice)

    def __repr__(self) -> str:
        if self.is_integer:
            return f"HalfInt({self.twice // 2})"
        return f"HalfInt({self.twice}/2)"


def _check_pair(j2: int, m2: int) -> None:
    if j2 < 0:
        raise ValueError(f"negative angular momentum j={j2}/2")
    if abs(m2) > j2 or (j2 - m2) % 2:
        raise ValueError(f"invalid projection m={m2}/2 for j={j2}/2")


def _twice(x) -> int:
    if isinstance(x, HalfInt):
        return x.twice
    if isinstance(x, (int, np.integer)):
        return 2 * int(x)
    if isinstance(x, (Fraction, Real)):
        return HalfInt.of(x).twice
    raise TypeError(f"cannot interpret {x!r} as a half-integer")


@lru_cache(maxsize=None)
def cg_exact(j1: int, m1: int, j2: int, m2: int, j: int, m: int) -> tuple[int, Fraction]:
    """Exact Clebsch-Gordan coefficient from twice-valued quantum numbers.

    Returns ``(sign, square)`` so that the coefficient equals
    ``sign * sqrt(square)`` with ``square`` a non-negative rational.
    Arguments must already be valid (j, m) pairs.
    """
    if m1 + m2 != m or not (abs(j1 - j2) <= j <= j1 + j2) or (j1 + j2 + j) % 2:
        return 0, Fraction(0)
    f = math.factorial
    # all combinations below are integers once the triangle/parity rules hold
    a = (j1 + j2 - j) // 2
    b = (j1 - j2 + j) // 2
    c = (-j1 + j2 + j) // 2
    d = (j1 + j2 + j) // 2 + 1
    prefactor = Fraction((j + 1) * f(a) * f(b) * f(c), f(d))
    prefactor *= (
        f((j1 + m1) // 2) * f((j1 - m1) // 2) * f((j2 + m2) // 2)
        * f((j2 - m2) // 2) * f((j + m) // 2) * f((j - m) // 2)
    )
    kmin = max(0, (j2 - j - m1) // 2, (j1 - j + m2) // 2)
    kmax = min(a, (j1 - m1) // 2, (j2 + m2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k) * f(a - k) * f((j1 - m1) // 2 - k) * f((j2 + m2) // 2 - k)
            * f((j - j2 + m1) // 2 + k) * f((j - j1 - m2) // 2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), prefactor * total * total


@lru_cache(maxsize=None)
def _cg_float(j1: int, m1: int, j2: int, m2: int, j: int, m: int) -> float:
    sign, square = cg_exact(j1, m1, j2, m2, j, m)
    if sign == 0:
        return 0.0
    return sign * math.sqrt(square)


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | j m>`` (Condon-Shortley).

    Arguments may be :class:`HalfInt`, ints, Fractions or floats that are
    multiples of 1/2. Returns exactly 0.0 when selection rules fail.
    """
    tw = [_twice(x) for x in (j1, m1, j2, m2, j, m)]
    for jj, mm in zip(tw[::2], tw[1::2]):
        _check_pair(jj, mm)
    return _cg_float(*tw)


def spherical_harmonics_all(lmax: int, theta, phi) -> np.ndarray:
    """All ``Y_LM(theta, phi)`` for ``0 <= L <= lmax``, Condon-Shortley phase.

    Returns a complex array of shape ``((lmax+1)**2,) + broadcast shape``,
    indexed by ``L*L + L + M``. Uses the fully normalised associated Legendre
    recurrence, which stays stable for large ``L``.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    x = np.cos(theta)
    s = np.sin(theta)
    out = np.zeros(((lmax + 1) ** 2,) + theta.shape, dtype=complex)
    # pmm holds normalised P_m^m including Condon-Shortley phase
    pmm = np.full(theta.shape, 1.0 / math.sqrt(4 * math.pi))
    for mm in range(lmax + 1):
        if mm > 0:
            pmm = -math.sqrt((2 * mm + 1) / (2 * mm)) * s * pmm
        phase = np.exp(1j * mm * phi)
        older, old = None, pmm
        for ll in range(mm, lmax + 1):
            if ll == mm + 1:
                older, old = old, math.sqrt(2 * mm + 3) * x * old
            elif ll > mm + 1:
                a = math.sqrt((4 * ll * ll - 1) / (ll * ll - mm * mm))
                b = math.sqrt(((ll - 1) ** 2 - mm * mm) / (4 * (ll - 1) ** 2 - 1))
                older, old = old, a * (x * old - b * older)
            y = old * phase
            out[ll * ll + ll + mm] = y
            if mm:
                out[ll * ll + ll - mm] = (-1) ** mm * np.conj(y)
    return out


def spherical_harmonic(L: int, M: int, theta, phi):
    """Single spherical harmonic ``Y_LM(theta, phi)``."""
    L = int(L)
    M = int(M)
    if L < 0 or abs(M) > L:
        raise ValueError(f"invalid (L, M) = ({L}, {M})")
    y = spherical_harmonics_all(L, theta, phi)[L * L + L + M]
    return y[()] if y.ndim == 0 else y


@lru_cache(maxsize=64)
def spin_matrices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collective spin operators ``(Jx, Jy, Jz)`` for spin ``j = n/2``.

    Rows and columns follow the Dicke order ``k = 0..n`` with ``m = n/2 - k``.
    The returned arrays are read-only.
    """
    j = n / 2
    m = j - np.arange(n + 1)
    jz = np.diag(m).astype(complex)
    jp = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(1, n + 1):
        # J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and m+1 sits at row k-1
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz
