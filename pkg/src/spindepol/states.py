"""Symmetric pure states and state-level measures.

Pure states are :class:`DickeVector` instances: ``n + 1`` complex amplitudes
on ``|D_n^(k)>``, normalised and with the global phase fixed so that the first
non-zero amplitude is real and positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angular import spin_matrices
from .mpb import MultipoleVector, partial_trace_multipoles, purity, to_multipoles

GAUGE_TOL = 1e-14


class UnsupportedError(ValueError):
    """Raised for inputs outside the range an operation supports."""


@dataclass(frozen=True, eq=False)
class DickeVector:
    """Normalised, gauge-fixed pure symmetric state of ``n`` qubits."""

    n: int
    d: np.ndarray
    order: int | None = field(default=None, compare=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=complex).ravel().copy()
        if d.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} amplitudes, got {d.shape}")
        norm = np.linalg.norm(d)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("state vector has zero or non-finite norm")
        d /= norm
        nz = np.flatnonzero(np.abs(d) > GAUGE_TOL)
        d *= np.exp(-1j * np.angle(d[nz[0]]))
        d[nz[0]] = abs(d[nz[0]])
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def density(self) -> np.ndarray:
        return np.outer(self.d, self.d.conj())

    def multipoles(self) -> MultipoleVector:
        return to_multipoles(self.density(), check=False)

    def rotate_z(self, phi: float) -> "DickeVector":
        """Rotation about z by ``phi`` (amplitude ``k`` picks up ``exp(-i k phi)``)."""
        return DickeVector(self.n, self.d * np.exp(-1j * np.arange(self.n + 1) * phi), self.order)

    def overlap(self, other: "DickeVector") -> float:
        return float(abs(np.vdot(self.d, other.d)))

    def to_json(self) -> dict:
        return {"schema": "1", "n": self.n, "dicke": [[float(c.real), float(c.imag)] for c in self.d]}

    @classmethod
    def from_json(cls, data: dict) -> "DickeVector":
        amps = [complex(re, im) for re, im in data["dicke"]]
        return cls(int(data["n"]), amps)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "DickeVector":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SpinExpectations:
    jmean: np.ndarray
    variances: np.ndarray

    @property
    def total_variance(self) -> float:
        return float(self.variances.sum())


def coherent(n: int, theta: float, phi: float) -> DickeVector:
    """Spin-coherent state pointing along ``(theta, phi)``."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    d = [
        math.sqrt(math.comb(n, k)) * c ** (n - k) * (s * np.exp(1j * phi)) ** k
        for k in range(n + 1)
    ]
    return DickeVector(n, d)


def dicke(n: int, k: int) -> DickeVector:
    if not 0 <= k <= n:
        raise ValueError(f"excitation number k={k} out of range for n={n}")
    d = np.zeros(n + 1)
    d[k] = 1.0
    return DickeVector(n, d)


def ghz(n: int) -> DickeVector:
    if n < 1:
        raise ValueError("n must be >= 1")
    d = np.zeros(n + 1)
    d[0] = d[n] = 1.0
    return DickeVector(n, d)


def w(n: int) -> DickeVector:
    return dicke(n, 1)


def db(n: int) -> DickeVector:
    """Balanced Dicke state ``|D_n^(floor(n/2))>``."""
    return dicke(n, n // 2)


# Highest-order anticoherent pure states as |j, m> amplitudes keyed by 2m.
# The j = 5 tail amplitude is 1/sqrt(5): 1/sqrt(11) does not normalise the
# state and breaks anticoherence. The j = 9/2 state is only 2-anticoherent:
# its rank-3 multipole rho_{3,-3} does not vanish.
_S = math.sqrt
HOAP_TABLE: dict[int, tuple[int, dict[int, complex]]] = {
    2: (1, {2: 1 / _S(2), -2: 1 / _S(2)}),
    3: (1, {3: 1 / _S(2), -3: 1 / _S(2)}),
    4: (2, {4: 0.5, 0: 1j * _S(2) / 2, -4: 0.5}),
    5: (1, {3: 1 / _S(2), -3: 1 / _S(2)}),
    6: (3, {4: 1 / _S(2), -4: 1 / _S(2)}),
    7: (2, {7: _S(2) / 3, 1: _S(3.5) / 3, -5: _S(3.5) / 3}),
    8: (3, {8: _S(5 / 6) / 2, 0: _S(7 / 3) / 2, -8: _S(5 / 6) / 2}),
    9: (2, {9: 1 / _S(6), 3: -1 / _S(3), -3: -1 / _S(3), -9: 1 / _S(6)}),
    10: (3, {10: 1 / _S(5), 0: _S(3 / 5), -10: 1 / _S(5)}),
}


def hoap(n: int) -> DickeVector:
    """Tabulated highest-order anticoherent pure state for ``2 <= n <= 10``.

    The returned vector carries its anticoherence order in ``.order``.
    """
    if n not in HOAP_TABLE:
        raise UnsupportedError(
            f"no tabulated HOAP state for n={n}; use spindepol.extremal.hoap_search"
        )
    order, amps = HOAP_TABLE[n]
    d = np.zeros(n + 1, dtype=complex)
    for m2, a in amps.items():
        d[(n - m2) // 2] = a
    return DickeVector(n, d, order)


def anticoherence_measure(psi: DickeVector | MultipoleVector, q: int) -> float:
    """Purity-based measure ``A_q = (q+1)/q * (1 - R(rho_q))``."""
    v = psi.multipoles() if isinstance(psi, DickeVector) else psi
    r = purity(partial_trace_multipoles(v, q))
    return (q + 1) / q * (1 - r)


def spin_expectations(psi: DickeVector) -> SpinExpectations:
    ops = spin_matrices(psi.n)
    d = psi.d
    mean = np.array([np.vdot(d, a @ d).real for a in ops])
    second = np.array([np.vdot(d, a @ (a @ d)).real for a in ops])
    return SpinExpectations(mean, np.maximum(second - mean ** 2, 0.0))


def mms_distance(v: MultipoleVector) -> float:
    """Hilbert-Schmidt distance to the maximally mixed state."""
    excess = purity(v) - 1 / (v.n + 1)
    if excess < -1e-12:
        raise ArithmeticError(f"purity below 1/(n+1) by {-excess:.3g}")
    return math.sqrt(max(excess, 0.0))


def rmax_ball_radius(n: int) -> float:
    """Radius of the absolutely-separable ball around the maximally mixed state."""
    if n < 1:
        raise ValueError("n must be >= 1")
    # (4j+1) C(4j, 2j) - (j+1) with j = n/2, kept exact as x2
    twice_core = 2 * (2 * n + 1) * math.comb(2 * n, n) - (n + 2)
    log_core = math.log(twice_core) - math.log(2)
    return math.exp(-0.5 * log_core) / math.sqrt(2 * n + 2)


def parse_state(designator: str, n: int) -> DickeVector:
    """Build a state from a CLI designator such as ``ghz`` or ``coherent:0.3,1.2``."""
    name, _, arg = designator.partition(":")
    name = name.strip().lower()
    if name == "ghz":
        return ghz(n)
    if name == "w":
        return w(n)
    if name == "db":
        return db(n)
    if name == "hoap":
        return hoap(n)
    if name == "dicke":
        return dicke(n, int(arg))
    if name == "coherent":
        theta, phi = (float(x) for x in arg.split(","))
        return coherent(n, theta, phi)
    if name == "file":
        psi = DickeVector.load(arg)
        if psi.n != n:
            raise ValueError(f"state file holds n={psi.n}, expected n={n}")
        return psi
    raise ValueError(f"unknown state designator {designator!r}")
