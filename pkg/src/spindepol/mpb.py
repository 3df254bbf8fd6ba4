"""Multipole operator basis for the symmetric sector of ``n`` qubits.

Density matrices are plain ``(n+1, n+1)`` complex arrays in the Dicke order
(row ``k`` is ``|D_n^(k)>``, i.e. ``m = n/2 - k``). State multipoles are held
in a :class:`MultipoleVector`, a flat array indexed by ``L*L + L + M``.

``T_LM`` raises the magnetic number by ``M``:
``<j, m'+M| T_LM |j, m'> = sqrt((2L+1)/(2j+1)) <j m'; L M | j m'+M>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .angular import _cg_float, spherical_harmonics_all

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def lm_index(L: int, M: int) -> int:
    return L * L + L + M


def lm_pairs(lmax: int):
    """Iterate ``(L, M)`` in storage order."""
    for L in range(lmax + 1):
        for M in range(-L, L + 1):
            yield L, M


@lru_cache(maxsize=None)
def lm_arrays(lmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer arrays ``(L, M)`` aligned with the flat storage order."""
    pairs = np.array(list(lm_pairs(lmax)), dtype=int).reshape(-1, 2)
    ls, ms = pairs[:, 0].copy(), pairs[:, 1].copy()
    ls.setflags(write=False)
    ms.setflags(write=False)
    return ls, ms


@dataclass(frozen=True, eq=False)
class MultipoleVector:
    """State multipoles ``rho_LM = Tr[T_LM^dagger rho]`` of an ``n``-qubit symmetric state."""

    n: int
    comps: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.comps, dtype=complex).copy()
        if comps.shape != ((self.n + 1) ** 2,):
            raise ValueError(f"expected {(self.n + 1) ** 2} components, got {comps.shape}")
        comps.setflags(write=False)
        object.__setattr__(self, "comps", comps)

    def __getitem__(self, lm: tuple[int, int]) -> complex:
        L, M = lm
        if not (0 <= L <= self.n and abs(M) <= L):
            raise IndexError(f"(L, M) = {lm} out of range for n={self.n}")
        return complex(self.comps[lm_index(L, M)])

    def level(self, L: int) -> np.ndarray:
        """Components ``M = -L..L`` of rank ``L``."""
        return self.comps[L * L: (L + 1) * (L + 1)]

    def level_weights(self) -> np.ndarray:
        """``sum_M |rho_LM|^2`` for each ``L``."""
        w = np.abs(self.comps) ** 2
        return np.array([w[L * L: (L + 1) ** 2].sum() for L in range(self.n + 1)])

    def with_comps(self, comps) -> "MultipoleVector":
        return MultipoleVector(self.n, comps)

    def hermiticity_error(self) -> float:
        ls, ms = lm_arrays(self.n)
        partner = self.comps[ls * ls + ls - ms]
        return float(np.max(np.abs(np.conj(self.comps) - (-1.0) ** ms * partner)))

    def anticoherence_order(self, tol: float = 1e-12) -> int:
        """Largest ``q`` with all levels ``1..q`` vanishing (0 if level 1 is populated)."""
        w = self.level_weights()
        q = 0
        for L in range(1, self.n + 1):
            if w[L] > tol * tol:
                break
            q = L
        return q

    def to_json(self) -> dict:
        rows = [
            {"L": L, "M": M, "re": float(c.real), "im": float(c.imag)}
            for (L, M), c in zip(lm_pairs(self.n), self.comps)
            if c != 0
        ]
        return {"schema": "1", "n": self.n, "comps": rows}

    @classmethod
    def from_json(cls, data: dict) -> "MultipoleVector":
        n = int(data["n"])
        comps = np.zeros((n + 1) ** 2, dtype=complex)
        for row in data["comps"]:
            L, M = int(row["L"]), int(row["M"])
            if not (0 <= L <= n and abs(M) <= L):
                raise ValueError(f"(L, M) = ({L}, {M}) out of range for n={n}")
            comps[lm_index(L, M)] = complex(row.get("re", 0.0), row.get("im", 0.0))
        return cls(n, comps)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "MultipoleVector":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_tlm(n: int, L: int, M: int) -> np.ndarray:
    """Matrix of the multipole operator ``T_LM`` in the Dicke basis."""
    if not (0 <= L <= n and abs(M) <= L):
        raise ValueError(f"(L, M) = ({L}, {M}) out of range for n={n}")
    return np.array(_tlm_stack(n)[lm_index(L, M)])


@lru_cache(maxsize=32)
def _tlm_stack(n: int) -> np.ndarray:
    """All ``T_LM`` stacked in storage order, shape ``((n+1)**2, n+1, n+1)``."""
    dim = n + 1
    out = np.zeros((dim * dim, dim, dim))
    for L, M in lm_pairs(n):
        scale = math.sqrt((2 * L + 1) / dim)
        for col in range(dim):
            m2_col = n - 2 * col
            m2_row = m2_col + 2 * M
            if abs(m2_row) > n:
                continue
            row = (n - m2_row) // 2
            out[lm_index(L, M), row, col] = scale * _cg_float(n, m2_col, 2 * L, 2 * M, n, m2_row)
    out.setflags(write=False)
    return out


def check_density_matrix(rho: np.ndarray) -> int:
    """Validate a Dicke-basis density matrix and return its qubit count."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise ValueError(f"density matrix has trace {np.trace(rho).real:.3g}")
    if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
        raise ValueError("density matrix is not positive semidefinite")
    return rho.shape[0] - 1


def to_multipoles(rho: np.ndarray, check: bool = True) -> MultipoleVector:
    """State multipoles of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    n = check_density_matrix(rho) if check else rho.shape[0] - 1
    # T is real, so Tr[T^dagger rho] = sum_ab T_ab rho_ab
    comps = np.einsum("iab,ab->i", _tlm_stack(n), rho)
    return MultipoleVector(n, comps)


def from_multipoles(v: MultipoleVector) -> np.ndarray:
    """Density matrix with the given state multipoles."""
    if abs(v.comps[0] - 1 / math.sqrt(v.n + 1)) > 1e-12:
        raise ValueError(f"rho_00 = {v.comps[0]:.6g} violates normalisation 1/sqrt(n+1)")
    if v.hermiticity_error() > 1e-10:
        raise ValueError("multipoles violate rho*_LM = (-1)^M rho_L,-M")
    rho = np.einsum("i,iab->ab", v.comps, _tlm_stack(v.n))
    return (rho + rho.conj().T) / 2


def purity(v: MultipoleVector) -> float:
    return float(np.sum(np.abs(v.comps) ** 2))


def maximally_mixed(n: int) -> MultipoleVector:
    comps = np.zeros((n + 1) ** 2, dtype=complex)
    comps[0] = 1 / math.sqrt(n + 1)
    return MultipoleVector(n, comps)


@lru_cache(maxsize=None)
def reduction_factors(n: int, q: int) -> np.ndarray:
    """Per-level factors mapping ``rho_LM`` of ``n`` qubits to the ``q``-qubit reduction."""
    out = np.zeros(q + 1)
    f = math.factorial
    for L in range(q + 1):
        sq = Fraction(f(q) ** 2 * f(n - L) * f(n + L + 1), f(n) ** 2 * f(q - L) * f(q + L + 1))
        out[L] = math.sqrt(sq)
    out.setflags(write=False)
    return out


def partial_trace_multipoles(v: MultipoleVector, q: int) -> MultipoleVector:
    """Multipoles of the ``q``-qubit reduced state."""
    if not 1 <= q < v.n:
        raise ValueError(f"q must satisfy 1 <= q < n={v.n}, got {q}")
    ls, _ = lm_arrays(q)
    comps = v.comps[: (q + 1) ** 2] * reduction_factors(v.n, q)[ls]
    return MultipoleVector(q, comps)


def reduced_purity(v: MultipoleVector, q: int) -> float:
    """Purity of the ``q``-qubit reduction; ``q == n`` returns the full purity."""
    if q == v.n:
        return purity(v)
    return purity(partial_trace_multipoles(v, q))


# --- P function -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PFunctionCoeffs:
    """Coefficients of the truncated P function ``P(Omega) = sum P_LM Y_LM(Omega)``.

    Normalised so that ``rho = integral P(Omega) (|Omega><Omega|)^{(x)n} dOmega``.
    """

    n: int
    plm: np.ndarray

    def __call__(self, theta, phi) -> np.ndarray:
        y = spherical_harmonics_all(self.n, theta, phi)
        return np.tensordot(self.plm, y, axes=1).real


@lru_cache(maxsize=None)
def _p_weights(n: int) -> np.ndarray:
    # no (-1)^(L-M) factor: with the coherent-state phase used here that
    # factor would reflect P through the xy-plane (same minimum, wrong rho)
    ls, _ = lm_arrays(n)
    f = math.factorial
    w = np.array([math.sqrt(f(n - L) * f(n + L + 1)) / f(n) for L in ls]) / math.sqrt(4 * math.pi)
    w.setflags(write=False)
    return w


def p_function_coeffs(v: MultipoleVector) -> PFunctionCoeffs:
    """Truncated P-function coefficients of a state."""
    return PFunctionCoeffs(v.n, v.comps * _p_weights(v.n))


@lru_cache(maxsize=16)
def _grid_harmonics(n: int, n_theta: int, n_phi: int):
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = np.linspace(0.0, 2 * math.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    y = spherical_harmonics_all(n, tt.ravel(), pp.ravel())
    y.setflags(write=False)
    return tt.ravel(), pp.ravel(), y


def _grid_sizes(dtheta: float, dphi: float) -> tuple[int, int]:
    if dtheta <= 0 or dphi <= 0:
        raise ValueError("grid resolutions must be positive")
    return int(math.ceil(math.pi / dtheta)) + 1, max(int(math.ceil(2 * math.pi / dphi)), 1)


def p_function_grid_min(p: PFunctionCoeffs, dtheta: float, dphi: float) -> tuple[float, tuple[float, float]]:
    """Minimum of the P function over the sampling grid only."""
    tt, pp, y = _grid_harmonics(p.n, *_grid_sizes(dtheta, dphi))
    values = (p.plm @ y).real
    i = int(np.argmin(values))
    return float(values[i]), (float(tt[i]), float(pp[i]))


def p_function_min(p: PFunctionCoeffs, dtheta: float, dphi: float) -> tuple[float, tuple[float, float]]:
    """Minimum of the P function: grid scan, then Nelder-Mead from the worst point."""
    grid_min, start = p_function_grid_min(p, dtheta, dphi)

    def f(x):
        return float(p(x[0], x[1]))

    res = minimize(f, np.array(start), method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-15, "maxiter": 2000})
    if res.fun < grid_min:
        # (theta, phi) outside the chart is the same point as (-theta, phi + pi)
        theta = abs(res.x[0]) % (2 * math.pi)
        phi = res.x[1] + (math.pi if res.x[0] < 0 else 0.0)
        if theta > math.pi:
            theta, phi = 2 * math.pi - theta, phi + math.pi
        phi %= 2 * math.pi
        return float(p(theta, phi)), (float(theta), float(phi))
    return grid_min, start
