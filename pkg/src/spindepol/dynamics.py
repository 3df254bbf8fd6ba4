"""Collective depolarisation dynamics in the multipole basis.

The Lindblad generator with jump operators ``Jx, Jy, Jz`` (rates ``gx, gy,
gz``) and Hamiltonian ``omega * Jz`` is block diagonal in ``L``. Each block
couples ``M`` to ``M +/- 2`` only through ``gx - gy``; with ``gx == gy`` every
multipole decays independently at ``Gamma_LM + i omega M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .angular import spin_matrices
from .mpb import MultipoleVector, lm_arrays, lm_index, purity, reduced_purity
from .states import DickeVector, UnsupportedError, spin_expectations

DENSE_ORACLE_MAX_N = 8


class WrongSolverError(ValueError):
    """The diagonal solver was asked to handle ``gx != gy``."""


class NumericalError(ArithmeticError):
    """A propagation produced non-finite or inconsistent numbers."""


@dataclass(frozen=True)
class RateSet:
    gx: float
    gy: float
    gz: float
    omega: float = 0.0

    def __post_init__(self):
        for name in ("gx", "gy", "gz"):
            g = getattr(self, name)
            if not (g >= 0 and math.isfinite(g)):
                raise ValueError(f"rate {name}={g} must be finite and >= 0")

    @classmethod
    def isotropic(cls, gamma: float, omega: float = 0.0) -> "RateSet":
        return cls(gamma, gamma, gamma, omega)

    @classmethod
    def anisotropic(cls, gperp: float, gz: float, omega: float = 0.0) -> "RateSet":
        return cls(gperp, gperp, gz, omega)

    @property
    def diagonal(self) -> bool:
        return self.gx == self.gy

    @property
    def gperp(self) -> float:
        return (self.gx + self.gy) / 2

    @property
    def gmax(self) -> float:
        return max(self.gx, self.gy, self.gz)

    @property
    def is_isotropic(self) -> bool:
        return self.gx == self.gy == self.gz

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.gx, self.gy, self.gz, self.omega)


@dataclass(frozen=True, eq=False)
class GammaTable:
    """Decay rates ``diag[idx(L,M)] = Gamma_LM`` and couplings ``up[idx(L,M)] = Gamma_{L,M+2}``.

    ``up`` multiplies ``rho_{L,M+2}`` in the equation for ``rho_LM``; the
    coupling to ``rho_{L,M-2}`` is ``up[idx(L,M-2)]`` by symmetry.
    """

    n: int
    diag: np.ndarray
    up: np.ndarray

    def rate(self, L: int, M: int) -> float:
        return float(self.diag[lm_index(L, M)])


def d_plus(L: int, M: int) -> float:
    return math.sqrt(max((L - M) * (L + M + 1) * (L - M - 1) * (L + M + 2), 0))


def d_minus(L: int, M: int) -> float:
    return math.sqrt(max((L + M) * (L - M + 1) * (L + M - 1) * (L - M + 2), 0))


def gamma_table(n: int, rates: RateSet) -> GammaTable:
    ls, ms = lm_arrays(n)
    diag = rates.gz * ms ** 2 + rates.gperp * (ls * (ls + 1) - ms ** 2)
    coupling = (rates.gx - rates.gy) / 4
    up = np.array([coupling * d_plus(L, M) if M + 2 <= L else 0.0 for L, M in zip(ls, ms)])
    return GammaTable(n, diag.astype(float), up)


def _phases(n: int, rates: RateSet) -> np.ndarray:
    _, ms = lm_arrays(n)
    return gamma_table(n, rates).diag + 1j * rates.omega * ms


def evolve_diagonal(v0: MultipoleVector, rates: RateSet, t: float) -> MultipoleVector:
    """Exact propagation for ``gx == gy``: ``rho_LM(t) = exp(-(Gamma_LM + i omega M) t) rho_LM(0)``."""
    if not rates.diagonal:
        raise WrongSolverError("evolve_diagonal needs gx == gy; use evolve_general")
    if t < 0:
        raise ValueError("t must be >= 0")
    return v0.with_comps(v0.comps * np.exp(-_phases(v0.n, rates) * t))


@lru_cache(maxsize=256)
def _block_generators(n: int, rates: RateSet) -> tuple[np.ndarray, ...]:
    table = gamma_table(n, rates)
    blocks = []
    for L in range(n + 1):
        size = 2 * L + 1
        g = np.zeros((size, size), dtype=complex)
        for i, M in enumerate(range(-L, L + 1)):
            idx = lm_index(L, M)
            g[i, i] = -(table.diag[idx] + 1j * rates.omega * M)
            if M + 2 <= L:
                g[i, i + 2] = -table.up[idx]
                g[i + 2, i] = -table.up[idx]
        g.setflags(write=False)
        blocks.append(g)
    return tuple(blocks)


def evolve_general(v0: MultipoleVector, rates: RateSet, t: float) -> MultipoleVector:
    """Propagation for arbitrary rates via one matrix exponential per ``L`` block."""
    if t < 0:
        raise ValueError("t must be >= 0")
    out = np.empty_like(v0.comps)
    for L, g in enumerate(_block_generators(v0.n, rates)):
        sl = slice(L * L, (L + 1) * (L + 1))
        out[sl] = expm(g * t) @ v0.comps[sl]
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite multipoles at t={t}")
    return v0.with_comps(out)


def evolve(v0: MultipoleVector, rates: RateSet, t: float) -> MultipoleVector:
    """Dispatch to the diagonal solver when possible."""
    if rates.diagonal:
        return evolve_diagonal(v0, rates, t)
    return evolve_general(v0, rates, t)


def dense_oracle_evolve(rho0: np.ndarray, rates: RateSet, t: float,
                        rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Brute-force integration of the master equation on the density matrix.

    Adaptive 8th-order Runge-Kutta; independent of the multipole machinery.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    n = rho0.shape[0] - 1
    if n > DENSE_ORACLE_MAX_N:
        raise UnsupportedError(f"dense oracle limited to n <= {DENSE_ORACLE_MAX_N}")
    if t == 0:
        return rho0.copy()
    jx, jy, jz = spin_matrices(n)
    terms = [(g, a, a @ a) for g, a in zip((rates.gx, rates.gy, rates.gz), (jx, jy, jz)) if g]
    h = rates.omega * jz
    dim = n + 1

    def rhs(_, y):
        rho = y.reshape(dim, dim)
        out = 1j * (rho @ h - h @ rho)
        for g, a, a2 in terms:
            out += g * (2 * a @ rho @ a - a2 @ rho - rho @ a2)
        return out.ravel()

    sol = solve_ivp(rhs, (0.0, t), rho0.ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(sol.message)
    return sol.y[:, -1].reshape(dim, dim)


# --- purity laws ----------------------------------------------------------


def _require_diagonal(rates: RateSet) -> None:
    if not rates.diagonal:
        raise WrongSolverError("closed-form purity laws need gx == gy")


def purity_time(v0: MultipoleVector, rates: RateSet, t):
    """Closed-form purity ``1/(n+1) + sum_{L>0} |rho_LM(0)|^2 exp(-2 Gamma_LM t)``."""
    _require_diagonal(rates)
    diag = gamma_table(v0.n, rates).diag[1:]
    w = np.abs(v0.comps[1:]) ** 2
    t_arr = np.asarray(t, dtype=float)
    r = 1 / (v0.n + 1) + np.exp(-2 * np.multiply.outer(t_arr, diag)) @ w
    return float(r) if r.ndim == 0 else r


def purity_lower_bound(v0: MultipoleVector, rates: RateSet, t, q: int):
    """Purity with only the levels ``L > q`` kept; a lower bound on ``purity_time``."""
    _require_diagonal(rates)
    ls, _ = lm_arrays(v0.n)
    keep = ls > q
    diag = gamma_table(v0.n, rates).diag[keep]
    w = np.abs(v0.comps[keep]) ** 2
    t_arr = np.asarray(t, dtype=float)
    r = 1 / (v0.n + 1) + np.exp(-2 * np.multiply.outer(t_arr, diag)) @ w
    return float(r) if r.ndim == 0 else r


def purity_derivative(v: MultipoleVector, rates: RateSet, order: int = 1) -> float:
    """``d^k R / dt^k = (-2)^k sum |rho_LM|^2 Gamma_LM^k``."""
    _require_diagonal(rates)
    if order < 1:
        raise ValueError("order must be >= 1")
    diag = gamma_table(v.n, rates).diag
    return float((-2) ** order * np.sum(np.abs(v.comps) ** 2 * diag ** order))


def purity_rate_pure(psi: DickeVector, rates: RateSet) -> float:
    """Initial purity loss rate of a pure state, ``-4 sum_a gamma_a Var(J_a)``."""
    var = spin_expectations(psi).variances
    return float(-4 * (rates.gx * var[0] + rates.gy * var[1] + rates.gz * var[2]))


def purity_ode_chain(n: int, gamma: float, r0, times) -> np.ndarray:
    """Solve the closed chain for reduced purities under isotropic depolarisation.

    ``r0[q-1]`` is the initial purity of the ``q``-qubit reduction (``r0[n-1]``
    is the global purity). Returns shape ``(len(times), n)`` with column
    ``q-1`` holding ``R_q(t)``.
    """
    r0 = np.asarray(r0, dtype=float)
    if r0.shape != (n,):
        raise ValueError(f"expected {n} initial purities")
    # state vector (R_0 = 1, R_1, ..., R_n)
    a = np.zeros((n + 1, n + 1))
    for q in range(1, n + 1):
        a[q, q] = -2 * gamma * q * (q + 1)
        a[q, q - 1] = 2 * gamma * q * q
    x0 = np.concatenate([[1.0], r0])
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.array([expm(a * t) @ x0 for t in times])
    return out[:, 1:]


def reduced_purities(v: MultipoleVector) -> np.ndarray:
    """``[R_1, ..., R_n]`` for a state."""
    return np.array([reduced_purity(v, q) for q in range(1, v.n + 1)])


def superdecoherence_gap(v: MultipoleVector) -> float:
    """``R(rho) - R(rho_{n-1})``; positive values require entanglement."""
    return purity(v) - reduced_purity(v, v.n - 1)


# --- speed limits ---------------------------------------------------------


@dataclass(frozen=True)
class QSLBounds:
    campaioli: float
    uzdin_R_lower: float
    tmin: float
    tes_lower: float
    purity: float
    purity_above_uzdin: bool
    entangled_by_tes: bool


def campaioli_bound(n: int, rates: RateSet) -> float:
    """Upper bound on the time average of ``sqrt(d^2R/dt^2)``."""
    return 4 / 3 * (2 * rates.gperp ** 2 + rates.gz ** 2) * n * (n + 1) * (n + 2)


def uzdin_purity_bound(n: int, gamma: float, t):
    """State-independent lower bound on the purity of an initially pure state."""
    return 1 / (n + 1) + n / (n + 1) * np.exp(-gamma * n * (n + 1) * (n + 2) * np.asarray(t, float))


def half_purity_time_bound(n: int, gamma: float, r0: float) -> float:
    """Lower bound on the time for the purity to halve (``inf`` if undefined)."""
    x = (n + 1) * r0 - 2
    if x <= 0:
        return math.inf
    return math.log(2 + 2 / x) / (2 * gamma * n * (n + 1))


def entanglement_time_bound(n: int, gamma: float, q: int) -> float:
    """Time below which a pure ``q``-anticoherent initial state stays entangled."""
    if q < 1:
        return 0.0
    return math.log(n * (q + 1) / (n - q)) / (2 * gamma * n * (n + 1))


def mean_sqrt_curvature(v0: MultipoleVector, rates: RateSet, tau: float, samples: int = 2001) -> float:
    """Time average over ``[0, tau]`` of ``sqrt(d^2R/dt^2)`` (trapezoidal rule)."""
    _require_diagonal(rates)
    diag = gamma_table(v0.n, rates).diag
    w = np.abs(v0.comps) ** 2
    ts = np.linspace(0.0, tau, samples)
    rdd = 4 * (np.exp(-2 * np.outer(ts, diag)) @ (w * diag ** 2))
    vals = np.sqrt(rdd)
    return float(np.sum((vals[1:] + vals[:-1]) / 2 * np.diff(ts)) / tau)


def qsl_bounds(n: int, rates: RateSet, v0: MultipoleVector, t: float) -> QSLBounds:
    """Speed-limit style bounds at time ``t`` for initial multipoles ``v0``.

    ``uzdin_R_lower``, ``tmin`` and ``tes_lower`` need isotropic rates and are
    NaN otherwise; ``tes_lower`` is 0 unless the initial state is anticoherent.
    """
    r_t = purity(evolve(v0, rates, t))
    if rates.is_isotropic and rates.gx > 0:
        g = rates.gx
        uz = float(uzdin_purity_bound(n, g, t))
        tmin = half_purity_time_bound(n, g, purity(v0))
        q = v0.anticoherence_order() if abs(purity(v0) - 1) < 1e-10 else 0
        tes = entanglement_time_bound(n, g, min(q, n - 1))
    else:
        uz = tmin = tes = math.nan
    return QSLBounds(
        campaioli=campaioli_bound(n, rates),
        uzdin_R_lower=uz,
        tmin=tmin,
        tes_lower=tes,
        purity=r_t,
        purity_above_uzdin=bool(math.isnan(uz) or r_t >= uz - 1e-12),
        entangled_by_tes=bool(not math.isnan(tes) and t < tes),
    )


# --- trajectories ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    snapshots: list
    purity: np.ndarray
    r: np.ndarray
    negativities: dict

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def trajectory(v0: MultipoleVector, rates: RateSet, times, bipartitions=()) -> Trajectory:
    """Snapshots, purity, distance to the MMS and optional negativities on a time grid."""
    from .entanglement import negativity
    from .mpb import from_multipoles

    times = np.asarray(times, dtype=float)
    snaps = [evolve(v0, rates, float(t)) for t in times]
    pur = np.array([purity(s) for s in snaps])
    r = np.sqrt(np.maximum(pur - 1 / (v0.n + 1), 0.0))
    negs = {}
    for q in bipartitions:
        negs[q] = np.array([negativity(from_multipoles(s), q) for s in snaps])
    return Trajectory(times, snaps, pur, r, negs)
