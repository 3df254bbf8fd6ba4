"""Bipartite structure of symmetric states: partial transpose, negativity and
characteristic times.

A symmetric state of ``n`` qubits split into ``q`` and ``n - q`` qubits lives
in ``Sym^q (x) Sym^(n-q)``, so every bipartite computation here happens in a
``(q+1)(n-q+1)`` dimensional space instead of ``2**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import RateSet, WrongSolverError, evolve, gamma_table
from .mpb import MultipoleVector, from_multipoles, lm_arrays, p_function_coeffs, p_function_min
from .states import DickeVector, rmax_ball_radius

NPT_EPS = 1e-12
NPT_TOL = 1e-8
HORIZON = 50.0  # search window in units of 1 / gamma_max
BRACKET_FACTOR = 1.25
# fractions past a root where the sign is rechecked
VERIFY_OFFSETS = (0.05, 0.25, 1.0)


@dataclass(frozen=True, eq=False)
class BipartiteOperator:
    n: int
    q: int
    entries: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.q + 1, self.n - self.q + 1

    def partial_transpose(self) -> np.ndarray:
        """Transpose on the first (``q``-qubit) factor."""
        a, b = self.dims
        t = self.entries.reshape(a, b, a, b).transpose(2, 1, 0, 3)
        return t.reshape(a * b, a * b)

    def reduce_first(self) -> np.ndarray:
        """Trace out the second factor."""
        a, b = self.dims
        return np.einsum("ijkj->ik", self.entries.reshape(a, b, a, b))


def _check_cut(n: int, q: int) -> None:
    if not 1 <= q <= n - 1:
        raise ValueError(f"bipartition q={q} out of range for n={n}")


@lru_cache(maxsize=128)
def embedding(n: int, q: int) -> np.ndarray:
    """Isometry ``V`` from ``Sym^n`` into ``Sym^q (x) Sym^(n-q)`` in Dicke bases.

    ``|D_n^k> = sum_l sqrt(C(q,l) C(n-q,k-l) / C(n,k)) |D_q^l>|D_(n-q)^(k-l)>``.
    """
    _check_cut(n, q)
    b = n - q + 1
    v = np.zeros(((q + 1) * b, n + 1))
    for k in range(n + 1):
        for l in range(max(0, k - (n - q)), min(q, k) + 1):
            v[l * b + (k - l), k] = math.sqrt(
                math.comb(q, l) * math.comb(n - q, k - l) / math.comb(n, k)
            )
    v.setflags(write=False)
    return v


def _as_density(rho) -> np.ndarray:
    if isinstance(rho, MultipoleVector):
        return from_multipoles(rho)
    if isinstance(rho, DickeVector):
        return rho.density()
    return np.asarray(rho, dtype=complex)


def embed_bipartite(rho, q: int) -> BipartiteOperator:
    rho = _as_density(rho)
    n = rho.shape[0] - 1
    v = embedding(n, q)
    return BipartiteOperator(n, q, v @ rho @ v.T)


def min_pt_eigenvalue(rho, q: int) -> float:
    pt = embed_bipartite(rho, q).partial_transpose()
    return float(np.linalg.eigvalsh(pt)[0])


def negativity(rho, q: int) -> float:
    """Minus the sum of the negative partial-transpose eigenvalues across ``(q, n-q)``."""
    ev = np.linalg.eigvalsh(embed_bipartite(rho, q).partial_transpose())
    return float(np.abs(ev[ev < 0]).sum())


def schmidt_weights(psi: DickeVector, q: int) -> np.ndarray:
    _check_cut(psi.n, q)
    amp = (embedding(psi.n, q) @ psi.d).reshape(q + 1, psi.n - q + 1)
    s = np.linalg.svd(amp, compute_uv=False)
    return s ** 2


def negativity_pure(psi: DickeVector, q: int) -> float:
    """``sum_{i>j} sqrt(l_i l_j)`` over the Schmidt weights."""
    s = np.sqrt(np.clip(schmidt_weights(psi, q), 0.0, None))
    return float((s.sum() ** 2 - 1) / 2)


def n4_pt_eigenvalues(t: float) -> tuple[float, float]:
    """Closed-form lowest PT eigenvalues of the evolved 4-qubit HOAP state (gamma = 1).

    Returns ``(lambda_13, lambda_22)`` for the (1,3) and (2,2) cuts.
    """
    e = math.exp
    lam13 = e(-20 * t) / 20 * (e(20 * t) - 5 * e(8 * t) - 6)
    root = math.sqrt(e(16 * t) * (4 * e(4 * t) * (e(20 * t) + 3) + 75) + 9)
    lam22 = -e(-20 * t) / 30 * (3 - 3 * e(20 * t) + root)
    return lam13, lam22


# --- characteristic times -------------------------------------------------


def _require_decay(rates: RateSet) -> float:
    if not rates.diagonal:
        raise WrongSolverError("characteristic times are defined for gx == gy")
    if rates.gmax <= 0:
        raise ValueError("at least one rate must be positive")
    return rates.gmax


def _first_true(pred, horizon: float, t_first: float, tol: float) -> float:
    """Smallest grid-bracketed ``t`` with ``pred(t)`` true and staying true just after.

    Returns ``inf`` when nothing is found before ``horizon``.
    """
    if pred(0.0):
        return 0.0
    lo, hi = 0.0, t_first
    while True:
        while not pred(hi):
            lo, hi = hi, hi * BRACKET_FACTOR
            if lo > horizon:
                return math.inf
        a, b = lo, hi
        while b - a > tol:
            mid = (a + b) / 2
            if pred(mid):
                b = mid
            else:
                a = mid
        # recheck past the root; a false sample restarts the bracket there
        bad = next((b + (b - lo) * f for f in VERIFY_OFFSETS if not pred(b + (b - lo) * f)), None)
        if bad is None:
            return b
        lo, hi = bad, bad * BRACKET_FACTOR


def t_npt(psi0: DickeVector, rates: RateSet, q: int) -> float:
    """Time after which the ``(q, n-q)`` partial transpose stays positive."""
    g = _require_decay(rates)
    _check_cut(psi0.n, q)
    v0 = psi0.multipoles() if isinstance(psi0, DickeVector) else psi0

    def ppt(t):
        return min_pt_eigenvalue(evolve(v0, rates, t), q) >= -NPT_EPS

    return _first_true(ppt, HORIZON / g, 1e-3 / g, NPT_TOL)


def p_resolution(n: int) -> tuple[float, float]:
    """Angular grid step and time precision used for P-function positivity."""
    return n ** -0.75, 1 / (4096 * math.sqrt(n))


def t_p(psi0: DickeVector, rates: RateSet) -> float:
    """First time the truncated P function is non-negative over the whole sphere."""
    g = _require_decay(rates)
    v0 = psi0.multipoles() if isinstance(psi0, DickeVector) else psi0
    step, dt = p_resolution(v0.n)

    def positive(t):
        pmin, _ = p_function_min(p_function_coeffs(evolve(v0, rates, t)), step, step)
        return pmin >= 0

    return _first_true(positive, HORIZON / g, 1e-3 / g, dt)


def mms_distance_curve(v0: MultipoleVector, rates: RateSet):
    """``r(t)`` as a closure over the exact decay law."""
    if not rates.diagonal:
        raise WrongSolverError("closed-form r(t) needs gx == gy")
    ls, _ = lm_arrays(v0.n)
    keep = ls > 0
    w = np.abs(v0.comps[keep]) ** 2
    rate = gamma_table(v0.n, rates).diag[keep]

    def r(t: float) -> float:
        return math.sqrt(float(w @ np.exp(-2 * rate * t)))

    return r, w, rate


def t_rmax(psi0: DickeVector, rates: RateSet) -> float:
    """Entry time into the absolutely separable ball around the MMS."""
    v0 = psi0.multipoles() if isinstance(psi0, DickeVector) else psi0
    r, w, rate = mms_distance_curve(v0, rates)
    target = rmax_ball_radius(v0.n)
    if r(0.0) <= target:
        return 0.0
    if np.any((w > 1e-30) & (rate <= 0)) and math.sqrt(float(w[rate <= 0].sum())) >= target:
        return math.inf
    lo, hi = 0.0, 1.0 / rate[(w > 1e-30) & (rate > 0)].min()
    while r(hi) > target:
        lo, hi = hi, 2 * hi
    while hi - lo > NPT_TOL:
        mid = (lo + hi) / 2
        if r(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class CharTimes:
    t_npt: dict = field(default_factory=dict)
    t_p: float = math.inf
    t_rmax: float = math.inf


def char_times(psi0: DickeVector, rates: RateSet, qs=(), with_tp: bool = True) -> CharTimes:
    return CharTimes(
        t_npt={q: t_npt(psi0, rates, q) for q in qs},
        t_p=t_p(psi0, rates) if with_tp else math.nan,
        t_rmax=t_rmax(psi0, rates),
    )
