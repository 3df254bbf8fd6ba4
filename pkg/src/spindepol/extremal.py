"""Extremal pure states: fastest-decohering initial states and anticoherent searches."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

from .dynamics import RateSet, evolve_general, gamma_table, purity_time
from .mpb import lm_arrays, purity, to_multipoles
from .states import DickeVector, anticoherence_measure

FD_EPS = 1e-5
CRITICAL_TOL = 1e-4
HOAP_SUCCESS = 1e-10


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    state: DickeVector
    objective: float
    gradient_norm: float
    restarts_used: int
    seed: int

    def to_json(self, rates: RateSet | None = None, tstar: float | None = None) -> dict:
        out = {
            "schema": "1",
            "n": self.state.n,
            "objective": self.objective,
            "state": self.state.to_json()["dicke"],
            "gradient_norm": self.gradient_norm,
            "restarts": self.restarts_used,
            "seed": self.seed,
        }
        if rates is not None:
            out["rates"] = {"gx": rates.gx, "gy": rates.gy, "gz": rates.gz, "omega": rates.omega}
        if tstar is not None:
            out["tstar"] = tstar
        return out


# --- parametrisation ------------------------------------------------------
# 2n reals: n hyperspherical angles for the moduli, n phases relative to d_0.


def params_to_dicke(x: np.ndarray, n: int) -> np.ndarray:
    angles, phases = x[:n], x[n:]
    mags = np.ones(n + 1)
    s = 1.0
    for k in range(n):
        mags[k] = s * math.cos(angles[k])
        s *= math.sin(angles[k])
    mags[n] = s
    return mags * np.exp(1j * np.concatenate([[0.0], phases]))


def dicke_to_params(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=complex)
    n = d.size - 1
    d = d * np.exp(-1j * np.angle(d[0])) / np.linalg.norm(d)
    mags = np.abs(d)
    tails = np.sqrt(np.cumsum((mags ** 2)[::-1])[::-1])
    angles = np.array([math.atan2(tails[k + 1], mags[k]) for k in range(n)])
    return np.concatenate([angles, np.angle(d[1:])])


def _random_start(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    return dicke_to_params(z)


# --- purity objective -----------------------------------------------------


def purity_at(d: np.ndarray, rates: RateSet, tstar: float) -> float:
    """Purity at ``tstar`` of the pure initial state with Dicke amplitudes ``d``."""
    d = np.asarray(d, dtype=complex)
    d = d / np.linalg.norm(d)
    v = to_multipoles(np.outer(d, d.conj()), check=False)
    if rates.diagonal:
        return purity_time(v, rates, tstar)
    return purity(evolve_general(v, rates, tstar))


def purity_excess_at(d: np.ndarray, rates: RateSet, tstar: float) -> float:
    """``purity_at - 1/(n+1)`` summed directly over the levels ``L > 0``."""
    d = np.asarray(d, dtype=complex)
    d = d / np.linalg.norm(d)
    v = to_multipoles(np.outer(d, d.conj()), check=False)
    if rates.diagonal:
        wts = np.abs(v.comps[1:]) ** 2
        return float(wts @ np.exp(-2 * gamma_table(v.n, rates).diag[1:] * tstar))
    return float(np.sum(np.abs(evolve_general(v, rates, tstar).comps[1:]) ** 2))


def directional_derivative(psi: DickeVector, phi: DickeVector | np.ndarray,
                           rates: RateSet, tstar: float, eps: float = FD_EPS) -> float:
    """Central difference of the final purity along ``|psi> + eps |phi>`` (renormalised)."""
    direction = phi.d if isinstance(phi, DickeVector) else np.asarray(phi, dtype=complex)
    plus = purity_at(psi.d + eps * direction, rates, tstar)
    minus = purity_at(psi.d - eps * direction, rates, tstar)
    return (plus - minus) / (2 * eps)


def criticality(psi: DickeVector, rates: RateSet, tstar: float) -> float:
    """Largest directional derivative over the basis ``{|D_k>, i|D_k>}``."""
    eye = np.eye(psi.n + 1)
    vals = [
        abs(directional_derivative(psi, c * eye[k], rates, tstar))
        for k in range(psi.n + 1) for c in (1, 1j)
    ]
    return float(max(vals))


def _run_restarts(job, seeds, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, seeds))
    return [job(s) for s in seeds]


def _best(results):
    # min objective, ties broken by restart index
    i = min(range(len(results)), key=lambda k: (results[k][0], k))
    return results[i]


def minimize_purity(n: int, rates: RateSet, tstar: float, restarts: int = 8,
                    seed: int = 0, threads: int = 1) -> OptimizationResult:
    """Multistart Nelder-Mead search for the pure state with the lowest purity at ``tstar``."""
    if tstar <= 0:
        raise ValueError("tstar must be positive")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    # log of the excess over the MMS value: same minimiser, but still resolvable
    # at large tstar where the purity itself is flat to 1e-12
    def f(x):
        return math.log(max(purity_excess_at(params_to_dicke(x, n), rates, tstar), 1e-300))

    opts = {"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20000, "maxfev": 20000, "adaptive": True}

    def job(ss):
        rng = np.random.default_rng(ss)
        x = _random_start(n, rng)
        best = None
        # NM restarted from its own output until it stops improving
        for _ in range(6):
            res = minimize(f, x, method="Nelder-Mead", options=opts)
            if best is not None and best - res.fun < 1e-9:
                x = res.x
                break
            best, x = res.fun, res.x
        return (float(f(x)), x)

    seeds = np.random.SeedSequence(seed).spawn(restarts)
    obj, x = _best(_run_restarts(job, seeds, threads))
    psi = DickeVector(n, params_to_dicke(x, n))
    return OptimizationResult(psi, purity_at(psi.d, rates, tstar), criticality(psi, rates, tstar), restarts, seed)


# --- the 4-qubit family ---------------------------------------------------


def mu_star(rates: RateSet, tstar: float) -> complex | None:
    """Critical ``mu`` of the 4-qubit family at ``tstar``; ``None`` when it does not exist."""
    gp, gz, t = rates.gperp, rates.gz, tstar
    a, b, c, d = 8 * (4 * gp - 3 * gz), 8 * gz, 4 * (7 * gp + 2 * gz), 24 * gp
    # scale every exponential by the largest one so long times do not overflow
    top = max(a, b, c, d) * t
    e = lambda k: math.exp(k * t - top)
    num = 7 * (e(a) - e(b))
    den = 4 * e(c) - 7 * e(d) + 3 * e(b)
    if den == 0:
        # t = 0: the ratio is 0/0 with limit 0
        arg = 2.0
    else:
        arg = num / den + 2
    if not math.isfinite(arg) or arg < 0:
        return None
    return 1j * math.sqrt(arg)


def mu_state(mu: complex) -> DickeVector:
    return DickeVector(4, [1, 0, mu, 0, 1])


def mu_from_state(psi: DickeVector, tol: float = 1e-6) -> complex | None:
    """Map a 4-qubit state of the form ``a|D0> + b|D2> + c|D4>`` with ``|a| = |c|`` to ``mu``.

    The result is invariant under z rotations; ``mu`` and ``-mu`` are the same
    state up to a rotation, so the sign with ``Im mu >= 0`` is returned.
    Returns ``None`` when the state is not of that form.
    """
    if psi.n != 4:
        raise ValueError("mu normal form is defined for n = 4")
    d = psi.d
    if abs(d[1]) > tol or abs(d[3]) > tol or abs(abs(d[0]) - abs(d[4])) > tol or abs(d[0]) < tol:
        return None
    mod = abs(d[2]) / math.sqrt(abs(d[0] * d[4]))
    ang = np.angle(d[2]) - (np.angle(d[0]) + np.angle(d[4])) / 2
    mu = mod * np.exp(1j * ang)
    return complex(-mu if mu.imag < 0 else mu)


# --- anticoherent search --------------------------------------------------


def _low_multipole_residuals(d: np.ndarray, q: int) -> np.ndarray:
    n = d.size - 1
    v = to_multipoles(np.outer(d, d.conj()) / np.vdot(d, d).real, check=False)
    ls, _ = lm_arrays(n)
    c = v.comps[(ls >= 1) & (ls <= q)]
    return np.concatenate([c.real, c.imag])


def hoap_objective(psi: DickeVector, q: int) -> float:
    return float(sum((1 - anticoherence_measure(psi, p)) ** 2 for p in range(1, q + 1)))


def hoap_search(n: int, q: int, restarts: int = 16, seed: int = 0, threads: int = 1) -> OptimizationResult:
    """Look for a pure ``q``-anticoherent state of ``n`` qubits.

    Each restart drives the multipoles of levels ``1..q`` to zero by nonlinear
    least squares; the reported objective is ``sum_p (1 - A_p)^2``.
    """
    if not 1 <= q < n:
        raise ValueError(f"need 1 <= q < n, got q={q}, n={n}")

    def res(x):
        return _low_multipole_residuals(x[: n + 1] + 1j * x[n + 1:], q)

    def job(ss):
        rng = np.random.default_rng(ss)
        x0 = rng.normal(size=2 * (n + 1))
        sol = least_squares(res, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
        psi = DickeVector(n, sol.x[: n + 1] + 1j * sol.x[n + 1:])
        return (hoap_objective(psi, q), psi)

    seeds = np.random.SeedSequence(seed).spawn(restarts)
    results = []
    # stop early once a restart succeeds; order of evaluation stays fixed
    for start in range(0, restarts, max(threads, 1)):
        results += _run_restarts(job, seeds[start:start + max(threads, 1)], threads)
        if _best(results)[0] <= HOAP_SUCCESS:
            break
    obj, psi = _best(results)
    grad = float(np.linalg.norm(_low_multipole_residuals(psi.d, q)))
    order = q if obj <= HOAP_SUCCESS else None
    return OptimizationResult(DickeVector(n, psi.d, order), obj, grad, len(results), seed)
