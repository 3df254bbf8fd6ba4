import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spindepol.dynamics import (
    NumericalError, RateSet, WrongSolverError, campaioli_bound, d_minus, d_plus,
    dense_oracle_evolve, evolve, evolve_diagonal, evolve_general, gamma_table,
    half_purity_time_bound, mean_sqrt_curvature, purity_derivative, purity_lower_bound,
    purity_ode_chain, purity_rate_pure, purity_time, qsl_bounds, reduced_purities,
    superdecoherence_gap, trajectory,
)
from spindepol.mpb import from_multipoles, lm_arrays, lm_index, maximally_mixed, purity, to_multipoles
from spindepol.states import (
    DickeVector, UnsupportedError, anticoherence_measure, coherent, db, dicke, ghz, hoap,
    spin_expectations, w,
)
from oracles import three_qubit_purity_forms, random_density, random_pure, state_n4, trace_distance

rates_st = st.tuples(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(-3, 3))


def _rand_v(n, seed):
    return to_multipoles(random_density(n, np.random.default_rng(seed)))


# --- rates ----------------------------------------------------------------


def test_rateset_validation():
    with pytest.raises(ValueError):
        RateSet(-1, 0, 0)
    with pytest.raises(ValueError):
        RateSet(math.nan, 0, 0)
    r = RateSet.anisotropic(0.5, 2.0, omega=1.0)
    assert r.diagonal and not r.is_isotropic and r.gmax == 2.0


def test_gamma_table_examples():
    iso = gamma_table(5, RateSet.isotropic(1.0))
    for M in range(-3, 4):
        assert iso.rate(3, M) == 12
    deph = gamma_table(5, RateSet(0, 0, 1.0))
    ls, ms = lm_arrays(5)
    assert np.array_equal(deph.diag, ms.astype(float) ** 2)
    assert d_plus(2, 0) == pytest.approx(math.sqrt(24))
    assert d_plus(2, 0) == pytest.approx(4.89898, abs=1e-5)


@given(st.integers(1, 8), rates_st)
def test_gamma_table_invariants(n, r):
    rates = RateSet(*r)
    tab = gamma_table(n, rates)
    assert tab.rate(0, 0) == 0
    for L in range(n + 1):
        for M in range(L + 1):
            assert tab.rate(L, M) == tab.rate(L, -M)
    if rates.diagonal:
        assert not np.any(tab.up)


def test_d_plus_minus_symmetry():
    for L in range(6):
        for M in range(-L, L - 1):
            assert d_plus(L, M) == pytest.approx(d_minus(L, M + 2))


# --- evolvers -------------------------------------------------------------


def test_diagonal_rejects_anisotropic_xy():
    with pytest.raises(WrongSolverError):
        evolve_diagonal(maximally_mixed(2), RateSet(1, 2, 0), 0.1)
    with pytest.raises(ValueError):
        evolve_diagonal(maximally_mixed(2), RateSet.isotropic(1), -0.1)


def test_ghz_coherence_under_pure_dephasing():
    n, gz, t = 6, 0.7, 0.3
    v0 = ghz(n).multipoles()
    vt = evolve(v0, RateSet(0, 0, gz), t)
    assert vt[(n, n)] == pytest.approx(v0[(n, n)] * math.exp(-n * n * gz * t), abs=1e-15)
    # purity loss rate -2 gz N^2 on the coherence part
    assert purity_derivative(v0, RateSet(0, 0, gz)) == pytest.approx(-gz * n * n)


def test_mms_is_stationary():
    v = maximally_mixed(5)
    for r in (RateSet.isotropic(1.0), RateSet(1.0, 0.2, 0.5, 3.0)):
        assert np.allclose(evolve(v, r, 7.0).comps, v.comps, atol=1e-15)


def test_hoap4_corner_element():
    v = evolve(hoap(4).multipoles(), RateSet.isotropic(1.0), 0.05)
    rho = from_multipoles(v)
    assert abs(rho[0, 4]) == pytest.approx(math.exp(-20 * 0.05) / 4, abs=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.01, 0.05, 0.2])
def test_hoap4_matches_reference_matrix(t):
    rho = from_multipoles(evolve(hoap(4).multipoles(), RateSet.isotropic(1.0), t))
    assert np.max(np.abs(rho - state_n4(t))) < 1e-12


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 2),
       st.floats(-2, 2), st.floats(0, 3))
def test_general_matches_diagonal(n, seed, gp, gz, om, t):
    v0 = _rand_v(n, seed)
    r = RateSet(gp, gp, gz, om)
    a = evolve_diagonal(v0, r, t).comps
    b = evolve_general(v0, r, t).comps
    assert np.max(np.abs(a - b)) < 1e-10


def test_general_relaxes_to_mms():
    for seed in range(3):
        v = evolve_general(_rand_v(5, seed), RateSet(0.9, 0.3, 0.4, 1.5), 60.0)
        assert np.max(np.abs(v.comps - maximally_mixed(5).comps)) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_general_matches_dense_oracle(n):
    rng = np.random.default_rng(100 + n)
    for r in (RateSet(1.0, 0.3, 0.6, 0.7), RateSet(0.2, 1.1, 0.0, 0.0), RateSet.isotropic(0.5, 2.0)):
        rho0 = random_density(n, rng)
        t = 0.35
        dense = dense_oracle_evolve(rho0, r, t)
        mpb = from_multipoles(evolve(to_multipoles(rho0), r, t))
        assert trace_distance(dense, mpb) <= 1e-8


def test_dense_oracle_basics():
    rho0 = hoap(4).density()
    assert np.max(np.abs(dense_oracle_evolve(rho0, RateSet.isotropic(1.0), 0.1) - state_n4(0.1))) < 1e-8
    u = dense_oracle_evolve(rho0, RateSet(0, 0, 0, 2.0), 1.3)
    assert np.trace(u @ u).real == pytest.approx(1.0, abs=1e-10)
    x = dense_oracle_evolve(random_density(5, np.random.default_rng(0)), RateSet(0.4, 1.0, 0.2), 0.5)
    assert np.trace(x).real == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(UnsupportedError):
        dense_oracle_evolve(np.eye(10) / 10, RateSet.isotropic(1.0), 0.1)


def test_general_flags_non_finite():
    v = maximally_mixed(2)
    bad = v.with_comps(v.comps * np.nan)
    with pytest.raises(NumericalError):
        evolve_general(bad, RateSet(1, 0.5, 0), 0.1)


@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1), rates_st, st.floats(0, 4))
def test_evolution_preserves_density_matrix(n, seed, r, t):
    rho = from_multipoles(evolve(_rand_v(n, seed), RateSet(*r), t))
    assert abs(np.trace(rho) - 1) < 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
    assert np.linalg.eigvalsh(rho).min() >= -1e-8


@given(st.integers(2, 9), st.integers(0, 2 ** 32 - 1), rates_st)
def test_anticoherence_conserved(n, seed, r):
    rng = np.random.default_rng(seed)
    v0 = hoap(n).multipoles()
    q = v0.anticoherence_order(1e-10)
    for t in rng.uniform(0, 3, 4):
        vt = evolve(v0, RateSet(*r), float(t))
        for L in range(1, q + 1):
            assert np.max(np.abs(vt.level(L))) <= 1e-12


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), rates_st)
def test_purity_monotone(n, seed, r):
    rates = RateSet(*r)
    v0 = _rand_v(n, seed)
    ts = np.linspace(0, 3, 25)
    pur = [purity(evolve(v0, rates, float(t))) for t in ts]
    assert np.all(np.diff(pur) <= 1e-12)


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 2),
       st.floats(-3, 3), st.floats(0, 2))
def test_omega_commutes(n, seed, gp, gz, om, t):
    v0 = _rand_v(n, seed)
    _, ms = lm_arrays(n)
    with_om = evolve(v0, RateSet(gp, gp, gz, om), t).comps
    without = evolve(v0, RateSet(gp, gp, gz, 0.0), t).comps * np.exp(-1j * om * ms * t)
    assert np.max(np.abs(with_om - without)) < 1e-10


def test_pure_dephasing_dicke_states_are_decoherence_free():
    r = RateSet(0, 0, 1.3)
    for n in (3, 6):
        for k in range(n + 1):
            v = evolve(dicke(n, k).multipoles(), r, 5.0)
            assert purity(v) == pytest.approx(1.0, abs=1e-12)


# --- purity laws ----------------------------------------------------------


@given(st.integers(1, 9), st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 2),
       st.floats(0, 3))
def test_purity_time_closed_form(n, seed, gp, gz, t):
    r = RateSet(gp, gp, gz)
    v0 = _rand_v(n, seed)
    assert purity_time(v0, r, t) == pytest.approx(purity(evolve_diagonal(v0, r, t)), abs=1e-12)


def test_purity_time_limits():
    v0 = hoap(6).multipoles()
    r = RateSet.isotropic(1.0)
    assert purity_time(v0, r, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert purity_time(v0, r, 50.0) == pytest.approx(1 / 7, abs=1e-12)
    arr = purity_time(v0, r, np.array([0.0, 0.1]))
    assert arr.shape == (2,)
    with pytest.raises(WrongSolverError):
        purity_time(v0, RateSet(1, 2, 0), 0.1)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_anticoherent_states_saturate_lower_bound(n):
    psi = hoap(n)
    q = psi.order
    r = RateSet.isotropic(1.0)
    ts = np.linspace(0, 0.5, 11)
    exact = purity_time(psi.multipoles(), r, ts)
    assert np.allclose(exact, purity_lower_bound(psi.multipoles(), r, ts, q), atol=1e-14)
    # a coherent state has weight at every level, so the bound is strict
    coh = coherent(n, 0.3, 0.1).multipoles()
    assert np.all(purity_time(coh, r, ts) > purity_lower_bound(coh, r, ts, q))


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.floats(0.05, 2), st.floats(0, 2),
       st.floats(0, 1))
def test_derivative_matches_finite_differences(n, seed, gp, gz, t):
    r = RateSet(gp, gp, gz)
    v0 = _rand_v(n, seed)
    h = 1e-5
    vt = evolve_diagonal(v0, r, t)
    fd1 = (purity_time(v0, r, t + h) - purity_time(v0, r, t - h)) / (2 * h) if t > h else None
    d1 = purity_derivative(vt, r, 1)
    d2 = purity_derivative(vt, r, 2)
    assert d1 <= 0 <= d2
    if fd1 is not None:
        assert fd1 == pytest.approx(d1, rel=1e-5, abs=1e-9)
        fd2 = (purity_time(v0, r, t + h) - 2 * purity_time(v0, r, t) + purity_time(v0, r, t - h)) / h ** 2
        assert fd2 == pytest.approx(d2, rel=1e-3, abs=1e-3)
    with pytest.raises(ValueError):
        purity_derivative(vt, r, 0)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_initial_rate_and_first_anticoherence(n):
    g = 0.7
    for psi in (ghz(n), w(n), coherent(n, 0.4, 1.0), hoap(n)):
        a1 = anticoherence_measure(psi, 1)
        expected = -2 * g * (n + n * n * a1 / 2)
        assert purity_derivative(psi.multipoles(), RateSet.isotropic(g)) == pytest.approx(expected)


def test_second_derivative_examples():
    g = 1.3
    r = RateSet.isotropic(g)
    for n in (4, 6, 8):
        assert purity_derivative(hoap(n).multipoles(), r, 2) == pytest.approx(
            4 / 3 * g ** 2 * n ** 2 * (n + 2) ** 2)
    for n in (3, 5, 8):
        assert purity_derivative(ghz(n).multipoles(), r, 2) == pytest.approx(
            2 * g ** 2 * n ** 2 * (n ** 2 + 2 * n + 3))


def test_rate_examples():
    gp, gz = 0.4, 1.7
    r = RateSet.anisotropic(gp, gz)
    for n in (3, 6):
        assert purity_rate_pure(ghz(n), r) == pytest.approx(-2 * gp * n - gz * n * n)
    for n in (4, 8):
        for gz2 in (0.0, 5.0):
            assert purity_rate_pure(db(n), RateSet.anisotropic(gp, gz2)) == pytest.approx(-gp * n * (n + 2))
    assert purity_rate_pure(coherent(5, 1.1, 0.2), RateSet.isotropic(0.8)) == pytest.approx(-2 * 0.8 * 5)


@given(st.integers(1, 9), st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 2))
def test_rate_matches_derivative_and_variance_sums(n, seed, gp, gz):
    psi = DickeVector(n, random_pure(n, np.random.default_rng(seed)))
    r = RateSet(gp, gp, gz)
    assert purity_rate_pure(psi, r) == pytest.approx(purity_derivative(psi.multipoles(), r), abs=1e-10)
    ls, ms = lm_arrays(n)
    wts = np.abs(psi.multipoles().comps) ** 2
    var = spin_expectations(psi).variances
    assert np.sum(ms ** 2 * wts) == pytest.approx(2 * var[2], abs=1e-10)
    assert np.sum((ls * (ls + 1) - ms ** 2) * wts) == pytest.approx(2 * (var[0] + var[1]), abs=1e-10)


def test_ode_chain_matches_closed_forms():
    rng = np.random.default_rng(7)
    for _ in range(20):
        r0 = np.sort(rng.uniform(0.2, 1.0, 3))[::-1]
        g = rng.uniform(0.1, 2)
        ts = rng.uniform(0, 2, 5)
        chain = purity_ode_chain(3, g, r0, ts)
        for t, row in zip(ts, chain):
            assert np.allclose(row, three_qubit_purity_forms(*r0, g, t), atol=1e-10)


def test_ode_chain_fixed_point_and_hoap():
    n = 6
    fixed = [1 / (q + 1) for q in range(1, n + 1)]
    assert np.allclose(purity_ode_chain(n, 1.0, fixed, [0.0, 0.7, 4.0]), fixed, atol=1e-14)
    v0 = hoap(4).multipoles()
    ts = np.linspace(0, 0.3, 7)
    chain = purity_ode_chain(4, 1.0, reduced_purities(v0), ts)
    assert np.allclose(chain[:, -1], purity_time(v0, RateSet.isotropic(1.0), ts), atol=1e-9)
    # every reduction follows the evolved state
    for t, row in zip(ts, chain):
        assert np.allclose(row, reduced_purities(evolve(v0, RateSet.isotropic(1.0), t)), atol=1e-9)
    with pytest.raises(ValueError):
        purity_ode_chain(4, 1.0, [1, 1], [0])


# --- superdecoherence -----------------------------------------------------


def test_superdecoherence_examples():
    for n in (2, 5, 8):
        assert superdecoherence_gap(maximally_mixed(n)) == pytest.approx(-1 / (n * (n + 1)))
    for n in (2, 4, 6):
        assert superdecoherence_gap(hoap(n).multipoles()) == pytest.approx(0.5)
    assert superdecoherence_gap(ghz(5).multipoles()) == pytest.approx(0.5)


@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_coherent_mixtures_have_non_positive_gap(n, seed, k):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(k))
    rho = sum(pi * coherent(n, rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)).density() for pi in p)
    assert superdecoherence_gap(to_multipoles(rho)) <= 1e-12


@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_gap_at_most_half(n, seed):
    assert superdecoherence_gap(_rand_v(n, seed)) <= 0.5 + 1e-10
    psi = DickeVector(n, random_pure(n, np.random.default_rng(seed)))
    assert superdecoherence_gap(psi.multipoles()) <= 0.5 + 1e-10


# --- speed limits ---------------------------------------------------------


def test_campaioli_example():
    assert campaioli_bound(4, RateSet.isotropic(1.0)) == pytest.approx(480)


def test_tmin_asymptote():
    ratios = [half_purity_time_bound(n, 1.0, 1.0) / (math.log(2) / (2 * n * n)) for n in (10, 100, 10000)]
    assert abs(ratios[-1] - 1) < 1e-3
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    assert half_purity_time_bound(3, 1.0, 0.4) == math.inf


def test_qsl_bounds_hold_for_hoap():
    v0 = hoap(6).multipoles()
    r = RateSet.isotropic(1.0)
    for t in (0.0, 0.005, 0.05, 0.5):
        b = qsl_bounds(6, r, v0, t)
        assert b.purity_above_uzdin
        assert b.campaioli == pytest.approx(4 / 3 * 3 * 6 * 7 * 8)
    assert qsl_bounds(6, r, v0, 1e-4).entangled_by_tes
    tau = 0.05
    assert mean_sqrt_curvature(v0, r, tau) <= campaioli_bound(6, r)
    aniso = qsl_bounds(6, RateSet(1, 0.5, 0.2), v0, 0.1)
    assert math.isnan(aniso.uzdin_R_lower) and aniso.purity_above_uzdin


def test_trajectory():
    tr = trajectory(ghz(4).multipoles(), RateSet.isotropic(1.0), [0.0, 0.01, 0.1], bipartitions=[1, 2])
    assert tr.purity[0] == pytest.approx(1.0)
    assert tr.r[0] == pytest.approx(math.sqrt(4 / 5))
    assert tr.negativities[2][0] == pytest.approx(0.5)
    assert np.all(np.diff(tr.purity) < 0)
    with pytest.raises(ValueError):
        trajectory(ghz(4).multipoles(), RateSet.isotropic(1.0), [0.1, 0.0])
