import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatchain.gaussian_core import vacuum_cm
from heatchain.model import (ChainSpec, HamiltonianSpec, ReservoirBank, assemble_generators, build_adjacency,
                             build_generators)
from heatchain.propagator import evolve_cm_closed, evolve_ode
from heatchain.scenarios import preset, run_steady
from heatchain.steady import solve_steady
from heatchain.thermo import (energy_report, mean_energy, occupations, reservoir_current,
                              steady_current_identity_check, total_current, transient_energy_and_current)


def baseline(n=25):
    spec = ChainSpec(n, 1.0, 0.5)
    bank = ReservoirBank.uniform(n, 0.1, 10.0, zeta_A=0.1, nbar_A=100.0, zeta_B=0.1, nbar_B=50.0)
    return spec, bank


def five_point(f, h):
    """Central derivative from samples f(t-2h), f(t-h), f(t+h), f(t+2h)."""
    return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)


def test_diffusive_bath_current():
    spec, bank = baseline()
    g = build_generators(spec, bank)
    V = solve_steady(g).V_star
    rep = total_current(g, V)
    assert rep.per_reservoir["A"] == pytest.approx(10.0, rel=1e-13)
    assert rep.per_reservoir["B"] == pytest.approx(5.0, rel=1e-13)
    # independent of the state
    rep0 = total_current(g, vacuum_cm(25))
    assert rep0.per_reservoir["A"] == pytest.approx(10.0, rel=1e-13)


def test_dephasing_currents_vanish():
    p = preset("caseIV", n=6)
    g = p.generators
    V = solve_steady(g).V_star
    rep = total_current(g, V)
    scale = 1.0 * 0.1 * (100 + 50)
    for m in range(1, 7):
        assert abs(rep.per_reservoir[f"dephasing:{m}"]) <= 1e-12 * scale
    for q in g.quadratic:
        assert abs(reservoir_current(q, g.H, None, vacuum_cm(6) * 3, None)) <= 1e-14


def test_local_current_reconstruction():
    spec, bank = baseline()
    V = solve_steady(build_generators(spec, bank)).V_star
    rep = steady_current_identity_check(V, bank, spec)
    assert rep.ok
    assert rep.reconstruction_error <= 1e-9
    assert rep.local_balance_error <= 1e-9
    assert rep.sum_thermal == pytest.approx(-15.0, rel=1e-10)


def test_total_current_is_zero_at_steady_state():
    spec, bank = baseline()
    g = build_generators(spec, bank)
    rep = total_current(g, solve_steady(g).V_star)
    assert abs(rep.total) <= 1e-10 * (0.1 * 100 + 0.1 * 50)
    assert abs(rep.total - sum(rep.per_reservoir.values())) <= 1e-10 * rep.scale
    assert rep.steady and rep.t is None


def test_all_diffusive_total_current_constant():
    p = preset("caseII")
    g = p.generators
    for t in (0.0, 3.0, 30.0):
        V = evolve_ode(vacuum_cm(25), None, g, t, 0.05).states[-1].cov if t else vacuum_cm(25)
        rep = total_current(g, V, t=t)
        assert rep.total == pytest.approx(15.0, rel=1e-12)
        assert rep.diffusive_part == pytest.approx(15.0, rel=1e-12)


def test_perturbed_steady_state_current():
    spec, bank = baseline(8)
    g = build_generators(spec, bank)
    eps = 1e-3
    V0 = solve_steady(g).V_star + eps * np.eye(16)
    J0 = total_current(g, V0).total
    assert J0 == pytest.approx(-0.1 / 2 * np.trace(g.H) * eps, rel=1e-8)
    h = 1e-3
    traj = evolve_ode(V0, None, g, 2 * h, h / 4, sample_times=[h, 2 * h])
    E = [mean_energy(g.H, None, 0.0, s.cov, None) for s in traj.states]
    # one-sided second-order derivative at t=0
    dE = (-3 * E[0] + 4 * E[1] - E[2]) / (2 * h)
    assert dE == pytest.approx(J0, rel=1e-5)


@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_additivity_with_drive_and_dephasing(n, seed):
    rng = np.random.default_rng(seed)
    spec = ChainSpec(n, 1.0, tuple(rng.random(n - 1)))
    bank = ReservoirBank(thermal=tuple(zip(rng.random(n), 20 * rng.random(n))),
                         diffusive_A=(rng.random(), 30.0), diffusive_B=(rng.random(), 5.0),
                         dephasing=tuple(rng.random(n)))
    ham = HamiltonianSpec(build_adjacency(spec).H, rng.normal(size=2 * n), 0.7)
    g = assemble_generators(ham, bank, spec.layout)
    A = rng.normal(size=(2 * n, 2 * n))
    V, x = A @ A.T + 0.5 * np.eye(2 * n), rng.normal(size=2 * n)
    rep = total_current(g, V, x)
    assert abs(rep.total - sum(rep.per_reservoir.values())) <= 1e-10 * max(rep.scale, 1.0)


def test_energy_balance_with_drive_and_dephasing():
    rng = np.random.default_rng(4)
    n = 4
    spec = ChainSpec(n, 1.0, 0.5)
    bank = ReservoirBank(thermal=tuple(zip(0.2 * rng.random(n), 20 * rng.random(n))),
                         diffusive_A=(0.1, 30.0), dephasing=tuple(0.3 * rng.random(n)))
    ham = HamiltonianSpec(build_adjacency(spec).H, rng.normal(size=2 * n), 0.0)
    g = assemble_generators(ham, bank, spec.layout)
    h, t = 0.01, 2.0
    x0 = rng.normal(size=2 * n)
    traj = evolve_ode(vacuum_cm(n), x0, g, t + 2 * h, h / 10,
                      sample_times=[t - 2 * h, t - h, t, t + h, t + 2 * h])
    s = traj.states[1:]
    E = [mean_energy(g.H, ham.xi, ham.H0, st_.cov, st_.mean) for st_ in s]
    J = total_current(g, s[2].cov, s[2].mean).total
    assert five_point([E[0], E[1], E[3], E[4]], h) == pytest.approx(J, rel=1e-6)


def test_mean_energy_examples():
    spec, bank = baseline()
    H = build_adjacency(spec).H
    assert mean_energy(H, None, 0.0, vacuum_cm(25), None) == pytest.approx(12.5, rel=1e-14)
    V = solve_steady(build_generators(spec, bank)).V_star
    assert mean_energy(H, None, 0.0, V, None) == pytest.approx(412.5, rel=1e-10)
    x = np.zeros(50)
    x[0] = 2.0
    xi = np.zeros(50)
    xi[25] = 1.0    # xi.Jx = xi_p * (-q) contribution
    assert mean_energy(H, xi, 3.0, vacuum_cm(25), x) == pytest.approx(12.5 + 2.0 - 2.0 + 3.0)


def test_case3_mean_energy():
    n = 7
    rep = run_steady(preset("caseIII", n=n))
    assert rep.mean_energy == pytest.approx(n * ((100 + 50) / 2 + 0.5), rel=1e-10)


def test_transient_formulas():
    spec, bank = baseline()
    V0 = vacuum_cm(25)
    e_inf, j_inf = transient_energy_and_current(spec, bank, V0, None, 1e4)
    assert e_inf == pytest.approx(412.5, rel=1e-12)
    assert abs(j_inf) <= 1e-10
    _, j0 = transient_energy_and_current(spec, bank, V0, None, 0.0)
    H = build_adjacency(spec).H
    expected = 0.1 * 25 / 2 + 0.1 * 250 + 10 + 5 - 0.05 * np.trace(H @ V0)
    assert j0 == pytest.approx(expected, rel=1e-13)
    assert j0 == pytest.approx(total_current(build_generators(spec, bank), V0).total, rel=1e-12)
    for t in (2.0, 17.0):
        e, j = transient_energy_and_current(spec, bank, V0, None, t)
        Vt = evolve_cm_closed(V0, spec, bank, t)
        assert e == pytest.approx(mean_energy(H, None, 0, Vt, None), rel=1e-12)
        assert j == pytest.approx(total_current(build_generators(spec, bank), Vt).total, rel=1e-10)
    with pytest.raises(ValueError):
        transient_energy_and_current(spec, ReservoirBank.uniform(25, 0.0, 0.0), V0, None, 1.0)


def test_transient_derivative_vs_ode():
    spec, bank = baseline(10)
    g = build_generators(spec, bank)
    h, t = 0.01, 2.0
    traj = evolve_ode(vacuum_cm(10), None, g, t + 2 * h, h / 5,
                      sample_times=[t - 2 * h, t - h, t + h, t + 2 * h])
    E = [mean_energy(g.H, None, 0, s.cov, None) for s in traj.states[1:]]
    _, j = transient_energy_and_current(spec, bank, vacuum_cm(10), None, t)
    assert five_point(E, h) == pytest.approx(j, rel=1e-6)


def test_occupations():
    np.testing.assert_allclose(occupations(7.5 * np.eye(6)), 7.0)
    np.testing.assert_allclose(occupations(vacuum_cm(3, hbar=2.0), hbar=2.0), 0.0)
    with pytest.raises(ValueError, match="site 2"):
        occupations(np.diag([0.5, 0.2, 0.5, 0.2]))
    assert occupations(np.diag([0.5, 0.2, 0.5, 0.2]), check=False)[1] == pytest.approx(-0.3)


def test_bulk_occupation_approaches_local_bath():
    mids = {}
    for n in (25, 50, 100, 200):
        spec, bank = baseline(n)
        occ = occupations(solve_steady(build_generators(spec, bank)).V_star)
        mids[n] = occ[n // 2 - 1]
    # frozen from spectral, closed-form and RK4 relaxation (all agree to 1e-9)
    assert mids[50] == pytest.approx(10.904642, abs=1e-5)
    assert mids[25] > mids[50] > mids[100] > mids[200] > 10.0
    assert abs(mids[100] - 10.0) < 0.1
    assert abs(mids[200] - 10.0) < 1e-3


def test_bulk_occupation_without_end_baths_is_exact():
    spec = ChainSpec(50, 1.0, 0.5)
    occ = occupations(solve_steady(build_generators(spec, ReservoirBank.uniform(50, 0.1, 10.0))).V_star)
    np.testing.assert_allclose(occ, 10.0, rtol=1e-10)


def test_case3_bulk_is_flat():
    occ = run_steady(preset("caseIII", n=9)).occupations
    np.testing.assert_allclose(occ[1:-1], 75.0, rtol=1e-12)


def test_energy_report():
    spec, bank = baseline(5)
    g = build_generators(spec, bank)
    rep = energy_report(g, vacuum_cm(5))
    assert rep.mean_energy == pytest.approx(2.5)
    np.testing.assert_allclose(rep.occupations, 0.0, atol=1e-15)


def test_identity_equilibrium():
    spec = ChainSpec(10, 1.0, 0.5)
    bank = ReservoirBank.uniform(10, 0.1, 4.0)
    V = solve_steady(build_generators(spec, bank)).V_star
    rep = total_current(build_generators(spec, bank), V)
    assert max(abs(v) for v in rep.per_reservoir.values()) <= 1e-12
    assert steady_current_identity_check(V, bank, spec).ok


def test_case1_hot_internal_site():
    p = preset("caseI", nbar=10.0, nbar_sites={1: 100.0, 8: 30.0, -1: 50.0})
    rep = run_steady(p)
    J = rep.currents.thermal(25)
    internal = J[1:-1]
    assert internal[8 - 2] > 0
    assert np.sum(internal > 0) == 1
    chk = steady_current_identity_check(rep.steady.V_star, p.bank, p.spec)
    assert chk.ok
    assert chk.internal_sum == pytest.approx(-chk.end_sum, rel=1e-9)


def test_identity_check_rejects_smc():
    p = preset("caseVI", n=4)
    with pytest.raises(ValueError):
        steady_current_identity_check(np.eye(8), p.bank, p.spec)


def test_reservoir_current_validation():
    g = build_generators(*baseline(3))
    with pytest.raises(ValueError):
        reservoir_current(g.linear[0], g.H, None, np.eye(4), None)
    with pytest.raises(TypeError):
        reservoir_current("bath", g.H, None, np.eye(6), None)


def test_local_current_reconstruction_with_bond_correlations():
    # the local identity holds for any state, including nonzero neighbour covariances
    p = preset("caseI", n=6)
    rng = np.random.default_rng(1)
    A = rng.normal(size=(12, 12))
    V = A @ A.T + np.eye(12)
    assert np.abs(np.diag(V[:6, :6], 1)).min() > 1e-3
    assert steady_current_identity_check(V, p.bank, p.spec).reconstruction_error <= 1e-12
