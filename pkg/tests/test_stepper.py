import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glsim import (Blowup, Forcing, InvalidRadii, ModelParams, SchemeConfig, assemble_step_operator, build_grid,
                   energy_F, hump_initial, identity_feedback, laplacian_apply, neumann_map, norm_v, run,
                   saturating_feedback, step)
from glsim.diagnostics import convergence_order
from glsim.linsolve import dense_matrix
from glsim.stepper import incompatible_data, suggested_dt

LINEAR = ModelParams(lam=1.0, alpha=1.0)


def amplification(op):
    left = dense_matrix(op.left, op.extra)
    return np.linalg.solve(left, op.right.to_dense())


def power_iteration(G, iters=400, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(G.shape[0]) + 1j * rng.standard_normal(G.shape[0])
    rho = 0.0
    for _ in range(iters):
        y = G @ x
        rho = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    return rho


@pytest.mark.parametrize("variant", ["dynamic", "wentzell"])
def test_zero_state_is_fixed(variant):
    grid = build_grid(1, 0, 1, 32)
    params = ModelParams(lam=1, alpha=1, kappa=1, beta=1, gamma=-0.5)
    op = assemble_step_operator(grid, params, SchemeConfig(dt=0.01, T=0.01, bc_variant=variant))
    assert np.all(step(np.zeros(grid.size, complex), op, 0.0) == 0)


def test_zero_initial_data_gives_zero_trajectory():
    grid = build_grid(2, 0.5, 1.5, 32)
    params = ModelParams(N=2, kappa=1, beta=1)
    traj, ledger = run(grid, params, SchemeConfig(dt=0.01, T=0.2), np.zeros(grid.size))
    assert all(np.all(u == 0) for u in traj.fields)
    assert np.all(ledger.E == 0) and np.all(ledger.F == 0)


def test_heat_left_matrix_row():
    grid = build_grid(1, 0, 1, 10)
    params = ModelParams(lam=1.0, alpha=1e-12)
    dt = 0.01
    op = assemble_step_operator(grid, params, SchemeConfig(dt=dt, T=dt))
    c = dt / (2 * grid.h**2)
    j = 4
    assert op.left.diag[j] == pytest.approx(1 + 2 * c)
    assert op.left.lower[j - 1] == pytest.approx(-c)
    assert op.left.upper[j] == pytest.approx(-c)


@pytest.mark.parametrize("variant", ["dynamic", "wentzell"])
def test_matrices_tend_to_identity_as_dt_vanishes(variant):
    grid = build_grid(1, 0, 1, 16)
    devs = []
    for dt in (1e-4, 1e-5):
        op = assemble_step_operator(grid, LINEAR, SchemeConfig(dt=dt, T=dt, bc_variant=variant))
        for M in (op.left.to_dense(), op.right.to_dense()):
            devs.append(np.max(np.abs(M - np.eye(grid.size))[1:-1]))
    assert devs[2] == pytest.approx(devs[0] / 10, rel=1e-6)
    assert devs[3] == pytest.approx(devs[1] / 10, rel=1e-6)


@pytest.mark.parametrize("N,r0", [(1, 0.0), (2, 0.5), (3, 0.5)])
def test_cn_amplification_spectral_radius(N, r0):
    grid = build_grid(N, r0, r0 + 1, 48)
    op = assemble_step_operator(grid, ModelParams(N=N), SchemeConfig(dt=0.01, T=0.01))
    assert power_iteration(amplification(op)) <= 1 + 1e-10


def test_wentzell_amplification_is_stable():
    grid = build_grid(2, 0.5, 1.5, 48)
    op = assemble_step_operator(grid, ModelParams(N=2), SchemeConfig(dt=0.01, T=0.01, bc_variant="wentzell"))
    assert np.max(np.abs(np.linalg.eigvals(amplification(op)))) < 1


def test_heat_v_norm_strictly_decreases():
    grid = build_grid(1, 0, 1, 64)
    params = ModelParams(lam=1.0, alpha=1e-9)
    traj, ledger = run(grid, params, SchemeConfig(dt=2e-3, T=0.2), hump_initial(grid))
    assert np.all(np.diff(ledger.array("V_norm")) < 0)


@pytest.mark.parametrize("variant", ["dynamic", "wentzell"])
def test_linear_contraction(variant):
    grid = build_grid(2, 0.5, 1.5, 64)
    params = ModelParams(N=2, lam=0.5, alpha=2.0)
    _, ledger = run(grid, params, SchemeConfig(dt=5e-3, T=1.0, bc_variant=variant), hump_initial(grid))
    assert np.max(np.diff(ledger.array("V_norm"))) <= 1e-10


@given(st.floats(0, 2 * np.pi), st.integers(0, 1000))
def test_phase_equivariance(theta, seed):
    grid = build_grid(1, 0, 1, 24)
    params = ModelParams(lam=1, alpha=1, kappa=0.5, beta=1.0, gamma=-0.2)
    op = assemble_step_operator(grid, params, SchemeConfig(dt=0.01, T=0.01))
    rng = np.random.default_rng(seed)
    u = hump_initial(grid) * (rng.standard_normal() + 1j * rng.standard_normal())
    c = np.exp(1j * theta)
    np.testing.assert_allclose(step(c * u, op, 0.0, c * u), c * step(u, op, 0.0, u), atol=1e-12)


@pytest.mark.parametrize("treatment", ["ab2", "picard1"])
def test_time_self_convergence_is_second_order(treatment):
    grid = build_grid(1, 0, 1, 64)
    params = ModelParams(lam=1, alpha=1, kappa=1, beta=1)
    u0 = hump_initial(grid)
    T = 0.5

    def final(dt):
        return run(grid, params, SchemeConfig(dt=dt, T=T, nonlinear_treatment=treatment), u0)[0].final

    ref = final(T / 1280)
    dts = [T / 40, T / 80, T / 160]
    errs = [np.max(np.abs(final(dt) - ref)) for dt in dts]
    assert convergence_order(dts, errs) == pytest.approx(2, abs=0.25)


def test_saturating_feedback_run():
    grid = build_grid(1, 0, 1, 48)
    params = ModelParams(lam=1, alpha=1)
    spec = saturating_feedback(1.0, 2.0)
    scheme = SchemeConfig(dt=5e-3, T=0.5, feedback=spec)
    traj, ledger = run(grid, params, scheme, hump_initial(grid))
    assert np.all(np.isfinite(traj.final))
    assert np.max(np.diff(ledger.array("V_norm"))) <= 1e-10
    plain = run(grid, params, scheme.replace(feedback=saturating_feedback(1.0, 1.0)), hump_initial(grid))[0]
    ident = run(grid, params, scheme.replace(feedback=identity_feedback()), hump_initial(grid))[0]
    np.testing.assert_allclose(plain.final, ident.final, atol=1e-9)


def test_stabilizing_gamma_reduces_energy():
    grid = build_grid(1, 0, 1, 64)
    params = ModelParams(lam=1, alpha=1, kappa=1, beta=1, gamma=-0.5)
    u0 = hump_initial(grid)
    traj, _ = run(grid, params, SchemeConfig(dt=0.01, T=2.0), u0)
    assert energy_F(traj.final, grid, params) < energy_F(u0, grid, params)


def test_forcing_drives_zero_data():
    grid = build_grid(1, 0, 1, 32)
    forcing = Forcing(f=lambda r, t: np.sin(np.pi * r / 2), g_b=lambda t: 0.5)
    traj, ledger = run(grid, LINEAR, SchemeConfig(dt=0.01, T=0.2, forcing=forcing), np.zeros(grid.size))
    assert norm_v(traj.final, grid) > 0
    assert ledger.cum_g[-1] == pytest.approx(0.2 * 0.25, rel=1e-12)


def test_blowup_is_reported():
    grid = build_grid(1, 0, 1, 16)
    params = ModelParams(lam=1, alpha=1, gamma=200.0)
    with pytest.raises(Blowup):
        run(grid, params, SchemeConfig(dt=0.01, T=1.0), hump_initial(grid))


def test_run_validates_initial_field():
    grid = build_grid(1, 0, 1, 16)
    scheme = SchemeConfig(dt=0.01, T=0.01)
    with pytest.raises(ValueError):
        run(grid, LINEAR, scheme, np.zeros(5))
    with pytest.raises(ValueError):
        run(grid, LINEAR, scheme, np.ones(grid.size))


def test_scheme_config_validation():
    for bad in (dict(dt=0, T=1), dict(dt=0.1, T=0.01), dict(dt=0.1, T=1, bc_variant="robin"),
                dict(dt=0.1, T=1, boundary_order=3), dict(dt=0.1, T=1, nonlinear_treatment="rk4")):
        with pytest.raises(ValueError):
            SchemeConfig(**bad)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        assemble_step_operator(build_grid(2, 0.5, 1.5, 16), LINEAR, SchemeConfig(dt=0.1, T=1))


def test_sampling_keeps_final_step():
    grid = build_grid(1, 0, 1, 16)
    traj, ledger = run(grid, LINEAR, SchemeConfig(dt=0.01, T=0.1), hump_initial(grid), sample_stride=3)
    assert traj.steps == [0, 3, 6, 9, 10]
    assert len(ledger) == 11


def test_suggested_dt():
    grid = build_grid(1, 0, 1, 100)
    assert suggested_dt(grid, LINEAR, 1.0) == pytest.approx(0.005)
    params = ModelParams(kappa=30, beta=40)
    assert suggested_dt(grid, params, 1.0) == pytest.approx(0.1 / 150)


def test_neumann_map_zero_and_linear():
    grid = build_grid(1, 0, 1, 10)
    assert np.all(neumann_map(0.0, grid) == 0)
    np.testing.assert_allclose(neumann_map(1.0, grid), grid.nodes)


@pytest.mark.parametrize("N", [2, 3])
def test_neumann_map_is_discretely_harmonic(N):
    errs = []
    for M in (32, 64, 128):
        grid = build_grid(N, 0.5, 1.5, M)
        w = neumann_map(1.0 - 0.5j, grid)
        assert w[0] == 0
        errs.append(np.max(np.abs(laplacian_apply(w, grid)[1:-1])))
    assert convergence_order([1 / 32, 1 / 64, 1 / 128], errs) > 1.8


@pytest.mark.parametrize("N", [2, 3])
def test_neumann_map_normal_derivative(N):
    grid = build_grid(N, 0.5, 1.5, 400)
    w = neumann_map(2.0, grid)
    assert (w[-1] - w[-2]) / grid.h == pytest.approx(2.0, rel=1e-2)


def test_hump_data_is_not_flagged(caplog):
    grid = build_grid(1, 0, 1, 64)
    params = ModelParams(lam=1, alpha=1, kappa=1, beta=1)
    assert incompatible_data(hump_initial(grid), grid, params)[0] is False
    assert incompatible_data(np.sin(np.pi * grid.nodes / 2), grid, params)[0] is True
    caplog.set_level(logging.WARNING, logger="glsim")
    run(grid, params, SchemeConfig(dt=0.01, T=0.01), hump_initial(grid))
    assert "compatibility" not in caplog.text
    run(grid, params, SchemeConfig(dt=0.01, T=0.01), np.sin(np.pi * grid.nodes / 2))
    assert "compatibility" in caplog.text


def test_neumann_map_needs_annulus():
    with pytest.raises(InvalidRadii):
        neumann_map(1.0, build_grid(2, 0, 1, 16))
