import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qtripod import kernels
from qtripod.dynamics import AtomInit, ModelParams, derived_block, evolve_blocks
from qtripod.oracle import (
    IntegratorOptions,
    Mode,
    StepSizeError,
    generator_matrix,
    integrate_pre_rwa,
    integrate_reduced,
    rwa_deviation,
)
from qtripod.qalgebra import DeformationSpec, FieldSpec

GROUND = AtomInit((1, 0, 0, 0))
EQUAL = AtomInit((0.5, 0.5, 0.5, 0.5))
MIXED = AtomInit.normalized((0.7, 0.2 + 0.3j, -0.4, 0.1j))


def params(q=0.9, tau=0.07, M=8, **kw):
    return ModelParams(FieldSpec(M, tau, DeformationSpec(q)), **kw)


def scipy_blocks(p, init, grid, mode=Mode.REDUCED):
    """4x4 block equations integrated by DOP853 from the assembled generator."""
    out = np.empty((grid.size, p.M + 1, 4), dtype=complex)
    for n in range(p.M + 1):
        def rhs(t, y):
            psi = y[:4] + 1j * y[4:]
            d = -1j * generator_matrix(p, n, t, mode) @ psi
            return np.concatenate([d.real, d.imag])

        y0 = np.concatenate([init.as_array.real, init.as_array.imag])
        sol = solve_ivp(rhs, (0, grid[-1]), y0, t_eval=grid, method="DOP853", rtol=1e-11, atol=1e-12)
        out[:, n] = (sol.y[:4] + 1j * sol.y[4:]).T
    return out


def test_backends_agree():
    p = params(chi=0.3, deltas=(1.0, 2.0, -0.5), lambdas=(1.0, 0.8, 1.2), mu=0.4)
    grid = np.linspace(0, 3, 31)
    a = integrate_reduced(p, MIXED, grid, IntegratorOptions(1e-3, backend="numba"))
    b = integrate_reduced(p, MIXED, grid, IntegratorOptions(1e-3, backend="numpy"))
    np.testing.assert_allclose(a.psi, b.psi, atol=1e-13)


def test_backend_env_flag(monkeypatch):
    monkeypatch.setenv("QTRIPOD_BACKEND", "numpy")
    assert kernels.active_backend() == "numpy"
    monkeypatch.setenv("QTRIPOD_BACKEND", "cuda")
    with pytest.raises(ValueError):
        kernels.active_backend()


def test_zero_generator_keeps_state():
    p = params(lambdas=0.0, chi=0.0)
    traj = integrate_reduced(p, MIXED, np.linspace(0, 5, 6))
    np.testing.assert_allclose(traj.psi, np.broadcast_to(MIXED.as_array, traj.psi.shape), atol=1e-15)


def test_kerr_only_is_diagonal():
    p = params(lambdas=0.0, chi=0.7, deltas=3.0)
    grid = np.linspace(0, 5, 11)
    traj = integrate_reduced(p, MIXED, grid)
    b = derived_block(np.arange(p.M + 1), p)
    energy = np.stack([b.v1, b.v2, b.v2, b.v2], axis=1)
    expected = MIXED.as_array[None, None, :] * np.exp(-1j * energy[None] * grid[:, None, None])
    np.testing.assert_allclose(traj.psi, expected, atol=1e-12)


@pytest.mark.parametrize("init", [GROUND, EQUAL])
@pytest.mark.parametrize("chi, delta, mu", [(0.0, 0.0, 0.0), (0.8, 6.0, math.pi / 2), (0.1, 2.0, math.pi)])
def test_matches_closed_form(init, chi, delta, mu):
    p = params(tau=0.8, M=12, chi=chi, deltas=delta, mu=mu)
    grid = np.linspace(0, 20, 201)
    ode = integrate_reduced(p, init, grid)
    exact = evolve_blocks(grid, p, init)
    assert np.max(np.abs(ode.joint_amplitudes() - exact.joint_amplitudes())) < 1e-7
    assert np.max(np.abs(ode.psi[:, :, 2] - ode.psi[:, :, 1])) < 1e-9
    assert np.max(np.abs(ode.psi[:, :, 3] - ode.psi[:, :, 1])) < 1e-9


def test_asymmetric_matches_scipy():
    p = params(M=4, chi=0.4, deltas=(1.0, -2.0, 0.5), lambdas=(1.0, 0.6, 1.3), mu=0.7)
    grid = np.linspace(0, 10, 51)
    traj = integrate_reduced(p, MIXED, grid)
    np.testing.assert_allclose(traj.psi, scipy_blocks(p, MIXED, grid), atol=1e-8)
    norms = traj.block_norms()
    assert np.max(np.abs(norms - 1)) < 1e-9


def test_pre_rwa_matches_scipy():
    p = params(M=3, chi=0.2, deltas=2.0, mu=1.5)
    grid = np.linspace(0, 6, 31)
    traj = integrate_pre_rwa(p, EQUAL, grid)
    np.testing.assert_allclose(traj.psi, scipy_blocks(p, EQUAL, grid, Mode.PRE_RWA), atol=1e-8)


def test_generator_hermitian():
    p = params(chi=0.5, deltas=(1.0, 2.0, 3.0), lambdas=(1.0, 0.5, 2.0), mu=0.3)
    for mode in (Mode.REDUCED, Mode.PRE_RWA):
        for n in range(p.M + 1):
            H = generator_matrix(p, n, 1.234, mode)
            assert np.max(np.abs(H - H.conj().T)) == 0.0


def test_literal_phases_break_norm():
    p = params(deltas=2.0, mu=0.5)
    H = generator_matrix(p, 1, 0.7, Mode.LITERAL_PHASES)
    assert np.max(np.abs(H - H.conj().T)) > 0.1
    traj = integrate_reduced(p, EQUAL, np.linspace(0, 20, 41), IntegratorOptions(mode=Mode.LITERAL_PHASES))
    assert traj.metadata["max_block_norm_drift"] > 1e-2


def test_pre_rwa_static_coupling_is_doubled_reduced():
    # at mu = 0, lambda cos(0) = lambda, twice the lambda/2 kept by the reduced model
    grid = np.linspace(0, 10, 101)
    full = integrate_pre_rwa(params(chi=0.3, deltas=1.0), EQUAL, grid)
    doubled = integrate_reduced(params(chi=0.3, deltas=1.0, lambdas=2.0), EQUAL, grid)
    np.testing.assert_allclose(full.psi, doubled.psi, atol=1e-9)
    assert "doubled" in full.metadata["coupling_bookkeeping"]


def test_pre_rwa_zero_coupling():
    traj = integrate_pre_rwa(params(lambdas=0.0, deltas=3.0, mu=1.0), MIXED, np.linspace(0, 5, 6))
    np.testing.assert_allclose(traj.psi, np.broadcast_to(MIXED.as_array, traj.psi.shape), atol=1e-15)


def test_rwa_error_shrinks_with_fast_frequency():
    grid = np.linspace(0, 10, 201)
    devs = [rwa_deviation(params(tau=0.07, M=6, deltas=mu + 1.0, mu=mu), GROUND, grid) for mu in (2.0, 10.0, 49.0)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.05


def test_step_too_large_rejected():
    p = params(q=1.0, M=30, tau=0.5, chi=0.8)
    with pytest.raises(StepSizeError):
        integrate_reduced(p, GROUND, np.linspace(0, 1, 3), IntegratorOptions(step=0.5))


def test_grid_validation():
    with pytest.raises(ValueError):
        integrate_reduced(params(), GROUND, np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        integrate_reduced(params(), GROUND, np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        IntegratorOptions(step=0.0)


def test_fourth_order_convergence():
    p = params(tau=0.5, M=10, chi=0.1, deltas=2.0, mu=math.pi / 2)
    grid = np.linspace(0, 10, 11)
    exact = evolve_blocks(grid, p, EQUAL).psi
    errs = [np.max(np.abs(integrate_reduced(p, EQUAL, grid, IntegratorOptions(h)).psi - exact)) for h in (0.04, 0.02)]
    assert 12 <= errs[0] / errs[1] <= 20
