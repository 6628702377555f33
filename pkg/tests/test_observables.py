import math

import numpy as np
import pytest

from oracles import outer_product_reductions
from qtripod.dynamics import AtomInit, ModelParams, evolve_blocks, evolve_closed_form
from qtripod.observables import (
    DensityMatrix,
    JointState,
    NormalizationError,
    atom_matrices,
    fidelity_exact,
    fidelity_from_blocks,
    fidelity_paper_literal,
    field_linear_entropy,
    linear_entropy,
    purity,
    reduce_atom,
    reduce_field,
)
from qtripod.qalgebra import DeformationSpec, FieldSpec

GROUND = AtomInit((1, 0, 0, 0))
EQUAL = AtomInit((0.5, 0.5, 0.5, 0.5))


def params(q=0.9, tau=0.07, M=30, **kw):
    return ModelParams(FieldSpec(M, tau, DeformationSpec(q)), **kw)


def random_state(rng, nf=7):
    a = rng.normal(size=(nf, 4)) + 1j * rng.normal(size=(nf, 4))
    return JointState(a / np.linalg.norm(a))


def test_ground_product_state():
    p = params(tau=0.8)
    s = evolve_closed_form(0.0, p, GROUND)
    np.testing.assert_allclose(reduce_atom(s).matrix, np.diag([1, 0, 0, 0]), atol=1e-15)
    beta = p.field.coefficients
    rho_f = reduce_field(s).matrix
    np.testing.assert_allclose(np.diag(rho_f).real, np.append(beta**2, 0.0), atol=1e-15)
    # the field is in a pure state, so the coherences beta_n beta_m survive
    padded = np.append(beta, 0.0)
    np.testing.assert_allclose(rho_f, np.outer(padded, padded), atol=1e-15)
    assert linear_entropy(s) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_partial_traces_match_outer_products(seed):
    s = random_state(np.random.default_rng(seed))
    rho_a, rho_f = outer_product_reductions(s.amplitudes)
    np.testing.assert_allclose(reduce_atom(s).matrix, rho_a, atol=1e-14)
    np.testing.assert_allclose(reduce_field(s).matrix, rho_f, atol=1e-14)
    reduce_atom(s).check()
    reduce_field(s).check()
    assert purity(reduce_atom(s)) == pytest.approx(purity(reduce_field(s)), abs=1e-12)


def test_purity_examples():
    v = np.array([0.6, 0.8j, 0, 0])
    assert purity(np.outer(v, v.conj())) == pytest.approx(1.0, abs=1e-15)
    assert purity(np.eye(4) / 4) == pytest.approx(0.25, abs=1e-15)
    assert purity(DensityMatrix(np.diag([0.5, 0.5, 0, 0]), "atom")) == pytest.approx(0.5, abs=1e-15)


def test_batched_purity():
    stack = np.stack([np.eye(4) / 4, np.diag([1.0, 0, 0, 0])])
    np.testing.assert_allclose(purity(stack), [0.25, 1.0])


@pytest.mark.parametrize("init", [GROUND, EQUAL])
def test_degeneracy_pattern(init):
    p = params(tau=0.8, chi=0.1, deltas=2.0, mu=math.pi / 2)
    traj = evolve_blocks(np.linspace(0, 50, 101), p, init)
    rho = atom_matrices(traj.joint_amplitudes())
    ref = rho[:, 1, 1]
    for a, b in [(2, 2), (3, 3), (1, 2), (1, 3), (2, 3), (2, 1), (3, 1), (3, 2)]:
        np.testing.assert_allclose(rho[:, a, b], ref, atol=1e-12)


def test_product_and_entangled_entropy():
    rng = np.random.default_rng(3)
    atom = rng.normal(size=4) + 1j * rng.normal(size=4)
    field = rng.normal(size=6) + 1j * rng.normal(size=6)
    prod = np.outer(field / np.linalg.norm(field), atom / np.linalg.norm(atom))
    assert linear_entropy(JointState(prod)) == pytest.approx(0.0, abs=1e-12)
    # maximally entangled across four levels reaches the 3/4 ceiling
    ent = np.zeros((6, 4), dtype=complex)
    for k in range(4):
        ent[k, k] = 0.5
    assert linear_entropy(JointState(ent)) == pytest.approx(0.75, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_entropy_bounds_random(seed):
    s = random_state(np.random.default_rng(100 + seed), nf=12)
    le = linear_entropy(s)
    assert 0.0 <= le <= 0.75 + 1e-12


def test_entropy_equals_atom_side_on_fig3_preset():
    p = params(tau=0.07, chi=0.8)
    for T in (0.0, 3.3, 17.0, 41.5):
        s = evolve_closed_form(T, p, EQUAL)
        assert linear_entropy(s) == pytest.approx(1 - purity(reduce_atom(s)), abs=1e-10)


def test_entropy_constant_without_coupling():
    traj = evolve_blocks(np.linspace(0, 50, 51), params(tau=0.5, lambdas=0.0, chi=0.4, deltas=2.0), EQUAL)
    le = field_linear_entropy(traj.joint_amplitudes())
    assert np.ptp(le) < 1e-12


@pytest.mark.parametrize("init", [GROUND, EQUAL, AtomInit.normalized((0.3, 1j, 1j, 1j))])
def test_fidelity_two_paths(init):
    p = params(tau=0.8, chi=0.1, deltas=2.0, mu=math.pi)
    traj = evolve_blocks(np.linspace(0, 30, 61), p, init)
    amps = traj.joint_amplitudes()
    s0 = JointState(amps[0])
    by_state = np.array([fidelity_exact(JointState(a), s0) for a in amps])
    beta = p.field.coefficients
    # per-block sum with the threefold degenerate upper manifold folded in
    overlap = np.sum(beta[None] ** 2 * (np.conj(init.theta[0]) * traj.psi[:, :, 0] + 3 * np.conj(init.theta[1]) * traj.psi[:, :, 1]), axis=1)
    np.testing.assert_allclose(by_state, np.abs(overlap) ** 2, atol=1e-12)
    np.testing.assert_allclose(fidelity_from_blocks(beta, traj.psi, init.theta), by_state, atol=1e-12)
    assert by_state[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(by_state <= 1 + 1e-12) and np.all(by_state >= 0)


def test_paper_literal_fidelity_at_zero():
    p = params(tau=0.07)
    beta = p.field.coefficients
    assert fidelity_paper_literal(0.0, p, GROUND) == pytest.approx(np.sum(beta) ** 2, rel=1e-13)
    shifted = np.append(beta[1:], 0.0)
    expected = abs(np.sum(0.25 * beta + 0.75 * shifted)) ** 2
    assert fidelity_paper_literal(0.0, p, EQUAL) == pytest.approx(expected, rel=1e-13)
    assert fidelity_paper_literal(np.array([0.0, 1.0]), p, EQUAL).shape == (2,)


def test_unnormalized_rejected():
    with pytest.raises(NormalizationError):
        reduce_atom(JointState(np.ones((3, 4))))
    with pytest.raises(ValueError):
        JointState(np.ones(4))


def test_density_matrix_check_catches_violations():
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]), "atom").check()
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(np.eye(2), "atom").check()
    with pytest.raises(ValueError, match="eigenvalue"):
        DensityMatrix(np.diag([1.5, -0.5]), "atom").check()
