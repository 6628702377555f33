"""Reduced density matrices, fidelity and linear entropy of joint states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qtripod.dynamics import AtomInit, ModelParams, evolve_blocks

NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = -1e-10


class NormalizationError(ValueError):
    pass


@dataclass
class JointState:
    """Atom-field state vector as a (photon, level) array of shape (M + 2, 4)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.ndim != 2 or self.amplitudes.shape[1] != 4:
            raise ValueError(f"amplitudes must have shape (n_photons, 4), got {self.amplitudes.shape}")

    @property
    def field_dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def M(self) -> int:
        return self.field_dim - 2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def vector(self) -> np.ndarray:
        """Flattened state, photon-major then level."""
        return self.amplitudes.ravel()


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    subsystem: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check(self, hermitian_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL):
        """Raise ``ValueError`` unless Hermitian, unit-trace and positive semidefinite."""
        rho = self.matrix
        herm = np.abs(rho - rho.conj().T).max()
        if herm > hermitian_tol:
            raise ValueError(f"{self.subsystem} density matrix not Hermitian: {herm:.3e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"{self.subsystem} density matrix trace {tr} != 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < positivity_tol:
            raise ValueError(f"{self.subsystem} density matrix has eigenvalue {lo:.3e}")
        return self


def _amplitudes(s, check=True) -> np.ndarray:
    amps = s.amplitudes if isinstance(s, JointState) else np.asarray(s, dtype=complex)
    if not check:
        return amps
    norms = np.sqrt(np.sum(np.abs(amps) ** 2, axis=(-2, -1)))
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise NormalizationError(f"state is not normalized (norm deviation {np.max(np.abs(norms - 1.0)):.3e})")
    return amps


def atom_matrices(amps, check=True) -> np.ndarray:
    """rho_A[..., a, b] = sum_n psi[n, a] psi*[n, b]; leading axes are batch axes."""
    amps = _amplitudes(amps, check)
    return np.einsum("...na,...nb->...ab", amps, amps.conj())


def field_matrices(amps, check=True) -> np.ndarray:
    amps = _amplitudes(amps, check)
    return np.einsum("...na,...ma->...nm", amps, amps.conj())


def reduce_atom(s: JointState) -> DensityMatrix:
    return DensityMatrix(atom_matrices(s), "atom")


def reduce_field(s: JointState) -> DensityMatrix:
    return DensityMatrix(field_matrices(s), "field")


def purity(rho) -> float | np.ndarray:
    """Tr rho^2 (batched over leading axes when given a raw array)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    # Tr(rho^2) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho
    out = np.einsum("...ij,...ji->...", m, m).real
    return float(out) if np.ndim(out) == 0 else out


def linear_entropy(s: JointState) -> float:
    return 1.0 - purity(reduce_field(s))


def field_linear_entropy(amps, chunk: int = 512, check=True) -> np.ndarray:
    """1 - Tr rho_F^2 for a stack of joint states, shape (nt, M + 2, 4)."""
    amps = np.asarray(amps)
    out = np.empty(amps.shape[0])
    for start in range(0, amps.shape[0], chunk):
        out[start:start + chunk] = 1.0 - purity(field_matrices(amps[start:start + chunk], check))
    return out


def fidelity_exact(s_t: JointState, s_0: JointState) -> float:
    a = _amplitudes(s_t)
    b = _amplitudes(s_0)
    return float(abs(np.vdot(a, b)) ** 2)


def fidelity_from_blocks(beta, psi, theta) -> np.ndarray:
    """|<Psi(T)|Psi(0)>|^2 from block amplitudes without building the joint state.

    <Psi(0)|Psi(T)> = sum_n beta_n^2 sum_k theta_k* psi_k(n, T).
    """
    theta = np.asarray(theta, dtype=complex)
    overlap = np.einsum("n,tnk,k->t", np.asarray(beta) ** 2, psi, theta.conj())
    return np.abs(overlap) ** 2


def fidelity_paper_literal_blocks(beta, psi, theta) -> np.ndarray:
    """|sum_n [beta_n a1 psi1*(n) + 3 beta_{n+1} a2 psi2*(n+1)]|^2, taken verbatim.

    Not the overlap of the states: it carries single powers of beta, a shifted
    index beta_{n+1} (zero past n = M) and no conjugate on the initial
    amplitudes. Kept for comparing against published curves only.
    """
    beta = np.asarray(beta)
    shifted = np.append(beta[1:], 0.0)
    a1, a2 = theta[0], theta[1]
    total = np.einsum("n,tn->t", beta * a1, psi[:, :, 0].conj()) + np.einsum(
        "n,tn->t", 3.0 * shifted * a2, psi[:, :, 1].conj()
    )
    return np.abs(total) ** 2


def fidelity_paper_literal(T, p: ModelParams, init: AtomInit) -> float | np.ndarray:
    traj = evolve_blocks(np.atleast_1d(T), p, init)
    out = fidelity_paper_literal_blocks(traj.beta, traj.psi, init.theta)
    return float(out[0]) if np.ndim(T) == 0 else out
