"""Closed-form evolution of the symmetric tripod problem.

With equal couplings and detunings and equal initial amplitudes on levels
2-4, every photon block n reduces to the two-amplitude system

    i psi1' = v1 psi1 + 3 g e^{-i eps t} psi2
    i psi2' =  g e^{+i eps t} psi1 + v2 psi2

whose solution is psi1 = sum_j B_j e^{i X_j t}, psi2 = sum_j C_j e^{i (X_j + eps) t}
with X_j the roots of X^2 + a1 X + a2 = 0.  Time is the scaled T = lambda t
and every rate is measured in units of lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qtripod.qalgebra import FieldSpec, q_numbers

# |X1 - X2| below this (relative) routes a block to the confluent formula
DEGENERACY_TOL = 1e-9
THETA_NORM_TOL = 1e-12


class PremiseError(ValueError):
    """Raised when the closed form is asked to solve a non-reducible problem."""


@dataclass(frozen=True)
class ModelParams:
    field: FieldSpec
    lambdas: tuple = (1.0, 1.0, 1.0)
    mu: float = 0.0
    deltas: tuple = (0.0, 0.0, 0.0)
    chi: float = 0.0

    def __post_init__(self):
        lam = _triple(self.lambdas, "lambdas")
        dl = _triple(self.deltas, "deltas")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "deltas", dl)
        for name in ("mu", "chi"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    @property
    def eps(self) -> np.ndarray:
        """Effective detunings eps_r = Delta_r - mu."""
        return np.array(self.deltas) - self.mu

    @property
    def symmetric(self) -> bool:
        return len(set(self.lambdas)) == 1 and len(set(self.deltas)) == 1

    @property
    def M(self) -> int:
        return self.field.M


def _triple(values, name):
    if np.isscalar(values):
        values = (values,) * 3
    values = tuple(float(v) for v in values)
    if len(values) != 3 or not all(math.isfinite(v) for v in values):
        raise ValueError(f"{name} needs three finite values, got {values!r}")
    return values


@dataclass(frozen=True)
class AtomInit:
    theta: tuple

    def __post_init__(self):
        theta = tuple(complex(t) for t in self.theta)
        if len(theta) != 4:
            raise ValueError(f"theta needs four amplitudes, got {len(theta)}")
        norm = sum(abs(t) ** 2 for t in theta)
        if abs(norm - 1.0) > THETA_NORM_TOL:
            raise ValueError(f"initial atomic state not normalized: sum |theta|^2 = {norm!r}")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def normalized(cls, theta) -> "AtomInit":
        theta = np.asarray(theta, dtype=complex)
        return cls(tuple(theta / np.linalg.norm(theta)))

    @property
    def as_array(self) -> np.ndarray:
        return np.array(self.theta, dtype=complex)

    @property
    def reducible(self) -> bool:
        t = self.theta
        return abs(t[1] - t[2]) <= THETA_NORM_TOL and abs(t[1] - t[3]) <= THETA_NORM_TOL


@dataclass
class Block:
    """Per-block quantities, vectorized over the photon index n."""

    n: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    g: np.ndarray
    eps: float


@dataclass
class BlockSolution:
    block: Block
    X1: np.ndarray
    X2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    degenerate: np.ndarray
    theta1: complex = 0j
    theta2: complex = 0j

    @property
    def n_degenerate(self) -> int:
        return int(np.count_nonzero(self.degenerate))


@dataclass
class BlockTrajectory:
    """Amplitudes psi_k of every block on a time grid.

    ``psi[t, n, 0]`` is the amplitude on |n, 1> and ``psi[t, n, k]`` (k = 1..3)
    the amplitude on |n + 1, k + 1>, both before weighting by beta_n.
    """

    times: np.ndarray
    psi: np.ndarray
    beta: np.ndarray
    metadata: dict = field(default_factory=dict)

    def joint_amplitudes(self) -> np.ndarray:
        """Joint-state amplitudes, shape (nt, M + 2, 4) over (photon, level)."""
        nt, nb, _ = self.psi.shape
        amps = np.zeros((nt, nb + 1, 4), dtype=complex)
        weighted = self.beta[None, :, None] * self.psi
        amps[:, :nb, 0] = weighted[:, :, 0]
        amps[:, 1:, 1:] = weighted[:, :, 1:]
        return amps

    def block_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=2)


def derived_block(n, p: ModelParams) -> Block:
    """Kerr energies v1, v2, coupling g and detuning eps for block(s) ``n``."""
    if not p.symmetric:
        raise PremiseError("closed form needs equal couplings and equal detunings")
    n = np.atleast_1d(np.asarray(n, dtype=int))
    d = p.field.deformation
    qn = q_numbers(n, d)
    qn_minus = q_numbers(n - 1, d)
    qn_plus = q_numbers(n + 1, d)
    if np.any(qn_plus < 0):
        raise PremiseError(
            f"negative q-number under the square root ([n+1] = {qn_plus.min():.4g}); "
            f"the {d.convention.value} convention cannot define the coupling"
        )
    lam = p.lambdas[0]
    return Block(
        n=n,
        v1=p.chi * qn * qn_minus,
        v2=p.chi * qn * qn_plus,
        g=0.5 * lam * np.sqrt(qn_plus),
        eps=float(p.eps[0]),
    )


def characteristic_roots(b: Block):
    """Roots of X^2 + a1 X + a2, ordered by real part (they are always real)."""
    a1 = b.eps + b.v1 + b.v2
    a2 = b.v1 * (b.eps + b.v2) - 3.0 * b.g**2
    # discriminant a1^2 - 4 a2 written without cancellation
    root = np.hypot(b.eps + b.v2 - b.v1, math.sqrt(12.0) * b.g)
    big = -0.5 * (a1 + np.copysign(root, a1))
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big != 0.0, a2 / big, 0.0)
    return np.minimum(big, small), np.maximum(big, small)


def mode_coefficients(b: Block, init: AtomInit) -> BlockSolution:
    X1, X2 = characteristic_roots(b)
    th1, th2 = init.theta[0], init.theta[1]
    scale = np.maximum(1.0, np.maximum(np.abs(X1), np.abs(X2)))
    degenerate = np.abs(X1 - X2) < DEGENERACY_TOL * scale
    gap = np.where(degenerate, 1.0, X1 - X2)
    B1 = (-(X2 + b.v1) * th1 - 3.0 * b.g * th2) / gap
    B2 = (-(X1 + b.v1) * th1 - 3.0 * b.g * th2) / -gap
    coupled = b.g != 0.0
    g_safe = np.where(coupled, b.g, 1.0)
    C1 = np.where(coupled, -(X1 + b.v1) * B1 / (3.0 * g_safe), 0.0)
    C2 = np.where(coupled, -(X2 + b.v1) * B2 / (3.0 * g_safe), 0.0)
    # g = 0: psi2 is free and sits entirely on the root -(eps + v2)
    free = ~coupled & ~degenerate
    on_first = np.isclose(X1, -(b.eps + b.v2), rtol=0.0, atol=DEGENERACY_TOL * scale)
    C1 = np.where(free & on_first, th2, C1)
    C2 = np.where(free & ~on_first, th2, C2)
    B1 = np.where(degenerate, 0.0, B1)
    B2 = np.where(degenerate, 0.0, B2)
    C1 = np.where(degenerate, 0.0, C1)
    C2 = np.where(degenerate, 0.0, C2)
    return BlockSolution(b, X1, X2, B1 + 0j, B2 + 0j, C1 + 0j, C2 + 0j, degenerate, th1, th2)


def block_amplitudes(sol: BlockSolution, times) -> tuple[np.ndarray, np.ndarray]:
    """psi1(n, T) and psi2(n + 1, T), each shape (nt, nb)."""
    t = np.atleast_1d(np.asarray(times, dtype=float))[:, None]
    b = sol.block
    e1 = np.exp(1j * sol.X1[None, :] * t)
    e2 = np.exp(1j * sol.X2[None, :] * t)
    psi1 = sol.B1 * e1 + sol.B2 * e2
    psi2 = (sol.C1 * e1 + sol.C2 * e2) * np.exp(1j * b.eps * t)
    if np.any(sol.degenerate):
        c1, c2 = _confluent(b, sol.theta1, sol.theta2, t)
        psi1 = np.where(sol.degenerate, c1, psi1)
        psi2 = np.where(sol.degenerate, c2, psi2)
    return psi1, psi2


def _confluent(b: Block, th1, th2, t):
    # rotating frame psi2 = phi e^{i eps t}: constant 2x2 generator [[v1, 3g], [g, v2 + eps]]
    w2 = b.v2 + b.eps
    mean = 0.5 * (b.v1 + w2)
    half = 0.5 * np.hypot(b.v1 - w2, math.sqrt(12.0) * b.g)
    cos = np.cos(half * t)
    # sin(s t)/s -> t as s -> 0, giving the (B + C t) e^{iXt} form
    sinc = t * np.sinc(half * t / np.pi)
    phase = np.exp(-1j * mean * t)
    d1 = 0.5 * (b.v1 - w2)
    psi1 = phase * (cos * th1 - 1j * sinc * (d1 * th1 + 3.0 * b.g * th2))
    phi = phase * (cos * th2 - 1j * sinc * (b.g * th1 - d1 * th2))
    return psi1, phi * np.exp(1j * b.eps * t)


def solve_blocks(p: ModelParams, init: AtomInit) -> BlockSolution:
    if not init.reducible:
        raise PremiseError("closed form needs theta_2 = theta_3 = theta_4")
    return mode_coefficients(derived_block(np.arange(p.M + 1), p), init)


def evolve_blocks(times, p: ModelParams, init: AtomInit) -> BlockTrajectory:
    """Closed-form block amplitudes on a time grid."""
    sol = solve_blocks(p, init)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    psi1, psi2 = block_amplitudes(sol, times)
    psi = np.empty(psi1.shape + (4,), dtype=complex)
    psi[..., 0] = psi1
    psi[..., 1:] = psi2[..., None]
    meta = {"engine": "closed-form", "degenerate_blocks": sol.n_degenerate}
    return BlockTrajectory(times, psi, p.field.coefficients, meta)


def evolve_closed_form(T: float, p: ModelParams, init: AtomInit):
    """Joint state at scaled time ``T``."""
    from qtripod.observables import JointState

    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    traj = evolve_blocks([T], p, init)
    return JointState(traj.joint_amplitudes()[0])
