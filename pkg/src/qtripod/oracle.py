"""Brute-force RK4 integration of the per-block tripod equations.

Independent of the closed form: nothing here uses the characteristic roots.
The integration runs in the frame co-rotating with the diagonal Kerr energies
(an exact change of variables), so the large photon-number dependent Kerr
phases never have to be resolved by the step size.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from qtripod import kernels
from qtripod.dynamics import AtomInit, BlockTrajectory, ModelParams
from qtripod.qalgebra import q_numbers

log = logging.getLogger(__name__)

MAX_ACCEPTANCE_STEP = 0.01
# h * (fastest residual frequency); RK4 is unstable past ~2.8 and inaccurate long before
STEP_WARN = 0.25
STEP_FAIL = 1.0


class Mode(enum.Enum):
    REDUCED = "reduced"
    PRE_RWA = "pre-rwa"
    LITERAL_PHASES = "literal-phases"


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    step: float = 1e-3
    mode: Mode = Mode.REDUCED
    backend: str | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))


def _block_terms(p: ModelParams, mode: Mode):
    """Coefficient arrays for :func:`kernels.rk4_tripod` in the Kerr frame."""
    d = p.field.deformation
    n = np.arange(p.M + 1)
    qn, qm, qp = q_numbers(n, d), q_numbers(n - 1, d), q_numbers(n + 1, d)
    if np.any(qp < 0):
        raise ValueError("negative q-number under the square root; use the standard convention")
    v1 = p.chi * qn * qm
    v2 = p.chi * qn * qp
    frame = np.stack([v1, v2, v2, v2], axis=1)
    root = np.sqrt(qp)[:, None]
    lam = np.array(p.lambdas)[None, :]
    delta = np.array(p.deltas)[None, :]
    nb = p.M + 1
    if mode is Mode.PRE_RWA:
        # lambda cos(mu t) = lambda/2 (e^{i mu t} + e^{-i mu t}), both terms kept
        amp = np.stack([0.5 * lam * root] * 2, axis=2)
        rate = np.stack([np.broadcast_to(delta - p.mu, (nb, 3)), np.broadcast_to(delta + p.mu, (nb, 3))], axis=2)
        lo_amp, lo_rate = amp, -rate
    else:
        eps = np.broadcast_to(delta - p.mu, (nb, 3))
        amp = (0.5 * lam * root)[:, :, None]
        rate = eps[:, :, None].copy()
        lo_amp = amp
        if mode is Mode.LITERAL_PHASES:
            # phase signs of the lower couplings exactly as printed: -, +, -
            lo_rate = rate * np.array([1.0, -1.0, 1.0])[None, :, None]
        else:
            lo_rate = -rate
    # move to the frame y_k = psi_k e^{i d_k t}
    shift = (frame[:, 1:] - frame[:, :1])[:, :, None]
    up_rate = rate + shift
    lo_rate = lo_rate - shift
    diag = np.zeros((nb, 4))
    return frame, diag, amp.astype(complex), up_rate, lo_amp.astype(complex), lo_rate


def _frequency_scale(amp, up_rate, lo_rate) -> float:
    coupling = np.sum(np.abs(amp), axis=(1, 2)).max(initial=0.0)
    rates = max(np.abs(up_rate).max(initial=0.0), np.abs(lo_rate).max(initial=0.0))
    return float(rates + 2.0 * math.sqrt(3.0) * coupling)


def _integrate(p: ModelParams, init: AtomInit, grid, opts: IntegratorOptions) -> BlockTrajectory:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
        raise ValueError("grid must be a 1-D array starting at T = 0")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    frame, diag, amp, up_rate, lo_amp, lo_rate = _block_terms(p, opts.mode)
    omega_h = opts.step * _frequency_scale(amp, up_rate, lo_rate)
    if omega_h > STEP_FAIL:
        raise StepSizeError(
            f"step {opts.step} too large: step x frequency scale = {omega_h:.3g} > {STEP_FAIL}"
        )
    if omega_h > STEP_WARN:
        log.warning("RK4 step %.3g is coarse for this problem (h*omega = %.3g)", opts.step, omega_h)
    nb = p.M + 1
    y0 = np.broadcast_to(init.as_array, (nb, 4))
    y = kernels.rk4_tripod(y0, diag, amp, up_rate, lo_amp, lo_rate, grid, opts.step, backend=opts.backend)
    psi = y * np.exp(-1j * frame[None, :, :] * grid[:, None, None])
    norms = np.sum(np.abs(psi) ** 2, axis=2)
    meta = {
        "engine": "ode",
        "mode": opts.mode.value,
        "step": opts.step,
        "backend": opts.backend or kernels.active_backend(),
        "step_times_frequency": omega_h,
        "max_block_norm_drift": float(np.max(np.abs(norms - norms[:1]))),
    }
    if opts.mode is Mode.PRE_RWA:
        meta["coupling_bookkeeping"] = (
            "pre-RWA coupling is lambda cos(mu T); at mu = 0 it equals the reduced model with lambda doubled"
        )
    return BlockTrajectory(grid, psi, p.field.coefficients, meta)


def integrate_reduced(p: ModelParams, init: AtomInit, grid, opts: IntegratorOptions | None = None) -> BlockTrajectory:
    """Integrate the 4x4 block equations with the slow (RWA-kept) couplings.

    Works for any couplings and detunings. ``opts.mode`` may be ``REDUCED``
    (Hermitian generator, default) or ``LITERAL_PHASES``.
    """
    opts = opts or IntegratorOptions()
    if opts.mode is Mode.PRE_RWA:
        raise ValueError("use integrate_pre_rwa for the pre-RWA mode")
    return _integrate(p, init, grid, opts)


def integrate_pre_rwa(p: ModelParams, init: AtomInit, grid, step: float = 1e-3, backend=None) -> BlockTrajectory:
    """Integrate with the full coupling lambda cos(mu T), fast terms included."""
    return _integrate(p, init, grid, IntegratorOptions(step, Mode.PRE_RWA, backend))


def generator_matrix(p: ModelParams, n: int, T: float, mode: Mode = Mode.REDUCED) -> np.ndarray:
    """The 4x4 block generator H(T) for photon block ``n`` in the interaction picture."""
    frame, _, amp, up_rate, lo_amp, lo_rate = _block_terms(p, mode)
    shift = frame[n, 1:] - frame[n, 0]
    H = np.diag(frame[n]).astype(complex)
    H[0, 1:] = np.sum(amp[n] * np.exp(-1j * (up_rate[n] - shift[:, None]) * T), axis=1)
    H[1:, 0] = np.sum(lo_amp[n] * np.exp(-1j * (lo_rate[n] + shift[:, None]) * T), axis=1)
    return H


def rwa_deviation(p: ModelParams, init: AtomInit, grid, step: float = 1e-3) -> float:
    """Largest |F_pre-RWA - F_reduced| on ``grid``: the cost of dropping the fast terms."""
    from qtripod.observables import fidelity_from_blocks

    full = integrate_pre_rwa(p, init, grid, step)
    reduced = integrate_reduced(p, init, grid, IntegratorOptions(step))
    f_full = fidelity_from_blocks(full.beta, full.psi, init.theta)
    f_red = fidelity_from_blocks(reduced.beta, reduced.psi, init.theta)
    return float(np.max(np.abs(f_full - f_red)))
