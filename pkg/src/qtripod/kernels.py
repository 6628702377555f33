"""RK4 propagation of tripod blocks: numba kernel plus a pure-numpy twin.

Each photon block is a 4-vector (level 1, levels 2-4) driven by

    i dy/dt = H(t) y,   H = diag(D) + off-diagonal star couplings,
    H[0, k](t) = sum_j up_amp[k, j] exp(-i up_rate[k, j] t),
    H[k, 0](t) = sum_j lo_amp[k, j] exp(-i lo_rate[k, j] t).

Set ``QTRIPOD_BACKEND=numpy`` to bypass numba (also used automatically when
numba is not importable).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def active_backend() -> str:
    choice = os.environ.get("QTRIPOD_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"QTRIPOD_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not HAVE_NUMBA:
        return "numpy"
    return choice


def _substeps(times: np.ndarray, max_step: float) -> np.ndarray:
    gaps = np.diff(times)
    return np.maximum(1, np.ceil(gaps / max_step - 1e-9)).astype(np.int64)


def _rk4_numpy(y0, diag, up_amp, up_rate, lo_amp, lo_rate, times, nsub):
    y = y0.astype(np.complex128).copy()
    out = np.empty((times.size,) + y.shape, dtype=np.complex128)
    out[0] = y

    def rhs(y, up, lo):
        # up, lo: (nb, 3) effective couplings at this instant
        dy = np.empty_like(y)
        dy[:, 0] = diag[:, 0] * y[:, 0] + np.sum(up * y[:, 1:], axis=1)
        dy[:, 1:] = lo * y[:, :1] + diag[:, 1:] * y[:, 1:]
        return -1j * dy

    for i in range(times.size - 1):
        t0 = times[i]
        h = (times[i + 1] - t0) / nsub[i]
        # phases re-anchored exactly at every output point, advanced by products inside
        pu = np.exp(-1j * up_rate * t0)
        pl = np.exp(-1j * lo_rate * t0)
        mu = np.exp(-0.5j * up_rate * h)
        ml = np.exp(-0.5j * lo_rate * h)
        for _ in range(nsub[i]):
            up0 = np.sum(up_amp * pu, axis=2)
            lo0 = np.sum(lo_amp * pl, axis=2)
            pu = pu * mu
            pl = pl * ml
            up1 = np.sum(up_amp * pu, axis=2)
            lo1 = np.sum(lo_amp * pl, axis=2)
            pu = pu * mu
            pl = pl * ml
            up2 = np.sum(up_amp * pu, axis=2)
            lo2 = np.sum(lo_amp * pl, axis=2)
            k1 = rhs(y, up0, lo0)
            k2 = rhs(y + 0.5 * h * k1, up1, lo1)
            k3 = rhs(y + 0.5 * h * k2, up1, lo1)
            k4 = rhs(y + h * k3, up2, lo2)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return out


if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _rk4_numba(y0, diag, up_amp, up_rate, lo_amp, lo_rate, times, nsub):
        nb, nk, nterm = up_amp.shape
        nt = times.size
        out = np.empty((nt, nb, 4), dtype=np.complex128)
        pu = np.empty((nk, nterm), dtype=np.complex128)
        pl = np.empty((nk, nterm), dtype=np.complex128)
        mu = np.empty((nk, nterm), dtype=np.complex128)
        ml = np.empty((nk, nterm), dtype=np.complex128)
        cu = np.empty((3, nk), dtype=np.complex128)
        cl = np.empty((3, nk), dtype=np.complex128)
        y = np.empty(4, dtype=np.complex128)
        ys = np.empty(4, dtype=np.complex128)
        acc = np.empty(4, dtype=np.complex128)
        kk = np.empty(4, dtype=np.complex128)
        for b in range(nb):
            for l in range(4):
                y[l] = y0[b, l]
                out[0, b, l] = y[l]
            for i in range(nt - 1):
                t0 = times[i]
                h = (times[i + 1] - t0) / nsub[i]
                for k in range(nk):
                    for j in range(nterm):
                        pu[k, j] = np.exp(-1j * up_rate[b, k, j] * t0)
                        pl[k, j] = np.exp(-1j * lo_rate[b, k, j] * t0)
                        mu[k, j] = np.exp(-0.5j * up_rate[b, k, j] * h)
                        ml[k, j] = np.exp(-0.5j * lo_rate[b, k, j] * h)
                for _ in range(nsub[i]):
                    # couplings at t, t + h/2, t + h
                    for s in range(3):
                        for k in range(nk):
                            su = 0j
                            sl = 0j
                            for j in range(nterm):
                                su += up_amp[b, k, j] * pu[k, j]
                                sl += lo_amp[b, k, j] * pl[k, j]
                            cu[s, k] = su
                            cl[s, k] = sl
                        if s < 2:
                            for k in range(nk):
                                for j in range(nterm):
                                    pu[k, j] *= mu[k, j]
                                    pl[k, j] *= ml[k, j]
                    for l in range(4):
                        ys[l] = y[l]
                        acc[l] = 0j
                    for stage in range(4):
                        s = 0 if stage == 0 else (2 if stage == 3 else 1)
                        t0c = diag[b, 0] * ys[0]
                        for k in range(nk):
                            t0c += cu[s, k] * ys[k + 1]
                        kk[0] = -1j * t0c
                        for k in range(nk):
                            kk[k + 1] = -1j * (cl[s, k] * ys[0] + diag[b, k + 1] * ys[k + 1])
                        w = 1.0 if (stage == 0 or stage == 3) else 2.0
                        c = 0.5 * h if stage < 2 else h
                        for l in range(4):
                            acc[l] += w * kk[l]
                            if stage < 3:
                                ys[l] = y[l] + c * kk[l]
                    for l in range(4):
                        y[l] = y[l] + (h / 6.0) * acc[l]
                for l in range(4):
                    out[i + 1, b, l] = y[l]
        return out


def rk4_tripod(y0, diag, up_amp, up_rate, lo_amp, lo_rate, times, max_step, backend=None):
    """Propagate all blocks and return amplitudes at ``times``, shape (nt, nb, 4).

    Every gap between consecutive output times is split into equal substeps
    no longer than ``max_step``.
    """
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1-D array")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if not max_step > 0:
        raise ValueError(f"max_step must be positive, got {max_step}")
    nsub = _substeps(times, max_step)
    args = (
        np.ascontiguousarray(y0, dtype=np.complex128),
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(up_amp, dtype=np.complex128),
        np.ascontiguousarray(up_rate, dtype=np.float64),
        np.ascontiguousarray(lo_amp, dtype=np.complex128),
        np.ascontiguousarray(lo_rate, dtype=np.float64),
        times,
        nsub,
    )
    backend = backend or active_backend()
    if backend == "numba" and HAVE_NUMBA:
        return _rk4_numba(*args)
    return _rk4_numpy(*args)
