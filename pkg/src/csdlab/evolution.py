"""Time integration of the cubic Dirac equation i gamma^mu d_mu psi = m psi - N(psi, psi) psi.

Multiplying through by -i gamma^0 splits the equation into the free flow
and a Duhamel source,

    d_t psi = -gamma^0 gamma^j d_j psi + F(psi),
    F(psi)  = -i gamma^0 (m psi - N(psi, psi) psi).

The free part is propagated exactly by U(t); the mass rides in F.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _fft, _kernels
from .dirac import GAMMA, dirac_operator, propagator_symbol
from .gauge import cubic_term, reconstruct_gauge
from .spectral import Grid, dft, idft, inv_laplacian_symbol, l2_norm, sobolev_norm, sobolev_norm_hat

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e12


class BlowUpError(RuntimeError):
    def __init__(self, t, value):
        super().__init__(f"solution left the admissible range at t = {t:.6g} (norm {value:.3g})")
        self.t = t
        self.value = value


class NonContractionWarning(UserWarning):
    pass


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    snapshots: np.ndarray  # (T, 2, N, N)
    gauges: Optional[list] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.snapshots = np.asarray(self.snapshots)
        if len(self.times) != len(self.snapshots):
            raise ValueError("timestamps and snapshots differ in length")
        if self.gauges is not None and len(self.gauges) != len(self.times):
            raise ValueError("gauge list is not aligned with snapshots")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def with_gauges(self) -> "Trajectory":
        gauges = [reconstruct_gauge(p, self.grid) for p in self.snapshots]
        return Trajectory(self.grid, self.times, self.snapshots, gauges)


def rhs(psi, m: float, grid: Grid) -> np.ndarray:
    """Duhamel source F(psi) = -i gamma^0 (m psi - N(psi, psi) psi)."""
    v = m * psi - cubic_term(psi, grid)
    return -1j * np.einsum("ab,b...->a...", GAMMA[0], v)


class CubicDirac:
    """Fourier-space right-hand side and propagators for one (grid, m).

    ``source_hat`` computes the same map as ``rhs`` with four two-field
    FFTs: the three real currents are packed as J^0 and J^1 + i J^2, and
    the three real potentials as A_0 and A_1 + i A_2.
    """

    def __init__(self, grid: Grid, m: float = 0.0, nonlinear: bool = True):
        self.grid = grid
        self.m = float(m)
        self.nonlinear = nonlinear
        xi1, xi2 = grid.xi
        inv = inv_laplacian_symbol(grid) * ~grid.nyquist_mask
        self._d1 = np.ascontiguousarray(1j * xi1 * inv)
        self._d2 = np.ascontiguousarray(1j * xi2 * inv)
        self._cache = {}

    def propagator(self, h):
        """U(h) as (diagonal, off-diagonal) tables; see ``_kernels.prop_axpy``."""
        key = float(h)
        if key not in self._cache:
            E = propagator_symbol(self.grid, h)
            self._cache[key] = (np.ascontiguousarray(E[0, 0].real), np.ascontiguousarray(E[0, 1]))
        return self._cache[key]

    @staticmethod
    def apply(E, x, c=0.0, y=None):
        """E (x + c y)."""
        out = np.empty_like(x)
        _kernels.prop_axpy(E[0], E[1], x, c, x if y is None else y, out)
        return out

    def gauge_fields(self, psi):
        """Packed potentials: [A_0, A_1 + i A_2] in physical space."""
        packed = np.empty_like(psi)
        _kernels.pack_currents(psi, packed)
        X = _fft.fft2(packed)
        W = np.empty_like(X)
        _kernels.gauge_hat(X, self._d1, self._d2, W)
        return _fft.ifft2(W)

    def source(self, psi):
        psi = np.ascontiguousarray(psi, dtype=complex)
        out = np.empty_like(psi)
        if self.nonlinear:
            _kernels.duhamel_source(psi, self.gauge_fields(psi), self.m, out)
        else:
            _kernels.mass_source(psi, self.m, out)
        return out

    def source_hat(self, psihat):
        return _fft.fft2(self.source(_fft.ifft2(psihat)))

    def step_hat(self, psihat, dt):
        """One integrating-factor (Lawson) RK4 step on DFT coefficients."""
        E2 = self.propagator(dt / 2)
        k1 = self.source_hat(psihat)
        k2 = self.source_hat(self.apply(E2, psihat, 0.5 * dt, k1))
        u_half = self.apply(E2, psihat)
        b = np.empty_like(u_half)
        _kernels.axpy(u_half, 0.5 * dt, k2, b)
        k3 = self.source_hat(b)
        c = self.apply(E2, u_half, dt, k3)  # E u + dt E2 k3, since E = E2 E2
        k4 = self.source_hat(c)
        _kernels.prop_combine(E2[0], E2[1], self.apply(E2, psihat, dt / 6, k1), dt / 3, k2, k3, dt / 6, k4, b)
        return b


def step_exponential_rk4(psi, dt: float, m: float, grid: Grid, nonlinear=True) -> np.ndarray:
    """Advance one step of size dt; exact for the free flow."""
    model = CubicDirac(grid, m, nonlinear)
    return idft(model.step_hat(dft(psi, grid), dt), grid)


def _check_finite(psihat, t, grid):
    flat = psihat.ravel()
    value = math.sqrt(abs(np.vdot(flat, flat))) * grid.L / grid.N ** 2
    if not math.isfinite(value) or value > BLOWUP_THRESHOLD:
        raise BlowUpError(t, value)


def iterate(f, grid: Grid, T: float, dt: float, m: float = 0.0, stride: int = 1,
            nonlinear: bool = True):
    """Yield (t, psi) at t = 0, every ``stride`` steps, and at T.

    The step is shrunk so that T is hit exactly.  Raises BlowUpError from
    inside the loop, after all earlier snapshots have been yielded.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / nsteps
    model = CubicDirac(grid, m, nonlinear)
    psihat = dft(np.asarray(f, dtype=complex), grid)
    yield 0.0, idft(psihat, grid)
    for n in range(1, nsteps + 1):
        psihat = model.step_hat(psihat, h)
        _check_finite(psihat, n * h, grid)
        if n % stride == 0 or n == nsteps:
            yield n * h, idft(psihat, grid)


def evolve(f, grid: Grid, T: float, dt: float, m: float = 0.0, stride: int = 1,
           nonlinear: bool = True) -> Trajectory:
    """Exponential-RK4 run from psi(0) = f to time T; see ``iterate``."""
    times, snaps = zip(*iterate(f, grid, T, dt, m, stride, nonlinear))
    return Trajectory(grid, np.array(times), np.array(snaps))


# --------------------------------------------------------------------------
# Picard iteration on the Duhamel formula
# --------------------------------------------------------------------------

@dataclass
class PicardResult:
    trajectory: Trajectory
    distances: list = field(default_factory=list)

    @property
    def ratios(self):
        d = np.asarray(self.distances)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]


def picard_iterate(f, grid: Grid, T: float, n_iter: int, m: float = 0.0, nt: int = 201,
                   s: float = 0.5, nonlinear: bool = True) -> PicardResult:
    """Fixed-point iteration psi_{k+1}(t) = U(t) f + int_0^t U(t - s) F(psi_k(s)) ds.

    The time integral is the trapezoid rule on ``nt`` uniform samples of
    [0, T].  ``distances[k]`` is the Y^s_T surrogate distance between
    successive iterates:  sup_t ||d psi||_{H^s} + int ||d F||_{H^s} dt.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    model = CubicDirac(grid, m, nonlinear)
    times = np.linspace(0.0, T, nt)
    dt = times[1] - times[0]
    fhat = dft(np.asarray(f, dtype=complex), grid)
    fwd = np.stack([propagator_symbol(grid, t) for t in times])
    # U(-t) is the adjoint of U(t)
    bwd = np.conj(np.swapaxes(fwd, 1, 2))

    def apply_all(E, x):
        return np.einsum("tab...,tb...->ta...", E, x)

    current = apply_all(fwd, np.broadcast_to(fhat, (nt,) + fhat.shape))
    prev_src = None
    distances = []
    for _ in range(n_iter):
        src = np.stack([model.source_hat(p) for p in current])
        g = apply_all(bwd, src)
        integral = np.zeros_like(g)
        integral[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)
        new = apply_all(fwd, fhat + integral)
        dpsi = sobolev_norm_hat(new - current, s, grid, components=1).max()
        if prev_src is None:
            dsrc = sobolev_norm_hat(src, s, grid, components=1)
        else:
            dsrc = sobolev_norm_hat(src - prev_src, s, grid, components=1)
        distances.append(float(dpsi + np.trapezoid(dsrc, times)))
        _check_finite(new[-1], T, grid)
        current, prev_src = new, src
    # distances at roundoff level carry no contraction information
    floor = 1e-13 * float(sobolev_norm_hat(current, s, grid, components=1).max())
    if len(distances) >= 2 and distances[-1] >= distances[-2] and distances[-1] > floor:
        warnings.warn("Picard iterates are not contracting", NonContractionWarning, stacklevel=2)
    snaps = idft(current, grid)
    return PicardResult(Trajectory(grid, times, snaps), distances)


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------

def charge(psi, grid: Grid) -> np.ndarray:
    """||psi||_{L^2}; vectorized over leading snapshot axes."""
    return l2_norm(psi, grid, components=1)


def charge_drift(traj: Trajectory) -> dict:
    q = charge(traj.snapshots, traj.grid)
    rel = np.abs(q - q[0]) / q[0] if q[0] > 0 else np.abs(q - q[0])
    return {"charge": q, "relative": rel, "drift": float(rel.max())}


def dirac_source(psi, m: float, grid: Grid) -> np.ndarray:
    """gamma^mu d_mu psi read off the equation: -i (m psi - N(psi, psi) psi)."""
    return -1j * (m * psi - cubic_term(psi, grid))


def y_norm(traj: Trajectory, s: float, m: float = 0.0) -> dict:
    """Y^s_T norm: sup_t ||psi||_{H^s} + int_0^T ||gamma^mu d_mu psi||_{H^s} dt."""
    if len(traj) < 3:
        raise ValueError("need at least 3 snapshots")
    grid = traj.grid
    energy = sobolev_norm(traj.snapshots, s, grid, components=1)
    src = np.array([sobolev_norm(dirac_source(p, m, grid), s, grid, components=1)
                    for p in traj.snapshots])
    sup = float(energy.max())
    integral = float(np.trapezoid(src, traj.times))
    return {"sup_Hs": sup, "source_L1Hs": integral, "Y": sup + integral,
            "initial_Hs": float(energy[0]), "source_Hs": src}


def y_norm_fd(traj: Trajectory, s: float) -> float:
    """Source part of the Y-norm with gamma^mu d_mu psi by finite differences in time."""
    g = dirac_operator(traj.snapshots, traj.times, traj.grid)
    vals = sobolev_norm(g, s, traj.grid, components=1)
    return float(np.trapezoid(vals, traj.times[1:-1]))


def rescale_data(f, grid: Grid, lam: int):
    """lam f(lam x) on the torus of side L/lam with lam N points per axis.

    The fine grid samples x' = j L / (lam^2 N); values come from
    zero-padded Fourier interpolation of f, so the rescaled field is the
    exact band-limited image of f.
    """
    fine = Grid(grid.N * lam, grid.L / lam)
    return fine, lam * fourier_pad(f, grid, fine.N)


def fourier_pad(f, grid: Grid, n_out: int) -> np.ndarray:
    """Band-limited resampling of ``f`` onto n_out points per axis (n_out >= N)."""
    n = grid.N
    if n_out == n:
        return np.array(f, dtype=complex)
    fhat = dft(f, grid)
    k1, k2 = grid.k_int
    out = np.zeros(fhat.shape[:-2] + (n_out, n_out), dtype=complex)
    # Nyquist row/column dropped to keep the interpolant unambiguous
    i1 = np.where(k1 < 0, k1 + n_out, k1).astype(int)
    i2 = np.where(k2 < 0, k2 + n_out, k2).astype(int)
    keep = ~grid.nyquist_mask
    out[..., i1[keep], i2[keep]] = fhat[..., keep]
    return _fft.ifft2(out) * (n_out / n) ** 2


def scaling_check(f, grid: Grid, lam: int, T: float, dt: float, m: float = 0.0) -> dict:
    """Compare lam psi(lam t, lam x) with the evolution of the rescaled data.

    psi is evolved on ``grid`` to time T with step dt; the rescaled data
    lam f(lam x) is evolved on (lam N, L/lam) to T/lam with step dt/lam.
    The first run is resampled onto the fine grid and rescaled.
    """
    if m != 0:
        raise ValueError("scaling invariance requires m = 0")
    f = np.asarray(f, dtype=complex)
    fine, g = rescale_data(f, grid, lam)
    norm_f = float(charge(f, grid))
    norm_g = float(charge(g, fine))
    coarse_run = evolve(f, grid, T, dt)
    fine_run = evolve(g, fine, T / lam, dt / lam)
    predicted = lam * fourier_pad(coarse_run.snapshots[-1], grid, fine.N)
    actual = fine_run.snapshots[-1]
    mismatch = float(charge(predicted - actual, fine) / charge(actual, fine))
    return {"lam": lam, "mismatch": mismatch, "norm_f": norm_f, "norm_rescaled": norm_g,
            "norm_error": abs(norm_g - norm_f) / norm_f}


def gaussian_spinor(grid: Grid, width: float = 0.6, momentum=(2.0, 1.0), centre=None,
                    s: float = 0.5, norm: float = 1.0) -> np.ndarray:
    """Smooth modulated Gaussian spinor normalized to ||f||_{H^s} = norm."""
    x1, x2 = grid.x
    c = (grid.L / 2, grid.L / 2) if centre is None else centre
    r2 = (x1 - c[0]) ** 2 + (x2 - c[1]) ** 2
    env = np.exp(-r2 / (2 * width ** 2))
    phase = np.exp(1j * (momentum[0] * x1 + momentum[1] * x2))
    f = np.stack([env * phase, 0.5 * env * np.conj(phase) * np.exp(0.3j)])
    return f * (norm / sobolev_norm(f, s, grid, components=1))
