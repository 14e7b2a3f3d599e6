"""Gamma matrices, Dirac currents and the free massless Dirac flow in 2+1 dimensions.

The free equation i gamma^mu d_mu psi = 0 reads, after multiplying by
-i gamma^0,

    d_t psi = -gamma^0 gamma^j d_j psi,

so in Fourier space d_t psihat = -i M(xi) psihat with the hermitian symbol
M(xi) = gamma^0 gamma^j xi_j.  M^2 = |xi|^2 I, hence

    exp(-i t M) = e^{+i t |xi|} L_+ + e^{-i t |xi|} L_-,
    L_+ = (I - M/|xi|)/2,  L_- = (I + M/|xi|)/2,

with L_+ = L_- = I/2 at xi = 0.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .spectral import Grid, dft, idft

GAMMA = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1j], [1j, 0]],
        [[0, 1], [-1, 0]],
    ],
    dtype=complex,
)
METRIC = np.diag([1.0, -1.0, -1.0])
IDENTITY = np.eye(2, dtype=complex)


def levi_civita() -> np.ndarray:
    """epsilon^{mu nu rho} with epsilon^{012} = 1."""
    eps = np.zeros((3, 3, 3))
    for (a, b, c), sign in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                            (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[a, b, c] = sign
    return eps


def check_gamma_algebra(gammas=GAMMA) -> dict[str, bool]:
    """Check anticommutators and adjoint relations exactly.

    Returns one entry per relation: nine ``anticomm[mu,nu]`` entries and
    three ``adjoint[mu]`` entries.  Integer-valued entries make exact
    comparison meaningful.
    """
    gammas = np.asarray(gammas)
    report = {}
    for mu in range(3):
        for nu in range(3):
            lhs = gammas[mu] @ gammas[nu] + gammas[nu] @ gammas[mu]
            report[f"anticomm[{mu},{nu}]"] = bool(np.array_equal(lhs, 2 * METRIC[mu, nu] * IDENTITY))
    for mu in range(3):
        sign = 1 if mu == 0 else -1
        report[f"adjoint[{mu}]"] = bool(np.array_equal(gammas[mu].conj().T, sign * gammas[mu]))
    return report


def gamma_contract(coeffs, gammas=GAMMA) -> np.ndarray:
    """Matrix field sum_mu c_mu gamma^mu from coefficients of shape (3, ..., N, N)."""
    return np.einsum("mab,m...->ab...", gammas, np.asarray(coeffs))


def matrix_apply(matrix_field, spinor) -> np.ndarray:
    """Pointwise (2, 2, ...) matrix field times a (2, ...) spinor."""
    return np.einsum("ab...,b...->a...", matrix_field, spinor)


def bilinears(psi, phi) -> np.ndarray:
    """psi-bar gamma^nu phi for nu = 0, 1, 2, stacked on axis 0.

    psi-bar = psi^dagger gamma^0.  Written out with the representation:
        nu=0: conj(psi1) phi1 + conj(psi2) phi2
        nu=1: i conj(psi1) phi2 - i conj(psi2) phi1
        nu=2: conj(psi1) phi2 + conj(psi2) phi1
    """
    p1c = np.conj(psi[0])
    p2c = np.conj(psi[1])
    a = p1c * phi[1]
    b = p2c * phi[0]
    return np.stack([p1c * phi[0] + p2c * phi[1], 1j * (a - b), a + b])


def dirac_current(psi) -> np.ndarray:
    """Real currents (J^0, J^1, J^2) of a spinor of shape (2, ..., N, N)."""
    psi = np.asarray(psi)
    p1, p2 = psi[0], psi[1]
    j0 = (p1 * p1.conj()).real + (p2 * p2.conj()).real
    cross = p1.conj() * p2
    # i(c - conj c) = -2 Im c ; c + conj c = 2 Re c
    return np.stack([j0, -2 * cross.imag, 2 * cross.real])


def dirac_current_matrix(psi) -> np.ndarray:
    """Same as ``dirac_current`` but by explicit 2x2 matrix products (oracle path)."""
    psi = np.asarray(psi)
    bar = np.einsum("a...,ab->b...", psi.conj(), GAMMA[0])
    return np.stack([np.einsum("a...,ab,b...->...", bar, GAMMA[nu], psi) for nu in range(3)])


def _dirac_symbol(grid: Grid) -> np.ndarray:
    xi1, xi2 = grid.xi
    g01 = GAMMA[0] @ GAMMA[1]
    g02 = GAMMA[0] @ GAMMA[2]
    return g01[:, :, None, None] * xi1 + g02[:, :, None, None] * xi2


@lru_cache(maxsize=16)
def half_wave_projectors(grid: Grid):
    """(L_+, L_-), each of shape (2, 2, N, N), read-only."""
    M = _dirac_symbol(grid)
    r = grid.xi_abs.copy()
    r[0, 0] = 1.0
    unit = M / r
    unit[..., 0, 0] = 0.0
    eye = IDENTITY[:, :, None, None]
    lp = 0.5 * (eye - unit)
    lm = 0.5 * (eye + unit)
    # at xi = 0 both phases are 1; (I, 0) keeps the projector algebra exact there too
    lp[..., 0, 0] = IDENTITY
    lm[..., 0, 0] = 0.0
    lp.flags.writeable = False
    lm.flags.writeable = False
    return lp, lm


def half_wave_symbol(grid: Grid, t: float, sign: int = 1) -> np.ndarray:
    return np.exp(sign * 1j * t * grid.xi_abs)


def half_wave(f, grid: Grid, t: float, sign: int = 1) -> np.ndarray:
    """e^{sign i t |nabla|} f, applied to every component."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return idft(half_wave_symbol(grid, t, sign) * dft(f, grid), grid)


def propagator_symbol(grid: Grid, t: float) -> np.ndarray:
    """Matrix symbol of U(t), shape (2, 2, N, N)."""
    lp, lm = half_wave_projectors(grid)
    ph = np.exp(1j * t * grid.xi_abs)
    return ph * lp + ph.conj() * lm


def propagate_hat(fhat, grid: Grid, t: float) -> np.ndarray:
    """U(t) acting on spinor DFT coefficients."""
    return matrix_apply(propagator_symbol(grid, t), fhat)


def free_propagator(f, grid: Grid, t: float) -> np.ndarray:
    """U(t) f, the solution of i gamma^mu d_mu psi = 0 with psi(0) = f."""
    return idft(propagate_hat(dft(f, grid), grid, t), grid)


def dirac_operator(snapshots, times, grid: Grid) -> np.ndarray:
    """gamma^mu d_mu psi on the interior samples of a trajectory.

    d_t by centered differences (second order, uniform or not), d_j
    spectrally.  Returns an array for ``times[1:-1]``.
    """
    snapshots = np.asarray(snapshots)
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least 3 snapshots for a time derivative")
    h0 = (times[1:-1] - times[:-2])[:, None, None, None]
    h1 = (times[2:] - times[1:-1])[:, None, None, None]
    prev, mid, nxt = snapshots[:-2], snapshots[1:-1], snapshots[2:]
    dt_psi = (h0 * h0 * (nxt - mid) + h1 * h1 * (mid - prev)) / (h0 * h1 * (h0 + h1))
    mhat = dft(mid, grid)
    xi1, xi2 = grid.xi
    d1 = idft(1j * xi1 * mhat, grid)
    d2 = idft(1j * xi2 * mhat, grid)
    out = (np.einsum("ab,tb...->ta...", GAMMA[0], dt_psi)
           + np.einsum("ab,tb...->ta...", GAMMA[1], d1)
           + np.einsum("ab,tb...->ta...", GAMMA[2], d2))
    return out
