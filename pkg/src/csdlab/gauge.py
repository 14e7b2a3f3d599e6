"""Nonlocal bilinear operator N(psi, phi) and elliptic reconstruction of A_mu.

Index convention.  ``GaugeState.A`` holds the covariant (lower index)
spatial potential (A_1, A_2); currents J^nu are contravariant.  With
g = diag(1, -1, -1) the field equation (1/2) eps^{mu nu rho} F_{nu rho} = -J^mu
gives, component by component,

    d_1 A_2 - d_2 A_1     = -J^0
    d_t A_1 - d_1 A_0     = -J^2
    d_t A_2 - d_2 A_0     =  J^1

so d_t A - grad A_0 = (-J^2, J^1).  In the contravariant components
A^j = -A_j the first line is d_1 A^2 - d_2 A^1 = J^0, which is how the
curl constraint is checked.  In the Coulomb gauge this yields

    A_0 = Delta^{-1}(d_1 J^2 - d_2 J^1),   A = -Delta^{-1} grad_perp J^0,

and A_mu gamma^mu psi = N(psi, psi) psi.  On the torus every source is
taken mean-free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirac import bilinears, dirac_current, gamma_contract, matrix_apply
from .spectral import Grid, as_real, dft, idft, inv_laplacian_symbol, l2_norm

# A^j = SPATIAL_RAISE * A_j
SPATIAL_RAISE = -1.0


@dataclass(frozen=True)
class GaugeState:
    A0: np.ndarray
    A: np.ndarray  # covariant (A_1, A_2), shape (2, N, N)

    @property
    def components(self) -> np.ndarray:
        """(A_0, A_1, A_2) stacked, lower indices."""
        return np.concatenate([self.A0[None], self.A], axis=0)

    @property
    def A_upper(self) -> np.ndarray:
        return SPATIAL_RAISE * self.A


def _n_coefficients_hat(bhat, grid: Grid) -> np.ndarray:
    """Coefficients of gamma^0, gamma^1, gamma^2 in N, from bilinear DFTs."""
    xi1, xi2 = grid.xi
    # odd-order symbol: Nyquist row/column dropped so real currents give real potentials
    inv = inv_laplacian_symbol(grid) * ~grid.nyquist_mask
    c0 = inv * 1j * (xi1 * bhat[2] - xi2 * bhat[1])
    c1 = inv * 1j * xi2 * bhat[0]
    c2 = -inv * 1j * xi1 * bhat[0]
    return np.stack([c0, c1, c2])


def n_coefficients(psi, phi, grid: Grid) -> np.ndarray:
    """(c_0, c_1, c_2) with N(psi, phi) = c_mu gamma^mu, shape (3, ..., N, N)."""
    grid.check(psi)
    grid.check(phi)
    b = bilinears(psi, phi)
    return idft(_n_coefficients_hat(dft(b, grid), grid), grid)


def bilinear_N(psi, phi, grid: Grid) -> np.ndarray:
    """N(psi, phi) as a (2, 2, ..., N, N) matrix field.

    Conjugate linear in ``psi``, linear in ``phi``.
    """
    return gamma_contract(n_coefficients(psi, phi, grid))


def cubic_term(psi, grid: Grid) -> np.ndarray:
    """N(psi, psi) psi."""
    return matrix_apply(bilinear_N(psi, psi, grid), psi)


def gauge_from_current(J, grid: Grid) -> GaugeState:
    Jhat = dft(J, grid)
    coeffs = _n_coefficients_hat(Jhat, grid)
    A0 = as_real(idft(coeffs[0], grid), 1e-10)
    A = as_real(idft(coeffs[1:], grid), 1e-10)
    return GaugeState(A0=A0, A=A)


def reconstruct_gauge(psi, grid: Grid) -> GaugeState:
    """Coulomb-gauge potential determined by the spinor alone."""
    return gauge_from_current(dirac_current(grid.check(psi)), grid)


def gauge_times_spinor(gauge: GaugeState, psi) -> np.ndarray:
    """A_mu gamma^mu psi."""
    return matrix_apply(gamma_contract(gauge.components), psi)


def _resolved(field, grid: Grid) -> np.ndarray:
    """Drop the zero mode and the Nyquist lines, which odd derivatives cannot reach."""
    keep = ~(grid.nyquist_mask | grid.zero_mode)
    return idft(keep * dft(field, grid), grid).real


def coulomb_residual(gauge: GaugeState, grid: Grid) -> float:
    Ahat = dft(gauge.A, grid)
    xi1, xi2 = grid.xi
    div = idft(1j * (xi1 * Ahat[0] + xi2 * Ahat[1]), grid)
    return float(l2_norm(div, grid))


def curl_residual(gauge: GaugeState, psi, grid: Grid) -> float:
    """|| d_1 A^2 - d_2 A^1 - (J^0 - mean J^0) ||_{L^2}, Nyquist lines excluded."""
    Ahat = dft(gauge.A_upper, grid)
    xi1, xi2 = grid.xi
    rot = idft(1j * (xi1 * Ahat[1] - xi2 * Ahat[0]), grid).real
    j0 = _resolved(dirac_current(psi)[0], grid)
    return float(l2_norm(rot - j0, grid))


def gauge_residuals(times, psis, gauges, grid: Grid) -> dict[str, np.ndarray]:
    """Constraint and evolution residuals along a trajectory.

    Returns arrays keyed ``t``, ``res_coulomb``, ``res_curl`` and
    ``res_dynamic``; the last measures d_t A - grad A_0 - (N - mean N),
    N = (-J^2, J^1) (Nyquist lines excluded as for the curl), with a second-order finite-difference d_t (one-sided
    at the ends).
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least 3 snapshots")
    if len(psis) != len(times) or len(gauges) != len(times):
        raise ValueError("trajectories are not aligned")
    res_coulomb = np.array([coulomb_residual(g, grid) for g in gauges])
    res_curl = np.array([curl_residual(g, p, grid) for g, p in zip(gauges, psis)])

    A = np.stack([g.A for g in gauges])
    dtA = np.gradient(A, times, axis=0, edge_order=2)
    xi1, xi2 = grid.xi
    res_dyn = np.empty(len(times))
    for n, (g, p) in enumerate(zip(gauges, psis)):
        a0hat = dft(g.A0, grid)
        grad_a0 = idft(np.stack([1j * xi1 * a0hat, 1j * xi2 * a0hat]), grid).real
        J = dirac_current(p)
        src = _resolved(np.stack([-J[2], J[1]]), grid)
        res_dyn[n] = l2_norm(dtA[n] - grad_a0 - src, grid, components=1)
    return {"t": times, "res_coulomb": res_coulomb, "res_curl": res_curl,
            "res_dynamic": res_dyn}
