"""Discrete Fourier machinery on the periodic square [0, L)^2.

Fields are plain numpy arrays whose last two axes are the N x N grid.  A
spinor is an array of shape (2, N, N), a vector field (2, N, N), a scalar
field (N, N); leading axes beyond those are treated as batch axes (time
samples, trials).

Conventions: the forward transform is the unnormalized DFT and the inverse
carries the 1/N^2 factor, the same as ``numpy.fft``.  Grid quadrature uses
the cell area (L/N)^2, so that

    ||f||_{L^2}^2 = (L/N)^2 sum |f|^2 = (L^2/N^4) sum |fhat|^2

holds exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from . import _fft


class SymbolError(ValueError):
    """A Fourier symbol is non-finite at a lattice point and has no zero-mode rule."""


class LatticeWarning(UserWarning):
    """A requested dyadic scale has no lattice points."""


@dataclass(frozen=True)
class Grid:
    """Periodic N x N grid of side L.

    Wavenumbers are xi = 2 pi k / L with k in the centered integer range
    -N/2 .. N/2 - 1 (numpy ``fftfreq`` order).  Axis 0 of a field is x1,
    axis 1 is x2.
    """

    N: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def shape(self):
        return (self.N, self.N)

    @property
    def h(self) -> float:
        return self.L / self.N

    @cached_property
    def x(self):
        """Coordinate arrays (x1, x2), each of shape (N, N)."""
        x1d = np.arange(self.N) * self.h
        return np.meshgrid(x1d, x1d, indexing="ij")

    @cached_property
    def k_int(self):
        """Integer wavenumber arrays (k1, k2)."""
        k1d = np.fft.fftfreq(self.N, d=1.0 / self.N)
        return np.meshgrid(k1d, k1d, indexing="ij")

    @cached_property
    def xi(self):
        """Wavenumber arrays (xi1, xi2)."""
        k1, k2 = self.k_int
        c = 2 * math.pi / self.L
        return c * k1, c * k2

    @cached_property
    def xi_abs(self):
        xi1, xi2 = self.xi
        return np.hypot(xi1, xi2)

    @cached_property
    def xi_sq(self):
        xi1, xi2 = self.xi
        return xi1 * xi1 + xi2 * xi2

    @cached_property
    def xi_min(self) -> float:
        """Smallest nonzero |xi| on the lattice."""
        return 2 * math.pi / self.L

    @cached_property
    def xi_max(self) -> float:
        return float(self.xi_abs.max())

    @cached_property
    def zero_mode(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, 0] = True
        return mask

    @cached_property
    def nyquist_mask(self):
        """True on the Nyquist row and column, where xi -> -xi symmetry fails."""
        k1, k2 = self.k_int
        return (k1 == -self.N // 2) | (k2 == -self.N // 2)

    def check(self, field) -> np.ndarray:
        field = np.asarray(field)
        if field.ndim < 2 or field.shape[-2:] != self.shape:
            raise ValueError(
                f"field of shape {field.shape} does not live on a {self.N}x{self.N} grid"
            )
        return field


def dft(field, grid: Grid) -> np.ndarray:
    return _fft.fft2(grid.check(field))


def idft(coeffs, grid: Grid) -> np.ndarray:
    return _fft.ifft2(grid.check(coeffs))


def is_real(field, rtol=1e-12) -> bool:
    field = np.asarray(field)
    scale = np.abs(field).max(initial=0.0)
    return bool(np.abs(field.imag).max(initial=0.0) <= rtol * scale)


def as_real(field, rtol=1e-12) -> np.ndarray:
    """Drop the imaginary part after checking it is round-off."""
    field = np.asarray(field)
    if np.iscomplexobj(field):
        if not is_real(field, rtol):
            raise ValueError("field has a non-negligible imaginary part")
        return field.real.copy()
    return field


# --------------------------------------------------------------------------
# Fourier multipliers
# --------------------------------------------------------------------------

Symbol = Union[np.ndarray, Callable, float, complex]


def evaluate_symbol(symbol: Symbol, grid: Grid, zero_value=None) -> np.ndarray:
    """Tabulate a symbol on the lattice.

    ``symbol`` is either a callable ``(xi1, xi2) -> array`` or an array of
    shape (..., N, N).  Trailing (N, N) axes are the lattice; leading axes
    of size (2, 2) make it matrix valued.  ``zero_value`` replaces the
    value at xi = 0 (a scalar, or a matrix for matrix symbols).
    """
    if callable(symbol):
        xi1, xi2 = grid.xi
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            table = np.asarray(symbol(xi1, xi2))
        table = np.broadcast_to(table, table.shape[:-2] + grid.shape) if table.ndim >= 2 \
            else np.full(grid.shape, table)
    elif np.ndim(symbol) == 0:
        table = np.full(grid.shape, symbol)
    else:
        table = grid.check(symbol)
    table = np.array(table, dtype=complex if np.iscomplexobj(table) else float)
    if zero_value is not None:
        table[..., 0, 0] = zero_value
    if not np.all(np.isfinite(table)):
        bad = np.argwhere(~np.isfinite(table.reshape(-1, *grid.shape)).any(axis=0))
        raise SymbolError(f"symbol is not finite at lattice index {tuple(bad[0])}")
    return table


def apply_multiplier(field, symbol: Symbol, grid: Grid, zero_value=None) -> np.ndarray:
    """idft(symbol * dft(field)).

    A matrix symbol of shape (2, 2, N, N) acts on spinors of shape
    (..., 2, N, N); a scalar symbol acts on every component.
    """
    table = evaluate_symbol(symbol, grid, zero_value)
    fhat = dft(field, grid)
    if table.ndim == 4:
        out = np.einsum("ab...ij,...bij->...aij", table, fhat)
    else:
        out = table * fhat
    return idft(out, grid)


def abs_power(grid: Grid, a: float) -> np.ndarray:
    """|xi|^a on the lattice with the xi = 0 entry set to 0 (or 1 if a == 0)."""
    if a == 0:
        return np.ones(grid.shape)
    with np.errstate(divide="ignore"):
        table = grid.xi_abs ** a
    table[0, 0] = 0.0
    return table


def frac_deriv(field, a: float, grid: Grid) -> np.ndarray:
    """|nabla|^a.  The mean is removed whenever a != 0."""
    return idft(abs_power(grid, a) * dft(field, grid), grid)


def inv_laplacian_symbol(grid: Grid) -> np.ndarray:
    with np.errstate(divide="ignore"):
        table = -1.0 / grid.xi_sq
    table[0, 0] = 0.0
    return table


def inv_laplacian(field, grid: Grid) -> np.ndarray:
    """1/Delta with the zero mode annihilated."""
    return idft(inv_laplacian_symbol(grid) * dft(field, grid), grid)


def laplacian(field, grid: Grid) -> np.ndarray:
    return idft(-grid.xi_sq * dft(field, grid), grid)


def deriv(field, axis: int, grid: Grid) -> np.ndarray:
    """Spectral partial derivative along x1 (axis=0) or x2 (axis=1)."""
    return idft(1j * grid.xi[axis] * dft(field, grid), grid)


def divergence(vec, grid: Grid) -> np.ndarray:
    vhat = dft(vec, grid)
    xi1, xi2 = grid.xi
    return idft(1j * (xi1 * vhat[..., 0, :, :] + xi2 * vhat[..., 1, :, :]), grid)


def curl(vec, grid: Grid) -> np.ndarray:
    """nabla_perp . B = d1 B2 - d2 B1."""
    vhat = dft(vec, grid)
    xi1, xi2 = grid.xi
    return idft(1j * (xi1 * vhat[..., 1, :, :] - xi2 * vhat[..., 0, :, :]), grid)


def gradient(field, grid: Grid) -> np.ndarray:
    fhat = dft(field, grid)
    xi1, xi2 = grid.xi
    return idft(np.stack([1j * xi1 * fhat, 1j * xi2 * fhat], axis=-3), grid)


def perp_gradient(field, grid: Grid) -> np.ndarray:
    """nabla_perp h = (-d2 h, d1 h)."""
    fhat = dft(field, grid)
    xi1, xi2 = grid.xi
    return idft(np.stack([-1j * xi2 * fhat, 1j * xi1 * fhat], axis=-3), grid)


def _projector_symbols(grid: Grid):
    xi1, xi2 = grid.xi
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / grid.xi_sq
    inv[0, 0] = 0.0
    cf = np.array([[xi1 * xi1, xi1 * xi2], [xi2 * xi1, xi2 * xi2]]) * inv
    df = np.array([[xi2 * xi2, -xi2 * xi1], [-xi1 * xi2, xi1 * xi1]]) * inv
    return cf, df


def proj_curl_free(vec, grid: Grid) -> np.ndarray:
    """Delta^{-1} nabla (nabla . B)."""
    cf, _ = _projector_symbols(grid)
    vhat = dft(grid.check(vec), grid)
    return idft(np.einsum("ab...ij,...bij->...aij", cf, vhat), grid)


def proj_div_free(vec, grid: Grid) -> np.ndarray:
    """Delta^{-1} nabla_perp (nabla_perp . B)."""
    _, df = _projector_symbols(grid)
    vhat = dft(grid.check(vec), grid)
    return idft(np.einsum("ab...ij,...bij->...aij", df, vhat), grid)


# --------------------------------------------------------------------------
# Littlewood-Paley
# --------------------------------------------------------------------------

def dyadic_range(grid: Grid) -> list[float]:
    """Dyadic scales whose annuli lam/2 < |xi| <= lam meet the lattice."""
    lo = 2.0 ** math.ceil(math.log2(grid.xi_min) - 1e-12)
    hi = 2.0 ** math.ceil(math.log2(grid.xi_max) - 1e-12)
    scales = []
    lam = lo
    while lam <= hi * (1 + 1e-12):
        scales.append(lam)
        lam *= 2
    return scales


def _is_dyadic(lam: float) -> bool:
    return lam > 0 and abs(math.log2(lam) - round(math.log2(lam))) < 1e-12


def annulus_mask(grid: Grid, lam: float) -> np.ndarray:
    r = grid.xi_abs
    return (r > lam / 2) & (r <= lam)


def ball_mask(grid: Grid, radius: float, closed=True) -> np.ndarray:
    """Lattice points with |xi| <= radius (or < radius when closed=False)."""
    return grid.xi_abs <= radius if closed else grid.xi_abs < radius


def lp_project(field, lam: float, grid: Grid) -> np.ndarray:
    """Sharp Littlewood-Paley piece P_lam: lam/2 < |xi| <= lam."""
    if not _is_dyadic(lam):
        raise ValueError(f"scale {lam} is not a power of two")
    mask = annulus_mask(grid, lam)
    if not mask.any():
        warnings.warn(f"dyadic scale {lam} has no lattice points", LatticeWarning, stacklevel=2)
        return np.zeros(grid.check(field).shape, dtype=complex)
    return idft(mask * dft(field, grid), grid)


def lp_low(field, cutoff: float, grid: Grid, closed=False) -> np.ndarray:
    """Projection onto |xi| < cutoff (|xi| <= cutoff with closed=True).

    The zero mode is always kept.
    """
    return idft(ball_mask(grid, cutoff, closed) * dft(field, grid), grid)


def lp_decompose(field, grid: Grid) -> dict[float, np.ndarray]:
    """All dyadic pieces keyed by scale; the key 0.0 holds the mean."""
    fhat = dft(field, grid)
    pieces = {0.0: idft(grid.zero_mode * fhat, grid)}
    for lam in dyadic_range(grid):
        pieces[lam] = idft(annulus_mask(grid, lam) * fhat, grid)
    return pieces


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------

def _pointwise_abs(field, components: int) -> np.ndarray:
    """Pointwise Euclidean magnitude over the ``components`` axes before the grid."""
    a = np.abs(field)
    if components:
        axes = tuple(range(-2 - components, -2))
        a = np.sqrt(np.sum(a * a, axis=axes))
    return a


def lp_norm(field, p: float, grid: Grid, components: int = 0) -> np.ndarray:
    """Grid-quadrature L^p norm; ``p = inf`` is the max.

    ``components`` counts the axes (just before the grid axes) that hold
    field components; the pointwise magnitude is Euclidean across them.
    Leading batch axes are preserved.
    """
    a = _pointwise_abs(grid.check(field), components)
    if np.isinf(p):
        return a.max(axis=(-2, -1))
    return (grid.h ** 2 * np.sum(a ** p, axis=(-2, -1))) ** (1.0 / p)


def l2_norm(field, grid: Grid, components: int = 0) -> np.ndarray:
    return lp_norm(field, 2, grid, components)


def sobolev_weight(grid: Grid, s: float, homogeneous: bool) -> np.ndarray:
    """w^(2s) with w = |xi| or <xi>; the homogeneous zero mode weight is 0 for s != 0."""
    if homogeneous:
        return abs_power(grid, 2 * s)
    return (1.0 + grid.xi_sq) ** s


def sobolev_norm_hat(fhat, s: float, grid: Grid, homogeneous=False, components: int = 0):
    """Sobolev norm from DFT coefficients (see ``sobolev_norm``)."""
    w = sobolev_weight(grid, s, homogeneous)
    a = np.abs(fhat)
    total = np.sum(w * a * a, axis=(-2, -1))
    if components:
        total = np.sum(total, axis=tuple(range(-components, 0)))
    return grid.L / grid.N ** 2 * np.sqrt(total)


def sobolev_norm(field, s: float, grid: Grid, homogeneous=False, components: int = 0):
    """(sum w(xi)^(2s) |fhat|^2)^(1/2), normalized so that s = 0 is the L^2 norm.

    ``homogeneous`` selects w = |xi| (zero mode dropped for s != 0)
    instead of w = (1 + |xi|^2)^(1/2).  Components are square-summed.
    """
    return sobolev_norm_hat(dft(field, grid), s, grid, homogeneous, components)


def time_norm(values, times, q: float, interval=None) -> float:
    """L^q over time of nonnegative samples by the trapezoid rule.

    Endpoints of ``interval`` that fall between samples are handled by
    linear interpolation of values**q.
    """
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.size == 0:
        raise ValueError("empty trajectory")
    if values.shape != times.shape:
        raise ValueError("values and timestamps differ in length")
    if interval is None:
        interval = (times[0], times[-1])
    a, b = interval
    tol = 1e-12 * max(1.0, abs(b))
    if a < times[0] - tol or b > times[-1] + tol or b < a:
        raise ValueError(f"interval {interval} not covered by timestamps")
    inside = (times > a + tol) & (times < b - tol)
    if np.isinf(q):
        ends = np.interp([a, b], times, values)
        return float(max(values[inside].max(initial=0.0), ends.max()))
    vq = values ** q
    t = np.concatenate([[a], times[inside], [b]])
    y = np.concatenate([[np.interp(a, times, vq)], vq[inside], [np.interp(b, times, vq)]])
    if t.size == 1 or b == a:
        return 0.0
    return float(np.trapezoid(y, t) ** (1.0 / q))


def mixed_norm(snapshots, times, q: float, r: float, grid: Grid, interval=None,
               components: int = 0) -> float:
    """L^q_t L^r_x of a trajectory: spatial quadrature per snapshot, trapezoid in time."""
    snapshots = np.asarray(snapshots)
    if snapshots.shape[0] == 0:
        raise ValueError("empty trajectory")
    spatial = lp_norm(snapshots, r, grid, components)
    return time_norm(spatial, times, q, interval)
