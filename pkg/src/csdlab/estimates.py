"""Randomized probes of the space-time estimates behind the cubic Dirac theory.

Each probe draws random data of prescribed regularity, evolves it by
half-wave flows where needed, evaluates both sides of one inequality and
records their ratio.  Constants are never asserted directly; boundedness is
judged by the slope of log(max ratio) against log(scale) over a dyadic sweep.

Geometry.  Probes run on the 2 pi torus, where a dyadic scale lam and a
lattice radius coincide.  At N = 256 the sweep lam <= 64 keeps every datum
inside the outer half of the resolvable band, so bilinear products are
alias-free.  The trilinear product is zero-padded to 3N/2 before its norm
is taken whenever the factors' bandwidths would fold past Nyquist.

Spinor products.  Where an estimate multiplies two spinors without a gamma
matrix in between, psi phi stands for sum_{i,j} psi_i phi_j, which is the
scalar (psi_1 + psi_2)(phi_1 + phi_2).  N(psi, phi) itself is always the
exact operator from ``gauge``.

Layouts.  Time-batched scalars are (nt, N, N); time-batched spinors and
gamma coefficients keep their component axis first, (c, nt, N, N).
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import _fft, _kernels
from .dirac import half_wave_projectors
from .spectral import (Grid, abs_power, annulus_mask, ball_mask, dyadic_range,
                       sobolev_weight, time_norm)

SCALES = (1, 2, 4, 8, 16, 32, 64)
DEFAULT_N = 256
DEFAULT_NT = 64
SLOPE_LIMIT = 0.05


# --------------------------------------------------------------------------
# Records and random data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeRecord:
    probe: str
    series: str
    seed: int
    scale: float
    lhs: float
    rhs: float
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def row(self) -> dict:
        out = {"probe": self.probe, "series": self.series, "scale": self.scale, "seed": self.seed,
               "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}
        out.update(self.params)
        return out


@dataclass(frozen=True)
class RandomDataSpec:
    """Spectral recipe: |fhat| ~ (1 + |xi|)^-(exponent), uniform random phases.

    ``support`` is "annulus" (lam/2 < |xi| <= lam), "ball" (0 < |xi| <= lam)
    or "band" (band[0] <= |xi| <= band[1]; default: 1/8 to 1/2 of the Nyquist
    radius).  The zero mode and Nyquist lines are never populated.  The
    result has unit H^s (or, if homogeneous, unit H-dot^s) norm.
    """
    s: float
    homogeneous: bool = False
    support: str = "band"
    scale: Optional[float] = None
    band: Optional[tuple] = None
    components: int = 1
    exponent: Optional[float] = None


def _support_mask(spec: RandomDataSpec, grid: Grid) -> np.ndarray:
    if spec.support == "annulus":
        mask = annulus_mask(grid, spec.scale)
    elif spec.support == "ball":
        mask = ball_mask(grid, spec.scale)
    elif spec.support == "band":
        kn = math.pi * grid.N / grid.L
        lo, hi = spec.band if spec.band is not None else (kn / 8, kn / 2)
        mask = (grid.xi_abs >= lo) & (grid.xi_abs <= hi)
    else:
        raise ValueError(f"unknown support {spec.support!r}")
    return mask & ~grid.zero_mode & ~grid.nyquist_mask


def random_data_hat(spec: RandomDataSpec, seed, grid: Grid) -> np.ndarray:
    """DFT coefficients of ``random_data``."""
    mask = _support_mask(spec, grid)
    if not mask.any():
        raise ValueError(f"{spec.support} support at scale {spec.scale} has no lattice points")
    rng = np.random.default_rng(seed)
    shape = grid.shape if spec.components == 1 else (spec.components, *grid.shape)
    phase = np.exp(2j * np.pi * rng.random(shape))
    exponent = spec.s + 1 if spec.exponent is None else spec.exponent
    fhat = mask * (1 + grid.xi_abs) ** (-exponent) * phase
    return fhat / _hs(fhat, spec.s, grid, spec.homogeneous, spec.components > 1)


def random_data(spec: RandomDataSpec, seed, grid: Grid) -> np.ndarray:
    return _fft.ifft2(random_data_hat(spec, seed, grid))


# --------------------------------------------------------------------------
# Norm helpers for batched layouts
# --------------------------------------------------------------------------

def _hs(fhat, s, grid: Grid, homogeneous: bool, spinor: bool = False):
    """Sobolev norm of coefficients; a leading component axis is summed if ``spinor``."""
    w = sobolev_weight(grid, s, homogeneous)
    a = np.abs(fhat)
    total = np.sum(w * a * a, axis=(-2, -1))
    if spinor:
        total = total.sum(axis=0)
    return grid.L / grid.N ** 2 * np.sqrt(total)


def _times(interval: float, nt: int) -> np.ndarray:
    if interval <= 0 or nt < 2:
        raise ValueError("need a positive interval and at least 2 time samples")
    return np.linspace(0.0, interval, nt)


_CHUNK = 8


def _chunks(times):
    return [times[k:k + _CHUNK] for k in range(0, len(times), _CHUNK)]


@dataclass(frozen=True)
class _Sparse:
    """Nonzero DFT coefficients of a scalar (m = 1) or spinor (m = 2) datum."""
    vals: np.ndarray  # (m, P)
    ii: np.ndarray
    jj: np.ndarray
    r: np.ndarray     # |xi| at the listed points
    shape: tuple

    def scaled(self, factor) -> "_Sparse":
        return _Sparse(np.ascontiguousarray(self.vals * factor), self.ii, self.jj, self.r, self.shape)

    def padded(self, n: int) -> "_Sparse":
        """The same function on an n x n lattice (n >= N, both even); unnormalized DFT scaling."""
        N = self.shape[0]
        if n == N:
            return self
        shift = lambda i: np.where(i >= N // 2, i + n - N, i)  # noqa: E731
        return _Sparse(np.ascontiguousarray(self.vals * (n / N) ** 2), shift(self.ii), shift(self.jj),
                       self.r, (n, n))

    def summed(self) -> "_Sparse":
        """Footnote convention: a spinor entering a bare product contributes psi_1 + psi_2."""
        return _Sparse(self.vals.sum(axis=0, keepdims=True), self.ii, self.jj, self.r, self.shape)


def _sparse(fhat, grid: Grid, rtol: float = 0.0) -> _Sparse:
    """Nonzero coefficients; with ``rtol``, those below rtol * max are treated as roundoff."""
    f = np.asarray(fhat, dtype=complex)
    f = f[None] if f.ndim == 2 else f
    a = np.abs(f)
    ii, jj = np.nonzero(np.any(a > rtol * a.max(initial=0.0), axis=0))
    return _Sparse(np.ascontiguousarray(f[:, ii, jj]), ii.astype(np.int64), jj.astype(np.int64),
                   np.ascontiguousarray(grid.xi_abs[ii, jj]), grid.shape)


def _flow(sp: _Sparse, t, sign: int) -> np.ndarray:
    """Coefficients of e^{sign i t |nabla|} at the times t, shape (m, len(t), N, N)."""
    out = np.zeros((sp.vals.shape[0], len(t), *sp.shape), dtype=complex)
    for a in range(sp.vals.shape[0]):
        _kernels.flow_fill(sp.vals[a], sp.ii, sp.jj, sp.r, np.asarray(t, float), float(sign), out[a])
    return out


@lru_cache(maxsize=8)
def _lattice_abs(n: int, L: float) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n) * 2 * np.pi / L
    r = np.hypot(k[:, None], k[None, :])
    r.flags.writeable = False
    return r


def _weights(n: int, L: float, s: float, homogeneous: bool) -> np.ndarray:
    """Sobolev weight w^(2s) on an n x n lattice of side L (zero mode 0 when homogeneous)."""
    r = _lattice_abs(n, L)
    if homogeneous:
        with np.errstate(divide="ignore"):
            w = r ** (2 * s) if s else np.ones_like(r)
        w[0, 0] = 0.0 if s else 1.0
        return w
    return (1.0 + r * r) ** s


def _from_sq(total, n: int, L: float):
    return L / n ** 2 * np.sqrt(total)


@lru_cache(maxsize=8)
def _n_symbols(n: int, L: float):
    """Symbols of Delta^{-1} d_1, Delta^{-1} d_2 on an n x n lattice, Nyquist lines dropped."""
    k = np.fft.fftfreq(n, d=1.0 / n) * 2 * np.pi / L
    k1, k2 = k[:, None], k[None, :]
    r2 = k1 * k1 + k2 * k2
    r2[0, 0] = 1.0
    inv = -1.0 / r2
    inv[0, 0] = 0.0
    inv[n // 2, :] = 0.0
    inv[:, n // 2] = 0.0
    return np.ascontiguousarray(1j * k1 * inv), np.ascontiguousarray(1j * k2 * inv)


def _n_chunks(psp: _Sparse, qsp: _Sparse, signs, L: float, times):
    """Yield (t, coefficients of N(psi, phi) at t) for psi, phi half-wave flows, chunk by chunk.

    Works on the lattice of ``psp``; callers pad so that the bilinear
    bandwidth stays strictly inside its Nyquist radius.
    """
    d1, d2 = _n_symbols(psp.shape[0], L)
    for t in _chunks(times):
        psi = _fft.ifft2(_flow(psp, t, signs[0]))
        phi = _fft.ifft2(_flow(qsp, t, signs[1]))
        b = np.empty((3, *psi.shape[1:]), dtype=complex)
        _kernels.bilinear_fields(psi, phi, b)
        bh = _fft.fft2(b)
        _kernels.n_from_bilinears(bh, d1, d2, b)
        yield t, b


def _smooth(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


def _padded_size(grid: Grid, bandwidth: float) -> int:
    """Smallest even 2-3-5-smooth size >= N whose Nyquist radius strictly exceeds ``bandwidth``.

    Strict, because +k and -k share the Nyquist bin.  ``bandwidth`` is a radius
    in wavenumber units.
    """
    kmax = bandwidth * grid.L / (2 * math.pi)
    n = grid.N
    while n / 2 <= kmax + 1e-9 or not _smooth(n):
        n += 2
    return n


def _pad(fhat, n: int):
    """Zero-pad centered DFT coefficients from N to n (n >= N) along the last two axes."""
    N = fhat.shape[-1]
    if n == N:
        return fhat
    out = np.zeros(fhat.shape[:-2] + (n, n), dtype=complex)
    h = N // 2
    idx = np.r_[0:h, n - h:n]
    out[..., idx[:, None], idx[None, :]] = fhat
    return out * (n / N) ** 2


# --------------------------------------------------------------------------
# Seeds, statistics and the trial harness
# --------------------------------------------------------------------------

def trial_seed(master: int, probe: str, scale_index: int, trial: int) -> int:
    """Deterministic per-trial seed derived from the master seed."""
    ss = np.random.SeedSequence(entropy=int(master),
                                spawn_key=(zlib.crc32(probe.encode()), scale_index, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def _run(worker: Callable, tasks: list, workers: int) -> list:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(worker, tasks))
    else:
        chunks = [worker(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=lambda r: (r.scale, r.seed, r.series))


def _tasks(name, scales, trials, master, grid, extra):
    return [(grid.N, grid.L, lam, trial_seed(master, name, i, k), k, extra)
            for i, lam in enumerate(scales) for k in range(trials)]


def fit_slope(scales, values) -> float:
    """Least-squares slope of log(value) against log(scale); non-positive values are skipped."""
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(scales[keep]), np.log(values[keep]), 1)[0])


def summarize(records) -> dict:
    """Per (probe, series): per-scale max/mean ratio, trial count and fitted slope of the max."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.probe, r.series), {}).setdefault(r.scale, []).append(r.ratio)
    out = {}
    for key, by_scale in sorted(groups.items()):
        scales = sorted(by_scale)
        mx = [float(np.max(by_scale[l])) for l in scales]
        mean = [float(np.mean(by_scale[l])) for l in scales]
        out[key] = {"scales": scales, "max": mx, "mean": mean,
                    "trials": [len(by_scale[l]) for l in scales],
                    "slope": fit_slope(scales, mx)}
    return out


def bounded(summary: dict, limit: float = SLOPE_LIMIT) -> dict:
    """Slope verdict per series; a series with fewer than two nonzero scales fails."""
    return {key: bool(np.isfinite(v["slope"]) and v["slope"] <= limit) for key, v in summary.items()}


# --------------------------------------------------------------------------
# Bilinear Strichartz estimate
# --------------------------------------------------------------------------

def strichartz_exponent(a: float, r: float) -> float:
    return 0.75 * (1 - 1 / r) - a / 2


def check_strichartz(a: float, q: Optional[float], r: float, s: Optional[float]):
    """Validate (a, q, r, s); returns the completed (a, q, r, s)."""
    if not (1 <= r < math.inf):
        raise ValueError(f"r must be finite and >= 1, got {r}")
    q_forced = 1.0 / (0.5 - 0.5 / r) if r > 1 else math.inf
    if q is None:
        q = q_forced
    elif abs(1 / q + 1 / (2 * r) - 0.5) > 1e-12:
        raise ValueError(f"(q, r) = ({q}, {r}) violates 1/q + 1/(2r) = 1/2")
    if not (0 <= a < 1 - 1 / r):
        raise ValueError(f"a = {a} outside [0, 1 - 1/r)")
    s_forced = strichartz_exponent(a, r)
    if s is None:
        s = s_forced
    elif abs(s - s_forced) > 1e-12:
        raise ValueError(f"s = {s} but the admissible exponent is {s_forced}")
    return a, q, r, s


def _bilinear_spatial(u, v, a, r, grid: Grid):
    """Per-time || |nabla|^-a (u v) ||_{L^r} for (c, N, N) batches."""
    if a:
        w = np.empty_like(u)
        _kernels.multiply(u, v, w)
        w = _fft.ifft2(abs_power(grid, -a) * _fft.fft2(w))
        acc = _kernels.abs_pow_sum(w, float(r))
    else:
        acc = _kernels.product_abs_pow_sum(u, v, float(r))
    return (grid.h ** 2 * acc) ** (1.0 / r)


def _strichartz_lhs(fsp: _Sparse, gsp: _Sparse, signs, a, q, r, grid: Grid, times) -> dict:
    """lhs per sign of v, with u = e^{it|nabla|} f and v = e^{sign it|nabla|} g."""
    spatial = {sg: [] for sg in signs}
    for t in _chunks(times):
        u = _fft.ifft2(_flow(fsp, t, 1))[0]
        for sg in signs:
            v = _fft.ifft2(_flow(gsp, t, sg))[0]
            spatial[sg].append(_bilinear_spatial(u, v, a, r, grid))
    return {sg: time_norm(np.concatenate(x), times, q) for sg, x in spatial.items()}


def strichartz_sides(f, g, grid: Grid, a=0.0, q=None, r=2.0, sign=1, interval=1.0,
                     nt=DEFAULT_NT, s=None):
    """(lhs, rhs) = (|| |nabla|^-a (u v) ||_{L^q L^r}, ||f||_{H-dot^s} ||g||_{H-dot^s})."""
    a, q, r, s = check_strichartz(a, q, r, s)
    fh, gh = _fft.fft2(np.asarray(f, complex)), _fft.fft2(np.asarray(g, complex))
    lhs = _strichartz_lhs(_sparse(fh, grid), _sparse(gh, grid), (sign,), a, q, r, grid,
                          _times(interval, nt))[sign]
    return lhs, float(_hs(fh, s, grid, True) * _hs(gh, s, grid, True))


def _strichartz_trial(task):
    n, L, lam, seed, _, (a, q, r, s, interval, nt) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    spec = RandomDataSpec(s=s, homogeneous=True, support="annulus", scale=lam)
    fh = random_data_hat(spec, rng, grid)
    gh = random_data_hat(spec, rng, grid)
    lhs = _strichartz_lhs(_sparse(fh, grid), _sparse(gh, grid), (1, -1), a, q, r, grid,
                          _times(interval, nt))
    rhs = float(_hs(fh, s, grid, True) * _hs(gh, s, grid, True))
    params = {"s": s, "a": a, "q": q, "r": r, "interval": interval}
    return [ProbeRecord("bilinear_strichartz", "+" if sg > 0 else "-", seed, lam, lhs[sg], rhs,
                        dict(params, sign=sg)) for sg in (1, -1)]


def probe_bilinear_strichartz(s=None, a=0.0, q=None, r=2.0, trials=100, scales=SCALES, seed=0,
                              N=DEFAULT_N, L=2 * math.pi, interval=1.0, nt=DEFAULT_NT, workers=1):
    """Ratios for u = e^{it|nabla|} f, v = e^{+-it|nabla|} g, both signs per trial."""
    a, q, r, s = check_strichartz(a, q, r, s)
    grid = Grid(N, L)
    return _run(_strichartz_trial,
                _tasks("bilinear_strichartz", scales, trials, seed, grid, (a, q, r, s, interval, nt)),
                workers)


# --------------------------------------------------------------------------
# Bounds on N(psi, phi)
# --------------------------------------------------------------------------

def check_cubic_s(s, explore=False):
    if not explore and not (0.25 < s <= 0.5):
        raise ValueError(f"s = {s} outside (1/4, 1/2]")


def _n_estimate_lhs(fsp, gsp, signs, s, grid: Grid, times):
    """(||N||_{L^2 L^inf}, || |nabla|^{s+1/2} N ||_{L^4 L^2})."""
    n = _padded_size(grid, float(fsp.r.max(initial=0.0) + gsp.r.max(initial=0.0)))
    fsp, gsp = fsp.padded(n), gsp.padded(n)
    w = _weights(n, grid.L, s + 0.5, True)
    sup, energy = [], []
    for _, c_hat in _n_chunks(fsp, gsp, signs, grid.L, times):
        energy.append(_kernels.weighted_sq_sum(c_hat, w))
        sup.append(_kernels.component_sup(_fft.ifft2(c_hat)))
    energy = _from_sq(np.concatenate(energy), n, grid.L)
    return time_norm(np.concatenate(sup), times, 2), time_norm(energy, times, 4)


def n_estimate_sides(f, g, s, grid: Grid, signs=(1, 1), interval=1.0, nt=DEFAULT_NT, explore=False):
    """(L^2 L^inf lhs, L^4 H-dot^{s+1/2} lhs, rhs) for psi, phi the flows of spinors f, g."""
    check_cubic_s(s, explore)
    fh, gh = _fft.fft2(np.asarray(f, complex)), _fft.fft2(np.asarray(g, complex))
    # physical-space input: FFT roundoff must not widen the detected bandwidth
    lhs1, lhs2 = _n_estimate_lhs(_sparse(fh, grid, 1e-14), _sparse(gh, grid, 1e-14), signs, s, grid,
                                 _times(interval, nt))
    return lhs1, lhs2, float(_hs(fh, s, grid, False, True) * _hs(gh, s, grid, False, True))


_SIGN_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _n_trial(task):
    n, L, lam, seed, k, (s, interval, nt) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    spec = RandomDataSpec(s=s, support="annulus", scale=lam, components=2)
    fh = random_data_hat(spec, rng, grid)
    gh = random_data_hat(spec, rng, grid)
    # one sign pair per trial, cycling so that every scale sees all four equally often
    signs = _SIGN_PAIRS[k % 4]
    lhs1, lhs2 = _n_estimate_lhs(_sparse(fh, grid), _sparse(gh, grid), signs, s, grid,
                                 _times(interval, nt))
    rhs = float(_hs(fh, s, grid, False, True) * _hs(gh, s, grid, False, True))
    params = {"s": s, "signs": f"{signs[0]:+d}{signs[1]:+d}", "interval": interval}
    return [ProbeRecord("N_estimate", "L2Linf", seed, lam, lhs1, rhs, params),
            ProbeRecord("N_estimate", "L4H", seed, lam, lhs2, rhs, params)]


def probe_N_estimate(s=0.3, trials=100, scales=SCALES, seed=0, N=DEFAULT_N, L=2 * math.pi,
                     interval=1.0, nt=DEFAULT_NT, workers=1, explore=False):
    check_cubic_s(s, explore)
    grid = Grid(N, L)
    return _run(_n_trial, _tasks("N_estimate", scales, trials, seed, grid, (s, interval, nt)), workers)


# --------------------------------------------------------------------------
# Product rule and its paraproduct pieces
# --------------------------------------------------------------------------

def paraproducts(fh, gh, grid: Grid):
    """DFTs of (HL, diagonal, LH, fg) with HL = sum_lam f_lam g_{<= lam/8}, LH the mirror.

    The diagonal piece is the remainder fg - HL - LH.  The zero mode of
    either factor counts as lower than every scale.
    """
    HL = np.zeros(grid.shape, complex)
    LH = np.zeros(grid.shape, complex)
    for lam in dyadic_range(grid):
        shell = annulus_mask(grid, lam)
        low = ball_mask(grid, lam / 8)
        f_shell, g_shell = _fft.ifft2(shell * fh), _fft.ifft2(shell * gh)
        f_low, g_low = _fft.ifft2(low * fh), _fft.ifft2(low * gh)
        HL += f_shell * g_low
        LH += f_low * g_shell
    full = _fft.ifft2(fh) * _fft.ifft2(gh)
    return _fft.fft2(HL), _fft.fft2(full - HL - LH), _fft.fft2(LH), _fft.fft2(full)


def product_rule_sides(f, g, s, alpha, grid: Grid) -> dict:
    """Both right-side terms, the left side and the three paraproduct norms."""
    fh, gh = _fft.fft2(np.asarray(f, complex)), _fft.fft2(np.asarray(g, complex))
    return _product_rule_hat(fh, gh, s, alpha, grid)


def _product_rule_hat(fh, gh, s, alpha, grid: Grid) -> dict:
    if s <= 0 or alpha < 0:
        raise ValueError("need s > 0 and alpha >= 0")
    hl, diag, lh, full = paraproducts(fh, gh, grid)
    term1 = float(np.abs(_fft.ifft2(fh)).max() * _hs(gh, s, grid, True))
    g_neg = _fft.ifft2(abs_power(grid, -alpha) * gh)
    term2 = float(_hs(fh, s + alpha, grid, True) * np.abs(g_neg).max())
    return {"full": float(_hs(full, s, grid, True)), "HL": float(_hs(hl, s, grid, True)),
            "diag": float(_hs(diag, s, grid, True)), "LH": float(_hs(lh, s, grid, True)),
            "term1": term1, "term2": term2}


def _product_trial(task):
    n, L, lam, seed, _, (s, alpha) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    shells = [lam] + ([lam / 8] if annulus_mask(grid, lam / 8).any() else [])
    fh = np.zeros(grid.shape, complex)
    gh = np.zeros(grid.shape, complex)
    for mu in shells:
        spec = RandomDataSpec(s=s, homogeneous=True, support="annulus", scale=mu)
        fh += random_data_hat(spec, rng, grid)
        gh += random_data_hat(spec, rng, grid)
    # coefficients passed directly: a physical-space round trip would leave roundoff in empty pieces
    d = _product_rule_hat(fh, gh, s, alpha, grid)
    params = {"s": s, "alpha": alpha}
    return [ProbeRecord("product_rule", "full", seed, lam, d["full"], d["term1"] + d["term2"], params),
            ProbeRecord("product_rule", "HL", seed, lam, d["HL"], d["term2"], params),
            ProbeRecord("product_rule", "diag", seed, lam, d["diag"], d["term1"], params),
            ProbeRecord("product_rule", "LH", seed, lam, d["LH"], d["term1"], params)]


def probe_product_rule(s=0.5, alpha=0.5, trials=100, scales=SCALES, seed=0, N=DEFAULT_N,
                       L=2 * math.pi, workers=1):
    """f and g each the sum of unit H-dot^s pieces on the shells lam and lam/8.

    The data scale with lam, so every paraproduct piece sees the same
    configuration at every scale: HL contains f_lam g_{lam/8}, LH contains
    f_{lam/8} g_lam and the diagonal f_lam g_lam.  Below lam = 8 the lower
    shell holds no lattice points; HL and LH are then zero, recorded, and
    skipped by the slope fit.
    """
    if s <= 0 or alpha < 0:
        raise ValueError("need s > 0 and alpha >= 0")
    grid = Grid(N, L)
    return _run(_product_trial, _tasks("product_rule", scales, trials, seed, grid, (s, alpha)), workers)


# --------------------------------------------------------------------------
# Homogeneous product estimate
# --------------------------------------------------------------------------

def check_homogeneous(s1, s2, s3):
    if abs(s1 + s2 + s3 - 1.0) > 1e-12:
        raise ValueError(f"s1 + s2 + s3 = {s1 + s2 + s3}, must equal 1 in two dimensions")
    if min(s1 + s2, s1 + s3, s2 + s3) <= 0:
        raise ValueError("pairwise sums s_j + s_k must be positive")


def homogeneous_product_sides(f, g, s1, s2, s3, grid: Grid):
    check_homogeneous(s1, s2, s3)
    fh, gh = _fft.fft2(np.asarray(f, complex)), _fft.fft2(np.asarray(g, complex))
    prod = _fft.fft2(_fft.ifft2(fh) * _fft.ifft2(gh))
    return float(_hs(prod, -s1, grid, True)), float(_hs(fh, s2, grid, True) * _hs(gh, s3, grid, True))


def _homogeneous_trial(task):
    n, L, lam, seed, _, (s1, s2, s3) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    f = random_data(RandomDataSpec(s=s2, homogeneous=True, support="annulus", scale=lam), rng, grid)
    g = random_data(RandomDataSpec(s=s3, homogeneous=True, support="annulus", scale=lam), rng, grid)
    lhs, rhs = homogeneous_product_sides(f, g, s1, s2, s3, grid)
    return [ProbeRecord("homogeneous_product", "full", seed, lam, lhs, rhs,
                        {"s1": s1, "s2": s2, "s3": s3})]


def probe_homogeneous_product(s1=None, s2=None, s3=None, s=0.25, trials=100, scales=SCALES, seed=0,
                              N=DEFAULT_N, L=2 * math.pi, workers=1):
    """Defaults to (s1, s2, s3) = (1 - 2s, s, s)."""
    if s1 is None and s2 is None and s3 is None:
        if not 0 < s < 0.5:
            raise ValueError("default exponents need 0 < s < 1/2")
        s1, s2, s3 = 1 - 2 * s, s, s
    check_homogeneous(s1, s2, s3)
    grid = Grid(N, L)
    return _run(_homogeneous_trial,
                _tasks("homogeneous_product", scales, trials, seed, grid, (s1, s2, s3)), workers)


# --------------------------------------------------------------------------
# Trilinear estimate
# --------------------------------------------------------------------------

def trilinear_sides(fhats, signs, s, grid: Grid, interval=1.0, nt=DEFAULT_NT, explore=False) -> dict:
    """Norms for N(psi_1, psi_2) psi_3 with psi_j = e^{sign_j i t |nabla|} f_j.

    Returns ``full`` = ||N psi_3||_{L^2 H^s}, the low-frequency split
    (``low`` = ||P_{<=1}(N psi_3)||_{L^2 H^s} against ``low_bound`` =
    ||N||_{L^2 L^inf} ||psi_3||_{L^inf L^2}) and the homogeneous split
    (``hom`` = ||N psi_3||_{L^2 H-dot^s} against ``hom_bound`` =
    ||N||_{L^2 L^inf} || |nabla|^s psi_3 ||_{L^inf L^2}
    + || |nabla|^{s+1/2} N ||_{L^4 L^2} || |nabla|^{-1/2} psi_3 ||_{L^4 L^inf}).
    """
    check_cubic_s(s, explore)
    times = _times(interval, nt)
    sps = [_sparse(fh, grid) for fh in fhats]
    radii = [float(sp.r.max(initial=0.0)) for sp in sps]
    n_bil = _padded_size(grid, radii[0] + radii[1])
    n_pad = max(n_bil, _padded_size(grid, sum(radii)))
    w_full = _weights(n_pad, grid.L, s, False)
    w_hom = _weights(n_pad, grid.L, s, True)
    w_low = w_full * (_lattice_abs(n_pad, grid.L) <= 1.0)
    w_half = _weights(n_bil, grid.L, s + 0.5, True)
    with np.errstate(divide="ignore"):
        neg = np.where(sps[2].r > 0, sps[2].r, np.inf) ** -0.5
    p3_neg_sp = sps[2].scaled(neg)
    acc = {k: [] for k in ("full", "hom", "low", "n_sup", "n_energy", "p3_neg")}
    for t, c_hat in _n_chunks(sps[0].padded(n_bil), sps[1].padded(n_bil), signs, grid.L, times):
        c = _fft.ifft2(c_hat)
        acc["n_sup"].append(_kernels.component_sup(c))
        acc["n_energy"].append(_kernels.weighted_sq_sum(c_hat, w_half))
        acc["p3_neg"].append(_kernels.component_sup(_fft.ifft2(_flow(p3_neg_sp, t, signs[2]))))
        p3_hat = _flow(sps[2], t, signs[2])
        if n_pad != n_bil:
            c = _fft.ifft2(_pad(c_hat, n_pad))
        p3 = _fft.ifft2(_pad(p3_hat, n_pad))
        _kernels.gamma_apply(c, p3, p3)
        prod = _fft.fft2(p3)
        for key, w in (("full", w_full), ("hom", w_hom), ("low", w_low)):
            acc[key].append(_kernels.weighted_sq_sum(prod, w))
    v = {k: np.concatenate(x) for k, x in acc.items()}
    for key in ("full", "hom", "low"):
        v[key] = _from_sq(v[key], n_pad, grid.L)
    v["n_energy"] = _from_sq(v["n_energy"], n_bil, grid.L)
    n_l2linf = time_norm(v["n_sup"], times, 2)
    # half-wave flows preserve every Sobolev norm of psi_3
    p3_l2 = float(_hs(fhats[2], 0.0, grid, False, True))
    p3_hs = float(_hs(fhats[2], s, grid, True, True))
    return {
        "full": time_norm(v["full"], times, 2),
        "low": time_norm(v["low"], times, 2),
        "low_bound": n_l2linf * p3_l2,
        "hom": time_norm(v["hom"], times, 2),
        "hom_bound": n_l2linf * p3_hs + time_norm(v["n_energy"], times, 4) * time_norm(v["p3_neg"], times, 4),
        "rhs": float(np.prod([_hs(fh, s, grid, False, True) for fh in fhats])),
    }


def _trilinear_trial(task):
    n, L, lam, seed, _, (s, interval, nt, explore) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    spec = RandomDataSpec(s=s, support="annulus", scale=lam, components=2)
    fhats = [random_data_hat(spec, rng, grid) for _ in range(3)]
    signs = tuple(int(x) for x in rng.choice([-1, 1], size=3))
    d = trilinear_sides(fhats, signs, s, grid, interval, nt, explore)
    params = {"s": s, "signs": "".join(f"{x:+d}" for x in signs), "interval": interval}
    out = [ProbeRecord("trilinear", "full", seed, lam, d["full"], d["rhs"], params),
           ProbeRecord("trilinear", "low_split", seed, lam, d["low"], d["low_bound"], params),
           ProbeRecord("trilinear", "hom_split", seed, lam, d["hom"], d["hom_bound"], params)]
    return [r for r in out if r.rhs > 0]


def probe_trilinear(s=0.3, trials=100, scales=SCALES, seed=0, N=DEFAULT_N, L=2 * math.pi,
                    interval=1.0, nt=DEFAULT_NT, workers=1, explore=False):
    check_cubic_s(s, explore)
    grid = Grid(N, L)
    return _run(_trilinear_trial, _tasks("trilinear", scales, trials, seed, grid, (s, interval, nt, explore)),
                workers)


# --------------------------------------------------------------------------
# Transference
# --------------------------------------------------------------------------

def _driven_points(fhat, hhat, omega, grid: Grid, times):
    """Driven solution at the union support of f and h: (points (ii, jj), values (2, nt, P))."""
    ii, jj = np.nonzero(np.any((fhat != 0) | (hhat != 0), axis=0))
    lp, lm = half_wave_projectors(grid)
    r = grid.xi_abs[ii, jj]
    t = np.asarray(times)[:, None]
    out = np.zeros((2, len(times), len(ii)), dtype=complex)
    for sign, P in ((1, lp), (-1, lm)):
        Pp = P[:, :, ii, jj]
        pf = np.einsum("abp,bp->ap", Pp, fhat[:, ii, jj])
        ph = np.einsum("abp,bp->ap", Pp, hhat[:, ii, jj])
        w = omega - sign * r
        small = np.abs(w) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            integral = np.where(small, t + 0j, (np.exp(1j * w * t) - 1) / np.where(small, 1.0, 1j * w))
        out += np.exp(sign * 1j * t * r) * (pf[:, None] + integral * ph[:, None])
    return (ii, jj), out


def driven_solution_hat(fhat, hhat, omega, grid: Grid, times) -> np.ndarray:
    """Exact psi(t) = U(t) f + int_0^t U(t - s) e^{i omega s} h ds on coefficients, (2, nt, N, N).

    With U(t) = e^{it|xi|} L_+ + e^{-it|xi|} L_-, each branch integrates in
    closed form: int_0^t e^{+-i(t-s)|xi|} e^{i omega s} ds
    = e^{+-it|xi|} (e^{i(omega -+ |xi|)t} - 1) / (i(omega -+ |xi|)).
    """
    (ii, jj), vals = _driven_points(np.asarray(fhat, complex), np.asarray(hhat, complex), omega, grid, times)
    out = np.zeros((2, len(times), *grid.shape), dtype=complex)
    out[:, :, ii, jj] = vals
    return out


def transference_sides(fhat, hhat, omega, g0hat, grid: Grid, a=0.0, q=None, r=2.0, s=None,
                       interval=1.0, nt=DEFAULT_NT):
    """(lhs, rhs) for M psi = |nabla|^-a ((psi_1 + psi_2) e^{it|nabla|} g0).

    rhs = ||psi||_{Y^s_T} ||g0||_{H-dot^s}.  The source e^{i omega t} h gives
    gamma^mu d_mu psi = gamma^0 e^{i omega t} h, whose H^s norm is constant,
    so ||psi||_{Y^s_T} = sup_t ||psi||_{H^s} + T ||h||_{H^s}.  With h = 0
    this is the free case.
    """
    a, q, r, s = check_strichartz(a, q, r, s)
    times = _times(interval, nt)
    fhat, hhat = np.asarray(fhat, complex), np.asarray(hhat, complex)
    (ii, jj), vals = _driven_points(fhat, hhat, omega, grid, times)
    w = sobolev_weight(grid, s, False)[ii, jj]
    sup = float(_from_sq(np.max(np.sum(w * np.abs(vals) ** 2, axis=(0, 2))), grid.N, grid.L))
    y = sup + interval * float(_hs(hhat, s, grid, False, True))
    rhs = y * float(_hs(g0hat, s, grid, True))
    usum = vals.sum(axis=0)
    gsp = _sparse(g0hat, grid)
    spatial = []
    for k in range(0, nt, _CHUNK):
        t = times[k:k + _CHUNK]
        uh = np.zeros((len(t), *grid.shape), dtype=complex)
        uh[:, ii, jj] = usum[k:k + _CHUNK]
        u = _fft.ifft2(uh)
        v = _fft.ifft2(_flow(gsp, t, 1))[0]
        spatial.append(_bilinear_spatial(u, v, a, r, grid))
    return time_norm(np.concatenate(spatial), times, q), rhs


def _transference_trial(task):
    n, L, lam, seed, _, (a, q, r, s, interval, nt, master) = task
    grid = Grid(n, L)
    rng = np.random.default_rng(seed)
    spec = RandomDataSpec(s=s, support="annulus", scale=lam, components=2)
    fhat = random_data_hat(spec, rng, grid)
    hhat = rng.random() * random_data_hat(spec, rng, grid)
    omega = float(rng.uniform(-2 * lam, 2 * lam))
    # the multiplier's fixed factor: one datum per scale, shared by all trials
    g0hat = random_data_hat(RandomDataSpec(s=s, homogeneous=True, support="annulus", scale=lam),
                            [master, int(lam)], grid)
    lhs, rhs = transference_sides(fhat, hhat, omega, g0hat, grid, a, q, r, s, interval, nt)
    return [ProbeRecord("transference", "full", seed, lam, lhs, rhs,
                        {"s": s, "a": a, "q": q, "r": r, "omega": omega, "interval": interval})]


def probe_transference(s=None, a=0.0, q=None, r=2.0, trials=100, scales=SCALES, seed=0,
                       N=DEFAULT_N, L=2 * math.pi, interval=1.0, nt=DEFAULT_NT, workers=1):
    """Driven solutions with random data f and random source e^{i omega t} h."""
    a, q, r, s = check_strichartz(a, q, r, s)
    grid = Grid(N, L)
    return _run(_transference_trial,
                _tasks("transference", scales, trials, seed, grid, (a, q, r, s, interval, nt, seed)),
                workers)


# --------------------------------------------------------------------------
# Registry and sanity gates
# --------------------------------------------------------------------------

PROBES = {
    "bilinear_strichartz": probe_bilinear_strichartz,
    "N_estimate": probe_N_estimate,
    "product_rule": probe_product_rule,
    "homogeneous_product": probe_homogeneous_product,
    "trilinear": probe_trilinear,
    "transference": probe_transference,
}


def sanity_gates(grid: Grid, s=0.3) -> dict[str, bool]:
    """Every probe's left side must vanish exactly on zero input."""
    zs = np.zeros(grid.shape, complex)
    zsp = np.zeros((2, *grid.shape), complex)
    rng = np.random.default_rng(0)
    f = random_data(RandomDataSpec(s=0.375, homogeneous=True), rng, grid)
    fsp = random_data_hat(RandomDataSpec(s=s, components=2), rng, grid)
    const = np.ones((2, *grid.shape), complex)
    nt = 8
    gates = {
        "bilinear_strichartz[g=0]": strichartz_sides(f, zs, grid, nt=nt)[0] == 0.0,
        "bilinear_strichartz[f=0]": strichartz_sides(zs, f, grid, nt=nt)[0] == 0.0,
        "N_estimate[0]": n_estimate_sides(zsp, zsp, s, grid, nt=nt)[:2] == (0.0, 0.0),
        "N_estimate[const]": n_estimate_sides(const, const, s, grid, nt=nt)[:2] == (0.0, 0.0),
        "product_rule[g=0]": product_rule_sides(f, zs, 0.5, 0.5, grid)["full"] == 0.0,
        "homogeneous_product[0]": homogeneous_product_sides(zs, f, 0.5, 0.25, 0.25, grid)[0] == 0.0,
        "trilinear[0]": trilinear_sides([fsp, fsp, np.zeros_like(fsp)], (1, 1, 1), s, grid,
                                        nt=nt)["full"] == 0.0,
        "transference[0]": transference_sides(np.zeros_like(fsp), np.zeros_like(fsp), 0.0,
                                              _fft.fft2(f), grid, nt=nt)[0] == 0.0,
    }
    return {k: bool(v) for k, v in gates.items()}
