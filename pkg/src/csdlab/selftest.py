"""Invariant suite of every module at 32^2 and 64^2.

``selftest(fault=...)`` accepts a fault-injection hook: ``"gamma"`` flips the
sign of one entry of gamma^1 before the gamma-algebra check, which must then
fail.  All data come from fixed seeds, so reports are identical across runs.
"""
from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from . import estimates, io
from .config import ConfigError, parse_config
from .dirac import (GAMMA, check_gamma_algebra, dirac_current, dirac_current_matrix, free_propagator,
                    half_wave_projectors, propagator_symbol)
from .evolution import charge, evolve, gaussian_spinor, picard_iterate
from .gauge import (bilinear_N, coulomb_residual, curl_residual, cubic_term, gauge_times_spinor,
                    reconstruct_gauge)
from .spectral import (Grid, curl, dft, divergence, idft, l2_norm, proj_curl_free, proj_div_free,
                       sobolev_norm)

FAULTS = ("gamma",)


def _rng(tag: str, n: int):
    return np.random.default_rng([sum(tag.encode()), n])


def _mean_zero(rng, shape, grid):
    v = rng.standard_normal(shape)
    return v - v.mean(axis=(-2, -1), keepdims=True)


def _spinor(rng, grid, amp=1.0):
    f = gaussian_spinor(grid, width=grid.L / 8, momentum=(2.0, -1.0), s=0.5)
    noise = rng.standard_normal((2, *grid.shape)) + 1j * rng.standard_normal((2, *grid.shape))
    return amp * (f + 0.05 * _smooth(noise, grid))


def _smooth(field, grid):
    return idft(dft(field, grid) * np.exp(-grid.xi_sq / 4), grid)


def _rel(a, b, grid):
    return float(l2_norm(a - b, grid, components=1) / max(float(l2_norm(b, grid, components=1)), 1e-300))


def _checks_gamma(fault):
    gammas = GAMMA.copy()
    if fault == "gamma":
        gammas[1, 0, 1] = -gammas[1, 0, 1]
    rel = check_gamma_algebra(gammas)
    bad = sum(not v for v in rel.values())
    return [("gamma_algebra", None, bad == 0, float(bad), 0.0)]


def _checks_grid(grid: Grid):
    n = grid.N
    rng = _rng("grid", n)
    out = []
    u = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    out.append(("dft_roundtrip", n, None, float(np.max(np.abs(idft(dft(u, grid), grid) - u))), 1e-12))
    parseval = abs(float(l2_norm(u, grid)) - grid.L / n ** 2 * math.sqrt(np.sum(np.abs(dft(u, grid)) ** 2)))
    out.append(("parseval", n, None, parseval, 1e-10))

    v = _mean_zero(rng, (2, *grid.shape), grid)
    cf, df = proj_curl_free(v, grid), proj_div_free(v, grid)
    resid = max(float(l2_norm(cf + df - v, grid, components=1)),
                float(l2_norm(proj_curl_free(cf, grid) - cf, grid, components=1)),
                float(l2_norm(proj_div_free(df, grid) - df, grid, components=1)),
                float(l2_norm(proj_div_free(cf, grid), grid, components=1)),
                float(l2_norm(divergence(df, grid), grid)),
                float(l2_norm(curl(cf, grid), grid)))
    out.append(("projections", n, None, resid, 1e-10))

    psi = _spinor(rng, grid)
    cur = float(np.max(np.abs(dirac_current(psi) - dirac_current_matrix(psi).real)))
    out.append(("dirac_current", n, None, cur, 1e-12))
    gauge = reconstruct_gauge(psi, grid)
    out.append(("substitution", n, None, _rel(gauge_times_spinor(gauge, psi), cubic_term(psi, grid), grid), 1e-10))
    out.append(("coulomb", n, None, coulomb_residual(gauge, grid), 1e-10))
    out.append(("curl_constraint", n, None, curl_residual(gauge, psi, grid), 1e-10))
    nmat = bilinear_N(psi, psi, grid)
    herm = float(np.max(np.abs(np.einsum("ab...->ba...", nmat).conj()
                               - np.einsum("ab,bc...,cd->ad...", GAMMA[0], nmat, GAMMA[0]))))
    out.append(("N_adjoint", n, None, herm, 1e-12))

    lp, lm = half_wave_projectors(grid)
    mul = lambda a, b: np.einsum("ab...,bc...->ac...", a, b)
    eye = np.eye(2)[:, :, None, None]
    keep = ~grid.zero_mode
    alg = max(float(np.max(np.abs((mul(lp, lp) - lp)[..., keep]))),
              float(np.max(np.abs(mul(lp, lm)[..., keep]))),
              float(np.max(np.abs((lp + lm - eye)[..., keep]))))
    out.append(("projector_algebra", n, None, alg, 1e-12))
    t, s = 0.7, -0.3
    E = propagator_symbol(grid, t)
    unit = float(np.max(np.abs(mul(np.conj(np.swapaxes(E, 0, 1)), E) - eye)))
    out.append(("unitarity", n, None, unit, 1e-12))
    group = _rel(free_propagator(free_propagator(psi, grid, s), grid, t), free_propagator(psi, grid, t + s), grid)
    out.append(("group_law", n, None, group, 1e-10))

    T, dt = 0.05, 1e-2
    lin = evolve(psi, grid, T, dt, nonlinear=False)
    out.append(("free_flow_exact", n, None, _rel(lin.snapshots[-1], free_propagator(psi, grid, T), grid), 1e-12))
    run = evolve(psi, grid, T, 2.5e-3, m=1.0)
    q = charge(run.snapshots, grid)
    out.append(("charge", n, None, float(np.max(np.abs(q - q[0])) / q[0]), 1e-8))
    worst = max(max(coulomb_residual(g, grid), curl_residual(g, p, grid))
                for g, p in ((reconstruct_gauge(p, grid), p) for p in run.snapshots))
    out.append(("constraints_on_run", n, None, worst, 1e-10))

    small = psi * (1e-3 / float(sobolev_norm(psi, 0.5, grid, components=1)))
    pic = picard_iterate(small, grid, 0.2, 6, nt=81)
    rk = evolve(small, grid, 0.2, 2.5e-3)
    out.append(("picard_vs_rk4", n, None, _rel(pic.trajectory.snapshots[-1], rk.snapshots[-1], grid), 1e-6))
    return out


def _checks_misc():
    out = []
    g16 = Grid(16)
    rng = _rng("oracle", 16)
    psi = rng.standard_normal((2, 16, 16)) + 1j * rng.standard_normal((2, 16, 16))
    g8 = Grid(8)
    u = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    j = np.arange(8)
    W = np.exp(-2j * np.pi * np.outer(j, j) / 8)
    out.append(("dft_direct", 8, None, float(np.max(np.abs(W @ u @ W.T - dft(u, g8)))), 1e-10))
    cubic = cubic_term(psi, g16)
    alt = gauge_times_spinor(reconstruct_gauge(psi, g16), psi)
    out.append(("N_recomposition", 16, None, _rel(cubic, alt, g16), 1e-10))

    gates = estimates.sanity_gates(Grid(32))
    out.append(("probe_sanity_gates", 32, all(gates.values()), float(sum(not v for v in gates.values())), 0.0))
    a = estimates.probe_product_rule(trials=2, scales=(1, 2), N=32)
    b = estimates.probe_product_rule(trials=2, scales=(1, 2), N=32)
    out.append(("probe_determinism", 32, a == b, 0.0, 0.0))

    try:
        parse_config("simulate", text="s = 0.1\n", flags={"outdir": "unused"})
        rejected = False
    except ConfigError as exc:
        rejected = exc.key == "s"
    out.append(("config_theorem_regime", None, rejected, 0.0, 0.0))

    with tempfile.TemporaryDirectory() as tmp:
        path = io.write_snapshot(Path(tmp) / "x.csdf", psi, g16, 0.25)
        back, grid_back, t = io.read_snapshot(path)
        same = bool(np.array_equal(back, psi)) and grid_back == g16 and t == 0.25
    out.append(("snapshot_roundtrip", 16, same, 0.0, 0.0))
    return out


def selftest(fault=None, sizes=(32, 64)) -> dict:
    """Run every check; returns {name: {grid, value, tol, passed}} in a fixed order.

    A check passes if value <= tol, unless it carries an explicit verdict.
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    rows = _checks_gamma(fault)
    for n in sizes:
        rows += _checks_grid(Grid(n))
    rows += _checks_misc()
    report = {}
    for name, n, verdict, value, tol in rows:
        key = name if n is None else f"{name}@{n}"
        passed = bool(value <= tol) if verdict is None else bool(verdict)
        report[key] = {"grid": n, "value": value, "tol": tol, "passed": passed}
    return report


def format_report(report: dict) -> list[str]:
    lines = []
    for key, r in report.items():
        mark = "PASS" if r["passed"] else "FAIL"
        lines.append(f"{mark}  {key:28s} value={r['value']:.3e} tol={r['tol']:.1e}")
    failed = [k for k, r in report.items() if not r["passed"]]
    lines.append(f"{len(report) - len(failed)}/{len(report)} checks passed"
                 + (f"; failed: {', '.join(failed)}" if failed else ""))
    return lines
