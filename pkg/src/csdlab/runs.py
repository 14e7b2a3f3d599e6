"""Orchestration behind the command-line subcommands: simulate, probe, convergence."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import estimates, io
from .config import ConfigError, RunConfig
from .evolution import BlowUpError, charge, dirac_source, fourier_pad, gaussian_spinor, iterate
from .gauge import coulomb_residual, curl_residual, gauge_residuals, reconstruct_gauge
from .spectral import Grid, l2_norm, sobolev_norm

CONSTRAINT_TOL = 1e-10

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


@dataclass
class Report:
    status: str  # "ok", "fail" or "blowup"
    summary: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "fail": EXIT_FAIL, "blowup": EXIT_BLOWUP}[self.status]


def thread_cap() -> int:
    """Parallelism limit from CSD_THREADS (default: all cores)."""
    cores = os.cpu_count() or 1
    try:
        return max(1, min(int(os.environ.get("CSD_THREADS", cores)), cores))
    except ValueError:
        return cores


def initial_data(cfg: RunConfig, grid: Grid) -> np.ndarray:
    """Initial spinor with ||f||_{H^s} = norm.  No gauge data is ever taken as input."""
    s = cfg["s"]
    if cfg["data"] == "gaussian":
        return gaussian_spinor(grid, width=cfg["width"], momentum=(cfg["kx"], cfg["ky"]), s=s,
                               norm=cfg["norm"])
    spec = estimates.RandomDataSpec(s=s, components=2)
    return cfg["norm"] * estimates.random_data(spec, np.random.default_rng(cfg.seed), grid)


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

REPORT_COLUMNS = ("t", "charge", "hs_norm", "res_coulomb", "res_curl", "res_dynamic",
                  "source_hs")


def simulate(cfg: RunConfig, outdir=None) -> Report:
    """Run the exponential-RK4 solver, writing snapshots, run report and summary.

    Files: ``snap_#####.csdf`` (if enabled), ``report.csv`` with columns
    REPORT_COLUMNS, ``summary.txt`` and ``config.resolved``.  ``source_hs`` is
    ||gamma^mu d_mu psi||_{H^s}, the integrand of the Y-norm's source part.
    Constraint residuals above CONSTRAINT_TOL make the status "fail".
    """
    out = io.ensure_dir(outdir if outdir is not None else cfg.outdir)
    cfg.echo(out)
    grid = Grid(cfg["N"], cfg["L"])
    s, m = cfg["s"], cfg["m"]
    f = initial_data(cfg, grid)
    times, psis, rows, files = [], [], [], []
    status, failure = "ok", None
    try:
        for k, (t, psi) in enumerate(iterate(f, grid, cfg["T"], cfg["dt"], m, cfg.stride,
                                             cfg["nonlinear"])):
            if cfg["snapshots"]:
                files.append(io.write_snapshot(out / f"snap_{k:05d}.csdf", psi, grid, t))
            gauge = reconstruct_gauge(psi, grid)
            src = dirac_source(psi, m, grid) if cfg["nonlinear"] else -1j * m * psi
            rows.append([t, float(charge(psi, grid)), float(sobolev_norm(psi, s, grid, components=1)),
                         coulomb_residual(gauge, grid), curl_residual(gauge, psi, grid), math.nan,
                         float(sobolev_norm(src, s, grid, components=1))])
            times.append(t)
            psis.append(psi)
    except BlowUpError as exc:
        status, failure = "blowup", exc
    if len(psis) >= 3:
        gauges = [reconstruct_gauge(p, grid) for p in psis]
        dyn = gauge_residuals(times, psis, gauges, grid)["res_dynamic"]
        for row, value in zip(rows, dyn):
            row[5] = float(value)
    files.append(io.write_csv(out / "report.csv", REPORT_COLUMNS, rows))

    data = np.array(rows) if rows else np.zeros((0, len(REPORT_COLUMNS)))
    q = data[:, 1]
    summary = {"status": status, "snapshots": len(rows), "t_final": times[-1] if times else 0.0}
    if len(rows):
        sup_hs = float(data[:, 2].max())
        l1_src = float(np.trapezoid(data[:, 6], data[:, 0])) if len(rows) > 1 else 0.0
        summary.update({
            "charge_drift": float(np.max(np.abs(q - q[0])) / q[0]) if q[0] > 0 else 0.0,
            "max_res_coulomb": float(data[:, 3].max()),
            "max_res_curl": float(data[:, 4].max()),
            "max_res_dynamic": float(np.nanmax(data[:, 5])) if len(rows) >= 3 else math.nan,
            "initial_hs": float(data[0, 2]),
            "sup_hs": sup_hs,
            "source_l1_hs": l1_src,
            "y_norm": sup_hs + l1_src,
            "energy_ratio": (sup_hs + l1_src) / (data[0, 2] + l1_src) if data[0, 2] > 0 else math.nan,
        })
        if status == "ok" and max(summary["max_res_coulomb"], summary["max_res_curl"]) > CONSTRAINT_TOL:
            status = "fail"
            summary["status"] = status
            summary["failure"] = "constraint residual above tolerance"
    if failure is not None:
        summary["blowup_t"] = failure.t
        summary["blowup_norm"] = failure.value
    files.append(io.write_kv(out / "summary.txt", summary))
    return Report(status, summary, rows, files)


# --------------------------------------------------------------------------
# probe
# --------------------------------------------------------------------------

_PROBE_KEYS = {
    "bilinear_strichartz": ("s", "a", "q", "r", "interval", "nt"),
    "N_estimate": ("s", "interval", "nt"),
    "product_rule": ("s", "alpha"),
    "homogeneous_product": ("s", "s1", "s2", "s3"),
    "trilinear": ("s", "interval", "nt"),
    "transference": ("s", "a", "q", "r", "interval", "nt"),
}
_EXPLORE = ("N_estimate", "trilinear")


def probe_kwargs(cfg: RunConfig) -> dict:
    name = cfg["probe"]
    kw = {k: cfg[k] for k in _PROBE_KEYS[name] if cfg[k] is not None}
    kw.update(trials=cfg["trials"], scales=tuple(cfg["scales"]), seed=cfg.seed, N=cfg["N"], L=cfg["L"],
              workers=min(cfg["workers"], thread_cap()))
    if name in _EXPLORE and cfg["regime"] == "explore":
        kw["explore"] = True
    return kw


def check_probe(cfg: RunConfig) -> None:
    """Raise ConfigError for exponent combinations a probe would reject."""
    name = cfg["probe"]
    kw = probe_kwargs(cfg)
    try:
        if name in ("bilinear_strichartz", "transference"):
            estimates.check_strichartz(kw.get("a", 0.0), kw.get("q"), kw.get("r", 2.0), kw.get("s"))
        elif name in _EXPLORE:
            estimates.check_cubic_s(kw.get("s", 0.3), kw.get("explore", False))
        elif name == "homogeneous_product" and any(k in kw for k in ("s1", "s2", "s3")):
            if not all(k in kw for k in ("s1", "s2", "s3")):
                raise ValueError("give all of s1, s2, s3 or none")
            estimates.check_homogeneous(kw["s1"], kw["s2"], kw["s3"])
    except ValueError as exc:
        raise ConfigError(str(exc), "s") from None


PROBE_COLUMNS = ("probe", "series", "scale", "seed", "lhs", "rhs", "ratio")


def run_probe(cfg: RunConfig, outdir=None) -> Report:
    """Sanity gates, then trials; writes ``records.csv`` and ``summary.txt``.

    Status is "fail" if a sanity gate fails or a series' slope exceeds the limit.
    """
    out = io.ensure_dir(outdir if outdir is not None else cfg.outdir)
    check_probe(cfg)
    cfg.echo(out)
    name = cfg["probe"]
    gates = estimates.sanity_gates(Grid(32, cfg["L"]))
    gate_ok = all(v for k, v in gates.items() if k.startswith(name + "["))
    records = estimates.PROBES[name](**probe_kwargs(cfg))
    params = sorted({k for r in records for k in r.params})
    header = PROBE_COLUMNS + tuple(params)
    rows = [[r.probe, r.series, r.scale, r.seed, r.lhs, r.rhs, r.ratio] + [r.params.get(k, "") for k in params]
            for r in records]
    files = [io.write_csv(out / "records.csv", header, rows)]
    summary = {"probe": name, "records": len(records), "sanity_gates": gate_ok}
    verdicts = estimates.bounded(estimates.summarize(records))
    for (probe, series), stats in estimates.summarize(records).items():
        prefix = f"{series}."
        summary[prefix + "scales"] = stats["scales"]
        summary[prefix + "max_ratio"] = stats["max"]
        summary[prefix + "mean_ratio"] = stats["mean"]
        summary[prefix + "trials"] = stats["trials"]
        summary[prefix + "slope"] = stats["slope"]
        summary[prefix + "bounded"] = verdicts[(probe, series)]
    summary["slope_limit"] = estimates.SLOPE_LIMIT
    ok = gate_ok and all(verdicts.values())
    summary["status"] = "ok" if ok else "fail"
    files.append(io.write_kv(out / "summary.txt", summary))
    return Report(summary["status"], summary, rows, files)


# --------------------------------------------------------------------------
# convergence study
# --------------------------------------------------------------------------

def _final_state(f, grid: Grid, cfg: RunConfig, dt: float):
    *_, (t, psi) = iterate(f, grid, cfg["T"], dt, cfg["m"], 1 << 30, cfg["nonlinear"])
    return psi


def convergence_study(cfg: RunConfig, outdir=None) -> Report:
    """Runs at (dt, dt/2, dt/4) on N and at dt/4 on 2N.

    Temporal error e_k = ||psi_{dt/2^k} - psi_{dt/2^(k+1)}|| / ||psi||; observed
    order log2(e_0 / e_1).  Spatial error compares the 2N run with the
    Fourier-padded N run, from the same band-limited data.  A blow-up in any
    sub-run yields a partial report with status "blowup".
    """
    out = io.ensure_dir(outdir if outdir is not None else cfg.outdir)
    cfg.echo(out)
    grid = Grid(cfg["N"], cfg["L"])
    fine = Grid(2 * cfg["N"], cfg["L"])
    f = initial_data(cfg, grid)
    dts = [cfg["dt"], cfg["dt"] / 2, cfg["dt"] / 4]
    finals, rows = [], []
    summary = {"status": "ok", "N": grid.N, "dt": cfg["dt"], "T": cfg["T"]}
    try:
        for dt in dts:
            finals.append(_final_state(f, grid, cfg, dt))
            rows.append(["time", grid.N, dt, math.nan])
        ref = float(l2_norm(finals[-1], grid, components=1))
        errs = [float(l2_norm(finals[k] - finals[k + 1], grid, components=1)) / ref for k in range(2)]
        rows[0][3], rows[1][3] = errs
        summary["temporal_error_dt"] = errs[0]
        summary["temporal_error_dt2"] = errs[1]
        summary["temporal_order"] = math.log2(errs[0] / errs[1]) if errs[1] > 0 and errs[0] > 0 else math.nan
        fine_psi = _final_state(fourier_pad(f, grid, fine.N), fine, cfg, dts[-1])
        coarse = fourier_pad(finals[-1], grid, fine.N)
        spatial = float(l2_norm(coarse - fine_psi, fine, components=1) / l2_norm(fine_psi, fine, components=1))
        rows.append(["space", fine.N, dts[-1], spatial])
        summary["spatial_error"] = spatial
    except BlowUpError as exc:
        summary["status"] = "blowup"
        summary["blowup_t"] = exc.t
        summary["blowup_norm"] = exc.value
    files = [io.write_csv(out / "convergence.csv", ("kind", "N", "dt", "error"), rows),
             io.write_kv(out / "summary.txt", summary)]
    return Report(summary["status"], summary, rows, files)
