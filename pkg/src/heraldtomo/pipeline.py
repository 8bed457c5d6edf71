"""
simulate -> persist -> reconstruct -> analyze, and the reflectivity sweep.

Each stage reads and writes plain files so the stages can be run
separately from the command line. All outputs are deterministic functions
of the configuration; no timestamps or absolute paths are written.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, fock, heralding, homodyne, tomography
from .config import RunConfig
from .exceptions import DataError, HeraldTomoError

SIGNAL_FILE = "signal.tsv"
VACUUM_FILE = "vacuum.tsv"
MANIFEST_FILE = "manifest.txt"
TRUTH_FILE = "truth.txt"
RECONSTRUCTION_FILE = "reconstruction.txt"
DIAGNOSTICS_FILE = "diagnostics.txt"
WINDOW_CSV = "window_variances.csv"
REPORT_FILE = "report.txt"
SUMMARY_FILE = "summary.csv"

#: Fixed column order of the sweep summary.
SUMMARY_COLUMNS = (
    "theta_rad", "theta_deg", "R", "rho00", "rho11", "rho22", "q2_minus",
    "squeezing_db", "wigner_origin", "fidelity_target", "fidelity_exact", "status",
)

VARIANCE_CURVE_POINTS = 64


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return homodyne.format_float(v)
    return str(v)


def write_key_values(path, values: dict) -> None:
    Path(path).write_text("".join(f"{k}={_fmt(v)}\n" for k, v in values.items()))


def read_key_values(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --- simulate -----------------------------------------------------------------


@dataclass
class SimulationResult:
    dataset: homodyne.QuadratureDataset
    heralded: heralding.HeraldedState
    out_dir: Path


def simulate(config: RunConfig, out_dir) -> SimulationResult:
    """Prepare the heralded state, sample homodyne data and write it out.

    Writes the signal and vacuum files, the exact heralded state and a
    manifest that echoes the resolved configuration.
    """
    out = _ensure_dir(out_dir)
    herald_cfg = config.herald_config()
    heralded = heralding.herald_signal(herald_cfg)
    dataset = homodyne.sample_quadratures(heralded.state, config.trajectory(), config.acquisition())
    dataset.metadata.update(
        {
            "theta": config.theta,
            "reflectivity": herald_cfg.reflectivity,
            "lambda": config.lam,
            "eta_s": config.eta_s,
            "herald_probability": heralded.herald_probability,
        }
    )
    homodyne.write_dataset(dataset, out / SIGNAL_FILE, out / VACUUM_FILE)
    tomography.write_reconstruction(
        out / TRUTH_FILE, heralded.state, iterations=0, final_loglik=float("nan"),
        extra={"herald_probability": heralded.herald_probability},
    )
    (out / MANIFEST_FILE).write_text(
        config.to_text()
        + f"reflectivity={_fmt(herald_cfg.reflectivity)}\n"
        + f"herald_probability={_fmt(heralded.herald_probability)}\n"
    )
    return SimulationResult(dataset, heralded, out)


# --- reconstruct ----------------------------------------------------------------


@dataclass
class ReconstructionOutput:
    state: tomography.ReconstructedState
    fit: tomography.VarianceFit
    variances: tomography.WindowVariances
    phases: np.ndarray
    diagnostics: dict


def reconstruct_dataset(dataset: homodyne.QuadratureDataset, config: RunConfig) -> ReconstructionOutput:
    """Calibrate, fit the variance law, assign phases and run MaxLik."""
    if dataset.samples.size == 0:
        raise DataError("no samples")
    calibrated = homodyne.calibrate_scale(dataset)
    wv = tomography.window_variances(calibrated)
    fit = tomography.fit_variance_law(wv, neighbors=config.phase_neighbors)
    if fit.phase_sensitive:
        X = tomography.assign_phases(calibrated, fit, variances=wv)
        path = "phase-assigned"
    else:
        X = tomography.assign_phases(calibrated, fit, override="average")
        path = "phase-average"
    state = tomography.maxlik_reconstruct(X, config.reconstruction_settings())
    pooled = float(np.var(calibrated.samples, ddof=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        eta_pooled = analysis.efficiency_single_photon(pooled)
    diag = {
        "A": fit.A,
        "B": fit.B,
        "uncertainty_product": fit.uncertainty_product,
        "phase_sensitive": fit.phase_sensitive,
        "phase_path": path,
        "phase_neighbors": fit.neighbors,
        "scale": calibrated.metadata["last_scale_factor"],
        "pooled_variance": pooled,
        "eta_single_pooled": eta_pooled,
        "fit_squeezing_db": analysis.squeezing_db(fit.A - fit.B) if fit.A - fit.B > 0 else float("nan"),
        "iterations": state.iterations_used,
        "final_loglik": state.final_log_likelihood,
        "skipped_bins": state.skipped_bins,
        "samples": int(calibrated.samples.size),
    }
    phases = X[:: calibrated.samples_per_window, 1]
    return ReconstructionOutput(state, fit, wv, phases, diag)


def reconstruct(dataset_path, config: RunConfig, out_dir) -> ReconstructionOutput:
    dataset = homodyne.read_dataset(dataset_path)
    result = reconstruct_dataset(dataset, config)
    out = _ensure_dir(out_dir)
    tomography.write_reconstruction(
        out / RECONSTRUCTION_FILE,
        result.state.rho,
        iterations=result.state.iterations_used,
        final_loglik=result.state.final_log_likelihood,
    )
    write_key_values(out / DIAGNOSTICS_FILE, result.diagnostics)
    wv = result.variances
    analysis.write_columns_csv(
        out / WINDOW_CSV,
        ["window", "variance", "count", "sigma_error", "phase"],
        [wv.window_index, wv.variance, wv.count, wv.sigma_error, result.phases],
    )
    return result


# --- analyze -----------------------------------------------------------------------


def analyze_state(rho) -> dict:
    """Scalar report for a state: efficiencies, squeezing, Wigner origin, populations."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = analysis.efficiency_report(rho).as_dict()
    report["wigner_origin"] = analysis.wigner_at(rho, 0.0, 0.0)
    for n, p in enumerate(np.diag(rho).real):
        report[f"p{n}"] = float(p)
    return report


def analyze(reconstruction_path, out_dir) -> dict:
    rho, _ = tomography.read_reconstruction(reconstruction_path)
    try:
        rho = fock.check_density_matrix(rho)
    except HeraldTomoError as exc:
        raise DataError(f"{reconstruction_path}: invalid density matrix: {exc}") from None
    out = _ensure_dir(out_dir)
    report = analyze_state(rho)
    write_key_values(out / REPORT_FILE, report)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = analysis.wigner_function(rho)
    analysis.write_wigner_csv(out / "wigner.csv", grid)
    for axis in ("q", "p"):
        cs = analysis.wigner_cross_section(grid, axis)
        analysis.write_columns_csv(out / f"wigner_cross_{axis}.csv", [axis, "W"], cs.T)
    phis = np.pi * np.arange(VARIANCE_CURVE_POINTS) / VARIANCE_CURVE_POINTS
    analysis.write_columns_csv(
        out / "variance_vs_phase.csv", ["phi", "variance"], [phis, analysis.marginal_variance(rho, phis)]
    )
    analysis.write_columns_csv(
        out / "populations.csv", ["n", "population"], [np.arange(rho.shape[0]), np.diag(rho).real]
    )
    return report


# --- sweep ---------------------------------------------------------------------------


def _theta_dirname(index: int, theta: float) -> str:
    return f"theta_{index:02d}_{math.degrees(theta):.4f}deg"


def summary_row(theta: float, rho, truth, target) -> dict:
    report = analyze_state(rho)
    return {
        "theta_rad": theta,
        "theta_deg": math.degrees(theta),
        "R": float(fock.reflectivity(theta)),
        "rho00": report["p0"],
        "rho11": report["p1"],
        "rho22": report["p2"],
        "q2_minus": report["q2_minus"],
        "squeezing_db": report["squeezing_db"],
        "wigner_origin": report["wigner_origin"],
        "fidelity_target": analysis.aligned_fidelity(rho, target),
        "fidelity_exact": analysis.aligned_fidelity(rho, truth),
        "status": "ok",
    }


def run_point(config: RunConfig, index: int, theta: float, out_dir) -> dict:
    """Full pipeline at one HWP angle; failures become a status string."""
    point_dir = Path(out_dir) / _theta_dirname(index, theta)
    try:
        cfg = replace(config, theta=theta)
        sim = simulate(cfg, point_dir)
        rec = reconstruct(point_dir, cfg, point_dir)
        analyze(point_dir / RECONSTRUCTION_FILE, point_dir)
        rho, _ = tomography.read_reconstruction(point_dir / RECONSTRUCTION_FILE)
        target = heralding.ideal_target_state(cfg.herald_config())
        return summary_row(theta, rho, sim.heralded.state, target)
    except HeraldTomoError as exc:
        row = {c: float("nan") for c in SUMMARY_COLUMNS}
        row.update(theta_rad=theta, theta_deg=math.degrees(theta), R=float(fock.reflectivity(theta)))
        row["status"] = f"error:{exc.code}:{str(exc).replace(',', ';')}"
        return row


def sweep(config: RunConfig, out_dir, thetas=None, jobs: int = 1) -> list[dict]:
    """Run every HWP angle and write ``summary.csv`` ordered by angle."""
    out = _ensure_dir(out_dir)
    thetas = sorted(config.theta_list if thetas is None else thetas)
    (out / MANIFEST_FILE).write_text(config.to_text())
    args = [(config, i, th, out) for i, th in enumerate(thetas)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_point, *zip(*args)))
    else:
        rows = [run_point(*a) for a in args]
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in SUMMARY_COLUMNS))
    (out / SUMMARY_FILE).write_text("\n".join(lines) + "\n")
    return rows


def read_summary(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        row = dict(zip(header, values))
        for k in header:
            if k != "status":
                row[k] = float(row[k])
        rows.append(row)
    return rows
