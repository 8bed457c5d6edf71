"""Fast invariant checks run by ``heraldtomo selftest``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from . import analysis, fock, heralding, homodyne, tomography


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


class CheckFailed(AssertionError):
    pass


def _require(ok, message: str) -> None:
    # explicit raise so checks still run under ``python -O``
    if not ok:
        raise CheckFailed(message)


def check_unitarity() -> str:
    worst = 0.0
    for conv in ("symmetric", "real"):
        for r in (0.0, 0.25, 0.5, 0.8536, 1.0):
            u = fock.beam_splitter_unitary(r, 5, convention=conv)
            worst = max(worst, np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
    _require(worst < 1e-12, f"max |U^dag U - I| = {worst:.3g}")
    return f"max deviation {worst:.2e}"


def check_cptp() -> str:
    d = 8
    rng = np.random.default_rng(7)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    worst = 0.0
    for eta in (0.0, 0.3, 0.55, 1.0):
        ops = heralding.loss_kraus_operators(eta, d)
        worst = max(worst, np.abs(sum(k.T @ k for k in ops) - np.eye(d)).max())
    composed = heralding.loss_apply(heralding.loss_apply(rho, 0.7), 0.6)
    direct = heralding.loss_apply(rho, 0.42)
    comp_err = np.abs(composed - direct).max()
    _require(worst < 1e-12, f"Kraus completeness off by {worst:.3g}")
    _require(comp_err < 1e-12, f"loss composition off by {comp_err:.3g}")
    return f"completeness {worst:.1e}, composition {comp_err:.1e}"


def lossy_squeezed_variances(lam: float, eta: float) -> tuple[float, float]:
    """Analytic (V+, V-) of a squeezed vacuum after loss ``eta``."""
    vp = eta * (1 + lam) / (1 - lam) / 2 + (1 - eta) / 2
    vm = eta * (1 - lam) / (1 + lam) / 2 + (1 - eta) / 2
    return vp, vm


def check_loss_inversion() -> str:
    worst = 0.0
    for lam in (0.05, 0.1, 0.2):
        for eta in np.arange(1, 11) / 10:
            vp, vm = lossy_squeezed_variances(lam, eta)
            worst = max(worst, abs(analysis.efficiency_squeezed(vp, vm) - eta))
    _require(worst < 1e-9, f"max |eta_hat - eta| = {worst:.3g}")
    return f"30 cases, max error {worst:.1e}"


def check_pdf_moments() -> str:
    q = np.linspace(-12, 12, 4801)
    worst = 0.0
    for n in range(6):
        pdf = homodyne.quadrature_pdf(fock.fock_dm(n, 8), 0.3, q)
        norm, var = trapezoid(pdf, q), trapezoid(q * q * pdf, q)
        worst = max(worst, abs(norm - 1.0), abs(var - (2 * n + 1) / 2))
    _require(worst < 1e-8, f"Fock moment error {worst:.3g}")
    return f"n<=5 norm/variance error {worst:.1e}"


def check_maxlik_monotone() -> str:
    rho = 0.55 * fock.fock_dm(1, 6) + 0.45 * fock.vacuum(6)
    acq = homodyne.AcquisitionConfig(windows=20, samples_per_window=500, rng_seed=3, vacuum_samples=0)
    ds = homodyne.sample_quadratures(rho, homodyne.PhaseTrajectory.linear_sweep(20), acq)
    X = np.column_stack([ds.samples.ravel(), np.repeat(ds.true_phases, ds.samples_per_window)])
    est = tomography.MaxLikTomography(cutoff=6, max_iterations=300, tol=0.0).fit(X)
    drops = np.diff(est.log_likelihood_trace_)
    worst = float(min(drops.min(), 0.0))
    _require(worst >= -1e-9, f"log-likelihood fell by {-worst:.3g}")
    return f"{len(drops)} steps, rho11={est.rho_[1, 1].real:.3f}"


def check_herald_equivalence() -> str:
    worst = 0.0
    for lam, theta, eta_s in ((0.1, 0.0, 1.0), (0.2, math.pi / 8, 0.7), (0.15, 0.3, 0.5)):
        cfg = heralding.HeraldConfig(
            lam=lam,
            setting=fock.BeamSplitterSetting(theta),
            detector=heralding.DetectorModel(0.2, 1e-4),
            signal_loss=heralding.LossChannel(eta_s),
            cutoff=6,
        )
        a, b = heralding.herald_signal(cfg), heralding.herald_signal_pure(cfg)
        worst = max(worst, np.abs(a.state - b.state).max(), abs(a.herald_probability - b.herald_probability))
    _require(worst < 1e-9, f"routes differ by {worst:.3g}")
    return f"max difference {worst:.1e}"


CHECKS: dict[str, Callable[[], str]] = {
    "unitarity": check_unitarity,
    "cptp": check_cptp,
    "loss-inversion": check_loss_inversion,
    "pdf-moments": check_pdf_moments,
    "maxlik-monotone": check_maxlik_monotone,
    "herald-equivalence": check_herald_equivalence,
}


def run_selftest() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as exc:  # any failure, including assertion, is reported
            detail, ok = f"{type(exc).__name__}: {exc}", False
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
