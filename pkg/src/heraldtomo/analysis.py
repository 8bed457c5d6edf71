"""
Observables and figures of merit for single-mode states: Wigner function,
quadrature variances, efficiency estimators, squeezing in dB and fidelity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre, gammaln

from . import fock
from .exceptions import DimensionError, NumericalError
from .homodyne import VACUUM_VARIANCE, format_float

DEFAULT_WIGNER_BOUND = 4.0
DEFAULT_WIGNER_POINTS = 161
WIGNER_INTEGRAL_TOL = 1e-3
MAX_WIGNER_BOUND = 20.0


# --- quadrature moments -----------------------------------------------------


def _moments(rho):
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    a = fock.annihilation_operator(d)
    mean_a = np.trace(rho @ a)
    mean_a2 = np.trace(rho @ a @ a)
    mean_n = float(np.sum(np.arange(d) * np.diag(rho).real))
    return mean_a, mean_a2, mean_n


def variance_law(rho) -> tuple[float, float, float]:
    """Exact ``(A, B, phi0)`` with ``var(phi) = A + B cos 2(phi - phi0)``.

    Computed from ``<a>``, ``<a^2>`` and ``<n>``, which are exact inside the
    cutoff (unlike powers of a truncated quadrature matrix).
    """
    mean_a, mean_a2, mean_n = _moments(rho)
    c = mean_a2 - mean_a**2
    big_a = mean_n + 0.5 - abs(mean_a) ** 2
    return float(big_a), float(abs(c)), float(-0.5 * np.angle(c))


def marginal_variance(rho, phi):
    """Variance of the quadrature measured at local-oscillator phase ``phi``."""
    mean_a, mean_a2, mean_n = _moments(rho)
    rot = np.exp(1j * np.asarray(phi, dtype=float))
    second = np.real(mean_a2 * rot**2) + mean_n + 0.5
    first = np.sqrt(2.0) * np.real(mean_a * rot)
    return second - first**2


def extreme_variances(rho) -> tuple[float, float]:
    """Largest and smallest quadrature variance over all phases."""
    big_a, big_b, _ = variance_law(rho)
    return big_a + big_b, big_a - big_b


def canonical_phase(rho) -> float:
    """Rotation angle that moves the variance maximum to ``phi = 0``."""
    _, big_b, phi0 = variance_law(rho)
    return phi0 if big_b > 0 else 0.0


def canonical_frame(rho) -> np.ndarray:
    """``rho`` rotated so its largest quadrature variance sits at ``phi = 0``.

    Phase assignment from variances fixes this same frame, so truth and
    reconstruction are compared here.
    """
    return fock.rotate(rho, canonical_phase(rho))


def fock_populations(rho) -> np.ndarray:
    return np.clip(np.diag(np.asarray(rho)).real, 0.0, None)


# --- Wigner function ----------------------------------------------------------


@dataclass
class WignerGrid:
    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # shape (len(p_axis), len(q_axis))

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.q_axis, axis=1), self.p_axis))

    def at(self, q: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.p_axis - p)))
        j = int(np.argmin(np.abs(self.q_axis - q)))
        return float(self.values[i, j])


def _wigner_kernel_values(rho, q, p) -> np.ndarray:
    # W_{|m><n|}(q, p) = (-1)^n / pi sqrt(n!/m!) (sqrt2 (q + i p))^(m-n) L_n^(m-n)(2 r^2) e^{-r^2}, m >= n
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    z = np.sqrt(2.0) * (q + 1j * p)
    r2 = q * q + p * p
    x = 2.0 * r2
    gauss = np.exp(-r2) / np.pi
    w = np.zeros(np.broadcast(q, p).shape, dtype=complex)
    for n in range(d):
        for m in range(n, d):
            k = m - n
            coef = (-1) ** n * math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            term = coef * z**k * eval_genlaguerre(n, k, x) * gauss
            if k == 0:
                w += rho[m, n] * term
            else:
                # rho_mn W_mn + rho_nm conj(W_mn)
                w += 2.0 * np.real(rho[m, n] * term)
    return w.real


def wigner_function(
    rho,
    q_axis=None,
    p_axis=None,
    *,
    bound: float = DEFAULT_WIGNER_BOUND,
    points: int = DEFAULT_WIGNER_POINTS,
    auto_widen: bool = True,
) -> WignerGrid:
    """Wigner function on a rectangular grid, normalized to unit integral.

    ``p`` is the quadrature at local-oscillator phase ``pi/2``, so the
    marginal along any direction ``phi`` is the homodyne density at ``phi``.
    Without explicit axes the default ``[-bound, bound]`` grid is widened
    (with a warning) until the grid integral is within 1e-3 of one.
    """
    rho = fock.check_density_matrix(rho)
    explicit = q_axis is not None or p_axis is not None
    step = 2.0 * bound / (points - 1)
    while True:
        qa = np.round(np.linspace(-bound, bound, points), 12) if q_axis is None else np.asarray(q_axis, float)
        pa = np.round(np.linspace(-bound, bound, points), 12) if p_axis is None else np.asarray(p_axis, float)
        qq, pp = np.meshgrid(qa, pa)
        grid = WignerGrid(qa, pa, _wigner_kernel_values(rho, qq, pp))
        if explicit or abs(grid.integral() - 1.0) < WIGNER_INTEGRAL_TOL:
            return grid
        if not auto_widen or bound >= MAX_WIGNER_BOUND:
            raise NumericalError(
                f"Wigner grid |q|,|p| <= {bound} misses part of the state (integral {grid.integral():.4f})"
            )
        bound += 2.0
        points = int(round(2.0 * bound / step)) + 1
        warnings.warn(f"Wigner grid widened to |q|,|p| <= {bound}", RuntimeWarning)


def wigner_at(rho, q: float, p: float) -> float:
    return float(_wigner_kernel_values(rho, np.asarray(q, float), np.asarray(p, float)))


def wigner_cross_section(grid: WignerGrid, axis: str = "q") -> np.ndarray:
    """Slice through the origin as ``(coordinate, value)`` rows.

    ``axis="q"`` walks along ``q`` at ``p = 0``; ``axis="p"`` along ``p`` at
    ``q = 0``. Off-grid origins are linearly interpolated.
    """
    if axis == "q":
        coords, other, vals = grid.q_axis, grid.p_axis, grid.values
    elif axis == "p":
        coords, other, vals = grid.p_axis, grid.q_axis, grid.values.T
    else:
        raise ValueError(f"axis must be 'q' or 'p', got {axis!r}")
    hit = np.flatnonzero(np.isclose(other, 0.0, atol=1e-12))
    if hit.size:
        line = vals[hit[0]]
    else:
        line = np.array([np.interp(0.0, other, vals[:, j]) for j in range(coords.size)])
    return np.column_stack([coords, line])


# --- efficiencies -------------------------------------------------------------


def efficiency_single_photon(variance: float) -> float:
    """Efficiency of ``eta |1><1| + (1 - eta) |0><0|`` with the given variance."""
    variance = float(variance)
    if variance < VACUUM_VARIANCE:
        warnings.warn(f"variance {variance} is below the vacuum level", RuntimeWarning)
    return variance - VACUUM_VARIANCE


def efficiency_squeezed(q2_plus: float, q2_minus: float) -> float:
    """Efficiency from the anti-squeezed and squeezed variances.

    Measures how far the variance product sits above the minimum-uncertainty
    value 1/4; exact for a pure squeezed vacuum sent through pure loss.
    """
    vp, vm = float(q2_plus), float(q2_minus)
    if not vp >= vm > 0:
        raise ValueError(f"need q2_plus >= q2_minus > 0, got {vp}, {vm}")
    den = 2 * vp + 2 * vm - 2
    if abs(den) < 1e-12:
        raise NumericalError("unsqueezed input: variances indistinguishable from vacuum")
    return (2 * vp + 2 * vm - 4 * vp * vm - 1) / den


def squeezing_db(q2_minus: float) -> float:
    """Noise reduction below the vacuum level; positive means squeezed."""
    if not q2_minus > 0:
        raise ValueError(f"q2_minus must be positive, got {q2_minus}")
    return -10.0 * math.log10(q2_minus / VACUUM_VARIANCE)


# --- fidelity ------------------------------------------------------------------


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(fock.hermitize(rho))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionError(f"fidelity of {rho.shape} and {sigma.shape} states")
    s = _psd_sqrt(rho)
    w = np.linalg.eigvalsh(fock.hermitize(s @ sigma @ s))
    return float(min(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2, 1.0))


def aligned_fidelity(rho, sigma) -> float:
    """Fidelity after moving both states to their canonical phase frame."""
    return fidelity(canonical_frame(rho), canonical_frame(sigma))


# --- report -----------------------------------------------------------------------


@dataclass
class EfficiencyReport:
    eta_single: float
    eta_squeezed: float
    q2_plus: float
    q2_minus: float
    squeezing_db: float
    eta_single_clamped: bool = False
    eta_squeezed_clamped: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _clamp(value, name):
    if math.isfinite(value) and not 0.0 <= value <= 1.0:
        warnings.warn(f"{name}={value:.6g} outside [0, 1]; clamped", RuntimeWarning)
        return min(max(value, 0.0), 1.0), True
    return value, False


def efficiency_report(rho) -> EfficiencyReport:
    """Efficiency estimates and squeezing of a (reconstructed) state.

    ``eta_single`` treats the phase-averaged variance with the two-level
    single-photon model; ``eta_squeezed`` is NaN unless some quadrature is
    squeezed below the vacuum level.
    """
    big_a, _, _ = variance_law(rho)
    vp, vm = extreme_variances(rho)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        eta1 = efficiency_single_photon(big_a)
    eta_sq = float("nan")
    if vm < VACUUM_VARIANCE:
        try:
            eta_sq = efficiency_squeezed(vp, vm)
        except NumericalError:
            pass
    eta1, c1 = _clamp(eta1, "eta_single")
    eta_sq, c2 = _clamp(eta_sq, "eta_squeezed")
    return EfficiencyReport(eta1, eta_sq, vp, vm, squeezing_db(vm), c1, c2)


# --- CSV export --------------------------------------------------------------------


def write_columns_csv(path, header, columns) -> None:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_wigner_csv(path, grid: WignerGrid) -> None:
    """Matrix CSV: first row ``p\\q`` then q values; each next row p then W."""
    lines = ["p\\q," + ",".join(format_float(q) for q in grid.q_axis)]
    for p, row in zip(grid.p_axis, grid.values):
        lines.append(format_float(p) + "," + ",".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_wigner_csv(path) -> WignerGrid:
    rows = [ln.split(",") for ln in Path(path).read_text().splitlines() if ln]
    q = np.array([float(x) for x in rows[0][1:]])
    p = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return WignerGrid(q, p, vals)
