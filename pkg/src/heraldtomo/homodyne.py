"""
Homodyne detection in the Fock basis: quadrature densities, seeded Monte
Carlo sampling under a drifting local-oscillator phase, vacuum calibration,
and the tab-separated dataset format.

Quadratures use the convention in which the vacuum variance is 1/2, and the
density at local-oscillator phase ``phi`` is
``pr(q | phi) = sum_nm rho_nm psi_n(q) psi_m(q) exp(i (n - m) phi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import fock
from .exceptions import ConfigurationError, DataError, DimensionError, NumericalError

VACUUM_VARIANCE = 0.5

DEFAULT_Q_MAX = 6.0
DEFAULT_Q_STEP = 0.01
NORMALIZATION_TOL = 1e-6
MAX_Q_BOUND = 60.0

VACUUM_WINDOW_INDEX = -1


def hermite_functions(q, n_max: int) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_0 .. psi_{n_max-1}`` evaluated at ``q``.

    Uses the normalized three-term recurrence
    ``psi_{n+1} = sqrt(2/(n+1)) q psi_n - sqrt(n/(n+1)) psi_{n-1}``
    so nothing overflows for large ``n``. Returns shape ``(n_max, len(q))``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    psi = np.empty((n_max, q.size))
    psi[0] = np.pi**-0.25 * np.exp(-0.5 * q * q)
    if n_max > 1:
        psi[1] = np.sqrt(2.0) * q * psi[0]
    for n in range(1, n_max - 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * q * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def _check_grid(q_grid) -> np.ndarray:
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.ndim != 1 or q_grid.size == 0:
        raise ConfigurationError("quadrature grid must be a nonempty 1-D array")
    if not np.all(np.isfinite(q_grid)):
        raise ConfigurationError("quadrature grid has non-finite values")
    return q_grid


def quadrature_pdf(rho, phi: float, q_grid) -> np.ndarray:
    """Homodyne probability density of ``rho`` at local-oscillator phase ``phi``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"rho must be square, got shape {rho.shape}")
    q_grid = _check_grid(q_grid)
    psi = hermite_functions(q_grid, rho.shape[0])
    rotated = fock.rotate(rho, phi)
    return np.einsum("ng,nm,mg->g", psi, rotated, psi, optimize=True).real


def _grid(q_max: float, step: float = DEFAULT_Q_STEP) -> np.ndarray:
    n = int(round(2 * q_max / step)) + 1
    return np.linspace(-q_max, q_max, n)


def _normalization_error(pdf, grid) -> float:
    return abs(float(trapezoid(pdf, grid)) - 1.0)


def required_grid_bound(rho, phi: float = 0.0, q_max: float = DEFAULT_Q_MAX) -> float:
    """Smallest bound (in steps of 2) at which the density integrates to one."""
    while q_max <= MAX_Q_BOUND:
        grid = _grid(q_max)
        if _normalization_error(quadrature_pdf(rho, phi, grid), grid) < NORMALIZATION_TOL:
            return q_max
        q_max += 2.0
    raise NumericalError(f"quadrature density does not normalize within |q| <= {MAX_Q_BOUND}")


@dataclass(frozen=True)
class PhaseTrajectory:
    """Local-oscillator phase per acquisition window."""

    phases: np.ndarray
    model: str = "fixed"

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).ravel()
        if phases.size == 0 or not np.all(np.isfinite(phases)):
            raise ConfigurationError("phase trajectory must be nonempty and finite")
        object.__setattr__(self, "phases", phases)

    def __len__(self):
        return self.phases.size

    @classmethod
    def fixed(cls, windows: int, phi: float = 0.0) -> "PhaseTrajectory":
        return cls(np.full(windows, float(phi)), "fixed")

    @classmethod
    def linear_sweep(cls, windows: int, start: float = 0.0, span: float = 2 * np.pi) -> "PhaseTrajectory":
        return cls(start + span * np.arange(windows) / windows, "linear-sweep")

    @classmethod
    def random_walk(cls, windows: int, step: float, seed: int, start: float = 0.0) -> "PhaseTrajectory":
        rng = np.random.default_rng([int(seed), 2])
        steps = rng.normal(0.0, step, size=windows)
        steps[0] = 0.0
        return cls(start + np.cumsum(steps), "random-walk")


@dataclass(frozen=True)
class AcquisitionConfig:
    windows: int = 100
    samples_per_window: int = 1000
    rng_seed: int = 0
    vacuum_samples: int = 100_000
    gain: float = 1.0

    def __post_init__(self):
        for name in ("windows", "samples_per_window"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if int(self.vacuum_samples) < 0:
            raise ConfigurationError("vacuum_samples must be nonnegative")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigurationError("rng_seed must be an unsigned 64-bit integer")
        if not (np.isfinite(self.gain) and self.gain > 0):
            raise ConfigurationError("gain must be positive")


@dataclass
class QuadratureDataset:
    """Windowed homodyne samples plus vacuum-calibration samples.

    ``samples`` has shape ``(windows, samples_per_window)``. ``true_phases``
    is only known for simulated data and is never persisted.
    """

    samples: np.ndarray
    vacuum_calibration: np.ndarray
    metadata: dict = field(default_factory=dict)
    true_phases: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.vacuum_calibration = np.asarray(self.vacuum_calibration, dtype=float).ravel()
        if self.samples.ndim != 2:
            raise DataError("samples must be a (windows, samples_per_window) array")

    @property
    def n_windows(self) -> int:
        return self.samples.shape[0]

    @property
    def samples_per_window(self) -> int:
        return self.samples.shape[1]

    @property
    def scale(self) -> float:
        return float(self.metadata.get("scale", 1.0))


def _inverse_cdf_sample(pdf, grid, u) -> np.ndarray:
    pdf = np.clip(pdf, 0.0, None)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))))
    cdf /= cdf[-1]
    return np.interp(u, cdf, grid)


def _sampling_grid(rho, phases, q_max, auto_widen) -> np.ndarray:
    grid = _grid(q_max)
    worst = max(_normalization_error(quadrature_pdf(rho, p, grid), grid) for p in np.unique(phases))
    if worst < NORMALIZATION_TOL:
        return grid
    needed = max(required_grid_bound(rho, p, q_max) for p in np.unique(phases))
    if not auto_widen:
        raise NumericalError(
            f"quadrature density not normalized on |q| <= {q_max} (error {worst:.2e}); "
            f"grid bound of at least {needed} required"
        )
    return _grid(needed)


def window_rng(seed: int, window: int) -> np.random.Generator:
    """Generator for one acquisition window; depends only on ``(seed, window)``."""
    return np.random.default_rng([int(seed), 0, int(window)])


def vacuum_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), 1])


def sample_quadratures(
    rho,
    trajectory: PhaseTrajectory,
    acq: AcquisitionConfig,
    *,
    q_max: float = DEFAULT_Q_MAX,
    auto_widen: bool = True,
) -> QuadratureDataset:
    """Draw homodyne samples window by window from ``pr(q | phi_w)``.

    Each window uses its own generator seeded from ``(rng_seed, window)``, so
    windows are independent and the result is reproducible bit for bit.
    """
    rho = fock.check_density_matrix(rho)
    if len(trajectory) != acq.windows:
        raise ConfigurationError(
            f"trajectory has {len(trajectory)} phases but {acq.windows} windows are configured"
        )
    grid = _sampling_grid(rho, trajectory.phases, q_max, auto_widen)
    psi = hermite_functions(grid, rho.shape[0])
    samples = np.empty((acq.windows, acq.samples_per_window))
    for w, phi in enumerate(trajectory.phases):
        pdf = np.einsum("ng,nm,mg->g", psi, fock.rotate(rho, phi), psi, optimize=True).real
        u = window_rng(acq.rng_seed, w).random(acq.samples_per_window)
        samples[w] = _inverse_cdf_sample(pdf, grid, u)

    vac_grid = _grid(DEFAULT_Q_MAX)
    vac_pdf = hermite_functions(vac_grid, 1)[0] ** 2
    vac = _inverse_cdf_sample(vac_pdf, vac_grid, vacuum_rng(acq.rng_seed).random(acq.vacuum_samples))

    metadata = {
        "seed": int(acq.rng_seed),
        "windows": int(acq.windows),
        "samples_per_window": int(acq.samples_per_window),
        "vacuum_samples": int(acq.vacuum_samples),
        "phase_model": trajectory.model,
        "scale": 1.0 / acq.gain,
    }
    return QuadratureDataset(
        samples * acq.gain, vac * acq.gain, metadata, true_phases=trajectory.phases.copy()
    )


class CalibrationScaler(TransformerMixin, BaseEstimator):
    """Rescale raw homodyne output so the vacuum variance becomes 1/2.

    Fit on vacuum samples; ``transform`` multiplies by
    ``scale_ = sqrt(vacuum_variance / var(vacuum))``.
    """

    def __init__(self, vacuum_variance=VACUUM_VARIANCE):
        self.vacuum_variance = vacuum_variance

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, dtype=np.float64).ravel()
        if X.size < 2:
            raise DataError("vacuum calibration needs at least two samples")
        var = float(np.var(X, ddof=1))
        if not var > 0.0:
            raise DataError("vacuum calibration has zero variance")
        self.vacuum_variance_in_ = var
        self.scale_ = math.sqrt(self.vacuum_variance / var)
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        return np.asarray(X, dtype=float) * self.scale_


def calibrate_scale(dataset: QuadratureDataset) -> QuadratureDataset:
    """Return a copy of ``dataset`` rescaled so its vacuum variance is 1/2."""
    if dataset.vacuum_calibration.size == 0:
        raise DataError("dataset has no vacuum calibration samples")
    scaler = CalibrationScaler().fit(dataset.vacuum_calibration)
    metadata = dict(dataset.metadata)
    metadata["scale"] = float(metadata.get("scale", 1.0)) * scaler.scale_
    metadata["last_scale_factor"] = scaler.scale_
    metadata["calibrated"] = True
    return replace(
        dataset,
        samples=scaler.transform(dataset.samples),
        vacuum_calibration=scaler.transform(dataset.vacuum_calibration),
        metadata=metadata,
    )


# --- persistence ------------------------------------------------------------


def format_float(x: float) -> str:
    """Shortest text that round-trips to the same double."""
    return repr(float(x))


def _format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _header(metadata: dict) -> list[str]:
    return [f"# {k}={_format_value(v)}" for k, v in metadata.items()]


def write_dataset(dataset: QuadratureDataset, signal_path, vacuum_path=None) -> None:
    """Write the signal file and, if given, the parallel vacuum file."""
    signal_path = Path(signal_path)
    lines = _header(dataset.metadata)
    for w, row in enumerate(dataset.samples):
        prefix = f"{w}\t"
        lines.extend(prefix + format_float(v) for v in row)
    signal_path.write_text("\n".join(lines) + "\n")
    if vacuum_path is not None:
        vlines = _header(dataset.metadata)
        vlines.extend(f"{VACUUM_WINDOW_INDEX}\t" + format_float(v) for v in dataset.vacuum_calibration)
        Path(vacuum_path).write_text("\n".join(vlines) + "\n")


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value in ("True", "False"):
        return value == "True"
    return value


def _read_tsv(path: Path) -> tuple[dict, np.ndarray, np.ndarray]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    metadata = {}
    index, values = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: header line is not key=value")
            metadata[key.strip()] = _coerce(value.strip())
            continue
        parts = line.split("\t")
        try:
            if len(parts) != 2:
                raise ValueError
            w, v = int(parts[0]), float(parts[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: expected 'window_index<TAB>value', got {line!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{path}:{lineno}: non-finite sample value")
        index.append(w)
        values.append(v)
    return metadata, np.asarray(index, dtype=int), np.asarray(values, dtype=float)


def read_dataset(signal_path, vacuum_path=None) -> QuadratureDataset:
    """Parse a dataset written by :func:`write_dataset`.

    ``signal_path`` may be a directory holding ``signal.tsv`` and
    ``vacuum.tsv``. Without an explicit ``vacuum_path`` a ``vacuum.tsv`` next
    to the signal file is used when present.
    """
    signal_path = Path(signal_path)
    if signal_path.is_dir():
        signal_path = signal_path / "signal.tsv"
    if vacuum_path is None:
        candidate = signal_path.with_name("vacuum.tsv")
        vacuum_path = candidate if candidate.exists() and candidate != signal_path else None
    metadata, index, values = _read_tsv(signal_path)
    if values.size == 0:
        raise DataError(f"{signal_path}: no samples")
    if np.any(index < 0):
        raise DataError(f"{signal_path}: negative window index in signal file")
    windows = np.unique(index)
    counts = np.bincount(index)[windows]
    if counts.min() != counts.max():
        raise DataError(f"{signal_path}: windows have unequal sample counts")
    order = np.argsort(index, kind="stable")
    samples = values[order].reshape(windows.size, counts[0])
    vac = np.empty(0)
    if vacuum_path is not None:
        _, vindex, vac = _read_tsv(Path(vacuum_path))
        if np.any(vindex != VACUUM_WINDOW_INDEX):
            raise DataError(f"{vacuum_path}: vacuum samples must use window index {VACUUM_WINDOW_INDEX}")
    return QuadratureDataset(samples, vac, metadata)
