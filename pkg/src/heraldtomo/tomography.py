"""
Homodyne tomography: per-window variances, the ``A + B cos 2 phi`` variance
law, phase assignment and iterative maximum-likelihood reconstruction.

The two fitted steps follow the scikit-learn estimator API:
:class:`VarianceLawFit` (fit on window variances, transform variances into
local-oscillator phases) and :class:`MaxLikTomography` (fit on ``(q, phi)``
pairs, exposing ``rho_``). The module-level functions are thin wrappers used
by the command-line pipeline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import fock
from .exceptions import (
    ConfigurationError,
    DataError,
    DimensionError,
    NumericalError,
    PhaseInsensitiveError,
)
from .homodyne import QuadratureDataset, format_float, hermite_functions

MIN_BIN_PROBABILITY = 1e-300


# --- window variances and the variance law ---------------------------------


@dataclass(frozen=True)
class WindowVariances:
    """Per-window quadrature variance with its error bar ``v * sqrt(2 / N)``."""

    window_index: np.ndarray
    variance: np.ndarray
    count: np.ndarray
    sigma_error: np.ndarray

    def __len__(self):
        return self.variance.size


def window_variances(dataset: QuadratureDataset) -> WindowVariances:
    samples = dataset.samples
    if samples.size == 0:
        raise DataError("no samples")
    n = samples.shape[1]
    if n < 2:
        raise DataError("each window needs at least two samples to form a variance")
    var = np.var(samples, axis=1, ddof=1)
    count = np.full(samples.shape[0], n)
    return WindowVariances(np.arange(samples.shape[0]), var, count, var * np.sqrt(2.0 / count))


@dataclass(frozen=True)
class VarianceFit:
    A: float
    B: float
    phase_offset: float = 0.0
    phase_sensitive: bool = True
    neighbors: int = 0

    @property
    def uncertainty_product(self) -> float:
        """``(A + B)(A - B)``; equals 1/4 for pure minimum-uncertainty states."""
        return (self.A + self.B) * (self.A - self.B)


def neighbor_mean(values, neighbors: int) -> np.ndarray:
    """Mean of the ``neighbors`` windows on either side, excluding the window itself.

    Excluding the window keeps its own sampling noise out of its phase
    estimate; with ``neighbors=0`` the values are returned unchanged.
    """
    values = np.asarray(values, dtype=float)
    if neighbors <= 0 or values.size < 2:
        return values.copy()
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(values.size)
    lo = np.maximum(idx - neighbors, 0)
    hi = np.minimum(idx + neighbors + 1, values.size)
    return (csum[hi] - csum[lo] - values) / (hi - lo - 1)


class VarianceLawFit(TransformerMixin, BaseEstimator):
    """Fit ``var(phi) = A + B cos 2 phi`` when the phases are unknown.

    Only the distribution of window variances is available, so ``A`` and
    ``B`` come from robust low/high quantiles of the observed variances.
    Data whose scatter is compatible with the per-window error bars is
    declared phase-insensitive and gets ``B = 0``.

    Parameters
    ----------
    low_quantile, high_quantile : float
        Quantiles taken as the variance minimum and maximum.
    insensitivity_sigma : float
        Allowed excess of the reduced chi-square over one, in units of its
        standard deviation, before the data counts as phase dependent.
    neighbors : int
        When positive, each window is represented by the mean variance of
        this many windows on either side (itself excluded) for both the
        fit and the phase mapping. Requires ``X`` in acquisition order and
        a phase that drifts slowly from window to window.
    """

    def __init__(self, low_quantile=0.02, high_quantile=0.98, insensitivity_sigma=3.0, neighbors=0):
        self.low_quantile = low_quantile
        self.high_quantile = high_quantile
        self.insensitivity_sigma = insensitivity_sigma
        self.neighbors = neighbors

    def fit(self, X, y=None, sigma_error=None):
        """
        Parameters
        ----------
        X : array_like of shape (n_windows,)
            Window variances.
        sigma_error : array_like of shape (n_windows,), optional
            Error bar per window. Without it no insensitivity test is made.
        """
        v = check_array(X, ensure_2d=False, dtype=np.float64).ravel()
        if v.size < 3:
            raise DataError(f"variance-law fit needs at least 3 windows, got {v.size}")
        if not 0.0 <= self.low_quantile < self.high_quantile <= 1.0:
            raise ConfigurationError("quantiles must satisfy 0 <= low < high <= 1")
        lo, hi = np.quantile(neighbor_mean(v, self.neighbors), [self.low_quantile, self.high_quantile])
        self.A_ = float(0.5 * (hi + lo))
        self.B_ = float(0.5 * (hi - lo))
        self.phase_offset_ = 0.0
        self.phase_sensitive_ = True
        if sigma_error is not None:
            sigma = np.asarray(sigma_error, dtype=float).ravel()
            if sigma.shape != v.shape:
                raise DimensionError("sigma_error must match the number of windows")
            dof = v.size - 1
            chi2 = float(np.sum(((v - v.mean()) / sigma) ** 2) / dof)
            self.reduced_chi2_ = chi2
            if chi2 <= 1.0 + self.insensitivity_sigma * np.sqrt(2.0 / dof):
                self.A_ = float(np.mean(v))
                self.B_ = 0.0
                self.phase_sensitive_ = False
        return self

    def transform(self, X):
        """Map window variances to phases in ``[0, pi/2]`` (0 at the maximum)."""
        check_is_fitted(self, "A_")
        if self.B_ <= 0.0:
            raise PhaseInsensitiveError(
                "phase-insensitive state (B = 0): use a fixed-phase override or the "
                "phase-average path"
            )
        v = neighbor_mean(np.asarray(X, dtype=float).ravel(), self.neighbors)
        return 0.5 * np.arccos(np.clip((v - self.A_) / self.B_, -1.0, 1.0))

    def to_result(self) -> VarianceFit:
        check_is_fitted(self, "A_")
        return VarianceFit(self.A_, self.B_, self.phase_offset_, self.phase_sensitive_, self.neighbors)


def fit_variance_law(variances: WindowVariances, **params) -> VarianceFit:
    """Fit the variance law; keyword arguments go to :class:`VarianceLawFit`."""
    est = VarianceLawFit(**params).fit(variances.variance, sigma_error=variances.sigma_error)
    return est.to_result()


def unfold_phases(folded: np.ndarray) -> np.ndarray:
    """Extend phases from ``[0, pi/2]`` to ``[0, pi)`` by continuity.

    Each window picks ``phi`` or ``pi - phi``, whichever lies closer (mod pi)
    to the linear extrapolation of the two previous unfolded phases.
    """
    folded = np.asarray(folded, dtype=float)
    out = folded.copy()
    for w in range(1, folded.size):
        prev = out[w - 1]
        guess = prev + (prev - out[w - 2]) if w >= 2 else prev
        cands = np.array([folded[w], np.pi - folded[w]])
        cands += np.pi * np.round((guess - cands) / np.pi)
        out[w] = cands[np.argmin(np.abs(cands - guess))]
    return np.mod(out, np.pi)


def assign_phases(
    dataset: QuadratureDataset,
    fit: VarianceFit,
    override=None,
    unfold: bool = False,
    variances: WindowVariances | None = None,
) -> np.ndarray:
    """Attach a local-oscillator phase to every sample.

    Returns an ``(n_samples, 2)`` array of ``(q, phi)`` rows. ``override``
    replaces the variance-based assignment: a number fixes every window to
    that phase, ``"average"`` spreads the windows evenly over ``[0, pi)``
    (the phase-average path for phase-insensitive states).
    """
    n_win, n = dataset.samples.shape
    if override is None:
        if fit.B <= 0.0:
            raise PhaseInsensitiveError(
                "phase-insensitive state (B = 0): pass override='average' to use the "
                "phase-average path"
            )
        if variances is None:
            variances = window_variances(dataset)
        v = neighbor_mean(variances.variance, fit.neighbors)
        x = np.clip((v - fit.A) / fit.B, -1.0, 1.0)
        phases = 0.5 * np.arccos(x)
        if unfold:
            phases = unfold_phases(phases)
    elif isinstance(override, str):
        if override != "average":
            raise ConfigurationError(f"unknown phase override {override!r}")
        phases = np.pi * (np.arange(n_win) + 0.5) / n_win
    else:
        phases = np.full(n_win, float(override))
    return np.column_stack([dataset.samples.ravel(), np.repeat(phases, n)])


# --- maximum likelihood ------------------------------------------------------


def projector_vectors(q, phi, cutoff: int) -> np.ndarray:
    """Rows ``v_j`` with ``Pi(q_j, phi_j) = v_j v_j^+``; shape ``(len(q), D)``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), q.shape)
    psi = hermite_functions(q, cutoff).T
    return psi * np.exp(-1j * np.outer(phi, np.arange(cutoff)))


def quadrature_projector(q: float, phi: float, cutoff: int) -> np.ndarray:
    """Rank-one quadrature projector in the Fock basis.

    ``Tr[Pi(q, phi) rho]`` equals the homodyne density of ``rho`` at ``q``.
    """
    if not (np.isfinite(q) and np.isfinite(phi)):
        raise ConfigurationError("quadrature projector needs finite q and phi")
    v = projector_vectors([q], [phi], fock.check_cutoff(cutoff))[0]
    return np.outer(v, v.conj())


def bin_probabilities(rho, vectors) -> np.ndarray:
    return np.einsum("jn,nm,jm->j", vectors.conj(), rho, vectors, optimize=True).real


def log_likelihood(rho, vectors, counts) -> float:
    """Count-weighted mean log density of the binned data."""
    p = bin_probabilities(rho, vectors)
    ok = p > MIN_BIN_PROBABILITY
    return float(np.sum(counts[ok] * np.log(p[ok])) / np.sum(counts))


def r_operator(rho, vectors, counts) -> tuple[np.ndarray, int]:
    """``R(rho) = sum_j f_j / Tr[Pi_j rho] Pi_j / sum f``, and the skipped-bin count."""
    p = bin_probabilities(rho, vectors)
    ok = p > MIN_BIN_PROBABILITY
    w = np.where(ok, counts / np.where(ok, p, 1.0), 0.0) / np.sum(counts)
    return (vectors.T * w) @ vectors.conj(), int(np.count_nonzero(~ok & (counts > 0)))


def maxlik_step(rho, vectors, counts) -> np.ndarray:
    """One undiluted ``R rho R`` update, renormalized."""
    r, _ = r_operator(rho, vectors, counts)
    return fock.normalize(r @ rho @ r)


def _diluted(rho, r, eps):
    m = np.eye(rho.shape[0]) + eps * r
    return fock.normalize(m @ rho @ m.conj().T)


@dataclass
class ReconstructionSettings:
    cutoff: int = fock.DEFAULT_CUTOFF
    max_iterations: int = 5000
    log_likelihood_tolerance: float = 1e-9
    phase_bins: int = 12
    q_bins: int = 100

    def __post_init__(self):
        fock.check_cutoff(self.cutoff)
        for name in ("max_iterations", "phase_bins", "q_bins"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if not self.log_likelihood_tolerance > 0:
            raise ConfigurationError("log_likelihood_tolerance must be > 0")


@dataclass
class ReconstructedState:
    rho: np.ndarray
    iterations_used: int
    log_likelihood_trace: np.ndarray
    skipped_bins: int = 0

    @property
    def final_log_likelihood(self) -> float:
        return float(self.log_likelihood_trace[-1])


def bin_samples(X, q_bins: int, phase_bins: int):
    """Histogram ``(q, phi)`` rows on a regular grid.

    Returns bin q-centres, count-weighted mean bin phases and counts for the
    nonempty bins.
    """
    q, phi = X[:, 0], X[:, 1]
    q_edges = np.linspace(q.min(), q.max(), q_bins + 1)
    if q_edges[0] == q_edges[-1]:
        q_edges = q_edges[0] + np.linspace(-0.5, 0.5, q_bins + 1)
    p_lo, p_hi = phi.min(), phi.max()
    if p_hi > p_lo:
        p_idx = np.minimum(((phi - p_lo) / (p_hi - p_lo) * phase_bins).astype(int), phase_bins - 1)
    else:
        p_idx = np.zeros(phi.size, dtype=int)
    q_idx = np.clip(np.searchsorted(q_edges, q, side="right") - 1, 0, q_bins - 1)
    flat = p_idx * q_bins + q_idx
    size = phase_bins * q_bins
    counts = np.bincount(flat, minlength=size).astype(float)
    phase_sum = np.bincount(flat, weights=phi, minlength=size)
    nz = counts > 0
    centres = 0.5 * (q_edges[:-1] + q_edges[1:])
    return centres[np.flatnonzero(nz) % q_bins], phase_sum[nz] / counts[nz], counts[nz]


def iterate_maxlik(vectors, counts, max_iterations: int, tol: float, rho0=None):
    """Monotone ``R rho R`` iteration on binned data.

    A plain ``R rho R`` step is taken whenever it raises the likelihood;
    otherwise the step is diluted, ``(1 + eps R) rho (1 + eps R)``, halving
    ``eps`` until the likelihood no longer drops. Returns
    ``(rho, iterations, trace, skipped_bins)``.
    """
    d = vectors.shape[1]
    rho = np.eye(d, dtype=complex) / d if rho0 is None else np.asarray(rho0, dtype=complex)
    counts = np.asarray(counts, dtype=float)
    trace = [log_likelihood(rho, vectors, counts)]
    skipped = 0
    it = 0
    for it in range(1, max_iterations + 1):
        r, skipped = r_operator(rho, vectors, counts)
        if skipped == counts.size:
            raise NumericalError("every bin has vanishing probability; reconstruction failed")
        new = fock.normalize(r @ rho @ r)
        ll = log_likelihood(new, vectors, counts)
        eps = 1.0
        while ll < trace[-1] and eps > 1e-12:
            new = _diluted(rho, r, eps)
            ll = log_likelihood(new, vectors, counts)
            eps *= 0.5
        if ll < trace[-1]:
            it -= 1
            break
        gain = ll - trace[-1]
        rho = new
        trace.append(ll)
        if gain < tol:
            break
    return rho, it, np.asarray(trace), skipped


class MaxLikTomography(BaseEstimator):
    """Maximum-likelihood density matrix from homodyne ``(q, phi)`` samples.

    Parameters
    ----------
    cutoff : int
        Fock-space dimension of the estimate.
    max_iterations : int
    tol : float
        Stop once the per-sample log-likelihood gain of an iteration falls
        below this value.
    q_bins, phase_bins : int
        Histogram resolution applied before iterating.

    Attributes
    ----------
    rho_ : ndarray of shape (cutoff, cutoff)
    n_iter_ : int
    log_likelihood_trace_ : ndarray
        Per-sample log-likelihood after each iteration, starting from the
        maximally mixed state. Nondecreasing.
    n_skipped_bins_ : int
        Bins whose probability underflowed in the final iteration.
    """

    def __init__(self, cutoff=fock.DEFAULT_CUTOFF, max_iterations=5000, tol=1e-9, q_bins=100, phase_bins=12):
        self.cutoff = cutoff
        self.max_iterations = max_iterations
        self.tol = tol
        self.q_bins = q_bins
        self.phase_bins = phase_bins

    def fit(self, X, y=None):
        """
        Parameters
        ----------
        X : array_like of shape (n_samples, 2)
            Quadrature value and local-oscillator phase per sample.
        """
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise DimensionError(f"expected (q, phi) columns, got {X.shape[1]}")
        cutoff = fock.check_cutoff(self.cutoff)
        q, phi, counts = bin_samples(X, self.q_bins, self.phase_bins)
        vectors = projector_vectors(q, phi, cutoff)
        rho, n_iter, trace, skipped = iterate_maxlik(vectors, counts, self.max_iterations, self.tol)
        if skipped:
            warnings.warn(f"{skipped} bins with vanishing probability were skipped", RuntimeWarning)
        self.rho_ = rho
        self.n_iter_ = n_iter
        self.log_likelihood_trace_ = trace
        self.n_skipped_bins_ = skipped
        self.n_features_in_ = 2
        return self

    def score(self, X, y=None):
        """Mean log density of unbinned ``(q, phi)`` samples under ``rho_``."""
        check_is_fitted(self, "rho_")
        X = check_array(X, dtype=np.float64)
        p = bin_probabilities(self.rho_, projector_vectors(X[:, 0], X[:, 1], self.rho_.shape[0]))
        return float(np.mean(np.log(np.maximum(p, MIN_BIN_PROBABILITY))))


def maxlik_reconstruct(samples, settings: ReconstructionSettings | None = None) -> ReconstructedState:
    settings = settings or ReconstructionSettings()
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DataError("no samples")
    est = MaxLikTomography(
        cutoff=settings.cutoff,
        max_iterations=settings.max_iterations,
        tol=settings.log_likelihood_tolerance,
        q_bins=settings.q_bins,
        phase_bins=settings.phase_bins,
    ).fit(samples)
    return ReconstructedState(est.rho_, est.n_iter_, est.log_likelihood_trace_, est.n_skipped_bins_)


# --- persistence ------------------------------------------------------------


def _format_complex(z: complex) -> str:
    re, im = format_float(z.real), format_float(z.imag)
    sign = "" if im.startswith("-") else "+"
    return f"{re}{sign}{im}j"


def write_reconstruction(path, rho, *, iterations: int, final_loglik: float, extra: dict | None = None) -> None:
    rho = np.asarray(rho, dtype=complex)
    header = {"cutoff": rho.shape[0], "iterations": int(iterations), "final_loglik": final_loglik}
    header.update(extra or {})
    lines = [f"{k}={format_float(v) if isinstance(v, float) else v}" for k, v in header.items()]
    lines += [",".join(_format_complex(z) for z in row) for row in rho]
    Path(path).write_text("\n".join(lines) + "\n")


def read_reconstruction(path) -> tuple[np.ndarray, dict]:
    """Parse a reconstruction file; returns ``(rho, header)``."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    header, rows = {}, []
    for lineno, line in enumerate(lines, start=1):
        if "=" in line and "," not in line and not rows:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
            continue
        try:
            rows.append([complex(tok.strip()) for tok in line.split(",")])
        except ValueError:
            raise DataError(f"{path}:{lineno}: cannot parse matrix row") from None
    if "cutoff" not in header:
        raise DataError(f"{path}: missing cutoff header")
    d = int(header["cutoff"])
    rho = np.array(rows, dtype=complex)
    if rho.shape != (d, d):
        raise DataError(f"{path}: expected a {d}x{d} matrix, got shape {rho.shape}")
    return rho, header
