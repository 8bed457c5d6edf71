"""
Truncated Fock-space linear algebra for one and two optical modes.

States are plain numpy arrays. A single-mode density matrix is ``(D, D)``;
a two-mode state is either a pure vector of length ``D**2`` or a
``(D**2, D**2)`` density matrix over ``|n>_signal (x) |m>_trigger`` with the
flat index ``k = n * D + m`` (``numpy.kron(signal_op, trigger_op)`` order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import ConfigurationError, DimensionError

SIGNAL = "signal"
TRIGGER = "trigger"

#: Default Fock cutoff.
DEFAULT_CUTOFF = 10

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
LEAKAGE_TOL = 1e-6


def check_cutoff(cutoff) -> int:
    if isinstance(cutoff, bool) or int(cutoff) != cutoff:
        raise ConfigurationError(f"cutoff must be an integer, got {cutoff!r}")
    cutoff = int(cutoff)
    if cutoff < 2:
        raise ConfigurationError(f"cutoff must be >= 2, got {cutoff}")
    return cutoff


def check_density_matrix(rho, cutoff=None, *, normalized=True, name="rho") -> np.ndarray:
    """Validate a single-mode density matrix and return it as complex array.

    Raises ``DimensionError`` on shape problems and ``ConfigurationError`` when
    Hermiticity, trace or positivity fail beyond the module tolerances.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {rho.shape}")
    if cutoff is not None and rho.shape[0] != cutoff:
        raise DimensionError(f"{name} has dimension {rho.shape[0]}, expected {cutoff}")
    if not np.all(np.isfinite(rho)):
        raise ConfigurationError(f"{name} has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ConfigurationError(f"{name} is not Hermitian")
    if normalized and abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise ConfigurationError(f"{name} trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise ConfigurationError(f"{name} is not positive semidefinite")
    return rho


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def normalize(rho: np.ndarray) -> np.ndarray:
    rho = hermitize(rho)
    return rho / np.trace(rho).real


def annihilation_operator(cutoff: int) -> np.ndarray:
    """Lowering operator ``a`` with ``a[n-1, n] = sqrt(n)``."""
    cutoff = check_cutoff(cutoff)
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


def number_operator(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(check_cutoff(cutoff), dtype=float)).astype(complex)


def fock_dm(n: int, cutoff: int) -> np.ndarray:
    cutoff = check_cutoff(cutoff)
    if not 0 <= n < cutoff:
        raise DimensionError(f"Fock state |{n}> outside cutoff {cutoff}")
    rho = np.zeros((cutoff, cutoff), dtype=complex)
    rho[n, n] = 1.0
    return rho


def vacuum(cutoff: int) -> np.ndarray:
    return fock_dm(0, cutoff)


def rotate(rho: np.ndarray, phi: float) -> np.ndarray:
    """Phase-space rotation ``rho_nm -> exp(i (n - m) phi) rho_nm``."""
    phases = np.exp(1j * phi * np.arange(rho.shape[0]))
    return phases[:, None] * rho * phases.conj()[None, :]


def truncation_leakage(lam: float, cutoff: int) -> float:
    """Two-mode squeezed-vacuum probability lost above the cutoff."""
    n = np.arange(cutoff)
    return float(1.0 - (1.0 - lam**2) * np.sum(lam ** (2 * n)))


def check_squeezing(lam, cutoff: int) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or not 0.0 <= lam < 1.0:
        raise ConfigurationError(f"squeezing lambda must lie in [0, 1), got {lam!r}")
    leak = truncation_leakage(lam, cutoff)
    if leak >= LEAKAGE_TOL:
        raise ConfigurationError(
            f"lambda={lam} leaks {leak:.3g} of the state above cutoff {cutoff}; "
            "increase the cutoff"
        )
    return lam


def two_mode_squeezed_state(lam: float, cutoff: int) -> np.ndarray:
    """Pure two-mode squeezed vacuum ``sum_n sqrt(1-lam^2) lam^n |n, n>``.

    Renormalized inside the cutoff.
    """
    cutoff = check_cutoff(cutoff)
    lam = check_squeezing(lam, cutoff)
    n = np.arange(cutoff)
    psi = np.zeros(cutoff * cutoff, dtype=complex)
    psi[n * cutoff + n] = np.sqrt(1.0 - lam**2) * lam**n
    return psi / np.linalg.norm(psi)


def squeezed_vacuum(lam: float, cutoff: int, squeezed_phase: float = np.pi / 2) -> np.ndarray:
    """Single-mode squeezed vacuum with ``tanh r = lam``.

    ``squeezed_phase`` is the local-oscillator phase at which the quadrature
    variance reaches its minimum ``(1 - lam) / (1 + lam) / 2``.
    """
    cutoff = check_cutoff(cutoff)
    lam = float(lam)
    if not 0.0 <= lam < 1.0:
        raise ConfigurationError(f"squeezing lambda must lie in [0, 1), got {lam!r}")
    z = lam * np.exp(1j * (np.pi - 2.0 * squeezed_phase))
    k = np.arange((cutoff + 1) // 2)
    # |c_2k| = sqrt((2k)!) / (2^k k!) |z|^k, in logs to avoid overflow
    log_mag = 0.5 * gammaln(2 * k + 1) - k * np.log(2.0) - gammaln(k + 1)
    psi = np.zeros(cutoff, dtype=complex)
    psi[2 * k] = np.exp(log_mag) * z**k
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class BeamSplitterSetting:
    """Variable beam splitter driven by a half-wave plate at angle ``theta``.

    The reflectivity follows ``R = cos(2 theta)**2``.
    """

    theta: float

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise ConfigurationError(f"HWP angle must be finite, got {self.theta!r}")

    @property
    def reflectivity(self) -> float:
        return float(np.cos(2.0 * self.theta) ** 2)

    @property
    def mixing_angle(self) -> float:
        """Angle ``xi`` with ``sin(xi)**2 = R``."""
        return float(np.arcsin(np.sqrt(self.reflectivity)))

    @classmethod
    def from_reflectivity(cls, reflectivity: float) -> "BeamSplitterSetting":
        if not 0.0 <= reflectivity <= 1.0:
            raise ConfigurationError(f"reflectivity must lie in [0, 1], got {reflectivity!r}")
        return cls(0.5 * float(np.arccos(np.sqrt(reflectivity))))


def reflectivity(theta):
    """``R = cos^2(2 theta)``, vectorized over ``theta``."""
    return np.cos(2.0 * np.asarray(theta, dtype=float)) ** 2


def beam_splitter_unitary(setting, cutoff: int, convention: str = "symmetric") -> np.ndarray:
    """Two-mode beam-splitter unitary on the truncated ``D**2`` space.

    ``setting`` is a :class:`BeamSplitterSetting` or a reflectivity in [0, 1].
    With the ``"symmetric"`` convention ``U = exp(i xi (a^+ b + a b^+))`` and the
    reflected amplitude carries a factor ``+i``; ``"real"`` uses
    ``U = exp(xi (a^+ b - a b^+))``. In both cases ``sin(xi)**2 = R``.
    """
    cutoff = check_cutoff(cutoff)
    if not isinstance(setting, BeamSplitterSetting):
        setting = BeamSplitterSetting.from_reflectivity(float(setting))
    xi = setting.mixing_angle
    a = annihilation_operator(cutoff)
    eye = np.eye(cutoff)
    a_s = np.kron(a, eye)
    a_t = np.kron(eye, a)
    hop = a_s.conj().T @ a_t
    if convention == "symmetric":
        gen = hop + hop.conj().T
        w, v = np.linalg.eigh(gen)
        return (v * np.exp(1j * xi * w)) @ v.conj().T
    if convention == "real":
        # exp(xi K) with K anti-Hermitian: diagonalize the Hermitian iK
        w, v = np.linalg.eigh(1j * (hop - hop.conj().T))
        return (v * np.exp(-1j * xi * w)) @ v.conj().T
    raise ConfigurationError(f"unknown beam-splitter convention {convention!r}")


def apply_unitary(state: np.ndarray, unitary: np.ndarray) -> np.ndarray:
    """``U |psi>`` for vectors, ``U rho U^+`` for density matrices."""
    state = np.asarray(state)
    if unitary.shape[1] != state.shape[0]:
        raise DimensionError(
            f"unitary of shape {unitary.shape} cannot act on state of shape {state.shape}"
        )
    if state.ndim == 1:
        return unitary @ state
    if state.shape[0] != state.shape[1]:
        raise DimensionError(f"state must be square, got {state.shape}")
    return unitary @ state @ unitary.conj().T


def _two_mode_cutoff(size: int) -> int:
    cutoff = int(round(np.sqrt(size)))
    if cutoff * cutoff != size:
        raise DimensionError(f"size {size} is not a two-mode D**2 dimension")
    return cutoff


def partial_trace(state: np.ndarray, keep: str = SIGNAL) -> np.ndarray:
    """Reduced single-mode density matrix of a two-mode state."""
    state = np.asarray(state, dtype=complex)
    if keep not in (SIGNAL, TRIGGER):
        raise ConfigurationError(f"keep must be {SIGNAL!r} or {TRIGGER!r}, got {keep!r}")
    d = _two_mode_cutoff(state.shape[0])
    if state.ndim == 1:
        psi = state.reshape(d, d)
        return psi @ psi.conj().T if keep == SIGNAL else psi.T @ psi.conj()
    if state.shape != (d * d, d * d):
        raise DimensionError(f"two-mode density matrix must be square, got {state.shape}")
    t = state.reshape(d, d, d, d)
    if keep == SIGNAL:
        return np.einsum("imjm->ij", t)
    return np.einsum("ninj->ij", t)
