"""
Conditional state preparation: photon loss, the on/off trigger detector and
the heralded signal state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from . import fock
from .exceptions import ConfigurationError, DimensionError, HeraldImpossibleError

#: Herald probabilities below this are treated as "never clicks".
MIN_HERALD_PROBABILITY = 1e-15


def _check_unit_interval(value, name, *, open_right=False) -> float:
    value = float(value)
    upper_ok = value < 1.0 if open_right else value <= 1.0
    if not np.isfinite(value) or value < 0.0 or not upper_ok:
        bracket = ")" if open_right else "]"
        raise ConfigurationError(f"{name} must lie in [0, 1{bracket}, got {value!r}")
    return value


@dataclass(frozen=True)
class DetectorModel:
    """On/off single-photon detector with lumped trigger-path efficiency and
    per-window dark-count probability."""

    eta_t: float = 0.1
    p_dark: float = 1e-5

    def __post_init__(self):
        _check_unit_interval(self.eta_t, "eta_t")
        _check_unit_interval(self.p_dark, "p_dark", open_right=True)


@dataclass(frozen=True)
class LossChannel:
    eta: float = 1.0

    def __post_init__(self):
        _check_unit_interval(self.eta, "signal loss eta")


@dataclass(frozen=True)
class HeraldConfig:
    """Everything needed to prepare one heralded signal state."""

    lam: float = 0.12
    setting: fock.BeamSplitterSetting = field(default_factory=lambda: fock.BeamSplitterSetting(0.0))
    detector: DetectorModel = field(default_factory=DetectorModel)
    signal_loss: LossChannel = field(default_factory=LossChannel)
    cutoff: int = fock.DEFAULT_CUTOFF

    def __post_init__(self):
        fock.check_cutoff(self.cutoff)
        fock.check_squeezing(self.lam, self.cutoff)
        if not isinstance(self.setting, fock.BeamSplitterSetting):
            raise ConfigurationError("setting must be a BeamSplitterSetting")

    @property
    def reflectivity(self) -> float:
        return self.setting.reflectivity


@dataclass(frozen=True)
class HeraldedState:
    state: np.ndarray
    herald_probability: float


def loss_kraus_operators(eta: float, cutoff: int) -> list[np.ndarray]:
    """Kraus operators ``A_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|``."""
    eta = _check_unit_interval(eta, "eta")
    cutoff = fock.check_cutoff(cutoff)
    n = np.arange(cutoff)
    ops = []
    for k in range(cutoff):
        src = n[k:]
        a_k = np.zeros((cutoff, cutoff))
        a_k[src - k, src] = np.sqrt(binom.pmf(k, src, 1.0 - eta))
        ops.append(a_k)
    return ops


def loss_apply(rho, channel) -> np.ndarray:
    """Send a single-mode state through a pure-loss channel of transmission ``eta``.

    ``channel`` may be a :class:`LossChannel` or a bare transmission value.
    """
    eta = channel.eta if isinstance(channel, LossChannel) else channel
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"rho must be square, got shape {rho.shape}")
    out = np.zeros_like(rho)
    for a_k in loss_kraus_operators(eta, rho.shape[0]):
        out += a_k @ rho @ a_k.T
    return fock.hermitize(out)


def click_povm(detector: DetectorModel, cutoff: int) -> np.ndarray:
    """Click element ``I - (1 - p_dark) sum_n (1 - eta_t)^n |n><n|``."""
    cutoff = fock.check_cutoff(cutoff)
    n = np.arange(cutoff)
    no_click = (1.0 - detector.p_dark) * (1.0 - detector.eta_t) ** n
    return np.diag(1.0 - no_click).astype(complex)


def working_cutoff(cutoff: int) -> int:
    """Per-mode dimension in which the beam splitter acts exactly.

    The squeezed input holds at most ``D - 1`` photons per mode, so every
    photon-number block it populates fits inside ``2 D - 1`` levels.
    """
    return 2 * cutoff - 1


def _post_bs_amplitudes(config: HeraldConfig, convention: str) -> np.ndarray:
    d = config.cutoff
    dw = working_cutoff(d)
    psi = fock.two_mode_squeezed_state(config.lam, d).reshape(d, d)
    big = np.zeros((dw, dw), dtype=complex)
    big[:d, :d] = psi
    u = fock.beam_splitter_unitary(config.setting, dw, convention=convention)
    return fock.apply_unitary(big.ravel(), u).reshape(dw, dw)


def _finish(conditional: np.ndarray, config: HeraldConfig) -> HeraldedState:
    p_click = float(np.trace(conditional).real)
    if p_click < MIN_HERALD_PROBABILITY:
        raise HeraldImpossibleError(
            f"herald impossible: click probability {p_click:.3g} for this configuration"
        )
    signal = loss_apply(conditional / p_click, config.signal_loss)
    d = config.cutoff
    return HeraldedState(fock.normalize(signal[:d, :d]), p_click)


def herald_signal(config: HeraldConfig, convention: str = "symmetric") -> HeraldedState:
    """Signal state conditioned on a trigger click, and the click probability.

    Runs the full two-mode density-matrix route: beam splitter on the
    two-mode squeezed vacuum, click projection on the trigger, trace over the
    trigger, then signal loss. The two-mode steps run at the working cutoff
    and the signal is truncated to ``config.cutoff`` at the end.
    """
    dw = working_cutoff(config.cutoff)
    psi = _post_bs_amplitudes(config, convention).ravel()
    rho2 = np.outer(psi, psi.conj())
    povm = np.kron(np.eye(dw), click_povm(config.detector, dw))
    return _finish(fock.partial_trace(povm @ rho2, keep=fock.SIGNAL), config)


def herald_signal_pure(config: HeraldConfig, convention: str = "symmetric") -> HeraldedState:
    """Same result as :func:`herald_signal` through the pure-state amplitudes."""
    amp = _post_bs_amplitudes(config, convention)
    weights = np.diag(click_povm(config.detector, amp.shape[0])).real
    return _finish((amp * weights[None, :]) @ amp.conj().T, config)


def ideal_target_state(config: HeraldConfig) -> np.ndarray:
    """Reference state for a configuration: lossless signal, dark-count-free
    detector in its weak-efficiency limit (click POVM proportional to the
    photon number), at the configured squeezing and reflectivity.

    At ``R = 1/2`` this is the squeezed vacuum for any trigger model; at
    ``R in {0, 1}`` it tends to ``|1><1|`` as the squeezing goes to zero.
    """
    d = config.cutoff
    amp = _post_bs_amplitudes(config, "symmetric")
    weights = np.arange(amp.shape[0], dtype=float)
    cond = ((amp * weights[None, :]) @ amp.conj().T)[:d, :d]
    if np.trace(cond).real < MIN_HERALD_PROBABILITY:
        # no squeezing at all: first-order weights of |1,1> and |0,2> after the splitter
        t = 1.0 - config.reflectivity
        r = config.reflectivity
        cond = np.zeros((d, d), dtype=complex)
        cond[1, 1] = (t - r) ** 2
        cond[0, 0] = 4.0 * t * r
    return fock.normalize(cond)
