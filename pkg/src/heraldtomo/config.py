"""
Flat ``key=value`` run configuration.

Every key has a default, so an empty file is a valid configuration. Angle
keys accept radians (bare number) or degrees with a ``deg`` suffix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import fock
from .exceptions import ConfigurationError, HeraldTomoError
from .heralding import DetectorModel, HeraldConfig, LossChannel
from .homodyne import AcquisitionConfig, PhaseTrajectory, format_float
from .tomography import ReconstructionSettings

ANGLE_KEYS = {"theta", "phase_start", "phase_span", "phase_step"}
PHASE_MODELS = ("linear-sweep", "random-walk", "fixed")


def parse_angle(text) -> float:
    """``"22.5deg"`` -> radians; bare numbers are radians already."""
    s = str(text).strip()
    try:
        if s.endswith("deg"):
            return math.radians(float(s[:-3]))
        return float(s)
    except ValueError:
        raise ConfigurationError(f"cannot parse angle {text!r}") from None


def parse_angle_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    items = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ConfigurationError("angle list is empty")
    angles = [parse_angle(t) for t in items]
    if not all(math.isfinite(a) for a in angles):
        raise ConfigurationError("angles must be finite")
    return angles


@dataclass(frozen=True)
class RunConfig:
    # experiment
    lam: float = 0.12
    theta: float = 0.0
    eta_t: float = 0.1
    p_dark: float = 1e-5
    eta_s: float = 1.0
    cutoff: int = fock.DEFAULT_CUTOFF
    # acquisition
    windows: int = 100
    samples_per_window: int = 1000
    seed: int = 0
    vacuum_samples: int = 100_000
    gain: float = 1.0
    phase_model: str = "linear-sweep"
    phase_start: float = 0.0
    phase_span: float = 2 * math.pi
    phase_step: float = 0.05
    # reconstruction
    max_iterations: int = 5000
    loglik_tolerance: float = 1e-9
    phase_bins: int = 12
    q_bins: int = 100
    phase_neighbors: int = 3
    # sweep
    thetas: str = "0deg,11.25deg,16deg,19deg,22.5deg"

    def __post_init__(self):
        for attr, (lo, hi, lo_open, hi_open) in _RANGES.items():
            value = getattr(self, attr)
            bad = (
                not math.isfinite(value)
                or (value <= lo if lo_open else value < lo)
                or (hi is not None and (value >= hi if hi_open else value > hi))
            )
            if bad:
                lb = "(" if lo_open else "["
                rb = "inf)" if hi is None else (f"{hi})" if hi_open else f"{hi}]")
                raise ConfigurationError(f"{self._key(attr)}: {value!r} outside {lb}{lo}, {rb}")
        if self.phase_model not in PHASE_MODELS:
            raise ConfigurationError(f"phase_model: must be one of {PHASE_MODELS}, got {self.phase_model!r}")
        if not math.isfinite(self.theta):
            raise ConfigurationError(f"theta: must be finite, got {self.theta!r}")
        parse_angle_list(self.thetas)
        # constructing the parts runs their range checks
        for build in (self.herald_config, self.acquisition, self.reconstruction_settings):
            try:
                build()
            except HeraldTomoError as exc:
                raise ConfigurationError(str(exc)) from None

    # key names as written in files; "lambda" is reserved in Python
    @staticmethod
    def _attr(key: str) -> str:
        return "lam" if key == "lambda" else key

    @staticmethod
    def _key(attr: str) -> str:
        return "lambda" if attr == "lam" else attr

    @classmethod
    def keys(cls) -> list[str]:
        return [cls._key(f.name) for f in fields(cls)]

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """New config with string (or typed) values applied by key."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in overrides.items():
            attr = self._attr(key.strip())
            if attr not in types:
                raise ConfigurationError(f"unknown key {key!r}")
            changes[attr] = _convert(attr, types[attr], raw)
        return replace(self, **changes)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        overrides = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigurationError(f"{source}:{lineno}: expected key=value, got {line!r}")
            overrides[key.strip()] = value.strip()
        return cls().with_overrides(overrides)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            value = format_float(value) if isinstance(value, float) else str(value)
            lines.append(f"{self._key(f.name)}={value}")
        return "\n".join(lines) + "\n"

    # --- typed views ---------------------------------------------------------

    @property
    def setting(self) -> fock.BeamSplitterSetting:
        return fock.BeamSplitterSetting(self.theta)

    def herald_config(self) -> HeraldConfig:
        return HeraldConfig(
            lam=self.lam,
            setting=self.setting,
            detector=DetectorModel(self.eta_t, self.p_dark),
            signal_loss=LossChannel(self.eta_s),
            cutoff=self.cutoff,
        )

    def acquisition(self) -> AcquisitionConfig:
        return AcquisitionConfig(
            windows=self.windows,
            samples_per_window=self.samples_per_window,
            rng_seed=self.seed,
            vacuum_samples=self.vacuum_samples,
            gain=self.gain,
        )

    def trajectory(self) -> PhaseTrajectory:
        if self.phase_model == "linear-sweep":
            return PhaseTrajectory.linear_sweep(self.windows, self.phase_start, self.phase_span)
        if self.phase_model == "random-walk":
            return PhaseTrajectory.random_walk(self.windows, self.phase_step, self.seed, self.phase_start)
        return PhaseTrajectory.fixed(self.windows, self.phase_start)

    def reconstruction_settings(self) -> ReconstructionSettings:
        return ReconstructionSettings(
            cutoff=self.cutoff,
            max_iterations=self.max_iterations,
            log_likelihood_tolerance=self.loglik_tolerance,
            phase_bins=self.phase_bins,
            q_bins=self.q_bins,
        )

    @property
    def theta_list(self) -> list[float]:
        return parse_angle_list(self.thetas)


# attr: (low, high, low_open, high_open); high None means unbounded
_RANGES = {
    "lam": (0.0, 1.0, False, True),
    "eta_t": (0.0, 1.0, False, False),
    "p_dark": (0.0, 1.0, False, True),
    "eta_s": (0.0, 1.0, False, False),
    "cutoff": (2, None, False, False),
    "windows": (3, None, False, False),
    "samples_per_window": (2, None, False, False),
    "seed": (0, 2**64, False, True),
    "vacuum_samples": (0, None, False, False),
    "gain": (0.0, None, True, False),
    "phase_step": (0.0, None, False, False),
    "max_iterations": (1, None, False, False),
    "loglik_tolerance": (0.0, None, True, False),
    "phase_bins": (1, None, False, False),
    "q_bins": (1, None, False, False),
    "phase_neighbors": (0, None, False, False),
}


def _convert(attr, typ, raw):
    if not isinstance(raw, str):
        return raw
    try:
        if attr in ANGLE_KEYS:
            return parse_angle(raw)
        if typ in (int, "int"):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if typ in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{RunConfig._key(attr)}: cannot parse {raw!r}") from None
    return raw
