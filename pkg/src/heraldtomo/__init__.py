"""Heralded single-photon / squeezed-vacuum preparation and homodyne tomography.

The subpackages follow the measurement chain: :mod:`fock` (truncated
Fock-space algebra), :mod:`heralding` (conditional preparation),
:mod:`homodyne` (sampling and calibration), :mod:`tomography` (phase
assignment and maximum-likelihood reconstruction), :mod:`analysis`
(Wigner function, efficiencies, fidelity) and :mod:`pipeline` (file-based
stages used by the command line).
"""

from .analysis import (
    EfficiencyReport,
    aligned_fidelity,
    efficiency_report,
    efficiency_single_photon,
    efficiency_squeezed,
    fidelity,
    marginal_variance,
    squeezing_db,
    wigner_at,
    wigner_function,
)
from .config import RunConfig
from .exceptions import (
    ConfigurationError,
    DataError,
    DimensionError,
    HeraldImpossibleError,
    HeraldTomoError,
    NumericalError,
    PhaseInsensitiveError,
)
from .fock import BeamSplitterSetting, fock_dm, reflectivity, squeezed_vacuum, vacuum
from .heralding import DetectorModel, HeraldConfig, LossChannel, herald_signal, herald_signal_pure, loss_apply
from .homodyne import AcquisitionConfig, CalibrationScaler, PhaseTrajectory, QuadratureDataset, sample_quadratures
from .tomography import MaxLikTomography, ReconstructionSettings, VarianceLawFit, maxlik_reconstruct

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "BeamSplitterSetting",
    "CalibrationScaler",
    "ConfigurationError",
    "DataError",
    "DetectorModel",
    "DimensionError",
    "EfficiencyReport",
    "HeraldConfig",
    "HeraldImpossibleError",
    "HeraldTomoError",
    "LossChannel",
    "MaxLikTomography",
    "NumericalError",
    "PhaseInsensitiveError",
    "PhaseTrajectory",
    "QuadratureDataset",
    "ReconstructionSettings",
    "RunConfig",
    "VarianceLawFit",
    "aligned_fidelity",
    "efficiency_report",
    "efficiency_single_photon",
    "efficiency_squeezed",
    "fidelity",
    "fock_dm",
    "herald_signal",
    "herald_signal_pure",
    "loss_apply",
    "marginal_variance",
    "maxlik_reconstruct",
    "reflectivity",
    "sample_quadratures",
    "squeezed_vacuum",
    "squeezing_db",
    "vacuum",
    "wigner_at",
    "wigner_function",
]
