"""Four-wave-mixing bi-photon source model for a hot Rb ladder ensemble."""
from .atoms import AtomEnsemble, DomainError, DriveConfig
from .biphoton import (BiphotonWaveform, Calibration, FrequencyGrid, SourceFigures,
                       biphoton_wavefunction, default_grid, source_figures)
from .steady_state import solve_three_level, velocity_average

__version__ = "0.1.0"

__all__ = [
    "AtomEnsemble", "DriveConfig", "DomainError",
    "FrequencyGrid", "BiphotonWaveform", "Calibration", "SourceFigures",
    "default_grid", "biphoton_wavefunction", "source_figures",
    "solve_three_level", "velocity_average",
]
