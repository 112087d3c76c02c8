"""Dispersive readout, DRAG control and state tomography of a transmon qutrit.

The package simulates the full control-and-measurement chain of a three-level
superconducting transmon: static dispersive spectrum, cavity-Bloch readout
transients, DRAG pulse synthesis with Lindblad propagation, least-squares
population extraction and nine-rotation density-matrix tomography, plus the
end-to-end experiment drivers and a CLI.
"""

from .cavity_bloch import (ReadoutSettings, ReadoutTrace, reference_traces,
                           simulate_readout, simulate_readout_batch)
from .config import RunConfig, ConfigError, default_config, load_config
from .device_model import (DeviceParams, DispersiveSpectrum,
                           dispersive_spectrum, level_frequencies,
                           reference_device, shift_vs_qubit_frequency)
from .experiments import (ExperimentResult, NoiseModel, default_targets,
                          run_decay_map, run_fidelity_batch, run_rabi,
                          run_ramsey12, run_readout_basis, run_tomography)
from .pulse_control import (Delay, PulseSegment, QutritState, leakage_benchmark,
                            prepare_state, propagate)
from .reconstruction import (MeasurementOperator, MLEResult,
                             PopulationEstimate, TomographyRecord,
                             bootstrap_spread, check_density_matrix, fidelity,
                             linear_inversion, mle_estimate, ols_populations,
                             project_physical, tomography_rotations)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Delay",
    "DeviceParams",
    "DispersiveSpectrum",
    "ExperimentResult",
    "MLEResult",
    "MeasurementOperator",
    "NoiseModel",
    "PopulationEstimate",
    "PulseSegment",
    "QutritState",
    "ReadoutSettings",
    "ReadoutTrace",
    "RunConfig",
    "TomographyRecord",
    "bootstrap_spread",
    "check_density_matrix",
    "default_config",
    "default_targets",
    "dispersive_spectrum",
    "fidelity",
    "leakage_benchmark",
    "level_frequencies",
    "linear_inversion",
    "load_config",
    "mle_estimate",
    "ols_populations",
    "prepare_state",
    "project_physical",
    "propagate",
    "reference_device",
    "reference_traces",
    "run_decay_map",
    "run_fidelity_batch",
    "run_rabi",
    "run_ramsey12",
    "run_readout_basis",
    "run_tomography",
    "shift_vs_qubit_frequency",
    "simulate_readout",
    "simulate_readout_batch",
    "tomography_rotations",
    "__version__",
]
