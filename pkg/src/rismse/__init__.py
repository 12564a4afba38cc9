"""Sum-MSE optimization for RIS-aided multi-user downlinks with quantized
fronthaul precoding and discrete RIS phases."""

__version__ = "0.1.0"

from .alphabets import PhaseAlphabet, QuantizationAlphabet, design_uniform_labels, phase_alphabet, quantize
from .bcd import SolverState, run_bcd
from .channel import ChannelRealization, draw_channels, trial_rng
from .config import BenchmarkScheme, ConfigError, GeometryConfig, SystemConfig, load_config
from .sesd import MilsProblem, MilsSolution, brute_force_mils, sesd_solve

__all__ = [
    "__version__",
    "BenchmarkScheme",
    "ChannelRealization",
    "ConfigError",
    "GeometryConfig",
    "MilsProblem",
    "MilsSolution",
    "PhaseAlphabet",
    "QuantizationAlphabet",
    "SolverState",
    "SystemConfig",
    "brute_force_mils",
    "design_uniform_labels",
    "draw_channels",
    "load_config",
    "phase_alphabet",
    "quantize",
    "run_bcd",
    "sesd_solve",
    "trial_rng",
]
