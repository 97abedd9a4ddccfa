"""Blocker-aware multicarrier ISAC-NOMA link-level simulator."""

from .beamforming import HybridBeamformer, assemble, constraint_violations
from .channel import (OBJECTS, ArrayGeometry, LinkSpec, PathParams, SubcarrierChannelSet,
                      load_channel_trace, save_channel_trace, steering_vector, synthesize_channel)
from .config import ScenarioSpec, SystemConfig, parse_config
from .harness import draw_channels, run_point, run_sweep
from .power import PowerOptimizerConfig, optimize, oracle_grid_search
from .rates import PowerAllocation, RateModel, RateReport, ReflectorSet, noise_variance

__version__ = "0.1.0"
