"""Swap-feasibility modeling for power-constrained neural recording systems.

Models NAND-Flash timing/energy, accelerator working sets held in SRAM,
external-memory I/O counts with read/write asymmetry, and classifies
channel-count / sampling-rate operating points under a fixed total data rate.
"""

from .errors import ConfigError, ModelError, NeuroswapError, ParameterError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ModelError", "NeuroswapError", "ParameterError", "__version__"]
