"""Laparoscopic liver-palpation trainer.

Four pathology scenarios rendered as stiffness/geometry fields, a
trocar-constrained virtual instrument stepped at 1 kHz, session recording
with byte-exact replay verification, a palpation-skill assessment suite,
and a streaming service for the web client.
"""

from ._kernels import backend_name
from .config import Config, ConfigError
from .tissue import Scenario, TissueModel, build_scenario

__version__ = "0.1.0"

__all__ = ["Config", "ConfigError", "Scenario", "TissueModel",
           "build_scenario", "backend_name", "__version__"]
