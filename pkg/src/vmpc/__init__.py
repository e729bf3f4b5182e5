"""vmpc: a closed-loop vehicular multipath channel toolkit.

Three coupled subsystems around one set of scenario models: a stochastic
birth/death simulator of individual multipath components with wideband CIR
synthesis, a search-and-subtract detector with short- and long-term tracking,
and a fitting/goodness-of-fit engine that recovers the statistical models
from extracted tracks.
"""

__version__ = "0.1.0"

from .scenarios import ScenarioId, ScenarioModel, builtin_model, load_model, save_model

__all__ = [
    "__version__",
    "ScenarioId",
    "ScenarioModel",
    "builtin_model",
    "load_model",
    "save_model",
]
