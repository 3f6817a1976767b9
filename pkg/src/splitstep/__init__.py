"""Split-step Milstein integrators and mean-square stability tools for stiff multi-channel SDEs."""

from .integrators import MethodConfig, NewtonError, integrate_ensemble, integrate_path, step
from .sde_model import LinearSde, SdeSystem
from .stability import analyze, s_dif, s_milstein, s_split

__version__ = "0.1.0"

__all__ = [
    "LinearSde", "MethodConfig", "NewtonError", "SdeSystem", "analyze", "integrate_ensemble",
    "integrate_path", "s_dif", "s_milstein", "s_split", "step",
]
