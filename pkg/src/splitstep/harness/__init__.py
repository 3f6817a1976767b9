"""Experiment drivers: strong convergence, the stiff oscillator and the chemical Langevin model."""

from .cle import cle_system, run_cle
from .convergence import convergence_study, exact_solution_commuting, strong_error
from .ensemble import EnsembleStats, ensemble_stats
from .example2 import choose_step, run_example2

__all__ = [
    "EnsembleStats", "choose_step", "cle_system", "convergence_study", "ensemble_stats",
    "exact_solution_commuting", "run_cle", "run_example2", "strong_error",
]
