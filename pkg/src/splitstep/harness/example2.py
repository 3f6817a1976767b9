"""Stiff rotating oscillator with two multiplicative noise channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .. import matrixkit as mk
from ..integrators import MethodConfig, integrate_ensemble
from ..sde_model import stiff_oscillator
from ..stability import s_split
from .ensemble import EnsembleStats, Timer, ensemble_stats

T_END = 20.0
X0 = (1.0, 0.0)
STEP_CANDIDATES = (0.1, 0.2, 0.25, 0.4, 0.5, 0.8, 1.0)


@dataclass
class Example2Result:
    stats: EnsembleStats
    sample_times: np.ndarray
    sample_path: np.ndarray
    h: float
    rho: float
    predicted_stable: bool


def predicted_rho(method: str, h: float, beta=5.0, sigma=4.0, rho=0.5, **kw) -> float:
    return mk.spectral_radius(s_split(method, stiff_oscillator(beta, sigma, rho), h, **kw))


def choose_step(candidates: Sequence[float] = STEP_CANDIDATES, T: float = T_END,
                unstable: str = "milstein", stable: Sequence[str] = ("dssbm", "ssamm-"),
                **sys_kw) -> Tuple[Optional[float], Dict[float, Dict[str, float]]]:
    """Step size dividing T where ``unstable`` has rho > 1 and every ``stable`` method rho < 1.

    Among qualifying steps the one with the smallest worst-case rho of the
    ``stable`` methods is returned, together with the full rho table.
    """
    table = {}
    best, best_val = None, np.inf
    for h in candidates:
        n = T / h
        if abs(n - round(n)) > 1e-9:
            continue
        row = {name: predicted_rho(name, h, **sys_kw) for name in (unstable, *stable)}
        table[h] = row
        worst = max(row[s] for s in stable)
        if row[unstable] >= 1.0 and worst < 1.0 and worst < best_val:
            best, best_val = h, worst
    return best, table


def run_example2(cfg: MethodConfig, h: float, n_paths: int = 100, seed: int = 0, T: float = T_END,
                 x0=X0, beta: float = 5.0, sigma: float = 4.0, rho: float = 0.5, workers: int = 1) -> Example2Result:
    lin = stiff_oscillator(beta, sigma, rho)
    sys = lin.to_system(0.0, T, name="oscillator")
    with Timer() as tm:
        run = integrate_ensemble(sys, cfg, x0, h, n_paths, seed, workers=workers)
    stats = ensemble_stats(run, tm.elapsed)
    r = mk.spectral_radius(s_split(cfg, lin, h))
    return Example2Result(stats, run.times, run.states[0], h, r, r < 1.0)
