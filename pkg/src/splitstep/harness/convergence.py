"""Strong-error measurement on the coupled linear benchmark with a known solution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

from ..integrators import MethodConfig, integrate_ensemble
from ..noise import INCREMENT_STREAM, path_generator, sample_increments
from ..sde_model import LinearSde, coupled_linear_benchmark
from .ensemble import Timer

DEFAULT_METHODS = ("dssbm", "mssbm", "ssamm-", "mssamm-")


def exact_solution_commuting(sys: LinearSde, x0, t: float, W) -> np.ndarray:
    """exp((F - 1/2 sum G_k^2) t + sum G_k W_k) x0, valid when F and all G_k commute.

    ``W`` has shape (..., m); the result has shape (..., d).
    """
    mats = [sys.F] + list(sys.G)
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            if np.max(np.abs(mats[a] @ mats[b] - mats[b] @ mats[a])) > 1e-12:
                raise ValueError("closed-form solution needs mutually commuting matrices")
    W = np.asarray(W, dtype=float)
    base = (sys.F - 0.5 * sum(g @ g for g in sys.G)) * t
    expo = base + np.einsum("...k,kij->...ij", W, sys.stack)
    return np.einsum("...ij,j->...i", linalg.expm(expo), np.asarray(x0, dtype=float))


def fine_increments(seed: int, n_paths: int, n_steps: int, m: int, h: float) -> np.ndarray:
    return np.stack([sample_increments(path_generator(seed, i, INCREMENT_STREAM), h, m, (n_steps,))
                     for i in range(n_paths)])


def pairwise_coarsen(dw: np.ndarray) -> np.ndarray:
    """Increments on the grid 2h as sums of consecutive pairs on grid h."""
    return dw[:, 0::2] + dw[:, 1::2]


def _levels(h_list: Sequence[float]):
    h_min = min(h_list)
    out = {}
    for h in h_list:
        k = math.log2(h / h_min)
        if abs(k - round(k)) > 1e-9:
            raise ValueError("step sizes must differ by powers of two")
        out[h] = int(round(k))
    return h_min, out


@dataclass
class ConvergenceRow:
    h: float
    errors: Dict[str, float]
    stderr: Dict[str, float]
    failed: Dict[str, int] = field(default_factory=dict)
    seconds: Dict[str, float] = field(default_factory=dict)


@dataclass
class ConvergenceResult:
    rows: List[ConvergenceRow]
    slopes: Dict[str, float]
    n_paths: int
    seed: int


def fit_slope(hs, errors) -> float:
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size < 2:
        return float("nan")
    return float(np.polyfit(np.log2(hs), np.log2(errors), 1)[0])


def convergence_study(methods: Sequence[str] = DEFAULT_METHODS,
                      h_list: Sequence[float] = tuple(2.0 ** -k for k in range(1, 9)),
                      n_paths: int = 1000, seed: int = 0, d: int = 5, m: int = 5, T: float = 1.0,
                      x0=None, system: Optional[LinearSde] = None, workers: int = 1,
                      **cfg_kw) -> ConvergenceResult:
    """Mean Euclidean terminal error per method and step size, sharing one Brownian path per sample.

    Coarse increments are exact pairwise sums of the finest ones, and the exact
    solution uses the same Brownian endpoint.
    """
    sys = coupled_linear_benchmark(d, m) if system is None else system
    x0 = np.ones(sys.d) if x0 is None else np.asarray(x0, dtype=float)
    h_min, levels = _levels(h_list)
    n_fine = int(round(T / h_min))
    if abs(n_fine * h_min - T) > 1e-12 * max(1.0, T):
        raise ValueError("finest step must divide T")
    dw = fine_increments(seed, n_paths, n_fine, sys.m, h_min)
    by_level = {0: dw}
    for k in range(1, max(levels.values()) + 1):
        by_level[k] = pairwise_coarsen(by_level[k - 1])
    exact = exact_solution_commuting(sys, x0, T, dw.sum(axis=1))
    system = sys.to_system(0.0, T)
    rows = []
    for h in sorted(h_list, reverse=True):
        inc = by_level[levels[h]]
        n_steps = inc.shape[1]
        row = ConvergenceRow(h, {}, {})
        for name in methods:
            cfg = MethodConfig.from_name(name, **cfg_kw)
            with Timer() as tm:
                run = integrate_ensemble(system, cfg, x0, h, n_paths, seed, 0.0, T, increments=inc,
                                         record_stride=n_steps, workers=workers)
            err = np.linalg.norm(run.states[:, -1] - exact, axis=-1)
            ok = np.isfinite(err)
            e = err[ok]
            row.errors[name] = float(e.mean()) if e.size else float("nan")
            row.stderr[name] = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else float("nan")
            row.failed[name] = int((~ok).sum())
            row.seconds[name] = tm.elapsed
        rows.append(row)
    slopes = {name: fit_slope([r.h for r in rows], [r.errors[name] for r in rows]) for name in methods}
    return ConvergenceResult(rows, slopes, n_paths, seed)


def strong_error(cfg: MethodConfig, h: float, n_paths: int = 1000, seed: int = 0, d: int = 5, m: int = 5,
                 T: float = 1.0):
    """(mean terminal error, standard error) for one method and step size."""
    name = cfg.method + (cfg.ssamm_sign if cfg.family == "adams" else "")
    kw = {}
    if cfg.method in ("ssctm", "mssctm"):
        kw = {"theta": cfg.theta, "eta": cfg.eta}
    res = convergence_study([name], [h], n_paths, seed, d, m, T, newton_tol=cfg.newton_tol, **kw)
    return res.rows[0].errors[name], res.rows[0].stderr[name]


def cpu_effort(methods: Sequence[str] = DEFAULT_METHODS,
               h_list: Sequence[float] = tuple(2.0 ** -k for k in range(3, 9)),
               n_paths: int = 200, seed: int = 0):
    """Rows of (method, h, error, seconds) for an error-versus-cost comparison."""
    res = convergence_study(methods, h_list, n_paths, seed)
    return [(name, r.h, r.errors[name], r.seconds[name]) for r in res.rows for name in methods]
