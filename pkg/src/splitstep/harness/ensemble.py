"""Ensemble statistics and plain-text output helpers."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Sequence

import numpy as np

from ..integrators import EnsembleRun


@dataclass
class EnsembleStats:
    """Per-time moments over the paths still alive at that time."""

    n_paths: int
    times: np.ndarray
    mean: np.ndarray            # (n_t, d)
    second_moment: np.ndarray   # (n_t, d), E[X_i^2]
    mean_square_norm: np.ndarray  # (n_t,), E|X|^2
    alive: np.ndarray           # (n_t,) paths contributing at each time
    divergence_count: int
    newton_failures: int
    wall_time: float = 0.0

    @property
    def failed_fraction(self) -> float:
        return (self.divergence_count + self.newton_failures) / self.n_paths


def ensemble_stats(run: EnsembleRun, wall_time: float = 0.0) -> EnsembleStats:
    X = run.states
    finite = np.all(np.isfinite(X), axis=-1)
    alive = finite.sum(axis=0)
    with np.errstate(all="ignore"):
        Xz = np.where(finite[..., None], X, 0.0)
        denom = np.maximum(alive, 1)[:, None]
        mean = Xz.sum(axis=0) / denom
        m2 = (Xz * Xz).sum(axis=0) / denom
    mean[alive == 0] = np.nan
    m2[alive == 0] = np.nan
    return EnsembleStats(
        n_paths=X.shape[0], times=run.times, mean=mean, second_moment=m2,
        mean_square_norm=m2.sum(axis=1), alive=alive,
        divergence_count=int(np.sum(run.diverged_at >= 0)),
        newton_failures=int(np.sum(run.newton_failed_at >= 0)),
        wall_time=wall_time,
    )


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_manifest(path, entries: Dict[str, object]) -> Path:
    """Plain ``key=value`` sidecar, one entry per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for k, v in entries.items():
            fh.write(f"{k}={fmt(v)}\n")
    return path


def read_manifest(path) -> Dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def stats_rows(stats: EnsembleStats):
    for i, t in enumerate(stats.times):
        yield [t, *stats.mean[i], *stats.second_moment[i], stats.mean_square_norm[i], stats.alive[i]]


def stats_header(d: int):
    return (["t"] + [f"mean{i + 1}" for i in range(d)] + [f"m2_{i + 1}" for i in range(d)]
            + ["m2_norm", "alive"])
