"""Wiener increments, truncated Lévy areas and iterated Itô/Stratonovich integrals.

Randomness is keyed by ``(seed, path, stream)`` through numpy's SeedSequence
spawn keys, so each ensemble member can be regenerated on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

INCREMENT_STREAM = 0
LEVY_STREAM = 1


@dataclass
class NoiseRealization:
    """One step's noise: increments (..., m) and integral matrices (..., m, m)."""

    h: float
    dw: np.ndarray
    ito: np.ndarray
    strat: np.ndarray


def default_levy_terms(h: float) -> int:
    """Series depth p = ceil(1/h), the smallest depth that keeps strong order one."""
    if h <= 0:
        raise ValueError("step size must be positive")
    # guard against 1/h landing a hair above an integer
    return max(1, math.ceil(1.0 / h - 1e-9))


def path_generator(seed: int, path: int = 0, stream: int = INCREMENT_STREAM) -> np.random.Generator:
    """Independent generator for one (seed, path, stream) triple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_increments(rng: np.random.Generator, h: float, m: int, size=()) -> np.ndarray:
    """Wiener increments sqrt(h) * N(0, 1), shape ``size + (m,)``."""
    if h <= 0:
        raise ValueError("step size must be positive")
    size = (size,) if isinstance(size, int) else tuple(size)
    return math.sqrt(h) * rng.standard_normal(size + (m,))


def ito_commutative(dw, h: float) -> np.ndarray:
    """Symmetric iterated integrals 0.5 * (dw_i dw_j - h delta_ij)."""
    dw = np.asarray(dw, dtype=float)
    m = dw.shape[-1]
    return 0.5 * (dw[..., :, None] * dw[..., None, :] - h * np.eye(m))


def levy_area_from_normals(dw, h: float, chi, zeta) -> np.ndarray:
    """Truncated Karhunen-Loève Lévy area from given normals ``chi``, ``zeta`` of shape (..., m, p).

    A[r1, r2] = h/(2 pi) sum_k (1/k) [chi_{r1,k} (zeta_{r2,k} + sqrt2 xi_{r2})
                                     - chi_{r2,k} (zeta_{r1,k} + sqrt2 xi_{r1})]
    with xi = dw / sqrt(h).
    """
    dw = np.asarray(dw, dtype=float)
    chi = np.asarray(chi, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    p = chi.shape[-1]
    w = chi / np.arange(1, p + 1)
    xi = dw / math.sqrt(h)
    u = w @ np.swapaxes(zeta, -1, -2)
    u = u + math.sqrt(2.0) * w.sum(axis=-1)[..., :, None] * xi[..., None, :]
    # u - u^T is exactly antisymmetric in floating point
    return (h / (2.0 * math.pi)) * (u - np.swapaxes(u, -1, -2))


def levy_area_truncated(rng: np.random.Generator, dw, h: float, p: Optional[int] = None) -> np.ndarray:
    """Draw a truncated Lévy-area matrix consistent with increments ``dw``."""
    dw = np.asarray(dw, dtype=float)
    if p is None:
        p = default_levy_terms(h)
    if p < 1:
        raise ValueError("series depth must be >= 1")
    shape = dw.shape + (p,)
    chi = rng.standard_normal(shape)
    zeta = rng.standard_normal(shape)
    return levy_area_from_normals(dw, h, chi, zeta)


def levy_area_variance(h: float, p: Optional[int] = None) -> float:
    """Variance of one off-diagonal truncated Lévy area; p=None gives the h^2/4 limit."""
    if p is None:
        return h * h / 4.0
    k = np.arange(1, p + 1, dtype=float)
    return h * h / (4.0 * math.pi ** 2) * 6.0 * float(np.sum(1.0 / k ** 2))


def ito_full(dw, h: float, A) -> np.ndarray:
    """Iterated Itô integrals 0.5 * (dw_i dw_j - h delta_ij) + A_ij."""
    return ito_commutative(dw, h) + np.asarray(A, dtype=float)


def strat_from_ito(ito, h: float) -> np.ndarray:
    """Stratonovich integrals: the Itô matrix with h/2 added on the diagonal."""
    ito = np.asarray(ito, dtype=float)
    return ito + 0.5 * h * np.eye(ito.shape[-1])


def ito_from_strat(strat, h: float) -> np.ndarray:
    strat = np.asarray(strat, dtype=float)
    return strat - 0.5 * h * np.eye(strat.shape[-1])


def make_noise(dw, h: float, A=None) -> NoiseRealization:
    """Bundle increments with their integral matrices; ``A=None`` means commutative use."""
    dw = np.asarray(dw, dtype=float)
    ito = ito_commutative(dw, h) if A is None else ito_full(dw, h, A)
    return NoiseRealization(h=h, dw=dw, ito=ito, strat=strat_from_ito(ito, h))


def sample_noise(rng: np.random.Generator, h: float, m: int, size=(), levy: bool = True,
                 p: Optional[int] = None, levy_rng: Optional[np.random.Generator] = None) -> NoiseRealization:
    """Draw increments and, when ``levy`` is set, Lévy areas for one step."""
    dw = sample_increments(rng, h, m, size)
    A = None
    if levy and m > 1:
        A = levy_area_truncated(levy_rng if levy_rng is not None else rng, dw, h, p)
    return make_noise(dw, h, A)


def path_noise(seed: int, path: int, n_steps: int, m: int, h: float,
               levy_p: Optional[int] = None, levy: bool = False):
    """Increments (n_steps, m) and, if requested, Lévy areas (n_steps, m, m) for one path.

    Increments and Lévy normals come from separate streams, so switching the Lévy
    depth never changes the Brownian path.
    """
    dw = sample_increments(path_generator(seed, path, INCREMENT_STREAM), h, m, (n_steps,))
    if not levy or m == 1:
        return dw, None
    p = default_levy_terms(h) if levy_p is None else levy_p
    A = levy_area_truncated(path_generator(seed, path, LEVY_STREAM), dw, h, p)
    return dw, A


def coarsen_increments(dw: np.ndarray, factor: int, axis: int = -2) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the step axis."""
    dw = np.asarray(dw)
    axis = axis % dw.ndim
    n = dw.shape[axis]
    if n % factor:
        raise ValueError("step count is not divisible by the coarsening factor")
    shape = dw.shape[:axis] + (n // factor, factor) + dw.shape[axis + 1:]
    return dw.reshape(shape).sum(axis=axis + 1)
