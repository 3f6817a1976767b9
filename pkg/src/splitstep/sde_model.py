"""SDE problem definitions and the diffusion-derivative products used by Milstein-type schemes.

States are batched: every callable takes ``x`` with shape ``(..., d)`` and must
broadcast over the leading axes.  The diffusion matrix has shape ``(..., d, m)``
and its Jacobian ``(..., d, m, d)`` with entry ``[..., i, j, k] = dg_ij / dx_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

COMMUTATIVE = 0
NON_COMMUTATIVE = 1

# relative central-difference step: h_k = FD_STEP * (1 + |x_k|)
FD_STEP = 1e-6
COMMUTATOR_TOL = 1e-12


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` with respect to the last axis of ``x``.

    The derivative axis is appended last, so a function returning ``(..., d, m)``
    yields ``(..., d, m, d)``.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    cols = []
    for k in range(d):
        step = FD_STEP * (1.0 + np.abs(x[..., k]))
        xp = x.copy()
        xm = x.copy()
        xp[..., k] += step
        xm[..., k] -= step
        # use the step actually represented in floating point
        dk = xp[..., k] - xm[..., k]
        diff = np.asarray(fun(xp)) - np.asarray(fun(xm))
        extra = diff.ndim - dk.ndim
        cols.append(diff / dk.reshape(dk.shape + (1,) * extra))
    return np.stack(cols, axis=-1)


@dataclass
class SdeSystem:
    """Itô system dX = f(t, X) dt + sum_j g_j(t, X) dW_j."""

    d: int
    m: int
    drift: Callable
    diffusion: Callable
    diffusion_jacobian: Optional[Callable] = None
    drift_jacobian: Optional[Callable] = None
    commutative: bool = False
    t0: float = 0.0
    t_end: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("need d >= 1 and m >= 1")

    def f(self, t, x):
        return np.asarray(self.drift(t, x), dtype=float)

    def g(self, t, x):
        return np.asarray(self.diffusion(t, x), dtype=float)

    def dg(self, t, x):
        """Diffusion Jacobian, analytic when available, otherwise central differences."""
        if self.diffusion_jacobian is not None:
            return np.asarray(self.diffusion_jacobian(t, x), dtype=float)
        return fd_jacobian(lambda y: self.g(t, y), x)

    def df(self, t, x):
        if self.drift_jacobian is not None:
            return np.asarray(self.drift_jacobian(t, x), dtype=float)
        return fd_jacobian(lambda y: self.f(t, y), x)


def lj_apply(sys: SdeSystem, t, x, j1: int, j2: int) -> np.ndarray:
    """L^{j1} g_{j2} = sum_k g_{j1}^k dg_{j2}/dx_k (channels are 0-based)."""
    if not (0 <= j1 < sys.m and 0 <= j2 < sys.m):
        raise IndexError("channel index out of range")
    g = sys.g(t, x)
    dg = sys.dg(t, x)
    return np.einsum("...ik,...k->...i", dg[..., :, j2, :], g[..., :, j1])


def milstein_correction(sys: SdeSystem, t, x, ito, g=None, dg=None) -> np.ndarray:
    """sum_{j1,j2} L^{j1} g_{j2} I[j1, j2], evaluated as sum_{j,k} dg[i,j,k] (g I)[k,j]."""
    if g is None:
        g = sys.g(t, x)
    if dg is None:
        dg = sys.dg(t, x)
    b = g @ np.asarray(ito, dtype=float)
    return np.einsum("...ijk,...kj->...i", dg, b)


def milstein_correction_naive(sys: SdeSystem, t, x, ito) -> np.ndarray:
    """Reference triple loop for :func:`milstein_correction` on a single state."""
    x = np.asarray(x, dtype=float)
    g = sys.g(t, x)
    dg = sys.dg(t, x)
    out = np.zeros(sys.d)
    for j1 in range(sys.m):
        for j2 in range(sys.m):
            for k in range(sys.d):
                out += g[k, j1] * dg[:, j2, k] * ito[j1, j2]
    return out


def diffusion_drift_term(sys: SdeSystem, t, x, g=None, dg=None) -> np.ndarray:
    """sum_j L^j g_j, the drift shift between Itô and Stratonovich forms (times two)."""
    if g is None:
        g = sys.g(t, x)
    if dg is None:
        dg = sys.dg(t, x)
    return np.einsum("...ijk,...kj->...i", dg, g)


@dataclass
class LinearSde:
    """Linear test system dX = F X dt + sum_r G_r X dW_r."""

    F: np.ndarray
    G: Sequence[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        d = self.F.shape[0]
        if self.F.shape != (d, d):
            raise ValueError("F must be square")
        self.G = [np.atleast_2d(np.asarray(g, dtype=float)) for g in self.G]
        if not self.G:
            raise ValueError("need at least one noise channel")
        for g in self.G:
            if g.shape != (d, d):
                raise ValueError("all G_r must match F's shape")

    @property
    def d(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return len(self.G)

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.G)

    def to_system(self, t0: float = 0.0, t_end: float = 1.0, name: str = "") -> SdeSystem:
        F = self.F
        Gs = self.stack
        d, m = self.d, self.m
        # dg[i, j, k] = G_j[i, k]
        jac = np.transpose(Gs, (1, 0, 2))

        def drift(t, x):
            return np.asarray(x) @ F.T

        def diffusion(t, x):
            return np.einsum("jab,...b->...aj", Gs, np.asarray(x))

        def diffusion_jacobian(t, x):
            x = np.asarray(x)
            return np.broadcast_to(jac, x.shape[:-1] + (d, m, d))

        def drift_jacobian(t, x):
            x = np.asarray(x)
            return np.broadcast_to(F, x.shape[:-1] + (d, d))

        return SdeSystem(
            d=d, m=m, drift=drift, diffusion=diffusion,
            diffusion_jacobian=diffusion_jacobian, drift_jacobian=drift_jacobian,
            commutative=check_commutativity(self) == COMMUTATIVE,
            t0=t0, t_end=t_end, name=name,
        )


def check_commutativity(sys: LinearSde, tol: float = COMMUTATOR_TOL) -> int:
    """0 if every pair of diffusion matrices commutes, 1 otherwise."""
    G = sys.G
    for a in range(len(G)):
        for b in range(a + 1, len(G)):
            if np.max(np.abs(G[a] @ G[b] - G[b] @ G[a])) > tol:
                return NON_COMMUTATIVE
    return COMMUTATIVE


# ---- built-in linear systems ----

def coupled_linear_benchmark(d: int = 5, m: int = 5) -> LinearSde:
    """All-to-all coupled linear system with identical noise matrices on every channel."""
    A = np.full((d, d), 1.0 / 20.0)
    np.fill_diagonal(A, -1.5)
    B = np.full((d, d), 1.0 / 100.0)
    np.fill_diagonal(B, 0.2)
    return LinearSde(A, [B.copy() for _ in range(m)])


def stiff_oscillator(beta: float = 5.0, sigma: float = 4.0, rho: float = 0.5) -> LinearSde:
    """Rotating drift with two rank-one multiplicative noise channels."""
    F = beta * np.array([[0.0, 1.0], [-1.0, 0.0]])
    G1 = 0.5 * sigma * np.array([[1.0, 1.0], [1.0, 1.0]])
    G2 = 0.5 * rho * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return LinearSde(F, [G1, G2])


def diagonal_test_system(lam: float, eps: float, sigma: float) -> LinearSde:
    """Diagonal drift with noise along (diag) and across (anti-diag) the flow."""
    F = lam * np.eye(2)
    G1 = np.diag([eps, -eps])
    G2 = np.array([[0.0, sigma], [sigma, 0.0]])
    return LinearSde(F, [G1, G2])


def nonnormal_test_system(lam: float, b: float, sigma: float) -> LinearSde:
    """Non-normal (Jordan-like) drift with rotational noise."""
    F = np.array([[lam, b], [0.0, lam]])
    G = np.array([[0.0, sigma], [-sigma, 0.0]])
    return LinearSde(F, [G])


def scalar_multichannel(lam: float, sigma: float, m: int) -> LinearSde:
    """Scalar equation driven by m channels of equal intensity."""
    return LinearSde([[lam]], [[[sigma]] for _ in range(m)])
