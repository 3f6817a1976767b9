"""Explicit Milstein and the split-step Milstein family, plus path integration.

All step maps are batched over leading axes of the state.  Implicit stages are
solved with a Newton iteration whose Jacobian is analytic when the system
provides a drift Jacobian and central differences otherwise.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .noise import (LEVY_STREAM, NoiseRealization, levy_area_truncated, make_noise,
                    path_generator, path_noise)
from .sde_model import SdeSystem, diffusion_drift_term, fd_jacobian, milstein_correction

SSAMM_THETA = {"+": -0.5 + 1.0 / math.sqrt(2.0), "-": -0.5 - 1.0 / math.sqrt(2.0)}

# method id -> (stage family, modified)
_FAMILY = {
    "milstein": ("explicit", False),
    "ssctm": ("theta", False),
    "mssctm": ("theta", True),
    "dssbm": ("theta", False),
    "mssbm": ("theta", True),
    "ssamm": ("adams", False),
    "mssamm": ("adams", True),
}
_ALIASES = {"msctm": "mssctm", "explicit": "milstein"}

METHOD_NAMES = ("milstein", "ssctm", "msctm", "dssbm", "mssbm",
                "ssamm+", "ssamm-", "mssamm+", "mssamm-")


@dataclass(frozen=True)
class MethodConfig:
    """Method id with its parameters.

    ``theta``/``eta`` default to 1 for the theta family; DSSBM/MSSBM pin both to 1
    and the Adams-Moulton family pins theta to -1/2 +- 1/sqrt(2) via ``ssamm_sign``.
    """

    method: str = "dssbm"
    theta: Optional[float] = None
    eta: Optional[float] = None
    ssamm_sign: str = "+"
    newton_tol: float = 1e-6
    newton_maxit: int = 50
    levy_p: Optional[int] = None

    def __post_init__(self):
        method = _ALIASES.get(self.method.lower(), self.method.lower())
        if method not in _FAMILY:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "method", method)
        theta, eta = self.theta, self.eta
        if method == "milstein":
            theta, eta = 0.0, 0.0
        elif method in ("dssbm", "mssbm"):
            if (theta not in (None, 1.0)) or (eta not in (None, 1.0)):
                raise ValueError(f"{method} fixes theta = eta = 1")
            theta, eta = 1.0, 1.0
        elif method in ("ssamm", "mssamm"):
            if self.ssamm_sign not in SSAMM_THETA:
                raise ValueError("ssamm_sign must be '+' or '-'")
            pinned = SSAMM_THETA[self.ssamm_sign]
            if theta is not None and abs(theta - pinned) > 1e-12:
                raise ValueError("the Adams-Moulton stages fix theta = -1/2 +- 1/sqrt(2)")
            theta = pinned
            eta = 1.0 if eta is None else float(eta)
        else:
            theta = 1.0 if theta is None else float(theta)
            eta = 1.0 if eta is None else float(eta)
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.newton_tol <= 0 or self.newton_maxit < 1:
            raise ValueError("bad Newton settings")
        if self.levy_p is not None and self.levy_p < 1:
            raise ValueError("levy_p must be >= 1")
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "eta", float(eta))

    @classmethod
    def from_name(cls, name: str, **kw) -> "MethodConfig":
        """Build from a CLI-style name such as ``'ssamm-'`` or ``'msctm'``."""
        name = name.lower().strip()
        if name.endswith(("+", "-")) and name[:-1] in ("ssamm", "mssamm"):
            return cls(method=name[:-1], ssamm_sign=name[-1], **kw)
        return cls(method=name, **kw)

    @property
    def family(self) -> str:
        return _FAMILY[self.method][0]

    @property
    def modified(self) -> bool:
        return _FAMILY[self.method][1]

    @property
    def label(self) -> str:
        base = self.method.upper()
        if self.family == "adams":
            return base + self.ssamm_sign
        if self.method in ("ssctm", "mssctm"):
            return f"{base}({self.theta:g},{self.eta:g})"
        return base

    def with_(self, **kw) -> "MethodConfig":
        return replace(self, **kw)


# ---- Newton ----

class NewtonError(RuntimeError):
    """Newton iteration did not reach the tolerance; carries the last iterate."""

    def __init__(self, message, x, residual_norm, iterations):
        super().__init__(message)
        self.x = x
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass
class NewtonResult:
    x: np.ndarray
    converged: np.ndarray
    residual_norm: np.ndarray
    iterations: int


def _batched_solve(J, r):
    try:
        return np.linalg.solve(J, r[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(r.shape, np.nan)
        flatJ = J.reshape((-1,) + J.shape[-2:])
        flatr = r.reshape((-1, r.shape[-1]))
        flato = out.reshape(flatr.shape)
        for i in range(flatr.shape[0]):
            try:
                flato[i] = np.linalg.solve(flatJ[i], flatr[i])
            except np.linalg.LinAlgError:
                pass
        return out


def newton(residual: Callable, guess, tol: float = 1e-6, maxit: int = 50,
           jacobian: Optional[Callable] = None) -> NewtonResult:
    """Batched Newton iteration on ``residual(x) = 0`` with the infinity norm test."""
    x = np.array(guess, dtype=float, copy=True)
    jac = jacobian if jacobian is not None else (lambda y: fd_jacobian(residual, y))
    it = 0
    with np.errstate(all="ignore"):
        r = np.asarray(residual(x))
        nrm = np.max(np.abs(r), axis=-1)
        while True:
            active = ~(nrm <= tol) & np.all(np.isfinite(x), axis=-1)
            if not np.any(active) or it >= maxit:
                break
            dx = _batched_solve(jac(x), r)
            x = np.where(active[..., None], x - dx, x)
            it += 1
            r = np.asarray(residual(x))
            nrm = np.max(np.abs(r), axis=-1)
    return NewtonResult(x=x, converged=nrm <= tol, residual_norm=nrm, iterations=it)


def solve_implicit_stage(residual: Callable, guess, tol: float = 1e-6, maxit: int = 50,
                         jacobian: Optional[Callable] = None) -> np.ndarray:
    """Solve an implicit stage; raise :class:`NewtonError` if any batch member fails."""
    res = newton(residual, guess, tol, maxit, jacobian)
    if not np.all(res.converged):
        raise NewtonError(
            f"Newton failed after {res.iterations} iterations "
            f"(max residual {np.nanmax(res.residual_norm):.3e})",
            res.x, res.residual_norm, res.iterations)
    return res.x


# ---- stages ----

def _gdw(g, dw):
    return np.einsum("...ij,...j->...i", g, dw)


def _drift_stage(sys: SdeSystem, t, c, weight, h, corr_weight, guess, cfg: MethodConfig):
    """Solve y = c + h*weight*f(t, y) - (h/2)*corr_weight*sum_j L^j g_j(y).

    Both the theta-method stage and the two Adams-Moulton stages have this form,
    so they share the iteration matrix I - h*weight*J_f (+ correction term).
    """
    if weight == 0.0 and corr_weight == 0.0:
        return c, np.ones(c.shape[:-1], dtype=bool)

    def residual(y):
        r = y - c - h * weight * sys.f(t, y)
        if corr_weight:
            r = r + 0.5 * h * corr_weight * diffusion_drift_term(sys, t, y)
        return r

    jacobian = None
    if sys.drift_jacobian is not None:
        eye = np.eye(sys.d)

        def jacobian(y):
            J = eye - h * weight * sys.df(t, y)
            if corr_weight:
                J = J + 0.5 * h * corr_weight * fd_jacobian(lambda z: diffusion_drift_term(sys, t, z), y)
            return J

    res = newton(residual, guess, cfg.newton_tol, cfg.newton_maxit, jacobian)
    return res.x, res.converged


def _stochastic_stage(sys: SdeSystem, t, x, xhat, noise: NoiseRealization, eta, modified):
    ints = noise.strat if modified else noise.ito
    out = np.array(xhat, dtype=float, copy=True)
    if eta != 0.0:
        g = sys.g(t, xhat)
        out += eta * (_gdw(g, noise.dw) + milstein_correction(sys, t, xhat, ints, g=g))
    if eta != 1.0:
        g = sys.g(t, x)
        out += (1.0 - eta) * (_gdw(g, noise.dw) + milstein_correction(sys, t, x, ints, g=g))
    return out


def _explicit_part(sys, t, x, h, cfg, weight):
    """x + h*weight*f(x) - (h/2)(1-eta) sum_j L^j g_j(x) for the modified methods."""
    c = x + h * weight * sys.f(t, x) if weight else np.array(x, dtype=float, copy=True)
    if cfg.modified and cfg.eta != 1.0:
        c = c - 0.5 * h * (1.0 - cfg.eta) * diffusion_drift_term(sys, t, x)
    return c


def _step(sys: SdeSystem, cfg: MethodConfig, t, x, h, noise: NoiseRealization):
    """One step of any configured method; returns (state, newton_ok)."""
    x = np.asarray(x, dtype=float)
    fam = cfg.family
    if fam == "explicit":
        g = sys.g(t, x)
        out = x + h * sys.f(t, x) + _gdw(g, noise.dw) + milstein_correction(sys, t, x, noise.ito, g=g)
        return out, np.ones(x.shape[:-1], dtype=bool)
    corr_w = cfg.eta if cfg.modified else 0.0
    theta = cfg.theta
    if fam == "theta":
        c = _explicit_part(sys, t, x, h, cfg, 1.0 - theta)
        xhat, ok = _drift_stage(sys, t, c, theta, h, corr_w, x, cfg)
    else:
        g1 = 0.5 - theta
        g2 = 0.5 + theta
        fx = sys.f(t, x)
        c1 = _explicit_part(sys, t, x, h, cfg, 0.0) + h * g2 * fx
        xtil, ok1 = _drift_stage(sys, t, c1, g1, h, corr_w, x, cfg)
        c2 = _explicit_part(sys, t, x, h, cfg, 0.0) + h * (0.5 * fx + theta * sys.f(t, xtil))
        xhat, ok2 = _drift_stage(sys, t, c2, g1, h, corr_w, xtil, cfg)
        ok = ok1 & ok2
    out = _stochastic_stage(sys, t, x, xhat, noise, cfg.eta, cfg.modified)
    return out, ok


def step(sys: SdeSystem, cfg: MethodConfig, t, x, h, noise: NoiseRealization) -> np.ndarray:
    """One step of the configured method; raises :class:`NewtonError` on stage failure."""
    out, ok = _step(sys, cfg, t, x, h, noise)
    if not np.all(ok):
        raise NewtonError("implicit stage did not converge", out, None, cfg.newton_maxit)
    return out


def step_explicit_milstein(sys, t, x, h, noise):
    return step(sys, MethodConfig("milstein"), t, x, h, noise)


def step_ssctm(sys, t, x, h, noise, cfg: MethodConfig):
    return step(sys, cfg.with_(method="ssctm"), t, x, h, noise)


def step_mssctm(sys, t, x, h, noise, cfg: MethodConfig):
    return step(sys, cfg.with_(method="mssctm"), t, x, h, noise)


def step_ssamm(sys, t, x, h, noise, cfg: MethodConfig):
    return step(sys, cfg.with_(method="ssamm", theta=None), t, x, h, noise)


def step_mssamm(sys, t, x, h, noise, cfg: MethodConfig):
    return step(sys, cfg.with_(method="mssamm", theta=None), t, x, h, noise)


def positivity_guard(values):
    """Absolute value used under square roots of rate functions."""
    return np.abs(values)


# ---- paths and ensembles ----

@dataclass
class Path:
    times: np.ndarray
    states: np.ndarray
    method: MethodConfig
    seed: int
    path: int
    diverged_at: Optional[int] = None
    newton_failed_at: Optional[int] = None


@dataclass
class EnsembleRun:
    """States (n_paths, n_recorded, d); rows are NaN after a path fails."""

    times: np.ndarray
    states: np.ndarray
    method: MethodConfig
    h: float
    seed: int
    diverged_at: np.ndarray = field(default=None)
    newton_failed_at: np.ndarray = field(default=None)

    @property
    def failed(self) -> np.ndarray:
        return (self.diverged_at >= 0) | (self.newton_failed_at >= 0)


def step_count(t0: float, t_end: float, h: float) -> int:
    if h <= 0:
        raise ValueError("step size must be positive")
    n = int(round((t_end - t0) / h))
    if n < 1 or abs(n * h - (t_end - t0)) > 1e-9 * max(1.0, abs(t_end - t0)):
        raise ValueError(f"h={h} does not divide the interval [{t0}, {t_end}]")
    return n


def _run_chunk(sys, cfg, x0, h, t0, n_steps, dw, A, stride):
    c = dw.shape[0]
    d = sys.d
    n_rec = n_steps // stride + 1
    states = np.full((c, n_rec, d), np.nan)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (c, d)).copy()
    states[:, 0] = x
    diverged = np.full(c, -1)
    newton_failed = np.full(c, -1)
    alive = np.ones(c, dtype=bool)
    with np.errstate(all="ignore"):
        for n in range(n_steps):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            noise = make_noise(dw[idx, n], h, None if A is None else A[idx, n])
            xn, ok = _step(sys, cfg, t0 + n * h, x[idx], h, noise)
            finite = np.all(np.isfinite(xn), axis=-1)
            newton_failed[idx[~ok]] = n + 1
            bad = ok & ~finite
            diverged[idx[bad]] = n + 1
            keep = ok & finite
            x[idx[keep]] = xn[keep]
            x[idx[~keep]] = np.nan
            alive[idx[~keep]] = False
            if (n + 1) % stride == 0:
                states[:, (n + 1) // stride] = x
    return states, diverged, newton_failed


def integrate_ensemble(sys: SdeSystem, cfg: MethodConfig, x0, h: float, n_paths: int, seed: int = 0,
                       t0: Optional[float] = None, t_end: Optional[float] = None,
                       increments: Optional[np.ndarray] = None, levy_areas: Optional[np.ndarray] = None,
                       record_stride: int = 1, chunk: int = 256, workers: int = 1,
                       path_offset: int = 0) -> EnsembleRun:
    """Integrate ``n_paths`` independent paths on a uniform grid.

    Path ``i`` draws its noise from the streams keyed by ``(seed, path_offset + i)``,
    so results do not depend on ``chunk`` or ``workers``.  ``increments`` of shape
    (n_paths, n_steps, m) override the drawn Brownian increments.  Divergence and
    Newton failure are recorded per path instead of raised.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    t0 = sys.t0 if t0 is None else t0
    t_end = sys.t_end if t_end is None else t_end
    n_steps = step_count(t0, t_end, h)
    if n_steps % record_stride:
        raise ValueError("record_stride must divide the step count")
    levy = not sys.commutative and sys.m > 1

    def noise_for(lo, hi):
        dws, As = [], []
        for i in range(lo, hi):
            pid = path_offset + i
            if increments is not None:
                dw = np.asarray(increments[i], dtype=float)
                if levy_areas is not None:
                    A = levy_areas[i]
                elif levy:
                    # Lévy normals have their own stream, consistent with the supplied increments
                    A = levy_area_truncated(path_generator(seed, pid, LEVY_STREAM), dw, h, cfg.levy_p)
                else:
                    A = None
            else:
                dw, A = path_noise(seed, pid, n_steps, sys.m, h, cfg.levy_p, levy=levy)
            dws.append(dw)
            As.append(A)
        dw = np.stack(dws)
        A = None if As[0] is None else np.stack(As)
        return dw, A

    def work(bounds):
        lo, hi = bounds
        dw, A = noise_for(lo, hi)
        return _run_chunk(sys, cfg, x0, h, t0, n_steps, dw, A, record_stride)

    bounds = [(lo, min(n_paths, lo + chunk)) for lo in range(0, n_paths, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    times = t0 + h * record_stride * np.arange(n_steps // record_stride + 1)
    return EnsembleRun(
        times=times,
        states=np.concatenate([p[0] for p in parts]),
        method=cfg, h=h, seed=seed,
        diverged_at=np.concatenate([p[1] for p in parts]),
        newton_failed_at=np.concatenate([p[2] for p in parts]),
    )


def integrate_path(sys: SdeSystem, cfg: MethodConfig, x0, h: float, seed: int = 0, path: int = 0,
                   t0: Optional[float] = None, t_end: Optional[float] = None,
                   increments: Optional[np.ndarray] = None) -> Path:
    """Single path; identical to member ``path`` of an ensemble with the same seed."""
    run = integrate_ensemble(sys, cfg, x0, h, 1, seed, t0, t_end,
                             None if increments is None else np.asarray(increments)[None],
                             path_offset=path)
    dv = int(run.diverged_at[0])
    nf = int(run.newton_failed_at[0])
    return Path(times=run.times, states=run.states[0], method=cfg, seed=seed, path=path,
                diverged_at=dv if dv >= 0 else None, newton_failed_at=nf if nf >= 0 else None)
