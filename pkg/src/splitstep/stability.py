"""Mean-square stability of linear systems under the Milstein family.

For dX = F X dt + sum_r G_r X dW_r every method is X_{n+1} = R_n Q P X_n, and the
second moments evolve with S = E(R_n (x) R_n) (QP (x) QP).  The scheme is
mean-square stable iff rho(S) < 1; the SDE itself iff alpha(S_dif) < 0.

Two forms of the stochastic part are provided.  ``cross_terms="collected"`` collects
the mixed-channel products as (sum C) (x) (sum C), which is the form the
reference tables use.  ``cross_terms="exact"`` is the true expectation
sum_pairs C (x) C, which is what Monte-Carlo sampling of R_n converges to.  The
two agree for a single channel and, for the regular methods, for two channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import matrixkit as mk
from .integrators import MethodConfig, _step
from .noise import default_levy_terms, levy_area_truncated, levy_area_variance, make_noise, path_generator
from .sde_model import NON_COMMUTATIVE, LinearSde, check_commutativity

TABLE_METHODS = ("dssbm", "ssamm+", "ssamm-", "mssbm", "mssamm+", "mssamm-")
CROSS_FORMS = ("collected", "exact")

MethodLike = Union[str, MethodConfig]


def _cfg(method: MethodLike, theta=None, eta=None) -> MethodConfig:
    if isinstance(method, MethodConfig):
        cfg = method
        kw = {}
        if theta is not None:
            kw["theta"] = theta
        if eta is not None:
            kw["eta"] = eta
        return cfg.with_(**kw) if kw else cfg
    kw = {}
    if theta is not None:
        kw["theta"] = theta
    if eta is not None:
        kw["eta"] = eta
    return MethodConfig.from_name(method, **kw)


def _delta(sys: LinearSde, delta_com) -> int:
    return check_commutativity(sys) if delta_com is None else int(delta_com)


def s_dif(sys: LinearSde) -> np.ndarray:
    """Generator of the second-moment ODE: I (x) F + F (x) I + sum G_r (x) G_r."""
    eye = np.eye(sys.d)
    return mk.kron(eye, sys.F) + mk.kron(sys.F, eye) + sum(mk.kron(g, g) for g in sys.G)


def _pair_products(G):
    m = len(G)
    for a in range(m):
        for b in range(a + 1, m):
            yield G[a] @ G[b], G[b] @ G[a]


def milstein_stochastic_part(sys: LinearSde, h: float, delta_com=None, cross_terms: str = "collected",
                             levy_p: Optional[int] = None) -> np.ndarray:
    """Covariance part of E(R (x) R) shared by Milstein and the split-step methods."""
    if cross_terms not in CROSS_FORMS:
        raise ValueError(f"cross_terms must be one of {CROSS_FORMS}")
    G = sys.G
    dcom = _delta(sys, delta_com)
    sq = [g @ g for g in G]
    S = h * sum(mk.kron(g, g) for g in G) + 0.5 * h * h * sum(mk.kron(s, s) for s in sq)
    if sys.m == 1:
        return S
    if cross_terms == "collected":
        C = sum(ab + ba for ab, ba in _pair_products(G))
        S = S + 0.25 * h * h * mk.kron(C, C)
        if dcom:
            K = sum(ab - ba for ab, ba in _pair_products(G))
            S = S + 0.25 * h * h * mk.kron(K, K)
    else:
        va = levy_area_variance(h, levy_p)
        for ab, ba in _pair_products(G):
            C = ab + ba
            S = S + 0.25 * h * h * mk.kron(C, C)
            if dcom:
                K = ab - ba
                S = S + va * mk.kron(K, K)
    return S


def s_milstein(sys: LinearSde, h: float, delta_com=None, cross_terms: str = "collected",
               levy_p: Optional[int] = None) -> np.ndarray:
    """Stability matrix of explicit Milstein."""
    P = np.eye(sys.d) + h * sys.F
    return mk.kron(P, P) + milstein_stochastic_part(sys, h, delta_com, cross_terms, levy_p)


def p_matrix(method: MethodLike, sys: LinearSde, h: float, theta=None, eta=None,
             staged: bool = False) -> np.ndarray:
    """Deterministic amplification matrix P of the drift stage.

    For the modified Adams-Moulton method the default is the stated algebraic
    form, whose predictor omits the diffusion correction; ``staged=True`` returns
    the composition of the two stage maps actually taken by the integrator.
    """
    cfg = _cfg(method, theta, eta)
    d = sys.d
    eye = np.eye(d)
    F = sys.F
    H = 0.5 * h * sum(g @ g for g in sys.G) if cfg.modified else np.zeros((d, d))
    th, et = cfg.theta, cfg.eta
    if cfg.family in ("explicit", "theta"):
        return mk.solve_linear(eye - h * th * F + et * H, eye + h * (1.0 - th) * F - (1.0 - et) * H)
    g1 = 0.5 - th
    g2 = 0.5 + th
    if staged:
        pred = mk.solve_linear(eye - h * g1 * F + et * H, eye + h * g2 * F - (1.0 - et) * H)
    else:
        pred = mk.solve_linear(eye - h * g1 * F, eye + h * g2 * F)
    rhs = eye + h * F @ (0.5 * eye + th * pred) - (1.0 - et) * H
    return mk.solve_linear(eye - h * g1 * F + et * H, rhs)


def q_matrix(P: np.ndarray, eta: float) -> np.ndarray:
    """Q = eta I + (1 - eta) P^{-1}."""
    eye = np.eye(P.shape[0])
    if eta == 1.0:
        return eye
    return eta * eye + (1.0 - eta) * mk.inverse(P)


def s_split(method: MethodLike, sys: LinearSde, h: float, theta=None, eta=None, delta_com=None,
            cross_terms: str = "collected", levy_p: Optional[int] = None, staged: bool = False) -> np.ndarray:
    """Stability matrix ((Q (x) Q)^{-1} + S_stoch [+ modified terms]) (QP (x) QP)."""
    cfg = _cfg(method, theta, eta)
    if cfg.family == "explicit":
        return s_milstein(sys, h, delta_com, cross_terms, levy_p)
    P = p_matrix(cfg, sys, h, staged=staged)
    Q = q_matrix(P, cfg.eta)
    Qi = mk.inverse(Q)
    QP = Q @ P
    stoch = milstein_stochastic_part(sys, h, delta_com, cross_terms, levy_p)
    sq = [g @ g for g in sys.G]
    if cross_terms == "collected":
        M = mk.kron(Qi, Qi) + stoch
        if cfg.modified:
            M = M + 0.5 * h * sum(mk.kron(s, Qi) + mk.kron(Qi, s) for s in sq)
            M = M + 0.25 * h * h * sum(mk.kron(s, s) for s in sq)
    else:
        mean = Qi + (0.5 * h * sum(sq) if cfg.modified else 0.0)
        M = mk.kron(mean, mean) + stoch
    return M @ mk.kron(QP, QP)


def stability_matrix(method: MethodLike, sys: LinearSde, h: float, **kw) -> np.ndarray:
    return s_split(method, sys, h, **kw)


@dataclass
class StabilityReport:
    matrix: np.ndarray
    value: float
    stable: bool
    method: str
    h: Optional[float]
    system: str = ""

    @property
    def verdict(self) -> str:
        return "stable" if self.stable else "unstable"


def analyze(method: MethodLike, sys: LinearSde, h: Optional[float] = None, system: str = "", **kw) -> StabilityReport:
    """Verdict for a method (rho < 1) or, with ``method="sde"``, for the SDE itself (alpha < 0)."""
    if isinstance(method, str) and method.lower() == "sde":
        S = s_dif(sys)
        a = mk.spectral_abscissa(S)
        return StabilityReport(S, a, a < 0.0, "sde", None, system)
    if h is None:
        raise ValueError("a step size is required for a numerical method")
    cfg = _cfg(method)
    S = s_split(cfg, sys, h, **kw)
    r = mk.spectral_radius(S)
    # rho == 1 counts as unstable
    return StabilityReport(S, r, r < 1.0, cfg.label, h, system)


# ---- Monte-Carlo oracle ----

@dataclass
class MonteCarloEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    rho: float
    rho_se: float
    n_samples: int


def _one_step_matrices(cfg: MethodConfig, sys: LinearSde, h: float, dw, A):
    """Sampled one-step maps M_s with X_{n+1} = M_s X_n, built by stepping basis vectors."""
    n = dw.shape[0]
    d = sys.d
    system = sys.to_system()
    basis = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    noise = make_noise(dw[:, None, :], h, None if A is None else A[:, None])
    out, ok = _step(system, cfg, 0.0, basis, h, noise)
    if not np.all(ok):
        raise RuntimeError("implicit stage failed while sampling one-step maps")
    # out[s, i, :] is the image of e_i
    return np.swapaxes(out, -1, -2)


def mc_estimate(method: MethodLike, sys: LinearSde, h: float, n_samples: int = 100_000, seed: int = 0,
                levy_p: Optional[int] = None, delta_com=None, batch: int = 20_000, **cfg_kw) -> MonteCarloEstimate:
    """Sample mean of R_n (x) R_n (QP (x) QP) from the integrator's own step map.

    Lévy areas use depth ``levy_p`` (default max(ceil(1/h), 100)); compare against
    ``s_split(..., cross_terms="exact", levy_p=<same depth>)``.
    """
    cfg = _cfg(method, cfg_kw.get("theta"), cfg_kw.get("eta"))
    d = sys.d
    dcom = _delta(sys, delta_com)
    p = levy_p if levy_p is not None else max(default_levy_terms(h), 100)
    inc_rng = path_generator(seed, 0, 0)
    levy_rng = path_generator(seed, 0, 1)
    total = np.zeros((d * d, d * d))
    total_sq = np.zeros((d * d, d * d))
    mats = []
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        dw = math.sqrt(h) * inc_rng.standard_normal((b, sys.m))
        A = levy_area_truncated(levy_rng, dw, h, p) if (dcom and sys.m > 1) else None
        M = _one_step_matrices(cfg, sys, h, dw, A)
        mats.append(M)
        K = np.einsum("sij,skl->sikjl", M, M).reshape(b, d * d, d * d)
        total += K.sum(axis=0)
        total_sq += (K * K).sum(axis=0)
        done += b
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    stderr = np.sqrt(var / n_samples)
    rho, rho_se = _rho_with_se(mean, np.concatenate(mats), d)
    return MonteCarloEstimate(mean, stderr, rho, rho_se, n_samples)


def _rho_with_se(S: np.ndarray, M: np.ndarray, d: int) -> Tuple[float, float]:
    """Spectral radius of the sample mean with a delta-method standard error."""
    from scipy import linalg
    w, vl, vr = linalg.eig(S, left=True, right=True)
    k = int(np.argmax(np.abs(w)))
    lam = w[k]
    u = vl[:, k]
    v = vr[:, k]
    denom = np.vdot(u, v)
    # per-sample u^H (M (x) M) v using (M (x) M) vec(V) = vec(M V M^T)
    V = v.reshape(d, d, order="F")
    U = u.reshape(d, d, order="F")
    img = M @ V @ np.swapaxes(M, -1, -2)
    proj = np.einsum("ij,sij->s", np.conj(U), img) / denom
    phase = np.conj(lam) / abs(lam) if abs(lam) > 0 else 1.0
    phi = np.real(phase * proj)
    se = float(np.std(phi, ddof=1) / math.sqrt(len(phi)))
    return float(abs(lam)), se


# ---- dimensionless test systems (h = 1 so that hF, sqrt(h) G carry the parameters) ----

def test1_system(x: float, y2: float, z2: float) -> LinearSde:
    """Diagonal drift x I with noise diag(y, -y) and z [[0, 1], [1, 0]]."""
    y, z = math.sqrt(y2), math.sqrt(z2)
    return LinearSde(x * np.eye(2), [np.diag([y, -y]), z * np.array([[0.0, 1.0], [1.0, 0.0]])])


def test2_system(x: float, y2: float, z2: float) -> LinearSde:
    """Non-normal drift [[x, y2], [0, x]] with rotational noise z [[0, 1], [-1, 0]]."""
    z = math.sqrt(z2)
    return LinearSde(np.array([[x, y2], [0.0, x]]), [z * np.array([[0.0, 1.0], [-1.0, 0.0]])])


def test3_system(x: float, z2: float, m: int) -> LinearSde:
    """Scalar drift x with m channels of intensity z."""
    z = math.sqrt(z2)
    return LinearSde([[x]], [[[z]] for _ in range(m)])


# ---- closed-form conditions ----

def dif_condition(test_id: int, x: float, y2: float, z2: float) -> float:
    """Left side of the SDE's stability inequality (stable iff negative)."""
    if test_id == 1:
        return 2.0 * x + y2 + z2
    if test_id == 2:
        y4, z4 = y2 * y2, z2 * z2
        c = np.cbrt(27 * y4 * z2 + 3 * math.sqrt(81 * y4 * y4 * z4 + 48 * y4 * z4 * z4) + 8 * z4 * z2)
        if c == 0.0:
            return 2.0 * x
        return 2.0 * x + c / 3.0 + 4.0 * z4 / (3.0 * c) - z2 / 3.0
    raise ValueError("closed forms exist for test systems 1 and 2 only")


def closed_form_dif(test_id: int, x: float, y2: float, z2: float) -> bool:
    return dif_condition(test_id, x, y2, z2) < 0.0


def _theta_for(method: str, theta):
    cfg = MethodConfig.from_name(method)
    return cfg, (cfg.theta if theta is None else theta)


def test1_condition(method: str, x: float, y2: float, z2: float, theta: Optional[float] = None) -> float:
    """Left side of the closed-form condition for test system 1 (stable iff negative), eta = 1."""
    cfg, th = _theta_for(method, theta)
    s = y2 + z2
    if cfg.method == "dssbm":
        return 1.0 - 2.0 * (1.0 - x) ** 2 + (s + 1.0) ** 2
    if cfg.method == "mssbm":
        return (s + 1.0) ** 2 + 2.0 * x * (s - x + 2.0) - (y2 * z2 + 1.0)
    N = (4 * th * th + 4 * th - 1) * x * x + 8 * th * x + 4
    e = (2 * th - 1) * x + 2
    if cfg.method == "ssamm":
        return N * N * ((s + 1.0) ** 2 + 1.0) - 2.0 * e ** 4
    if cfg.method == "mssamm":
        return N * N * (3 * s * s + 8 * s - 2 * y2 * z2 + 4) - 4.0 * e * e * (e + s) ** 2
    raise ValueError(f"no closed form for {method}")


def closed_form_test1(method: str, x: float, y2: float, z2: float, theta: Optional[float] = None) -> bool:
    return test1_condition(method, x, y2, z2, theta) < 0.0


def test2_coefficients(method: str, x: float, y2: float, z2: float, theta: Optional[float] = None):
    cfg, th = _theta_for(method, theta)
    y4, z4 = y2 * y2, z2 * z2
    if cfg.method == "dssbm":
        u = x - 1.0
        return ((z4 + 2) / (2 * u ** 2), -y2 * (z4 + 2) / (2 * u ** 3), z2 / u ** 2,
                -y2 * z2 / u ** 3, (z4 + 2) * y4 / (2 * u ** 4), z2 * y4 / u ** 4)
    if cfg.method == "mssbm":
        D = -z2 - 2 * x + 2
        N = 3 * z4 - 4 * z2 + 4
        return (N / D ** 2, 2 * y2 * N / D ** 3, 4 * z2 / D ** 2,
                8 * y2 * z2 / D ** 3, 4 * y4 * N / D ** 4, 16 * z2 * y4 / D ** 4)
    if cfg.method == "ssamm":
        q = (4 * th * (th + 1) - 1) * x * x + 8 * th * x + 4
        dd = -2 * th * x + x - 2
        e = (2 * th - 1) * x + 2
        r = (6 * th - 1) * x + 2
        w = -6 * th * x + x - 2
        return ((z4 + 2) * q * q / (2 * dd ** 4), 2 * y2 * (z4 + 2) * r * q / e ** 5,
                z2 * q * q / dd ** 4, 4 * y2 * z2 * r * q / e ** 5,
                8 * y4 * (z4 + 2) * w * w / dd ** 6, 16 * y4 * z2 * w * w / dd ** 6)
    raise ValueError(f"no closed-form matrix for {method}")


def closed_form_test2_matrix(method: str, x: float, y2: float, z2: float,
                             theta: Optional[float] = None) -> np.ndarray:
    """4x4 stability matrix of test system 2; the modified Adams-Moulton method uses s_split."""
    if MethodConfig.from_name(method).method == "mssamm":
        return s_split(method, test2_system(x, y2, z2), 1.0)
    a1, a2, a3, a4, a5, a6 = test2_coefficients(method, x, y2, z2, theta)
    return np.array([
        [a1, a2, a2, a3 + a5],
        [0.0, a1, -a3, a2 - a4],
        [0.0, -a3, a1, a2 - a4],
        [a3, a4, a4, a1 + a6],
    ])


# ---- scans and tables ----

@dataclass
class RegionGrid:
    axis1: Tuple[str, np.ndarray]
    axis2: Tuple[str, np.ndarray]
    values: np.ndarray          # rho (methods) or alpha (sde), shape (n1, n2)
    stable: np.ndarray
    closed_form: Optional[np.ndarray] = None
    disagree: Optional[np.ndarray] = None
    method: str = ""
    test_id: int = 1

    def rows(self):
        n1, n2 = self.values.shape
        for i in range(n1):
            for j in range(n2):
                yield self.axis1[1][i], self.axis2[1][j], self.values[i, j], bool(self.stable[i, j])


def parse_axis(spec: str) -> Tuple[str, float, float, int]:
    """``"x=-6:0:200"`` -> ("x", -6.0, 0.0, 200)."""
    name, rng = spec.split("=", 1)
    lo, hi, n = rng.split(":")
    return name.strip(), float(lo), float(hi), int(n)


def _test_system(test_id, p, m):
    if test_id == 1:
        return test1_system(p["x"], p["y2"], p["z2"])
    if test_id == 2:
        return test2_system(p["x"], p["y2"], p["z2"])
    if test_id == 3:
        return test3_system(p["x"], p["z2"], int(p.get("m", m)))
    raise ValueError("test_id must be 1, 2 or 3")


def region_scan(test_id: int, method: str, axis1, axis2, fixed: Optional[Dict[str, float]] = None,
                m: int = 1, theta=None, eta=None, cross_terms: str = "collected", boundary_tol: float = 1e-6) -> RegionGrid:
    """Stability raster over two of the parameters x, y2, z2 (or m for test 3)."""
    a1 = parse_axis(axis1) if isinstance(axis1, str) else tuple(axis1)
    a2 = parse_axis(axis2) if isinstance(axis2, str) else tuple(axis2)
    v1 = np.linspace(a1[1], a1[2], int(a1[3]))
    v2 = np.linspace(a2[1], a2[2], int(a2[3]))
    base = {"x": -1.0, "y2": 0.0, "z2": 0.0, "m": m}
    base.update(fixed or {})
    sde = method.lower() == "sde"
    cfg = None if sde else _cfg(method, theta, eta)
    closed_ok = (test_id in (1, 2) and (sde or (cfg.method in ("dssbm", "mssbm", "ssamm", "mssamm")
                                                and cfg.eta == 1.0)))
    vals = np.empty((v1.size, v2.size))
    closed = np.zeros_like(vals, dtype=bool) if closed_ok else None
    for i, p1 in enumerate(v1):
        for j, p2 in enumerate(v2):
            p = dict(base)
            p[a1[0]] = p1
            p[a2[0]] = p2
            sys = _test_system(test_id, p, m)
            if sde:
                vals[i, j] = mk.spectral_abscissa(s_dif(sys))
                if closed_ok:
                    closed[i, j] = closed_form_dif(test_id, p["x"], p["y2"], p["z2"])
            else:
                vals[i, j] = mk.spectral_radius(s_split(cfg, sys, 1.0, cross_terms=cross_terms))
                if closed_ok and test_id == 1:
                    closed[i, j] = closed_form_test1(method, p["x"], p["y2"], p["z2"], cfg.theta)
                elif closed_ok:
                    closed[i, j] = mk.spectral_radius(
                        closed_form_test2_matrix(method, p["x"], p["y2"], p["z2"], cfg.theta)) < 1.0
    stable = vals < 0.0 if sde else vals < 1.0
    disagree = None
    if closed is not None:
        margin = np.abs(vals) if sde else np.abs(vals - 1.0)
        disagree = (closed != stable) & (margin > boundary_tol)
    return RegionGrid((a1[0], v1), (a2[0], v2), vals, stable, closed, disagree,
                      "sde" if sde else cfg.label, test_id)


@dataclass
class TableRow:
    h: float
    method: str
    rho: float
    stable: bool

    @property
    def verdict(self) -> str:
        return "stable" if self.stable else "unstable"


def table_steps(h_max: float = 1.0, h_min: float = 0.1, dh: float = 0.1) -> List[float]:
    n = int(round((h_max - h_min) / dh))
    return [round(h_max - k * dh, 12) for k in range(n + 1)]


def spectral_table(d: int, m: int, h_list: Optional[Sequence[float]] = None,
                   methods: Iterable[str] = TABLE_METHODS, cross_terms: str = "collected") -> List[TableRow]:
    """Spectral radii for the coupled benchmark system, rows ordered by decreasing h."""
    from .sde_model import coupled_linear_benchmark
    sys = coupled_linear_benchmark(d, m)
    hs = sorted(table_steps() if h_list is None else h_list, reverse=True)
    rows = []
    for h in hs:
        for name in methods:
            cfg = _cfg(name)
            r = mk.spectral_radius(s_split(cfg, sys, h, cross_terms=cross_terms))
            rows.append(TableRow(h, name, r, r < 1.0))
    return rows
