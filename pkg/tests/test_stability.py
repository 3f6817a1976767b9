import math

import numpy as np
import pytest

from golden import table_cells
from splitstep import matrixkit as mk
from splitstep import stability as st
from splitstep.sde_model import LinearSde, coupled_linear_benchmark, diagonal_test_system

CLOSED_FORM_METHODS = ["dssbm", "mssbm", "ssamm+", "ssamm-", "mssamm+", "mssamm-"]


def test_s_dif_scalar_and_deterministic():
    lam, sigma = -0.8, 0.6
    S = st.s_dif(LinearSde([[lam]], [[[sigma]]]))
    assert S.shape == (1, 1) and S[0, 0] == pytest.approx(2 * lam + sigma ** 2)
    F = np.array([[-1.0, 3.0], [0.0, -2.0]])
    S0 = st.s_dif(LinearSde(F, [np.zeros((2, 2))]))
    assert mk.spectral_abscissa(S0) == pytest.approx(2 * mk.spectral_abscissa(F))


@pytest.mark.parametrize("point, stable", [((-1.0, 0.5, 0.4), True), ((-1.0, 1.5, 0.6), False)])
def test_s_dif_test1_points(point, stable):
    assert (mk.spectral_abscissa(st.s_dif(st.test1_system(*point))) < 0) is stable
    assert st.closed_form_dif(1, *point) is stable


def test_closed_form_dif_limits():
    assert st.closed_form_dif(1, -0.1, 0.0, 0.0) and not st.closed_form_dif(1, 0.1, 0.0, 0.0)
    assert st.dif_condition(2, -0.7, 2.0, 0.0) == pytest.approx(-1.4)


@pytest.mark.parametrize("test_id", [1, 2])
def test_closed_form_dif_matches_abscissa(test_id):
    for x in np.linspace(-3, 0.5, 15):
        for y2 in np.linspace(0, 3, 8):
            for z2 in np.linspace(0, 3, 8):
                a = mk.spectral_abscissa(st.s_dif(st._test_system(test_id, {"x": x, "y2": y2, "z2": z2}, 1)))
                if abs(a) > 1e-6:
                    assert st.closed_form_dif(test_id, x, y2, z2) == (a < 0)


def test_milstein_scalar_matches_formula():
    lam, sigma, h = -2.0, 1.0, 0.1
    S = st.s_milstein(LinearSde([[lam]], [[[sigma]]]), h)
    assert S[0, 0] == pytest.approx((1 + h * lam) ** 2 + h * sigma ** 2 + 0.5 * h * h * sigma ** 4)


def test_milstein_scalar_multichannel_formula():
    lam, h = -1.0, 0.3
    g = [0.4, 0.7, 0.2]
    S = st.s_milstein(LinearSde([[lam]], [[[v]] for v in g]), h)
    cross = sum(g[a] * g[b] for a in range(3) for b in range(3) if a != b)
    expect = ((1 + h * lam) ** 2 + h * sum(v ** 2 for v in g) + 0.5 * h * h * sum(v ** 4 for v in g)
              + 0.25 * h * h * cross ** 2)
    assert S[0, 0] == pytest.approx(expect, rel=1e-14)


def test_milstein_tends_to_identity():
    lin = diagonal_test_system(-1.0, 0.5, 0.5)
    assert st.s_milstein(lin, 1e-12) == pytest.approx(np.eye(4), abs=1e-10)


def test_p_matrix_examples():
    lin = LinearSde([[-2.0]], [[[0.5]]])
    h = 0.3
    assert st.p_matrix(st.MethodConfig("ssctm", theta=0.0), lin, h)[0, 0] == pytest.approx(1 + h * -2.0)
    assert st.p_matrix("dssbm", lin, h)[0, 0] == pytest.approx(1 / (1 + 2 * h))
    H = 0.5 * h * 0.25
    assert st.p_matrix("mssbm", lin, h)[0, 0] == pytest.approx(1 / (1 + 2 * h + H))


def test_p_matrix_singular_stage():
    with pytest.raises(mk.SingularMatrixError):
        st.p_matrix("dssbm", LinearSde([[1.0]], [[[0.0]]]), 1.0)


@pytest.mark.parametrize("seed", range(3))
def test_split_reduces_to_milstein(seed):
    rng = np.random.default_rng(seed)
    lin = LinearSde(rng.normal(size=(3, 3)), list(0.5 * rng.normal(size=(3, 3, 3))))
    for form in st.CROSS_FORMS:
        a = st.s_split(st.MethodConfig("ssctm", theta=0.0, eta=0.0), lin, 0.2, cross_terms=form)
        b = st.s_milstein(lin, 0.2, cross_terms=form)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.abs(b).max()


def test_dssbm_equals_ssctm_one_one():
    lin = diagonal_test_system(-2.0, 0.4, 0.9)
    a = st.s_split("dssbm", lin, 0.5)
    b = st.s_split(st.MethodConfig("ssctm", theta=1.0, eta=1.0), lin, 0.5)
    assert np.array_equal(a, b)


def test_collected_and_exact_forms_agree_for_two_commuting_channels():
    lin = coupled_linear_benchmark(3, 2)
    for name in ("dssbm", "ssamm+", "milstein"):
        a = st.s_split(name, lin, 0.4, cross_terms="collected")
        b = st.s_split(name, lin, 0.4, cross_terms="exact")
        assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("name", ["dssbm", "mssbm"])
@pytest.mark.parametrize("m", [9, 11, 13])
def test_spectral_table_backward_euler_columns(name, m):
    rows = {(r.h, r.method): r for r in st.spectral_table(5, m, methods=[name])}
    for h, meth, rho, stable in table_cells(m):
        if meth == name:
            r = rows[(h, meth)]
            assert abs(r.rho - rho) <= 0.01 and r.stable == stable


def test_spectral_table_layout():
    rows = st.spectral_table(5, 9)
    assert len(rows) == 60
    assert [r.h for r in rows[::6]] == pytest.approx([1.0 - 0.1 * k for k in range(10)])
    assert [r.method for r in rows[:6]] == list(st.TABLE_METHODS)


def test_report_boundary_is_unstable():
    lin = LinearSde([[0.0]], [[[0.0]]])
    rep = st.analyze("ssctm", lin, 1.0, theta=0.5)
    assert rep.value == pytest.approx(1.0) and not rep.stable and rep.verdict == "unstable"
    sde = st.analyze("sde", LinearSde([[-1.0]], [[[0.5]]]))
    assert sde.value == pytest.approx(-1.75) and sde.stable


def test_test1_closed_form_examples():
    assert st.test1_condition("dssbm", 0.0, 0.0, 0.0) == 0.0
    assert not st.closed_form_test1("dssbm", 0.0, 0.0, 0.0)
    assert st.test1_condition("dssbm", -1.0, 0.5, 0.5) == pytest.approx(-3.0)


@pytest.mark.parametrize("method", CLOSED_FORM_METHODS)
def test_test1_closed_form_matches_numeric(method):
    y2 = 0.25
    for x in np.linspace(-6, 0.5, 30):
        for z2 in np.linspace(0, 6, 30):
            rho = mk.spectral_radius(st.s_split(method, st.test1_system(x, y2, z2), 1.0))
            if abs(rho - 1) > 1e-6:
                assert st.closed_form_test1(method, x, y2, z2) == (rho < 1), (x, z2, rho)


@pytest.mark.parametrize("method", ["dssbm", "mssbm", "ssamm+", "ssamm-"])
def test_test2_matrix_matches_numeric(method):
    rng = np.random.default_rng(30)
    for _ in range(40):
        x, y2, z2 = rng.uniform(-6, 0), rng.uniform(0, 4), rng.uniform(0, 4)
        a = mk.spectral_radius(st.closed_form_test2_matrix(method, x, y2, z2))
        b = mk.spectral_radius(st.s_split(method, st.test2_system(x, y2, z2), 1.0))
        assert a == pytest.approx(b, abs=1e-8)


def test_test2_dssbm_reference_point():
    a = mk.spectral_radius(st.closed_form_test2_matrix("dssbm", -1.0, 1.0, 0.25))
    b = mk.spectral_radius(st.s_split("dssbm", st.test2_system(-1.0, 1.0, 0.25), 1.0))
    assert abs(a - b) <= 1e-8


def test_test2_coefficients_without_nonnormality():
    for method in ("dssbm", "mssbm", "ssamm+"):
        a = st.test2_coefficients(method, -1.2, 0.0, 0.7)
        assert a[1] == a[3] == a[4] == a[5] == 0


def test_deterministic_limit_equals_squared_amplification():
    x = -1.7
    for method in ("dssbm", "ssamm+", "ssamm-"):
        P = st.p_matrix(method, LinearSde([[x]], [[[0.0]]]), 1.0)[0, 0]
        a1 = st.test2_coefficients(method, x, 0.0, 0.0)[0]
        assert a1 == pytest.approx(P * P, rel=1e-12)


def test_mssamm_test2_falls_back_to_numeric():
    M = st.closed_form_test2_matrix("mssamm+", -1.0, 1.0, 0.5)
    assert np.array_equal(M, st.s_split("mssamm+", st.test2_system(-1.0, 1.0, 0.5), 1.0))


def test_region_deterministic_column_backward_euler():
    grid = st.region_scan(1, "dssbm", "x=-6:-0.1:25", "z2=0:0:1", {"y2": 0.0})
    assert grid.stable.all()
    assert grid.values.shape == (25, 1)


def test_region_scan_flags_no_disagreement():
    for method in ("sde", "mssbm", "ssamm-"):
        grid = st.region_scan(1, method, "x=-6:0:20", "z2=0:6:20", {"y2": 0.5})
        assert grid.disagree is not None and not grid.disagree.any()


def test_region_shrinks_with_channel_count():
    regions = [st.region_scan(3, "dssbm", "x=-6:0:25", "z2=0:3:25", m=m).stable for m in (1, 5, 10)]
    assert regions[0].sum() > regions[1].sum() > regions[2].sum()
    assert np.all(regions[1] <= regions[0]) and np.all(regions[2] <= regions[1])


def test_parse_axis():
    assert st.parse_axis("x=-6:0:200") == ("x", -6.0, 0.0, 200)


def test_consistency_as_step_shrinks():
    stable = diagonal_test_system(-2.0, 0.5, 0.5)
    unstable = diagonal_test_system(-0.5, 0.9, 0.9)
    assert mk.spectral_abscissa(st.s_dif(stable)) < 0 < mk.spectral_abscissa(st.s_dif(unstable))
    for name in ("milstein", "dssbm", "mssbm", "ssamm+", "mssamm-"):
        rs = [mk.spectral_radius(st.s_split(name, stable, 2.0 ** -k)) for k in range(6, 14)]
        ru = [mk.spectral_radius(st.s_split(name, unstable, 2.0 ** -k)) for k in range(6, 14)]
        assert all(r < 1 for r in rs) and all(r > 1 for r in ru)
        assert abs(rs[-1] - 1) < 1e-3 and abs(ru[-1] - 1) < 1e-3


def test_mc_deterministic_exact():
    lin = LinearSde([[-1.0, 0.5], [0.2, -2.0]], [np.zeros((2, 2))])
    est = st.mc_estimate("dssbm", lin, 0.3, n_samples=10)
    P = st.p_matrix("dssbm", lin, 0.3)
    assert np.allclose(est.mean, np.kron(P, P), rtol=1e-14, atol=1e-16)


def test_mc_scalar_milstein():
    lin = LinearSde([[-2.0]], [[[1.0]]])
    est = st.mc_estimate("milstein", lin, 0.1, n_samples=100_000, seed=3)
    exact = st.s_milstein(lin, 0.1)[0, 0]
    assert abs(est.mean[0, 0] - exact) <= 3 * est.stderr[0, 0]


@pytest.mark.parametrize("name", ["ssamm-", "mssamm+", "mssctm"])
def test_mc_matches_exact_form_noncommutative(name):
    lin = diagonal_test_system(-1.0, 0.6, 0.8)
    h = 0.2
    est = st.mc_estimate(name, lin, h, n_samples=50_000, seed=4, levy_p=100)
    rho = mk.spectral_radius(st.s_split(name, lin, h, cross_terms="exact", levy_p=100, staged=True))
    assert abs(est.rho - rho) <= 3 * est.rho_se


def test_mc_commutative_skips_levy():
    lin = coupled_linear_benchmark(2, 3)
    a = st.mc_estimate("dssbm", lin, 0.2, n_samples=2000, seed=1)
    b = st.mc_estimate("dssbm", lin, 0.2, n_samples=2000, seed=1, levy_p=5)
    assert np.array_equal(a.mean, b.mean)
