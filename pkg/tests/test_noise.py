import math

import numpy as np
import pytest

from splitstep import noise


def _levy_samples(h, p, n, seed=0, chunk=50_000):
    rng = np.random.default_rng(seed)
    out = []
    for lo in range(0, n, chunk):
        k = min(chunk, n - lo)
        dw = noise.sample_increments(rng, h, 2, (k,))
        A = noise.levy_area_truncated(rng, dw, h, p)
        out.append(noise.ito_full(dw, h, A)[:, 0, 1])
    return np.concatenate(out)


def test_increment_moments():
    h, n = 0.01, 1_000_000
    dw = noise.sample_increments(noise.path_generator(3), h, 2, (n,))
    assert np.all(np.abs(dw.mean(axis=0)) <= 4 * math.sqrt(h / n))
    assert np.allclose(dw.var(axis=0), h, rtol=0.02)
    cov = np.mean(dw[:, 0] * dw[:, 1])
    assert abs(cov) <= 4 * h / math.sqrt(n)


def test_zero_step_rejected():
    with pytest.raises(ValueError):
        noise.sample_increments(np.random.default_rng(0), 0.0, 2)
    with pytest.raises(ValueError):
        noise.default_levy_terms(0.0)


def test_ito_commutative_small_cases():
    h = 0.3
    I0 = noise.ito_commutative(np.zeros(3), h)
    assert np.array_equal(I0, -h / 2 * np.eye(3))
    a = 0.7
    assert noise.ito_commutative(np.array([a]), h)[0, 0] == (a * a - h) / 2


def test_diagonal_identity_bit_exact():
    rng = np.random.default_rng(4)
    h = 0.05
    dw = noise.sample_increments(rng, h, 4, (1000,))
    A = noise.levy_area_truncated(rng, dw, h)
    I = noise.ito_full(dw, h, A)
    diag = np.diagonal(I, axis1=-2, axis2=-1)
    assert np.array_equal(diag, 0.5 * (dw * dw - h))


def test_levy_area_antisymmetric_exactly():
    rng = np.random.default_rng(5)
    h = 0.1
    dw = noise.sample_increments(rng, h, 4, (500,))
    A = noise.levy_area_truncated(rng, dw, h, 7)
    assert np.array_equal(A, -np.swapaxes(A, -1, -2))
    assert np.all(np.diagonal(A, axis1=-2, axis2=-1) == 0)
    one = noise.levy_area_truncated(rng, np.array([0.2]), h)
    assert one.shape == (1, 1) and one[0, 0] == 0


def test_strat_shift_and_round_trip():
    rng = np.random.default_rng(6)
    h = 0.02
    dw = noise.sample_increments(rng, h, 3, (200,))
    I = noise.ito_full(dw, h, noise.levy_area_truncated(rng, dw, h))
    J = noise.strat_from_ito(I, h)
    eye = np.eye(3, dtype=bool)
    # off-diagonal entries are untouched, diagonal is fl(I + h/2)
    assert np.array_equal(J[..., ~eye], I[..., ~eye])
    assert np.array_equal(np.diagonal(J, axis1=-2, axis2=-1), np.diagonal(I, axis1=-2, axis2=-1) + h / 2)
    assert np.array_equal(noise.strat_from_ito(np.zeros((2, 2)), h), h / 2 * np.eye(2))
    back = noise.strat_from_ito(noise.ito_from_strat(J, h), h)
    assert np.allclose(back, J, rtol=0, atol=1e-17)


def test_ito_full_reduces_and_symmetric_part():
    rng = np.random.default_rng(7)
    h = 0.1
    dw = noise.sample_increments(rng, h, 3, (50,))
    assert np.array_equal(noise.ito_full(dw, h, np.zeros((50, 3, 3))), noise.ito_commutative(dw, h))
    I = noise.ito_full(dw, h, noise.levy_area_truncated(rng, dw, h))
    S = I + np.swapaxes(I, -1, -2)
    outer = dw[:, :, None] * dw[:, None, :]
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(S[:, off], outer[:, off], rtol=1e-15, atol=1e-17)


def test_iterated_integral_moments():
    h, n = 0.01, 1_000_000
    rng = noise.path_generator(8)
    dw = noise.sample_increments(rng, h, 1, (n,))
    I11 = noise.ito_commutative(dw, h)[:, 0, 0]
    assert abs(I11.mean()) <= 4 * (h / math.sqrt(2)) / math.sqrt(n)
    # E[I11^2] = h^2/2 and Var(I11^2) = 3.5 h^4
    assert abs(np.mean(I11 ** 2) - h * h / 2) <= 4 * math.sqrt(3.5 * h ** 4 / n)


def test_offdiagonal_variance_approaches_half_h_squared():
    h = 0.01
    n = 200_000
    I12 = _levy_samples(h, noise.default_levy_terms(h), n, seed=9)
    sd = math.sqrt(h * h / 2)
    assert abs(I12.mean()) <= 4 * sd / math.sqrt(n)
    assert I12.var() == pytest.approx(h * h / 2, rel=0.05)


def test_variance_nondecreasing_in_depth():
    h = 0.01
    v = [_levy_samples(h, p, 200_000, seed=10).var() for p in (1, 10, 100)]
    assert v[0] < v[1] < v[2] < h * h / 2 * 1.01
    # sample variances track the analytic truncated value
    for p, got in zip((1, 10, 100), v):
        assert got == pytest.approx(h * h / 4 + noise.levy_area_variance(h, p), rel=0.02)


def test_levy_variance_formula():
    h = 0.2
    assert noise.levy_area_variance(h, 1) == pytest.approx(h * h * 6 / (4 * math.pi ** 2))
    assert noise.levy_area_variance(h, 10 ** 6) == pytest.approx(h * h / 4, rel=1e-5)
    assert noise.levy_area_variance(h) == h * h / 4


def test_default_depth():
    assert noise.default_levy_terms(0.01) == 100
    assert noise.default_levy_terms(0.1) == 10
    assert noise.default_levy_terms(0.3) == 4
    assert noise.default_levy_terms(2.0) == 1


def test_path_streams_reproducible_and_independent():
    a, A = noise.path_noise(42, 3, 20, 3, 0.1, levy=True)
    b, B = noise.path_noise(42, 3, 20, 3, 0.1, levy=True)
    assert np.array_equal(a, b) and np.array_equal(A, B)
    c, _ = noise.path_noise(42, 4, 20, 3, 0.1)
    assert not np.array_equal(a, c)
    # the Lévy depth never changes the Brownian path
    d, _ = noise.path_noise(42, 3, 20, 3, 0.1, levy_p=50, levy=True)
    assert np.array_equal(a, d)
    e, E = noise.path_noise(42, 3, 20, 1, 0.1, levy=True)
    assert E is None


def test_make_noise_commutative_case():
    dw = np.array([0.1, -0.2])
    nz = noise.make_noise(dw, 0.04)
    assert np.array_equal(nz.ito, nz.ito.T)
    assert np.array_equal(nz.strat - nz.ito, np.diag([0.02, 0.02]))


def test_coarsen_increments():
    dw = np.arange(12.0).reshape(6, 2)
    c = noise.coarsen_increments(dw, 3)
    assert np.array_equal(c, [[6.0, 9.0], [24.0, 27.0]])
    with pytest.raises(ValueError):
        noise.coarsen_increments(dw, 4)
