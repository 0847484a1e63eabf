import numpy as np
import pytest

from pa_modelkit.errors import ArgumentError, ConfigurationError
from pa_modelkit.evaluation import nmse_db
from pa_modelkit.gmp import GmpIndex, GmpModel, gmp_design_matrix, gmp_fit, gmp_predict
from pa_modelkit.models import DEFAULT_GMP_INDEX
from pa_modelkit.neuralcore import count_parameters
from pa_modelkit.signals import CarrierConfig, generate_ofdm_carrier


@pytest.fixture(scope="module")
def x():
    s = generate_ofdm_carrier(CarrierConfig(128, 20e6, 4, 16, seed=8), 4000).samples
    return s / np.abs(s).max()


def test_default_index_count():
    assert DEFAULT_GMP_INDEX.num_terms == 77 + 30
    model = GmpModel(DEFAULT_GMP_INDEX, np.zeros(107, dtype=complex))
    assert count_parameters(model) == 214


def test_design_columns(x):
    phi = gmp_design_matrix(x, DEFAULT_GMP_INDEX)
    assert phi.shape == (x.size, 107)
    np.testing.assert_array_equal(gmp_design_matrix(x, GmpIndex(Ka=1, La=1))[:, 0], x)
    c = 0.3 - 0.4j
    phi = gmp_design_matrix(np.full(10, c), GmpIndex(Ka=2, La=1))
    np.testing.assert_allclose(phi, np.tile([c, c * abs(c)], (10, 1)))


def test_design_matrix_matches_formula(x):
    idx = GmpIndex(Ka=2, La=2, Kb=2, Mb=2, Lb=2, Kc=1, Mc=2, Lc=2)
    phi = gmp_design_matrix(x[:50], idx)
    xs = lambda n: x[n] if 0 <= n < 50 else 0.0
    for n in (0, 1, 3, 25, 48, 49):
        row = []
        for k in range(2):
            for l in range(2):
                row.append(xs(n - l) * abs(xs(n - l)) ** k)
        for k in (1, 2):
            for l in range(2):
                for m in (1, 2):
                    row.append(xs(n - l) * abs(xs(n - l - m)) ** k)
        for l in range(2):
            for m in (1, 2):
                row.append(xs(n - l) * abs(xs(n - l + m)))
        np.testing.assert_allclose(phi[n], row, rtol=1e-14, atol=1e-16)


def test_empty_index_rejected():
    with pytest.raises(ConfigurationError):
        GmpIndex()


def test_exact_linear_fit(x):
    m = gmp_fit(x, 3 * x, GmpIndex(Ka=1, La=1))
    assert abs(m.coeffs[0] - 3) < 1e-12


def test_planted_recovery(x):
    rng = np.random.default_rng(1)
    idx = GmpIndex(Ka=5, La=3, Kb=2, Mb=1, Lb=2)
    a = rng.normal(size=idx.num_terms) + 1j * rng.normal(size=idx.num_terms)
    y = gmp_design_matrix(x, idx) @ a
    m = gmp_fit(x, y, idx)
    assert np.linalg.norm(m.coeffs - a) / np.linalg.norm(a) < 1e-8
    assert nmse_db(gmp_predict(m, x), y) < -120


def test_noise_floor_matches_injected_nsr(x):
    rng = np.random.default_rng(2)
    noise = 0.01 * (rng.normal(size=x.size) + 1j * rng.normal(size=x.size))
    y = x + noise
    nsr = 10 * np.log10(np.sum(np.abs(noise) ** 2) / np.sum(np.abs(y) ** 2))
    m = gmp_fit(x, y, GmpIndex(Ka=3, La=2))
    assert m.residual_nmse_db == pytest.approx(nsr, abs=0.1)


def test_scale_equivariance(x):
    y = x + 0.1 * x * np.abs(x) ** 2
    idx = GmpIndex(Ka=4, La=2, Kb=1, Mb=1, Lb=1)
    base = gmp_fit(x, y, idx).coeffs
    np.testing.assert_array_equal(gmp_fit(x, 4.0 * y, idx).coeffs, 4.0 * base)
    np.testing.assert_allclose(gmp_fit(x, (0.3 - 1.1j) * y, idx).coeffs, (0.3 - 1.1j) * base, rtol=1e-10, atol=1e-12)


def test_predict_edge_cases(x):
    idx = GmpIndex(Ka=2, La=2)
    assert np.all(gmp_predict(GmpModel(idx, np.zeros(4, complex)), x) == 0)
    np.testing.assert_array_equal(gmp_predict(GmpModel(GmpIndex(Ka=1, La=1), np.array([1 + 0j])), x), x)


def test_fit_residual_is_consistent(x):
    y = x * (1 - 0.2 * np.abs(x) ** 2) + 0.001j
    m = gmp_fit(x, y, GmpIndex(Ka=3, La=2))
    assert nmse_db(gmp_predict(m, x), y) == pytest.approx(m.residual_nmse_db, abs=1e-9)


def test_rank_deficient_warns(x):
    with pytest.warns(UserWarning, match="rank deficient"):
        u = np.exp(1j * np.angle(x))  # |u| = 1 makes u and u|u| identical columns
        m = gmp_fit(u, u, GmpIndex(Ka=2, La=1))
    assert m.rank_deficient


def test_too_few_samples(x):
    with pytest.raises(ArgumentError):
        gmp_fit(x[:100], x[:100], DEFAULT_GMP_INDEX)
