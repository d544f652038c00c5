import math

import numpy as np
import pytest
from scipy import integrate, stats

from dapto import (
    Dataset,
    PolynomialDgp,
    TWO_EDGE_CROSSING,
    generate_grid_dataset,
    generate_two_edge_dataset,
    load_dataset_csv,
    sample_costs,
    two_edge_mean_costs,
)


def test_degree1_no_noise_is_exact_affine():
    dgp = PolynomialDgp.draw(40, 5, degree=1, noise_halfwidth=0.0, seed=1)
    data = generate_grid_dataset(dgp, 200, seed=2)
    affine = 2.0 + data.contexts @ dgp.base.T / math.sqrt(5)
    assert np.array_equal(data.costs, affine)


def test_generation_is_deterministic():
    dgp = PolynomialDgp.draw(40, 5, degree=3, seed=7)
    a = generate_grid_dataset(dgp, 3, seed=7)
    b = generate_grid_dataset(dgp, 3, seed=7)
    assert np.array_equal(a.contexts, b.contexts)
    assert np.array_equal(a.costs, b.costs)


def test_conditional_mean_at_origin():
    for degree, expected in [(1, 2.0), (2, 4.0)]:
        dgp = PolynomialDgp.draw(10, 5, degree=degree, seed=0)
        mean = dgp.conditional_mean(np.zeros(5))
        assert np.allclose(mean, expected, rtol=0, atol=0)


def _normal_moment(sigma, power):
    """E[(2 + sigma Z)^power] by quadrature, the independent oracle."""
    if sigma == 0:
        return 2.0**power
    val, _ = integrate.quad(
        lambda z: (2.0 + sigma * z) ** power * stats.norm.pdf(z), -12, 12
    )
    return val


def test_degree8_sample_mean_matches_quadrature_oracle():
    dgp = PolynomialDgp.draw(8, 5, degree=8, noise_halfwidth=0.25, seed=5)
    n = 100_000
    data = generate_grid_dataset(dgp, n, seed=31)
    noise_second_moment = 1.0 + 0.25**2 / 3.0
    for j in range(8):
        sigma = math.sqrt(dgp.base[j].sum() / 5.0)
        mean = _normal_moment(sigma, 8)
        second = _normal_moment(sigma, 16) * noise_second_moment
        sd = math.sqrt(second - mean**2)
        assert abs(data.costs[:, j].mean() - mean) < 5.0 * sd / math.sqrt(n)


def test_conditional_mean_matches_monte_carlo_at_fixed_context():
    dgp = PolynomialDgp.draw(6, 5, degree=4, noise_halfwidth=0.25, seed=9)
    z = np.array([0.3, -1.2, 0.8, 0.0, 2.1])
    n = 200_000
    costs = sample_costs(dgp, np.tile(z, (n, 1)), seed=17)
    target = dgp.conditional_mean(z)
    sd = costs.std(axis=0)
    assert np.all(np.abs(costs.mean(axis=0) - target) < 5.0 * sd / math.sqrt(n))


def test_positivity_at_even_degrees():
    # even powers keep the polynomial base nonnegative; the noise never
    # reaches zero while its halfwidth stays below one
    for degree in (2, 8):
        dgp = PolynomialDgp.draw(40, 5, degree=degree, noise_halfwidth=0.25, seed=13)
        data = generate_grid_dataset(dgp, 2000, seed=29)
        assert np.all(data.costs > 0.0)


def test_misspecification_grows_with_degree():
    rng = np.random.default_rng(21)
    Z = rng.standard_normal((4000, 5))
    X = np.column_stack([np.ones(len(Z)), Z])
    errors = []
    for degree in (1, 2, 4, 8):
        dgp = PolynomialDgp.draw(40, 5, degree=degree, noise_halfwidth=0.25, seed=3)
        mean = dgp.conditional_mean(Z)
        coef, *_ = np.linalg.lstsq(X, mean, rcond=None)
        resid = mean - X @ coef
        errors.append(np.mean(resid**2) / np.mean(mean**2))
    assert errors[0] < 1e-20
    assert all(a < b for a, b in zip(errors, errors[1:]))


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        PolynomialDgp.draw(10, 5, degree=0)
    with pytest.raises(ValueError):
        PolynomialDgp.draw(10, 5, degree=2, noise_halfwidth=1.0)
    dgp = PolynomialDgp.draw(10, 5, degree=2)
    with pytest.raises(ValueError):
        generate_grid_dataset(dgp, 0, seed=1)
    with pytest.raises(ValueError):
        dgp.conditional_mean(np.zeros(4))


def test_two_edge_crossing_geometry():
    data = generate_two_edge_dataset(50, seed=4)
    crossing = data.meta["crossing"]
    assert crossing == TWO_EDGE_CROSSING
    left = two_edge_mean_costs(crossing - 0.2)
    assert left[0] < left[1]
    right = two_edge_mean_costs(crossing + 0.2)
    assert right[0] > right[1]
    at = two_edge_mean_costs(crossing)
    assert at[0] == pytest.approx(at[1], abs=1e-12)


def test_two_edge_optimal_fraction_matches_quadrature():
    sd = 0.25
    n = 40_000
    data = generate_two_edge_dataset(n, seed=11, noise_sd=sd)
    frac = np.mean(data.costs[:, 0] <= data.costs[:, 1])

    def p_edge1(z):
        gap = (3.0 - 2.0 * z**2) - (1.0 + 4.0 * z**2)
        return stats.norm.cdf(gap / (sd * math.sqrt(2.0)))

    target, _ = integrate.quad(p_edge1, 0.0, 1.0)
    tol = 5.0 * math.sqrt(target * (1 - target) / n)
    assert abs(frac - target) < tol


def test_csv_roundtrip(tmp_path):
    dgp = PolynomialDgp.draw(40, 5, degree=2, seed=1)
    data = generate_grid_dataset(dgp, 25, seed=2, problem="grid-5x5")
    path = str(tmp_path / "data.csv")
    data.save_csv(path)
    loaded = load_dataset_csv(path)
    assert np.array_equal(loaded.contexts, data.contexts)
    assert np.array_equal(loaded.costs, data.costs)
    assert loaded.meta["degree"] == 2
    assert loaded.meta["problem"] == "grid-5x5"
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    assert header[:2] == ["z_0", "z_1"]
    assert header[5] == "c_0"


def test_dataset_row_mismatch_rejected():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros((4, 2)))
