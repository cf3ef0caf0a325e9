import math

from pytest import fixture, raises


@fixture(scope="module")
def np():
    import numpy

    return numpy


@fixture(scope="module")
def torch():
    import torch

    return torch


@fixture(scope="module")
def amlest():
    import amlest

    return amlest


@fixture(scope="module")
def stable():
    from amlest import stable

    return stable


@fixture(scope="module")
def RngStream():
    from amlest.numerics import RngStream

    return RngStream


@fixture(scope="module")
def cauchy_sample(stable, RngStream):
    params = stable.StableParams(1.0, 0.0, 1.0, 0.0)
    return stable.cms_simulate(params, 2000, RngStream(31, 0))


def test_params_validation(stable):
    for args in (
        (0.0, 0.0, 1.0, 0.0),
        (2.1, 0.0, 1.0, 0.0),
        (1.5, 1.5, 1.0, 0.0),
        (1.5, 0.0, 0.0, 0.0),
    ):
        try:
            stable.StableParams(*args)
            assert False, f"StableParams{args} should be rejected"
        except ValueError:
            assert True


def test_cauchy_single_observation(stable):
    assert abs(stable.cauchy_loglik(2.0, 1.0, [1.0]) + math.log(2.0 * math.pi)) < 1e-15


def test_cauchy_matches_scipy(np, stable, cauchy_sample):
    from scipy.stats import cauchy

    y = cauchy_sample.numpy()
    expected = float(cauchy.logpdf(y, loc=0.3, scale=1.7).mean())
    assert abs(stable.cauchy_loglik(1.7, 0.3, y) - expected) < 1e-12


def test_cauchy_location_equivariant(stable, cauchy_sample):
    a = stable.cauchy_loglik(1.3, 0.2, cauchy_sample)
    b = stable.cauchy_loglik(1.3, 5.2, cauchy_sample + 5.0)
    assert abs(a - b) < 1e-12
    with raises(ValueError):
        stable.cauchy_loglik(0.0, 0.0, cauchy_sample)


def test_landau_at_location(stable):
    value = float(stable.landau_logpdf([0.3], 2.0, 0.3)[0])
    assert abs(value - (-0.5 - math.log(math.sqrt(2.0 * math.pi) * 2.0))) < 1e-14


def test_landau_far_left_tail(torch, stable):
    values = stable.landau_logpdf([-5000.0, -1e6], 1.0, 0.0)
    assert bool(torch.isfinite(values).all())
    assert float(values[0]) < -1e300


def test_landau_exact(torch, amlest, stable):
    values = stable.landau_logpdf([-1.0, 0.0, 1.0, 10.0], 1.5, 0.2, amlest.LandauForm.Exact)
    assert bool(torch.isfinite(values).all())
    # right tail is heavier than the left
    left = float(stable.landau_logpdf([-3.0], 1.0, 0.0, amlest.LandauForm.Exact)[0])
    right = float(stable.landau_logpdf([3.0], 1.0, 0.0, amlest.LandauForm.Exact)[0])
    assert right > left


def test_pseudo_score_cauchy_block(np, stable, cauchy_sample):
    from amlest.numerics import central_diff_gradient

    gradient = central_diff_gradient(
        lambda v: stable.cauchy_loglik(v[0], v[1], cauchy_sample),
        np.array([1.2, 0.1]),
        step=1e-6,
    )
    score = stable.stable_pseudo_score(1.2, 0.1, cauchy_sample)
    assert score.shape == (4,)
    assert np.allclose(score[2:], gradient, atol=1e-6)


def test_pseudo_score_gaussian_entry(np, stable, cauchy_sample):
    from scipy.stats import norm

    y = cauchy_sample.numpy()
    c, mu = 1.2, 0.1
    expected = float(norm.logpdf(y, loc=mu, scale=math.sqrt(2.0) * c).mean())
    expected -= stable.cauchy_loglik(c, mu, y)
    assert abs(stable.stable_pseudo_score(c, mu, y)[0] - expected) < 1e-10


def test_pseudo_score_landau_entry(stable, cauchy_sample):
    c, mu = 1.2, 0.1
    expected = float(stable.landau_logpdf(cauchy_sample, c, mu).mean())
    expected -= stable.cauchy_loglik(c, mu, cauchy_sample)
    assert abs(stable.stable_pseudo_score(c, mu, cauchy_sample)[1] - expected) < 1e-10


def test_cms_gaussian(np, stable, RngStream):
    from scipy.stats import kstest

    params = stable.StableParams(2.0, 0.0, 0.5, 1.0)
    y = stable.cms_simulate(params, 5000, RngStream(32, 0)).numpy()
    assert kstest(y, "norm", args=(1.0, math.sqrt(2.0) * 0.5)).pvalue > 0.001


def test_cms_cauchy(np, stable, cauchy_sample):
    from scipy.stats import kstest

    assert kstest(cauchy_sample.numpy(), "cauchy").pvalue > 0.001
    assert abs(float(np.median(cauchy_sample.numpy()))) < 0.1


def test_cms_skewed(np, stable, RngStream):
    from scipy.stats import kstest, levy_stable

    params = stable.StableParams(1.5, 0.5, 1.0, 0.0)
    y = stable.cms_simulate(params, 1000, RngStream(33, 0)).numpy()
    assert kstest(y, levy_stable.cdf, args=(1.5, 0.5)).pvalue > 0.001


def test_model_checks(amlest, stable):
    model = stable.StableModel()
    assert model.names == ("a", "b", "c", "mu")
    assert model.constraint_mask == (True, True, False, False)
    try:
        stable.StableModel("exact")
        assert False, "landau should be a LandauForm"
    except TypeError:
        assert True
    assert stable.StableModel(amlest.LandauForm.Exact).landau is amlest.LandauForm.Exact


def test_initial_beta(np, stable, cauchy_sample):
    from amlest.core import Dataset

    start = stable.StableModel().initial_beta(Dataset(cauchy_sample))
    assert start[:2].tolist() == [1.0, 0.0]
    assert abs(start[2] - 1.0) < 0.15 and abs(start[3]) < 0.1


def test_batched_scores_match_paths(np, stable, cauchy_sample):
    from amlest.core import Dataset, ModelContract, SimBank

    model = stable.StableModel()
    data = Dataset(cauchy_sample[:300])
    bank = SimBank.create(4, 0, 3, 300)
    theta = np.array([1.6, 0.3, 0.9, 0.1])
    beta = np.array([1.0, 0.0, 1.1, 0.05])
    batched = model.simulated_scores(theta, beta, bank, data)
    per_path = ModelContract.simulated_scores(model, theta, beta, bank, data)
    assert np.allclose(batched, per_path, rtol=1e-10, atol=1e-12)


def test_aml_fit_cauchy(np, stable, cauchy_sample):
    from amlest.numerics import OptimConfig

    result = stable.stable_aml_fit(
        cauchy_sample, 5, OptimConfig(), seed=3, compute_variance=False
    )
    a, b, c, mu = result.theta_hat.values
    assert abs(a - 1.0) < 0.2
    assert abs(b) < 0.3
    assert abs(c - 1.0) < 0.15
    assert abs(mu) < 0.15
    assert result.beta_hat.values[:2].tolist() == [1.0, 0.0]


def test_aml_fit_short_series(stable):
    from amlest.numerics import OptimConfig

    with raises(ValueError):
        stable.stable_aml_fit([0.0] * 99, 2, OptimConfig())
