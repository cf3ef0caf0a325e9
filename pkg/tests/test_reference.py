import math

from pytest import fixture, raises


@fixture(scope="module")
def np():
    import numpy

    return numpy


@fixture(scope="module")
def amlest():
    import amlest

    return amlest


@fixture(scope="module")
def reference():
    from amlest import reference

    return reference


@fixture(scope="module")
def truth():
    from amlest.msm import MsmParams

    return MsmParams(1.5, 0.6, 3.0, 0.01, 2)


@fixture(scope="module")
def returns(truth):
    from amlest.msm import msm_simulate
    from amlest.numerics import RngStream

    return msm_simulate(truth, 400, RngStream(61, 0))


@fixture(scope="module")
def grid_fit(reference, returns):
    return reference.msm_ml_fit(returns, grid=(2, 1))


def test_grid_validation(amlest, reference, returns):
    with raises(ValueError):
        reference.msm_ml_fit(returns, grid=())
    with raises(ValueError):
        reference.msm_ml_fit(returns, grid=(0, 1))
    with raises(amlest.DenseGuardError):
        reference.msm_ml_fit(returns, grid=(2, 15))


def test_grid_result(np, grid_fit):
    assert grid_fit.k_bars == [1, 2]
    assert grid_fit.n_obs == 400
    assert grid_fit.best_k_bar in (1, 2)
    best = grid_fit.logliks[grid_fit.best_k_bar]
    assert all(best >= value for value in grid_fit.logliks.values())
    theta = grid_fit.theta_hat
    assert theta.shape == (5,) and theta[4] == grid_fit.best_k_bar
    assert grid_fit.covariances[2].shape == (4, 4)


def test_b_not_identified_with_one_component(np, grid_fit):
    assert math.isnan(grid_fit.std_errors[1][2])
    assert np.isnan(grid_fit.covariances[1][2]).all()
    assert np.isnan(grid_fit.covariances[1][:, 2]).all()


def test_grid_beats_truth(truth, returns, grid_fit):
    from amlest.msm import msm_loglik

    assert grid_fit.logliks[2] >= msm_loglik(truth, returns) - 1e-6


def test_grid_to_dict(grid_fit):
    out = grid_fit.to_dict()
    assert out["best_k_bar"] == grid_fit.best_k_bar
    assert [row["k_bar"] for row in out["grid"]] == [1, 2]
    row = out["grid"][1]
    assert abs(row["total_loglik"] - 400 * row["loglik"]) < 1e-9
    assert {"m0", "gamma_bar", "b", "sigma", "se_sigma"} <= set(row)


def test_grid_threads_agree(np, reference, returns, grid_fit):
    parallel = reference.msm_ml_fit(returns, grid=(1, 2), threads=2)
    for k in (1, 2):
        assert np.array_equal(parallel.zetas[k], grid_fit.zetas[k])
        assert parallel.logliks[k] == grid_fit.logliks[k]


def test_location_model(np, reference):
    from amlest.core import Dataset, as_tensor

    with raises(ValueError):
        reference.GaussianLocationModel(scale=0.0)
    model = reference.GaussianLocationModel(scale=2.0)
    data = Dataset(as_tensor([1.0, 3.0]))
    assert model.initial_beta(data).tolist() == [2.0]
    expected = -0.5 * math.log(2.0 * math.pi) - math.log(2.0) - 0.5 * 0.25
    assert abs(model.loglik_constrained(np.array([2.0]), data) - expected) < 1e-14
    batch = model.loglik_constrained_batch(np.array([[2.0], [1.0]]), data)
    assert abs(batch[0] - expected) < 1e-14


def test_oracle(reference):
    report = reference.gaussian_location_oracle(T=500, H=5, seed=3, replications=3)
    assert report.aml.shape == (3,)
    assert report.expected_ratio == 1.2
    assert report.max_gap < 0.1
    # AML does not depend on the auxiliary value in the location model
    assert abs(report.aml - report.uaml).max() < 1e-4
    assert abs(report.uaml_bias) < 0.2
    out = report.to_dict()
    assert out["replications"] == 3 and out["H"] == 5


def test_oracle_single_replication(reference):
    report = reference.gaussian_location_oracle(T=50, H=2, seed=1)
    assert math.isnan(report.variance_ratio)


def test_oracle_design(reference):
    for kwargs in ({"T": 1, "H": 2}, {"T": 10, "H": 0}, {"T": 10, "H": 2, "replications": 0}):
        with raises(ValueError):
            reference.gaussian_location_oracle(seed=0, **kwargs)
