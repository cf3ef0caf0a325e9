import json
import math

from pytest import fixture, raises


@fixture(scope="module")
def np():
    import numpy

    return numpy


@fixture(scope="module")
def pd():
    import pandas

    return pandas


@fixture(scope="module")
def amlest():
    import amlest

    return amlest


@fixture(scope="module")
def harness():
    from amlest import harness

    return harness


@fixture(scope="module")
def ExperimentConfig():
    from amlest.parameters import ExperimentConfig

    return ExperimentConfig


@fixture
def location_config(amlest, ExperimentConfig, tmp_path):
    return ExperimentConfig(
        model=amlest.Models.GaussianLocation,
        true_params={"theta": 0.0},
        sample_size=200,
        replications=4,
        num_paths=3,
        seed=5,
        estimators=(
            amlest.Estimators.ML,
            amlest.Estimators.AML,
            amlest.Estimators.UAML,
        ),
        uaml_beta={"theta": 1.0},
        out_dir=str(tmp_path),
    )


def test_version_string(harness):
    assert isinstance(harness.version_string(), str)
    assert harness.version_string()


def test_build_model(amlest, harness, ExperimentConfig):
    Models = amlest.Models
    tobit = harness.build_model(
        ExperimentConfig(model=Models.Tobit, model_options={"p1": 3, "p2": 2})
    )
    assert tobit.p1 == 3 and tobit.p == 3 + 2 + 2
    msm = harness.build_model(
        ExperimentConfig(model=Models.MSM, model_options={"k_bar_max": 8})
    )
    assert msm.k_bar_max == 8
    stable = harness.build_model(
        ExperimentConfig(model=Models.Stable, model_options={"landau": "Exact"})
    )
    assert stable.landau is amlest.LandauForm.Exact
    gsv = harness.build_model(
        ExperimentConfig(
            model=Models.GarchSV, model_options={"quadrature": "Adaptive"}
        )
    )
    assert gsv.rule.kind is amlest.QuadratureKind.Adaptive
    probit = harness.build_model(
        ExperimentConfig(model=Models.Probit, model_options={"q": 3})
    )
    assert probit.q == 3
    location = harness.build_model(ExperimentConfig(model=Models.GaussianLocation))
    assert location.names == ("theta",)


def test_optim_config(harness, ExperimentConfig):
    cfg = harness.optim_config(
        ExperimentConfig(max_iterations=50, x_tol=1e-4, n_restarts=2)
    )
    assert cfg.max_iters == 50 and cfg.x_tol == 1e-4 and cfg.n_restarts == 2


def test_accuracy_rows(amlest, np, harness, ExperimentConfig):
    Estimators = amlest.Estimators
    Estimate, Record = harness.Estimate, harness.ReplicationRecord
    records = [
        Record(0, 100, Estimators.ML, Estimate(np.array([0.1]), np.array([0.5]))),
        Record(1, 100, Estimators.ML, Estimate(np.array([-0.1]), np.array([0.5]))),
        Record(0, 100, Estimators.AML, Estimate(np.array([0.2]), np.array([1.0]))),
        Record(1, 100, Estimators.AML, Estimate(np.array([-0.2]), np.array([1.0]))),
        Record(2, 100, Estimators.AML, None, "not converged"),
    ]
    config = ExperimentConfig(
        model=amlest.Models.GaussianLocation,
        estimators=(Estimators.ML, Estimators.AML),
    )
    rows = harness.accuracy_rows(records, ("theta",), np.array([0.0]), config, "v")
    assert [row.estimator for row in rows] == ["ml", "aml"]
    ml, aml = rows
    assert math.isnan(ml.se_ratio)
    assert abs(aml.mean) < 1e-15 and abs(aml.bias) < 1e-15
    assert abs(aml.mse - 0.04) < 1e-15
    assert abs(aml.sd - math.sqrt(0.08)) < 1e-15
    assert aml.cov == 1.0 and aml.cov_wald == 1.0
    assert aml.se_ratio == 0.5
    assert aml.n_used == 2 and aml.n_dropped == 1


def test_accuracy_rows_all_dropped(amlest, np, harness, ExperimentConfig):
    record = harness.ReplicationRecord(0, 50, amlest.Estimators.AML, None, "failed")
    config = ExperimentConfig(
        model=amlest.Models.GaussianLocation, estimators=(amlest.Estimators.AML,)
    )
    (row,) = harness.accuracy_rows([record], ("theta",), np.array([0.0]), config, "v")
    assert row.n_used == 0 and row.n_dropped == 1
    assert math.isnan(row.mean) and math.isnan(row.cov)


def test_monte_carlo(pd, harness, location_config, tmp_path):
    results = harness.run_monte_carlo(location_config)
    assert (tmp_path / "accuracy.csv").exists()
    assert (tmp_path / "replications.csv").exists()
    assert not (tmp_path / "agreement.json").exists()
    assert results["agreement"] is None
    accuracy = results["accuracy"]
    assert list(accuracy["estimator"]) == ["ml", "aml", "uaml"]
    assert ((accuracy["cov"] >= 0.0) & (accuracy["cov"] <= 1.0)).all()
    assert (accuracy["n_used"] == 4).all()
    replications = results["replications"]
    assert len(replications) == 12
    assert list(replications["replication"][:3]) == [0, 0, 0]
    assert set(replications.columns) >= {"theta", "se_theta", "status", "seed"}
    written = pd.read_csv(tmp_path / "accuracy.csv")
    assert len(written) == 3


def test_monte_carlo_thread_count_invariant(
    pd, harness, location_config, tmp_path
):
    location_config.compute_variance = False
    single = harness.run_monte_carlo(location_config)["replications"]
    location_config.threads = 2
    location_config.out_dir = str(tmp_path / "threads")
    pooled = harness.run_monte_carlo(location_config)["replications"]
    pd.testing.assert_frame_equal(single, pooled)


def test_monte_carlo_sample_sizes(harness, location_config):
    location_config.sample_sizes = (100, 300)
    location_config.replications = 2
    location_config.estimators = location_config.estimators[:2]
    accuracy = harness.run_monte_carlo(location_config)["accuracy"]
    assert sorted(set(accuracy["T"])) == [100, 300]


def test_agreement_needs_msm_parameters(amlest, np, harness):
    estimate = harness.Estimate(np.array([0.1]), np.array([0.1]), np.eye(1))
    records = [
        harness.ReplicationRecord(0, 10, amlest.Estimators.ML, estimate),
        harness.ReplicationRecord(0, 10, amlest.Estimators.AML, estimate),
    ]
    assert harness.agreement(records, ("theta",)) is None


def test_agreement(amlest, np, harness):
    names = ("m0", "gamma_bar", "b", "sigma", "k_bar")
    cov = np.eye(5) * 0.01
    ml = harness.Estimate(np.array([1.5, 0.5, 3.0, 0.01, 2]), np.full(5, 0.1), cov)
    near = harness.Estimate(np.array([1.51, 0.5, 3.0, 0.01, 2]), np.full(5, 0.1), cov)
    far = harness.Estimate(np.array([1.9, 0.5, 3.0, 0.01, 2]), np.full(5, 0.1), cov)
    Record, Estimators = harness.ReplicationRecord, amlest.Estimators
    records = [
        Record(0, 10, Estimators.ML, ml),
        Record(0, 10, Estimators.AML, near),
        Record(1, 10, Estimators.ML, ml),
        Record(1, 10, Estimators.AML, far),
    ]
    shares = harness.agreement(records, names)
    assert shares["ml_in_aml"] == 0.5 and shares["aml_in_ml"] == 0.5
    assert shares["pairs"] == 2


def test_empirical(amlest, np, pd, harness, ExperimentConfig, tmp_path):
    from amlest.numerics import RngStream

    y = 0.3 + RngStream(71, 0).generator().standard_normal(400)
    path = tmp_path / "returns.csv"
    pd.DataFrame({"r": y}).to_csv(path, index=False)
    config = ExperimentConfig(
        verb=amlest.Verbs.Fit,
        model=amlest.Models.GaussianLocation,
        num_paths=4,
        estimators=(
            amlest.Estimators.Auxiliary,
            amlest.Estimators.AML,
            amlest.Estimators.ML,
        ),
        data_path=str(path),
        bootstrap_replications=3,
        out_dir=str(tmp_path / "out"),
    )
    estimate = harness.run_empirical(config)["estimate"]
    assert estimate["n_obs"] == 400
    results = estimate["results"]
    assert abs(results["ml"]["estimates"]["theta"] - y.mean()) < 1e-12
    assert abs(results["aml"]["estimates"]["theta"] - y.mean()) < 0.2
    assert results["aml"]["std_errors"]["theta"] > 0.0
    assert estimate["bootstrap_std_errors"]["theta"] > 0.0
    with open(tmp_path / "out" / "estimate.json") as f:
        assert json.load(f)["seed"] == 0


def test_backtest_simulated(amlest, harness, ExperimentConfig, tmp_path):
    config = ExperimentConfig(
        verb=amlest.Verbs.Backtest,
        model=amlest.Models.MSM,
        true_params={"m0": 1.5, "gamma_bar": 0.5, "b": 3.0, "sigma": 0.01, "k_bar": 2},
        sample_size=60,
        num_particles=1000,
        out_dir=str(tmp_path),
    )
    results = harness.run_backtest(config)
    forecasts = results["forecasts"]
    assert len(forecasts) == 60
    assert {"var_0.01", "var_0.05", "es_0.01", "es_0.05", "ess"} <= set(forecasts)
    assert (forecasts["var_0.01"] >= forecasts["var_0.05"]).all()
    rates = results["failure_rates"]
    assert list(rates["alpha"]) == [0.01, 0.05]
    assert ((rates["failure_rate"] >= 0.0) & (rates["failure_rate"] <= 1.0)).all()
    assert (tmp_path / "forecasts.csv").exists()
    assert (tmp_path / "backtest.csv").exists()


def test_timing(amlest, harness, ExperimentConfig, tmp_path):
    config = ExperimentConfig(
        verb=amlest.Verbs.Timing,
        model=amlest.Models.MSM,
        true_params={"m0": 1.5, "gamma_bar": 0.5, "b": 3.0, "sigma": 0.01, "k_bar": 2},
        sample_size=100,
        num_paths=2,
        timing_grid=(3, 2),
        timing_loglik_max=2,
        timing_repeats=5,
        out_dir=str(tmp_path),
    )
    timing = harness.run_timing(config)["timing"]
    assert list(timing["k_bar"]) == [2, 3]
    assert timing["loglik_seconds"][0] > 0.0
    assert math.isnan(timing["loglik_seconds"][1])
    assert (timing["aml_seconds"] > 0.0).all()
    assert (tmp_path / "timing.csv").exists()


def test_ml_unavailable(amlest, harness, ExperimentConfig):
    from amlest.errors import ConfigError

    config = ExperimentConfig(
        model=amlest.Models.Stable,
        true_params={"a": 1.5, "b": 0.0, "c": 1.0, "mu": 0.0},
        sample_size=200,
        replications=1,
        estimators=(amlest.Estimators.ML,),
    )
    with raises(ConfigError):
        harness.run_monte_carlo(config)
