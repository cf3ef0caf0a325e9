"""
Experiment drivers behind the command line verbs.

Each driver takes an :class:`~amlest.parameters.ExperimentConfig`, runs
the experiment deterministically from the master seed and writes its
tables to ``config.out_dir``: Monte Carlo accuracy tables, empirical
estimates as JSON, VaR/ES backtests and timing studies. Every table row
carries the preset, the seed and the toolkit version.
"""
import json
import logging
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.linalg import LinAlgError
from scipy.stats import chi2

from . import (
    Estimators,
    LandauForm,
    Models,
    QuadratureKind,
    __version__,
)
from .core import (
    DATA_PATH,
    Dataset,
    ModelContract,
    SimBank,
    aml_criterion,
    constrained_fit,
    parametric_bootstrap,
    read_returns,
    solve_aml,
)
from .errors import (
    AmlError,
    BootstrapFailureError,
    ConfigError,
    DegenerateRegressorError,
)
from .garch_sv import GarchSvModel
from .msm import (
    MsmModel,
    MsmParams,
    es_backtest,
    msm_loglik,
    msm_particle_filter,
    msm_simulate,
)
from .numerics import OptimConfig, QuadratureRule, RngStream
from .parameters import ExperimentConfig
from .probit import ProbitModel
from .reference import GaussianLocationModel, msm_ml_fit
from .stable import StableModel
from .tobit import TobitModel

logger = logging.getLogger(__name__)

FILTER_PATH = 0xFFFD
_Z95 = 1.96
_AGREEMENT_PARAMS = ("m0", "gamma_bar", "b")


def version_string() -> str:
    """``git describe`` of the working tree, or the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            check=True,
            cwd=Path(__file__).resolve().parent,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    return out.stdout.strip() or __version__


def build_model(config: ExperimentConfig) -> ModelContract:
    """Model plug-in of ``config.model`` built from ``config.model_options``."""
    options = dict(config.model_options)
    model = config.model
    if model is Models.Tobit:
        return TobitModel(options.get("p1", 2), options.get("p2", 2))
    if model is Models.MSM:
        return MsmModel(
            options.get("k_bar_max", 20),
            options.get("mu", 0.0),
            options.get("dense", True),
        )
    if model is Models.Stable:
        return StableModel(LandauForm[options.get("landau", "Approximation")])
    if model is Models.GarchSV:
        kind = QuadratureKind[options.get("quadrature", "GaussHermite")]
        return GarchSvModel(
            QuadratureRule(kind=kind), options.get("floor", 1e-8)
        )
    if model is Models.Probit:
        return ProbitModel(options.get("q", 1))
    if model is Models.GaussianLocation:
        return GaussianLocationModel(options.get("scale", 1.0))
    raise AttributeError(f"Unsupported model: {model}")


def optim_config(config: ExperimentConfig) -> OptimConfig:
    return OptimConfig(
        max_iters=config.max_iterations,
        x_tol=config.x_tol,
        f_tol=config.f_tol,
        fd_step=config.fd_step,
        n_restarts=config.n_restarts,
    )


def _out_dir(config: ExperimentConfig) -> Path:
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> str:
    frame.to_csv(path, index=False, float_format="%.10g")
    return str(path)


def _write_json(payload: dict[str, Any], path: Path) -> str:
    path.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")
    return str(path)


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "name"):
        return value.name
    raise TypeError(f"{type(value)} is not JSON serializable")


@dataclass(slots=True)
class Estimate:
    """One estimator's output on one dataset."""

    values: np.ndarray
    std_errors: np.ndarray
    cov: np.ndarray | None = None
    converged: bool = True


@dataclass(slots=True)
class ReplicationRecord:
    replication: int
    T: int
    estimator: Estimators
    estimate: Estimate | None
    status: str = "ok"


@dataclass(slots=True)
class AccuracyRow:
    """
    Accuracy of one estimator for one parameter across replications.

    ``cov`` follows the Monte Carlo convention: the share of replications
    whose interval ``estimate +/- 1.96 sd`` covers the truth, with ``sd``
    the Monte Carlo standard deviation. ``cov_wald`` uses each
    replication's own standard error instead. ``se_ratio`` is the mean of
    ``SE(ML)/SE(estimator)`` over replications where both are available
    (the ratio of Monte Carlo standard deviations otherwise).
    """

    preset: str | None
    seed: int
    version: str
    T: int
    estimator: str
    parameter: str
    truth: float
    mean: float
    bias: float
    mse: float
    rmse: float
    sd: float
    cov: float
    cov_wald: float
    se_ratio: float
    n_used: int
    n_dropped: int


def _ml_estimate(
    model: ModelContract, config: ExperimentConfig, cfg: OptimConfig, data: Dataset
) -> Estimate:
    if isinstance(model, MsmModel):
        grid = msm_ml_fit(data.y, config.ml_grid, cfg, model.mu, model.dense)
        k = grid.best_k_bar
        cov = np.full((5, 5), np.nan)
        cov[:4, :4] = grid.covariances[k]
        return Estimate(grid.theta_hat, np.append(grid.std_errors[k], np.nan), cov)
    if isinstance(model, GaussianLocationModel):
        var = model.scale**2 / data.n
        return Estimate(
            np.array([float(data.y.mean())]),
            np.array([math.sqrt(var)]),
            np.array([[var]]),
        )
    raise ConfigError(f"Maximum likelihood is not available for {config.model}")


def _aml_estimate(result) -> Estimate:
    if result.omega_H is None:
        p = result.theta_hat.p
        return Estimate(
            result.theta_hat.values, np.full(p, np.nan), None, result.converged
        )
    return Estimate(
        result.theta_hat.values,
        result.std_errors,
        result.omega_H / result.n_obs,
        result.converged,
    )


def estimate_all(
    model: ModelContract,
    config: ExperimentConfig,
    cfg: OptimConfig,
    data: Dataset,
    bank: SimBank,
) -> dict[Estimators, Estimate | str]:
    """
    Run every configured estimator on one dataset.

    Failures are returned as the error message in place of the estimate.
    """
    out: dict[Estimators, Estimate | str] = {}
    beta_hat = None
    if {Estimators.Auxiliary, Estimators.AML} & set(config.estimators):
        try:
            beta_hat = constrained_fit(model, data, cfg)
        except (AmlError, LinAlgError, ValueError) as exc:
            beta_hat = f"constrained fit failed: {exc}"
    for estimator in config.estimators:
        try:
            if estimator is Estimators.Auxiliary:
                if isinstance(beta_hat, str):
                    raise AmlError(beta_hat)
                out[estimator] = Estimate(
                    beta_hat.values, np.full(model.p, np.nan)
                )
            elif estimator is Estimators.AML:
                if isinstance(beta_hat, str):
                    raise AmlError(beta_hat)
                out[estimator] = _aml_estimate(
                    solve_aml(
                        model,
                        data,
                        bank,
                        cfg,
                        beta_hat=beta_hat,
                        compute_variance=config.compute_variance,
                    )
                )
            elif estimator is Estimators.UAML:
                beta = model.param_from_dict(config.uaml_beta)
                out[estimator] = _aml_estimate(
                    solve_aml(
                        model,
                        data,
                        bank,
                        cfg,
                        beta_hat=beta,
                        compute_variance=config.compute_variance,
                    )
                )
            elif estimator is Estimators.ML:
                out[estimator] = _ml_estimate(model, config, cfg, data)
        except ConfigError:
            raise
        except (AmlError, LinAlgError, ValueError) as exc:
            out[estimator] = str(exc)
    return out


def _replication(
    model: ModelContract,
    config: ExperimentConfig,
    cfg: OptimConfig,
    theta0: np.ndarray,
    T: int,
    rep: int,
) -> list[ReplicationRecord]:
    data = model.synthetic_dataset(theta0, T, config.seed, rep)
    bank = SimBank.create(config.seed, rep, config.num_paths, T)
    records = []
    for estimator, outcome in estimate_all(model, config, cfg, data, bank).items():
        if isinstance(outcome, str):
            logger.warning(
                f"Replication {rep} (T={T}) dropped for "
                f"{estimator.name}: {outcome}"
            )
            records.append(ReplicationRecord(rep, T, estimator, None, outcome))
        elif not outcome.converged:
            logger.warning(
                f"Replication {rep} (T={T}) dropped for "
                f"{estimator.name}: not converged"
            )
            records.append(
                ReplicationRecord(rep, T, estimator, None, "not converged")
            )
        else:
            records.append(ReplicationRecord(rep, T, estimator, outcome))
    return records


def accuracy_rows(
    records: list[ReplicationRecord],
    names: tuple[str, ...],
    theta0: np.ndarray,
    config: ExperimentConfig,
    version: str,
) -> list[AccuracyRow]:
    """Reduce replication records to one row per (T, estimator, parameter)."""
    rows = []
    sizes = sorted({record.T for record in records})
    for T in sizes:
        by_estimator: dict[Estimators, list[ReplicationRecord]] = {}
        for record in records:
            if record.T == T:
                by_estimator.setdefault(record.estimator, []).append(record)
        ml = {
            record.replication: record.estimate
            for record in by_estimator.get(Estimators.ML, [])
            if record.estimate is not None
        }
        ml_values = (
            np.stack([est.values for est in ml.values()]) if ml else None
        )
        for estimator in config.estimators:
            group = by_estimator.get(estimator, [])
            used = [record for record in group if record.estimate is not None]
            dropped = len(group) - len(used)
            if not used:
                values = np.full((0, len(names)), np.nan)
                ses = values
            else:
                values = np.stack([record.estimate.values for record in used])
                ses = np.stack([record.estimate.std_errors for record in used])
            for j, name in enumerate(names):
                rows.append(
                    _row(
                        values[:, j],
                        ses[:, j],
                        theta0[j],
                        _se_ratio(used, ml, ml_values, j, estimator),
                        config,
                        version,
                        T,
                        estimator,
                        name,
                        dropped,
                    )
                )
    return rows


def _row(
    values: np.ndarray,
    ses: np.ndarray,
    truth: float,
    se_ratio: float,
    config: ExperimentConfig,
    version: str,
    T: int,
    estimator: Estimators,
    name: str,
    dropped: int,
) -> AccuracyRow:
    n = values.size
    nan = math.nan
    errors = values - truth
    sd = float(np.std(values, ddof=1)) if n > 1 else nan
    finite_se = np.isfinite(ses)
    return AccuracyRow(
        preset=config.preset,
        seed=config.seed,
        version=version,
        T=T,
        estimator=estimator.name.lower(),
        parameter=name,
        truth=float(truth),
        mean=float(values.mean()) if n else nan,
        bias=float(errors.mean()) if n else nan,
        mse=float(np.mean(errors**2)) if n else nan,
        rmse=float(np.sqrt(np.mean(errors**2))) if n else nan,
        sd=sd,
        cov=float(np.mean(np.abs(errors) <= _Z95 * sd)) if n > 1 else nan,
        cov_wald=float(
            np.mean(np.abs(errors[finite_se]) <= _Z95 * ses[finite_se])
        )
        if finite_se.any()
        else nan,
        se_ratio=se_ratio,
        n_used=n,
        n_dropped=dropped,
    )


def _se_ratio(
    used: list[ReplicationRecord],
    ml: dict[int, Estimate],
    ml_values: np.ndarray | None,
    j: int,
    estimator: Estimators,
) -> float:
    if estimator is Estimators.ML or not ml or not used:
        return math.nan
    ratios = [
        ml[record.replication].std_errors[j] / record.estimate.std_errors[j]
        for record in used
        if record.replication in ml
    ]
    ratios = [r for r in ratios if np.isfinite(r)]
    if ratios:
        return float(np.mean(ratios))
    own = np.array([record.estimate.values[j] for record in used])
    if own.size < 2 or ml_values.shape[0] < 2:
        return math.nan
    own_sd = np.std(own, ddof=1)
    return float(np.std(ml_values[:, j], ddof=1) / own_sd) if own_sd > 0 else math.nan


def _inside(center: np.ndarray, point: np.ndarray, cov: np.ndarray) -> bool | None:
    if not (np.isfinite(cov).all() and np.isfinite(point).all()):
        return None
    diff = point - center
    try:
        stat = float(diff @ np.linalg.solve(cov, diff))
    except LinAlgError:
        return None
    return stat <= chi2.ppf(0.95, diff.size)


def agreement(
    records: list[ReplicationRecord], names: tuple[str, ...]
) -> dict[str, Any] | None:
    """
    Share of replications in which ML and AML agree on ``(m0, gamma_bar, b)``.

    ``ml_in_aml`` counts ML estimates inside the joint 95% Wald region of
    AML and ``aml_in_ml`` the converse.
    """
    if not set(_AGREEMENT_PARAMS) <= set(names):
        return None
    index = np.array([names.index(name) for name in _AGREEMENT_PARAMS])
    block = np.ix_(index, index)
    pairs: dict[tuple[int, int], dict[Estimators, Estimate]] = {}
    for record in records:
        if record.estimate is not None and record.estimator in (
            Estimators.ML,
            Estimators.AML,
        ):
            pairs.setdefault((record.T, record.replication), {})[
                record.estimator
            ] = record.estimate
    ml_in_aml, aml_in_ml = [], []
    for pair in pairs.values():
        if len(pair) < 2:
            continue
        ml, aml = pair[Estimators.ML], pair[Estimators.AML]
        if aml.cov is not None:
            inside = _inside(aml.values[index], ml.values[index], aml.cov[block])
            if inside is not None:
                ml_in_aml.append(inside)
        if ml.cov is not None:
            inside = _inside(ml.values[index], aml.values[index], ml.cov[block])
            if inside is not None:
                aml_in_ml.append(inside)
    if not ml_in_aml and not aml_in_ml:
        return None
    return {
        "ml_in_aml": float(np.mean(ml_in_aml)) if ml_in_aml else None,
        "aml_in_ml": float(np.mean(aml_in_ml)) if aml_in_ml else None,
        "pairs": len(ml_in_aml),
    }


def _replication_frame(
    records: list[ReplicationRecord],
    names: tuple[str, ...],
    config: ExperimentConfig,
    version: str,
) -> pd.DataFrame:
    rows = []
    for record in records:
        row = {
            "preset": config.preset,
            "seed": config.seed,
            "version": version,
            "T": record.T,
            "replication": record.replication,
            "estimator": record.estimator.name.lower(),
            "status": record.status,
        }
        est = record.estimate
        for j, name in enumerate(names):
            row[name] = est.values[j] if est is not None else math.nan
            row[f"se_{name}"] = est.std_errors[j] if est is not None else math.nan
        rows.append(row)
    return pd.DataFrame(rows)


def run_monte_carlo(config: ExperimentConfig) -> dict[str, Any]:
    r"""
    Monte Carlo accuracy study.

    Replication ``r`` simulates its dataset from the streams
    ``(seed, (r, 0))`` and its bank from ``(seed, (r, h))``, so results do
    not depend on how replications are distributed over threads; they are
    collected in replication order.

    Returns
    -------
    dict[str, Any]
        - 'accuracy': DataFrame of :class:`AccuracyRow`
        - 'replications': DataFrame of per-replication estimates
        - 'agreement': ML/AML agreement shares, or None
        - 'files': written file paths
    """
    model = build_model(config)
    cfg = optim_config(config)
    theta0 = model.param_from_dict(config.true_params).values
    sizes = tuple(config.sample_sizes) or (config.sample_size,)
    version = version_string()

    def task(rep: int) -> list[ReplicationRecord]:
        records = []
        for T in sizes:
            records.extend(_replication(model, config, cfg, theta0, T, rep))
        if config.record_log:
            logger.info(f"Replication {rep + 1}/{config.replications} done")
        return records

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        records = [
            record
            for batch in pool.map(task, range(config.replications))
            for record in batch
        ]
    accuracy = pd.DataFrame(
        [asdict(row) for row in accuracy_rows(
            records, model.names, theta0, config, version
        )]
    )
    replications = _replication_frame(records, model.names, config, version)
    shares = agreement(records, model.names)
    out = _out_dir(config)
    files = [
        _write_csv(accuracy, out / "accuracy.csv"),
        _write_csv(replications, out / "replications.csv"),
    ]
    if shares is not None:
        files.append(
            _write_json(
                {
                    "preset": config.preset,
                    "seed": config.seed,
                    "version": version,
                    **shares,
                },
                out / "agreement.json",
            )
        )
    return {
        "accuracy": accuracy,
        "replications": replications,
        "agreement": shares,
        "files": files,
    }


def _estimate_dict(
    names: tuple[str, ...], estimate: Estimate | str
) -> dict[str, Any]:
    if isinstance(estimate, str):
        return {"error": estimate}
    return {
        "estimates": dict(zip(names, estimate.values.tolist())),
        "std_errors": dict(zip(names, estimate.std_errors.tolist())),
        "covariance": None if estimate.cov is None else estimate.cov.tolist(),
        "converged": estimate.converged,
        "coverage_convention": "wald",
    }


def run_empirical(config: ExperimentConfig) -> dict[str, Any]:
    """
    Fit the configured estimators to the CSV at ``config.data_path``.

    The JSON output holds point estimates, standard errors, the seed and
    the toolkit version; MSM runs with the ML estimator add the grid
    table, and ``bootstrap_replications > 0`` adds parametric bootstrap
    standard errors of the AML estimate.
    """
    model = build_model(config)
    cfg = optim_config(config)
    data = model.load_dataset(config.data_path, config.demean)
    bank = SimBank.create(config.seed, 0, config.num_paths, data.n)
    version = version_string()
    outcomes = estimate_all(model, config, cfg, data, bank)
    payload: dict[str, Any] = {
        "preset": config.preset,
        "model": config.model.name,
        "seed": config.seed,
        "version": version,
        "data_path": str(config.data_path),
        "demean": config.demean,
        "n_obs": data.n,
        "H": config.num_paths,
        "results": {
            estimator.name.lower(): _estimate_dict(model.names, outcome)
            for estimator, outcome in outcomes.items()
        },
    }
    if isinstance(model, MsmModel) and Estimators.ML in config.estimators:
        payload["ml_grid"] = msm_ml_fit(
            data.y, config.ml_grid, cfg, model.mu, model.dense, config.threads
        ).to_dict()
    aml = outcomes.get(Estimators.AML)
    if config.bootstrap_replications > 0 and isinstance(aml, Estimate):
        try:
            se = parametric_bootstrap(
                model,
                model.param_vector(aml.values),
                data.n,
                config.bootstrap_replications,
                bank,
                cfg,
                data if data.x is not None else None,
            )
        except BootstrapFailureError as exc:
            logger.warning(f"Bootstrap unavailable: {exc}")
            payload["bootstrap_std_errors"] = {"error": str(exc)}
        else:
            payload["bootstrap_std_errors"] = dict(
                zip(model.names, se.tolist())
            )
    path = _write_json(payload, _out_dir(config) / "estimate.json")
    return {"estimate": payload, "files": [path]}


def _column(prefix: str, alpha: float) -> str:
    return f"{prefix}_{alpha:g}"


def run_backtest(config: ExperimentConfig) -> dict[str, Any]:
    r"""
    Particle-filter VaR/ES forecasts of the MSM model and their backtests.

    The returns come from ``config.data_path`` or, without a file, are
    simulated at ``config.true_params``. VaR failure rates carry the
    binomial standard error ``sqrt(p (1 - p) / T)`` and the nominal one
    ``sqrt(alpha (1 - alpha) / T)``. Tail days for the ES regression are
    those with ``r_t < -VaR_t`` at ``config.es_alpha``.

    Raises
    ------
    ParticleCollapseError
        If the particle weights collapse.
    """
    params = MsmParams(
        **{name: config.true_params[name] for name in MsmModel.names},
        mu=config.model_options.get("mu", 0.0),
    )
    if config.data_path is not None:
        returns = read_returns(config.data_path, config.demean).y
    else:
        stream = RngStream(
            config.seed, RngStream.make_stream_id(0, DATA_PATH)
        )
        returns = msm_simulate(
            params, config.sample_size, stream, max(params.k_bar, 3)
        )
    T = returns.numel()
    alphas = tuple(config.alphas)
    forecast = msm_particle_filter(
        params,
        returns,
        config.num_particles,
        RngStream(config.seed, RngStream.make_stream_id(0, FILTER_PATH)),
        alphas,
        config.device,
    )
    version = version_string()
    r = returns.numpy()
    forecasts = pd.DataFrame({"date": np.arange(T), "return": r})
    for a, alpha in enumerate(alphas):
        forecasts[_column("var", alpha)] = forecast.var[:, a].numpy()
        forecasts[_column("es", alpha)] = forecast.es[:, a].numpy()
    forecasts["ess"] = forecast.ess.numpy()

    failures = []
    for a, alpha in enumerate(alphas):
        hits = r < -forecast.var[:, a].numpy()
        p = float(hits.mean())
        failures.append(
            {
                "preset": config.preset,
                "seed": config.seed,
                "version": version,
                "alpha": alpha,
                "failure_rate": p,
                "se": math.sqrt(p * (1.0 - p) / T),
                "nominal_se": math.sqrt(alpha * (1.0 - alpha) / T),
                "z": (p - alpha) / math.sqrt(alpha * (1.0 - alpha) / T),
                "n": T,
            }
        )
    failure_rates = pd.DataFrame(failures)

    out = _out_dir(config)
    files = [
        _write_csv(forecasts, out / "forecasts.csv"),
        _write_csv(failure_rates, out / "backtest.csv"),
    ]
    a = alphas.index(config.es_alpha)
    tail = r < -forecast.var[:, a].numpy()
    try:
        regression = es_backtest(r[tail], forecast.es[:, a].numpy()[tail])
    except (ValueError, DegenerateRegressorError) as exc:
        logger.warning(f"ES regression unavailable: {exc}")
        regression = None
    else:
        row = {
            "preset": config.preset,
            "seed": config.seed,
            "version": version,
            "alpha": config.es_alpha,
            **regression.to_dict(),
        }
        files.append(_write_csv(pd.DataFrame([row]), out / "es_regression.csv"))
    return {
        "forecasts": forecasts,
        "failure_rates": failure_rates,
        "es_regression": None if regression is None else regression.to_dict(),
        "files": files,
    }


def run_timing(config: ExperimentConfig) -> dict[str, Any]:
    r"""
    Mean evaluation time of the MSM log-likelihood and AML criterion per ``k_bar``.

    Every cell averages ``config.timing_repeats`` evaluations, each on its
    own simulated dataset of ``config.sample_size`` returns; the criterion
    uses ``config.num_paths`` paths whose innovations are drawn before the
    clock starts. The likelihood is timed only up to
    ``config.timing_loglik_max``; larger cells are ``nan``.
    """
    grid = sorted(set(config.timing_grid))
    T, H = config.sample_size, config.num_paths
    model = MsmModel(max(3, grid[-1]), config.model_options.get("mu", 0.0))
    base = {name: config.true_params[name] for name in MsmModel.names}
    beta = model.param_vector([base["m0"], base["gamma_bar"], base["b"], base["sigma"], 2.0])
    version = version_string()
    rows = []
    for k_bar in grid:
        params = MsmParams(**{**base, "k_bar": k_bar})
        theta = model.param_vector(params.to_vector())
        loglik_times, aml_times = [], []
        for rep in range(config.timing_repeats):
            stream = RngStream(
                config.seed, RngStream.make_stream_id(rep, DATA_PATH)
            )
            returns = msm_simulate(params, T, stream, model.k_bar_max)
            data = Dataset(returns)
            if k_bar <= config.timing_loglik_max:
                start = time.perf_counter()
                msm_loglik(params, returns)
                loglik_times.append(time.perf_counter() - start)
            bank = SimBank.create(config.seed, rep, H, T)
            bank.stacked(model)
            start = time.perf_counter()
            aml_criterion(model, data, beta, theta, bank)
            aml_times.append(time.perf_counter() - start)
        loglik = float(np.mean(loglik_times)) if loglik_times else math.nan
        aml = float(np.mean(aml_times))
        rows.append(
            {
                "preset": config.preset,
                "seed": config.seed,
                "version": version,
                "k_bar": k_bar,
                "T": T,
                "H": H,
                "loglik_seconds": loglik,
                "aml_seconds": aml,
                "log10_loglik_seconds": math.log10(loglik)
                if loglik > 0
                else math.nan,
                "log10_aml_seconds": math.log10(aml) if aml > 0 else math.nan,
            }
        )
        if config.record_log:
            logger.info(f"k_bar={k_bar}: loglik {loglik:.4g}s, AML {aml:.4g}s")
    timing = pd.DataFrame(rows)
    path = _write_csv(timing, _out_dir(config) / "timing.csv")
    return {"timing": timing, "files": [path]}
