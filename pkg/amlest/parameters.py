from dataclasses import dataclass, field
from typing import Any

from . import Device, Estimators, Models, Verbs


@dataclass(slots=True)
class ExperimentConfig:
    """
    Data class to hold the configuration of an experiment.

    One configuration drives every harness verb: Monte Carlo tables,
    empirical fits, forecasting backtests and timing studies. Presets
    fill every numeric field; JSON files and command line flags override
    individual fields.

    Attributes
    ----------
    schema_version : int, optional
        Version of the JSON schema. Default is 1.

    verb : Verbs, optional
        The harness operation to run. Default is ``Verbs.MonteCarlo``.

    preset : str, optional
        Name of the preset the configuration was built from.

    model : Models
        The structural model.

    true_params : dict[str, float], optional
        Parameter values by name: the truth of Monte Carlo designs and of
        simulated backtests, or the forecasting parameters of a backtest
        on supplied data.

    sample_size : int, optional
        Number of observations T of simulated datasets. Default is 1000.

    sample_sizes : tuple[int, ...], optional
        Several sample sizes for a consistency study; overrides
        ``sample_size`` in Monte Carlo runs when nonempty.

    replications : int, optional
        Number of Monte Carlo replications R. Default is 100.

    num_paths : int, optional
        Number of simulated paths H. Default is 10.

    seed : int, optional
        Master seed. Default is 0.

    estimators : tuple[Estimators, ...], optional
        Estimators reported by Monte Carlo and empirical runs. Default is
        Auxiliary and AML.

    uaml_beta : dict[str, float], optional
        Constrained value used by the UAML estimator.

    threads : int, optional
        Number of worker threads. Default is 1.

    out_dir : str, optional
        Directory of the output files. Default is ``"results"``.

    data_path : str, optional
        CSV input of empirical fits and backtests.

    demean : bool, optional
        Whether returns read from ``data_path`` are demeaned.

    num_particles : int, optional
        Particle count of the MSM filter. Default is 10000.

    alphas : tuple[float, ...], optional
        VaR/ES tail probabilities. Default is (0.01, 0.05).

    es_alpha : float, optional
        Tail probability defining the days entering the ES regression.
        Default is 0.05.

    ml_grid : tuple[int, ...], optional
        ``k_bar`` grid of the MSM maximum likelihood. Default is 1..7.

    timing_grid : tuple[int, ...], optional
        ``k_bar`` values of the timing study. Default is 6..12.

    timing_loglik_max : int, optional
        Largest ``k_bar`` at which the dense likelihood is timed.
        Default is 10.

    timing_repeats : int, optional
        Repeats averaged per timing cell, at least 5. Default is 5.

    bootstrap_replications : int, optional
        Parametric bootstrap replications of empirical fits; 0 disables
        the bootstrap. Default is 0.

    n_restarts : int, optional
        Perturbed starts of the AML solver. Default is 0.

    max_iterations : int, optional
        Optimizer iteration budget. Default is 2000.

    x_tol, f_tol : float, optional
        Optimizer tolerances. Defaults are 1e-6 and 1e-10.

    fd_step : float, optional
        Relative finite-difference step. Default is 1e-5.

    compute_variance : bool, optional
        Whether AML estimates carry the asymptotic covariance. Default is
        True.

    device : Device, optional
        Device of the particle cloud. Default is CPU.

    record_log : bool, optional
        Whether to write a run log and print progress. Default is False.

    model_options : dict[str, Any], optional
        Model constructor options (``p1``, ``p2``, ``q``, ``k_bar_max``,
        ``landau``, ``quadrature``, ``floor``, ``scale``).
    """

    schema_version: int = 1
    verb: Verbs = Verbs.MonteCarlo
    preset: str | None = None
    model: Models = None
    true_params: dict[str, float] = field(default_factory=dict)
    sample_size: int = 1000
    sample_sizes: tuple[int, ...] = ()
    replications: int = 100
    num_paths: int = 10
    seed: int = 0
    estimators: tuple[Estimators, ...] = (Estimators.Auxiliary, Estimators.AML)
    uaml_beta: dict[str, float] = field(default_factory=dict)
    threads: int = 1
    out_dir: str = "results"
    data_path: str | None = None
    demean: bool = False
    num_particles: int = 10000
    alphas: tuple[float, ...] = (0.01, 0.05)
    es_alpha: float = 0.05
    ml_grid: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7)
    timing_grid: tuple[int, ...] = (6, 7, 8, 9, 10, 11, 12)
    timing_loglik_max: int = 10
    timing_repeats: int = 5
    bootstrap_replications: int = 0
    n_restarts: int = 0
    max_iterations: int = 2000
    x_tol: float = 1e-6
    f_tol: float = 1e-10
    fd_step: float = 1e-5
    compute_variance: bool = True
    device: Device = Device.CPU
    record_log: bool = False
    model_options: dict[str, Any] = field(default_factory=dict)
