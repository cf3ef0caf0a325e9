import logging
from copy import deepcopy
from pathlib import Path
from typing import Any

import torch

from . import Device, Estimators, Models, Verbs
from .errors import ConfigError
from .harness import (
    build_model,
    optim_config,
    run_backtest,
    run_empirical,
    run_monte_carlo,
    run_timing,
)
from .msm import DENSE_GUARD
from .parameters import ExperimentConfig

logger = logging.getLogger(__name__)

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _Executor:
    """
    Experiment executor class.

    This class validates an :class:`ExperimentConfig` and dispatches it to
    the harness driver of its verb: Monte Carlo tables, empirical fits,
    forecasting backtests or timing studies.

    Warning
    -------
    Field types are not checked here; :class:`ExperimentBuilder` does that.

    Parameters
    ----------
    config : ExperimentConfig, optional
        The configuration to run.
    """

    def __init__(self, config: ExperimentConfig = None) -> None:
        self.__config = config
        self.__case_name = "case"
        self.__results = {}

    def set_input_config(
        self, config: ExperimentConfig, case_name: str = "case"
    ) -> "_Executor":
        """
        Set the configuration of the next run.

        Parameters
        ----------
        config : ExperimentConfig
            The experiment configuration.

        case_name : str, optional
            Name used for the run log file. Default is ``"case"``.

        Returns
        -------
        _Executor
            The _Executor instance with updated input configuration.
        """
        self.__config = config
        self.__case_name = case_name
        return self

    def __check_common(self) -> None:
        config = self.__config
        if config.schema_version != 1:
            raise ConfigError(
                f"Unsupported schema_version {config.schema_version}"
            )
        if config.model is None:
            raise ConfigError("`model` must be set.")
        if config.threads < 1:
            raise ConfigError("`threads` should be at least 1.")
        if config.num_paths < 1:
            raise ConfigError("`num_paths` should be at least 1.")
        try:
            optim_config(config)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def __check_true_params(self) -> None:
        model = build_model(self.__config)
        missing = set(model.names) - set(self.__config.true_params)
        if missing:
            raise ConfigError(f"`true_params` misses {sorted(missing)}")
        theta = model.param_from_dict(self.__config.true_params).values
        try:
            model.check_bounds(theta)
        except ValueError as exc:
            raise ConfigError(f"`true_params`: {exc}") from exc

    def __check_estimators(self) -> None:
        config = self.__config
        if not config.estimators:
            raise ConfigError("`estimators` should not be empty.")
        if Estimators.ML in config.estimators:
            if config.model not in (Models.MSM, Models.GaussianLocation):
                raise ConfigError(
                    f"Maximum likelihood is not available for {config.model}"
                )
            if config.model is Models.MSM and (
                not config.ml_grid
                or min(config.ml_grid) < 1
                or max(config.ml_grid) > DENSE_GUARD
            ):
                raise ConfigError(
                    f"`ml_grid` values should lie in [1, {DENSE_GUARD}]."
                )
        if Estimators.UAML in config.estimators:
            model = build_model(config)
            try:
                beta = model.param_from_dict(config.uaml_beta)
            except KeyError as exc:
                raise ConfigError(f"`uaml_beta`: {exc}") from exc
            if not beta.in_constrained_set():
                raise ConfigError(
                    "`uaml_beta` must satisfy the model constraint."
                )

    def __check_monte_carlo_config(self) -> None:
        config = self.__config
        self.__check_true_params()
        self.__check_estimators()
        if config.replications < 1:
            raise ConfigError("`replications` should be at least 1.")
        sizes = tuple(config.sample_sizes) or (config.sample_size,)
        if min(sizes) < 2:
            raise ConfigError("Sample sizes should be at least 2.")

    def __check_fit_config(self) -> None:
        config = self.__config
        self.__check_estimators()
        if config.data_path is None:
            raise ConfigError("`data_path` is required by the fit verb.")
        if config.bootstrap_replications == 1:
            raise ConfigError(
                "`bootstrap_replications` should be 0 or at least 2."
            )

    def __check_backtest_config(self) -> None:
        config = self.__config
        if config.model is not Models.MSM:
            raise ConfigError("Backtests are only available for MSM.")
        self.__check_true_params()
        if not config.alphas or not all(0 < a < 1 for a in config.alphas):
            raise ConfigError("`alphas` should lie in (0, 1).")
        if config.es_alpha not in config.alphas:
            raise ConfigError("`es_alpha` should be one of `alphas`.")
        if config.num_particles < 1000:
            raise ConfigError("`num_particles` should be at least 1000.")

    def __check_timing_config(self) -> None:
        config = self.__config
        if config.model is not Models.MSM:
            raise ConfigError("Timing studies are only available for MSM.")
        self.__check_true_params()
        if not config.timing_grid or min(config.timing_grid) < 1:
            raise ConfigError("`timing_grid` should hold positive k_bar.")
        if config.timing_repeats < 5:
            raise ConfigError("`timing_repeats` should be at least 5.")
        if config.timing_loglik_max > DENSE_GUARD:
            raise ConfigError(
                f"`timing_loglik_max` should be at most {DENSE_GUARD}."
            )

    def __setup_device(self) -> None:
        """Fall back to the CPU when no GPU is available."""
        if self.__config.device is Device.GPU and not torch.cuda.is_available():
            logger.warning("No GPU available; running on the CPU.")
            self.__config.device = Device.CPU

    def __attach_log(self) -> list[logging.Handler]:
        if not self.__config.record_log:
            return []
        out = Path(self.__config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = f"{self.__config.verb.name.lower()}_{self.__case_name}.log"
        handlers = [logging.FileHandler(out / name), logging.StreamHandler()]
        root = logging.getLogger("amlest")
        for handler in handlers:
            handler.setFormatter(logging.Formatter(_LOG_FORMAT))
            root.addHandler(handler)
        root.setLevel(logging.INFO)
        return handlers

    def run(self) -> dict[str, Any]:
        r"""
        Run the configured verb and return its results.

        Replication results do not depend on ``threads``: each worker runs
        single-threaded torch kernels on its own random streams.

        Returns
        -------
        dict[str, Any]
            - 'accuracy', 'replications', 'agreement'
                Only available when verb is ``Verbs.MonteCarlo``.

            - 'estimate'
                Only available when verb is ``Verbs.Fit``.

            - 'forecasts', 'failure_rates', 'es_regression'
                Only available when verb is ``Verbs.Backtest``.

            - 'timing'
                Only available when verb is ``Verbs.Timing``.

            - 'files'
                Paths of the written outputs.

        Raises
        ------
        ConfigError
            If the configuration is invalid for its verb.
        """
        if self.__config is None:
            raise RuntimeError("Set up the input configuration before run.")
        self.__check_common()
        self.__setup_device()
        verb = self.__config.verb
        if verb is Verbs.MonteCarlo:
            self.__check_monte_carlo_config()
            driver = run_monte_carlo
        elif verb is Verbs.Fit:
            self.__check_fit_config()
            driver = run_empirical
        elif verb is Verbs.Backtest:
            self.__check_backtest_config()
            driver = run_backtest
        elif verb is Verbs.Timing:
            self.__check_timing_config()
            driver = run_timing
        else:
            raise AttributeError(
                f"Unsupported verb: {verb} "
                "(Only support [MonteCarlo, Fit, Backtest, Timing])"
            )
        handlers = self.__attach_log()
        threads = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            self.__results = driver(self.__config)
        finally:
            torch.set_num_threads(threads)
            root = logging.getLogger("amlest")
            for handler in handlers:
                root.removeHandler(handler)
                handler.close()
        return deepcopy(self.__results)

    def get_results_dict(self) -> dict[str, Any]:
        """A deep copy of the results of the last run."""
        if self.__results:
            return deepcopy(self.__results)
        raise RuntimeError("No execution of the current case.")

    def get_result(self, name: str) -> Any:
        """
        A deep copy of one result of the last run.

        Parameters
        ----------
        name : str
            A key of :meth:`run`'s dictionary.
        """
        if name in self.__results:
            return deepcopy(self.__results[name])
        raise KeyError(
            f"[{name}] is not a key in results dictionary. "
            f"Available keys: {self.__results.keys()}"
        )
