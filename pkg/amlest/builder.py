import json
from dataclasses import asdict
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

from . import Device, Estimators, Models, Verbs
from .executor import _Executor
from .parameters import ExperimentConfig
from .presets import get_preset


def _as_member(enum: type[Enum], value: Enum | str, name: str) -> Enum:
    if isinstance(value, enum):
        return value
    if isinstance(value, str):
        for member in enum:
            if member.name.lower() == value.lower():
                return member
        raise ValueError(
            f"Unknown {name} '{value}'. "
            f"Available: {[member.name for member in enum]}"
        )
    raise TypeError(
        f"{name} must be a {enum.__name__} or its name, given {type(value)=}"
    )


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ExperimentBuilder:
    r"""
    A builder class for configuring and executing experiments.

    The configuration starts from the defaults of
    :class:`ExperimentConfig`, optionally from a preset or a JSON file, and
    every field can then be overridden by its setter. Enum fields accept
    either the member or its (case-insensitive) name, so that JSON
    configurations and command line flags share one code path.

    Parameters
    ----------
    case_name : str, optional
        A name for the experiment. Default is 'case_{current_timestamp}'.

    config : dict[str, Any] | ExperimentConfig, optional
        A dictionary or an instance of ExperimentConfig holding the
        configuration.

    Attributes
    ----------
    case_name : str
        A name for the experiment.

    Methods
    -------
    set_config(config: dict[str, Any] | ExperimentConfig)
        -> ExperimentBuilder:
        Set a batch of configuration fields.

    set_parameter(name: str, value: Any) -> ExperimentBuilder:
        Set one configuration field by name.

    load_preset(name: str) -> ExperimentBuilder:
        Start from an embedded preset.

    load_json(path: str) -> ExperimentBuilder:
        Overlay the fields of a JSON configuration file.

    execute() -> dict[str, Any]:
        Run the experiment and return its results.

    get_results_dict() -> dict[str, Any]:
        Get the results of the last execution.

    get_config_dict() -> dict[str, Any]:
        Get the configured fields.

    to_json() -> str:
        Serialize the configuration with enums written by name.

    Examples
    --------
    >>> builder = ExperimentBuilder("doc").load_preset("stable")
    >>> builder.set_replications(3).set_seed(7).get_config_dict()["seed"]
    7
    >>> builder.get_config_dict()["model"].name
    'Stable'
    """

    def __init__(
        self,
        case_name: str = None,
        config: dict[str, Any] | ExperimentConfig = None,
    ) -> None:
        self.case_name = (
            datetime.now().strftime("case_%Y-%m-%dT%H-%M-%S.%f")
            if case_name is None
            else case_name
        )
        self.__config = ExperimentConfig()
        if config is not None:
            self.set_config(config)
        self.__executor = _Executor()

    def set_config(
        self, config: dict[str, Any] | ExperimentConfig
    ) -> "ExperimentBuilder":
        if isinstance(config, ExperimentConfig):
            config = asdict(config)
        checked_builder = ExperimentBuilder("checker")
        checked_builder.__config = ExperimentConfig(**asdict(self.__config))
        for param_name, param_value in config.items():
            checked_builder.set_parameter(param_name, param_value)
        self.__config = checked_builder.__config
        return self

    def set_parameter(self, name: str, value: Any) -> "ExperimentBuilder":
        if not hasattr(self.__config, name):
            raise AttributeError(
                f"Parameter '{name}' does not exist in ExperimentConfig."
            )
        setter_method = getattr(self, f"set_{name}", None)
        if setter_method is None:
            raise AttributeError(
                f"Setter method for parameter '{name}' not found."
            )
        return setter_method(value)

    def load_preset(self, name: str) -> "ExperimentBuilder":
        """
        Replace the configuration by the preset ``name``.

        Raises
        ------
        KeyError
            If no preset has this name.
        """
        self.__config = ExperimentConfig()
        return self.set_config(get_preset(name))

    def load_json(self, path: str) -> "ExperimentBuilder":
        """
        Overlay the fields of a JSON configuration file.

        A ``"preset"`` key loads that preset first; the remaining keys
        override it.
        """
        payload = json.loads(Path(path).read_text())
        if not isinstance(payload, dict):
            raise TypeError(
                f"{path} must hold a JSON object, given {type(payload)=}"
            )
        if (preset := payload.pop("preset", None)) is not None:
            self.load_preset(preset)
        return self.set_config(payload)

    def set_schema_version(self, schema_version: int) -> "ExperimentBuilder":
        if not _is_int(schema_version):
            raise TypeError(
                "schema_version must be an integer, "
                f"given {type(schema_version)=}"
            )
        self.__config.schema_version = schema_version
        return self

    def set_verb(self, verb: Verbs | str) -> "ExperimentBuilder":
        self.__config.verb = _as_member(Verbs, verb, "verb")
        return self

    def set_preset(self, preset: str | None) -> "ExperimentBuilder":
        if preset is not None and not isinstance(preset, str):
            raise TypeError(f"preset must be a str, given {type(preset)=}")
        self.__config.preset = preset
        return self

    def set_model(self, model: Models | str) -> "ExperimentBuilder":
        self.__config.model = (
            None if model is None else _as_member(Models, model, "model")
        )
        return self

    @staticmethod
    def check_param_dict(params: dict[str, float], name: str) -> dict:
        """
        Check a mapping of parameter names to real values.

        Raises
        ------
        TypeError
            If ``params`` is not a dict of str to real numbers.
        """
        if not isinstance(params, dict):
            raise TypeError(f"{name} must be a dict, given {type(params)=}")
        for key, value in params.items():
            if not isinstance(key, str) or not _is_real(value):
                raise TypeError(
                    f"{name} must map names to real numbers, "
                    f"given {key!r}: {type(value)=}"
                )
        return {key: float(value) for key, value in params.items()}

    def set_true_params(
        self, true_params: dict[str, float]
    ) -> "ExperimentBuilder":
        self.__config.true_params = self.check_param_dict(
            true_params, "true_params"
        )
        return self

    def set_sample_size(self, sample_size: int) -> "ExperimentBuilder":
        if not _is_int(sample_size):
            raise TypeError(
                f"sample_size must be an integer, given {type(sample_size)=}"
            )
        self.__config.sample_size = sample_size
        return self

    def set_sample_sizes(
        self, sample_sizes: list[int] | tuple[int, ...]
    ) -> "ExperimentBuilder":
        if not isinstance(sample_sizes, (list, tuple)) or not all(
            _is_int(size) for size in sample_sizes
        ):
            raise TypeError(
                "sample_sizes must be a sequence of integers, "
                f"given {type(sample_sizes)=}"
            )
        self.__config.sample_sizes = tuple(sample_sizes)
        return self

    def set_replications(self, replications: int) -> "ExperimentBuilder":
        if not _is_int(replications):
            raise TypeError(
                "replications must be an integer, "
                f"given {type(replications)=}"
            )
        self.__config.replications = replications
        return self

    def set_num_paths(self, num_paths: int) -> "ExperimentBuilder":
        if not _is_int(num_paths):
            raise TypeError(
                f"num_paths must be an integer, given {type(num_paths)=}"
            )
        self.__config.num_paths = num_paths
        return self

    def set_seed(self, seed: int) -> "ExperimentBuilder":
        if not _is_int(seed):
            raise TypeError(f"seed must be an integer, given {type(seed)=}")
        self.__config.seed = seed
        return self

    def set_estimators(
        self, estimators: list[Estimators | str] | tuple
    ) -> "ExperimentBuilder":
        if not isinstance(estimators, (list, tuple)):
            raise TypeError(
                "estimators must be a sequence of Estimators, "
                f"given {type(estimators)=}"
            )
        members = []
        for estimator in estimators:
            member = _as_member(Estimators, estimator, "estimator")
            if member not in members:
                members.append(member)
        self.__config.estimators = tuple(members)
        return self

    def set_uaml_beta(self, uaml_beta: dict[str, float]) -> "ExperimentBuilder":
        self.__config.uaml_beta = self.check_param_dict(uaml_beta, "uaml_beta")
        return self

    def set_threads(self, threads: int) -> "ExperimentBuilder":
        if not _is_int(threads):
            raise TypeError(
                f"threads must be an integer, given {type(threads)=}"
            )
        self.__config.threads = threads
        return self

    def set_out_dir(self, out_dir: str | Path) -> "ExperimentBuilder":
        if not isinstance(out_dir, (str, Path)):
            raise TypeError(
                f"out_dir must be a str or a Path, given {type(out_dir)=}"
            )
        self.__config.out_dir = str(out_dir)
        return self

    def set_data_path(self, data_path: str | Path | None) -> "ExperimentBuilder":
        if data_path is not None and not isinstance(data_path, (str, Path)):
            raise TypeError(
                f"data_path must be a str or a Path, given {type(data_path)=}"
            )
        self.__config.data_path = None if data_path is None else str(data_path)
        return self

    def set_demean(self, demean: bool) -> "ExperimentBuilder":
        if not isinstance(demean, bool):
            raise TypeError(f"demean must be a bool, given {type(demean)=}")
        self.__config.demean = demean
        return self

    def set_num_particles(self, num_particles: int) -> "ExperimentBuilder":
        if not _is_int(num_particles):
            raise TypeError(
                "num_particles must be an integer, "
                f"given {type(num_particles)=}"
            )
        self.__config.num_particles = num_particles
        return self

    def set_alphas(
        self, alphas: list[float] | tuple[float, ...]
    ) -> "ExperimentBuilder":
        if not isinstance(alphas, (list, tuple)) or not all(
            _is_real(alpha) for alpha in alphas
        ):
            raise TypeError(
                "alphas must be a sequence of floating point numbers, "
                f"given {type(alphas)=}"
            )
        self.__config.alphas = tuple(float(alpha) for alpha in alphas)
        return self

    def set_es_alpha(self, es_alpha: float) -> "ExperimentBuilder":
        if not _is_real(es_alpha):
            raise TypeError(
                "es_alpha must be a floating point number, "
                f"given {type(es_alpha)=}"
            )
        self.__config.es_alpha = float(es_alpha)
        return self

    def __set_grid(self, name: str, grid: list[int] | tuple) -> None:
        if not isinstance(grid, (list, tuple)) or not all(
            _is_int(k) for k in grid
        ):
            raise TypeError(
                f"{name} must be a sequence of integers, given {type(grid)=}"
            )
        setattr(self.__config, name, tuple(grid))

    def set_ml_grid(self, ml_grid: list[int] | tuple) -> "ExperimentBuilder":
        self.__set_grid("ml_grid", ml_grid)
        return self

    def set_timing_grid(
        self, timing_grid: list[int] | tuple
    ) -> "ExperimentBuilder":
        self.__set_grid("timing_grid", timing_grid)
        return self

    def set_timing_loglik_max(
        self, timing_loglik_max: int
    ) -> "ExperimentBuilder":
        if not _is_int(timing_loglik_max):
            raise TypeError(
                "timing_loglik_max must be an integer, "
                f"given {type(timing_loglik_max)=}"
            )
        self.__config.timing_loglik_max = timing_loglik_max
        return self

    def set_timing_repeats(self, timing_repeats: int) -> "ExperimentBuilder":
        if not _is_int(timing_repeats):
            raise TypeError(
                "timing_repeats must be an integer, "
                f"given {type(timing_repeats)=}"
            )
        self.__config.timing_repeats = timing_repeats
        return self

    def set_bootstrap_replications(
        self, bootstrap_replications: int
    ) -> "ExperimentBuilder":
        if not _is_int(bootstrap_replications):
            raise TypeError(
                "bootstrap_replications must be an integer, "
                f"given {type(bootstrap_replications)=}"
            )
        self.__config.bootstrap_replications = bootstrap_replications
        return self

    def set_n_restarts(self, n_restarts: int) -> "ExperimentBuilder":
        if not _is_int(n_restarts):
            raise TypeError(
                f"n_restarts must be an integer, given {type(n_restarts)=}"
            )
        self.__config.n_restarts = n_restarts
        return self

    def set_max_iterations(self, max_iterations: int) -> "ExperimentBuilder":
        if not _is_int(max_iterations):
            raise TypeError(
                "max_iterations must be an integer, "
                f"given {type(max_iterations)=}"
            )
        self.__config.max_iterations = max_iterations
        return self

    def set_x_tol(self, x_tol: float) -> "ExperimentBuilder":
        if not _is_real(x_tol):
            raise TypeError(
                f"x_tol must be a floating point number, given {type(x_tol)=}"
            )
        self.__config.x_tol = float(x_tol)
        return self

    def set_f_tol(self, f_tol: float) -> "ExperimentBuilder":
        if not _is_real(f_tol):
            raise TypeError(
                f"f_tol must be a floating point number, given {type(f_tol)=}"
            )
        self.__config.f_tol = float(f_tol)
        return self

    def set_fd_step(self, fd_step: float) -> "ExperimentBuilder":
        if not _is_real(fd_step):
            raise TypeError(
                "fd_step must be a floating point number, "
                f"given {type(fd_step)=}"
            )
        self.__config.fd_step = float(fd_step)
        return self

    def set_compute_variance(
        self, compute_variance: bool
    ) -> "ExperimentBuilder":
        if not isinstance(compute_variance, bool):
            raise TypeError(
                "compute_variance must be a bool, "
                f"given {type(compute_variance)=}"
            )
        self.__config.compute_variance = compute_variance
        return self

    def set_device(self, device: Device | str) -> "ExperimentBuilder":
        self.__config.device = _as_member(Device, device, "device")
        return self

    def set_record_log(self, record_log: bool) -> "ExperimentBuilder":
        if not isinstance(record_log, bool):
            raise TypeError(
                f"record_log must be a bool, given {type(record_log)=}"
            )
        self.__config.record_log = record_log
        return self

    def set_model_options(
        self, model_options: dict[str, Any]
    ) -> "ExperimentBuilder":
        if not isinstance(model_options, dict):
            raise TypeError(
                "model_options must be a dict, "
                f"given {type(model_options)=}"
            )
        self.__config.model_options = dict(model_options)
        return self

    def execute(self) -> dict[str, Any]:
        return self.__executor.set_input_config(
            self.__config, self.case_name
        ).run()

    def get_results_dict(self) -> dict[str, Any]:
        return self.__executor.get_results_dict()

    def get_result(self, name: str) -> Any:
        r"""
        Get a specific result from the executed experiment by name.

        Parameters
        ----------
        name : str
            The name of the result to retrieve.

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

        Returns
        -------
        Any
            A requested result.
        """
        return self.__executor.get_result(name)

    def get_config_dict(self) -> dict[str, Any]:
        return asdict(self.__config)

    def to_json(self) -> str:
        """The configuration as JSON, enums written by name."""
        payload = {
            name: (
                value.name
                if isinstance(value, Enum)
                else [v.name if isinstance(v, Enum) else v for v in value]
                if isinstance(value, tuple)
                else value
            )
            for name, value in self.get_config_dict().items()
        }
        return json.dumps(payload, indent=2)

    def __repr__(self) -> str:
        """
        Generate a string representation of the
        configured fields of the experiment.
        """
        config_dict = self.get_config_dict()
        str_list = [
            f"Configuration for Experiment: {self.case_name}",
            "--------------------------------------",
        ]
        str_list.extend(
            f"{param_name}:\n{param_value}\n"
            for param_name, param_value in config_dict.items()
        )
        return "\n".join(str_list)
