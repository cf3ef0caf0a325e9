"""
Model-agnostic AML engine.

A model is described by a :class:`ModelContract`: a constrained
log-likelihood over the set where some parameters are held fixed, a
full-dimensional pseudo-score built from per-observation contributions,
and a simulator driven by primitive innovations. The estimator matches
the observed pseudo-score at the constrained estimate with its average
over ``H`` simulated paths drawn from one :class:`SimBank`, which keeps
the innovations fixed across parameter values (common random numbers).
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
import torch
from numpy.linalg import LinAlgError

from . import DTYPE, OptimMethod
from .errors import (
    AmlError,
    BootstrapFailureError,
    DataParseError,
    IdentificationError,
    NonFiniteObjectiveError,
    SimulationError,
)
from .numerics import (
    OptimConfig,
    RngStream,
    central_diff_jacobian,
    long_run_variance,
    minimize,
)

logger = logging.getLogger(__name__)

DATA_PATH = 0
PERTURB_PATH = 0xFFFE
DESIGN_PATH = 0xFFFF
_BOOTSTRAP_SALT = 0x5EED_B007
_MAX_CONDITION = 1e12


@dataclass(slots=True)
class ParamVector:
    """
    Named, ordered structural parameter vector.

    Attributes
    ----------
    names : tuple[str, ...]
        Parameter labels.

    values : numpy.ndarray
        Parameter values of shape (p,).

    constraint_mask : numpy.ndarray
        Boolean mask, True where the parameter is fixed under the
        constrained model.

    fixed_values : numpy.ndarray
        Values of the masked entries, in mask order.

    integer_mask : numpy.ndarray
        Boolean mask of integer-valued parameters.
    """

    names: tuple[str, ...]
    values: np.ndarray
    constraint_mask: np.ndarray
    fixed_values: np.ndarray
    integer_mask: np.ndarray

    def __post_init__(self) -> None:
        self.names = tuple(self.names)
        self.values = np.asarray(self.values, dtype=float).copy()
        self.constraint_mask = np.asarray(self.constraint_mask, dtype=bool)
        self.fixed_values = np.asarray(self.fixed_values, dtype=float)
        self.integer_mask = np.asarray(self.integer_mask, dtype=bool)
        p = len(self.names)
        if not (
            self.values.shape
            == self.constraint_mask.shape
            == self.integer_mask.shape
            == (p,)
        ):
            raise ValueError("ParamVector fields must all have length p.")
        if self.fixed_values.shape != (int(self.constraint_mask.sum()),):
            raise ValueError(
                "fixed_values must hold one value per constrained entry."
            )

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def p1(self) -> int:
        return self.p - self.p2

    @property
    def p2(self) -> int:
        return int(self.constraint_mask.sum())

    def in_constrained_set(self) -> bool:
        return bool(
            np.array_equal(
                self.values[self.constraint_mask], self.fixed_values
            )
        )

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(
            self.names,
            values,
            self.constraint_mask,
            self.fixed_values,
            self.integer_mask,
        )

    def free_values(self) -> np.ndarray:
        return self.values[~self.constraint_mask].copy()

    def with_free(self, free: np.ndarray) -> "ParamVector":
        values = self.values.copy()
        values[~self.constraint_mask] = free
        values[self.constraint_mask] = self.fixed_values
        return self.with_values(values)

    def as_dict(self) -> dict[str, float]:
        return {
            name: float(value) for name, value in zip(self.names, self.values)
        }


@dataclass(slots=True)
class Dataset:
    """
    Observed (or simulated) data.

    ``y`` holds the endogenous series with ``nan`` where missing;
    ``observed`` flags the non-missing entries; ``x`` and ``z`` hold
    optional exogenous regressors of shape (n, k).
    """

    y: torch.Tensor
    x: torch.Tensor | None = None
    z: torch.Tensor | None = None
    observed: torch.Tensor | None = None

    @property
    def n(self) -> int:
        return int(self.y.shape[-1])


class ModelContract(ABC):
    """
    Capabilities every model plug-in supplies.

    Subclasses set the class attributes describing the parameter vector
    and implement the constrained log-likelihood, the per-observation
    pseudo-score contributions and the innovation-driven simulator.

    Attributes
    ----------
    names : tuple[str, ...]
        Parameter labels, in order.
    constraint_mask : tuple[bool, ...]
        True for parameters fixed under the constrained model.
    fixed_values : tuple[float, ...]
        Values of the fixed parameters.
    integer_mask : tuple[bool, ...]
        True for integer-valued parameters (at most one).
    lower, upper : tuple[float, ...]
        Box bounds of the structural parameter space.
    hac_lags : int | None
        Bandwidth for the long-run variance of the contributions; 0 for
        i.i.d. models and ``None`` for the default bandwidth.
    jacobian_step : float
        Relative step for differentiating simulated pseudo-scores.
    """

    names: tuple[str, ...] = ()
    constraint_mask: tuple[bool, ...] = ()
    fixed_values: tuple[float, ...] = ()
    integer_mask: tuple[bool, ...] = ()
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    hac_lags: int | None = 0
    jacobian_step: float = 1e-4

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.lower, dtype=float),
            np.asarray(self.upper, dtype=float),
        )

    def param_vector(self, values) -> ParamVector:
        integer_mask = self.integer_mask or (False,) * self.p
        return ParamVector(
            self.names,
            values,
            self.constraint_mask,
            self.fixed_values,
            integer_mask,
        )

    def param_from_dict(self, params: dict[str, float]) -> ParamVector:
        missing = set(self.names) - set(params)
        if missing:
            raise KeyError(f"Missing parameters: {sorted(missing)}")
        return self.param_vector([params[name] for name in self.names])

    def check_bounds(self, theta: np.ndarray) -> None:
        lower, upper = self.bounds
        if theta.shape != lower.shape or not np.isfinite(theta).all():
            raise ValueError(f"Invalid parameter value theta={theta}")
        if (theta < lower).any() or (theta > upper).any():
            raise ValueError(f"theta={theta} lies outside the model bounds")

    def innovation_key(self) -> str:
        return type(self).__name__

    @abstractmethod
    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        """Average constrained log-likelihood at a full-length ``beta``."""

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        return np.array(
            [self.loglik_constrained(beta, data) for beta in betas]
        )

    @abstractmethod
    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        """Per-observation pseudo-score contributions of shape (n, p)."""

    def pseudo_score(self, beta: np.ndarray, data: Dataset) -> np.ndarray:
        return self.score_contributions(beta, data).mean(dim=0).numpy()

    @abstractmethod
    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        """Primitive draws for one simulated path."""

    @abstractmethod
    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        """Deterministic map from innovations to a synthetic dataset."""

    def simulate(
        self,
        theta: np.ndarray,
        T: int,
        stream: RngStream,
        data: Dataset | None = None,
    ) -> Dataset:
        theta = np.asarray(theta, dtype=float)
        return self.simulate_from(
            theta, self.draw_innovations(stream, T, data), data
        )

    def draw_design(self, T: int, stream: RngStream) -> Dataset | None:
        """Exogenous design for synthetic data; ``None`` for time series."""
        return None

    def synthetic_dataset(
        self, theta: np.ndarray, T: int, seed: int, replication: int
    ) -> Dataset:
        design = self.draw_design(
            T, RngStream(seed, RngStream.make_stream_id(replication, DESIGN_PATH))
        )
        stream = RngStream(
            seed, RngStream.make_stream_id(replication, DATA_PATH)
        )
        return self.simulate(theta, T, stream, design)

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: "SimBank",
        data: Dataset,
    ) -> np.ndarray:
        """Pseudo-scores at ``beta`` of the ``H`` paths simulated at ``theta``."""
        return np.stack(
            [
                self.pseudo_score(beta, self.simulate_from(theta, draws, data))
                for draws in bank.innovations(self, data)
            ]
        )

    def initial_beta(self, data: Dataset) -> np.ndarray:
        lower, upper = self.bounds
        start = np.where(
            np.isfinite(lower) & np.isfinite(upper),
            0.5 * (lower + upper),
            np.where(np.isfinite(lower), lower + 1.0, 0.0),
        )
        start[np.asarray(self.constraint_mask)] = self.fixed_values
        return start

    def constrained_starts(self, data: Dataset) -> list[np.ndarray]:
        return [self.initial_beta(data)]

    def load_dataset(self, path: str, demean: bool = False) -> Dataset:
        return read_returns(path, demean)


@dataclass(slots=True)
class SimBank:
    """
    Bank of ``H`` simulation streams of length ``T``.

    Innovations are drawn once per model and reused unchanged for every
    parameter value evaluated during a solve.
    """

    H: int
    T: int
    streams: tuple[RngStream, ...]
    _cache: dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.streams = tuple(self.streams)
        if self.H < 1 or len(self.streams) != self.H:
            raise ValueError("SimBank needs H >= 1 streams.")
        keys = {(s.seed, s.stream_id, s.counter) for s in self.streams}
        if len(keys) != self.H:
            raise ValueError("SimBank streams must be pairwise distinct.")

    @classmethod
    def create(cls, seed: int, replication: int, H: int, T: int) -> "SimBank":
        streams = tuple(
            RngStream(seed, RngStream.make_stream_id(replication, h + 1))
            for h in range(H)
        )
        return cls(H, T, streams)

    def innovations(
        self, model: ModelContract, data: Dataset | None = None
    ) -> list[dict[str, torch.Tensor]]:
        key = model.innovation_key()
        if key not in self._cache:
            self._cache[key] = [
                model.draw_innovations(stream, self.T, data)
                for stream in self.streams
            ]
        return self._cache[key]

    def stacked(
        self, model: ModelContract, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        key = f"{model.innovation_key()}:stacked"
        if key not in self._cache:
            paths = self.innovations(model, data)
            self._cache[key] = {
                name: torch.stack([path[name] for path in paths])
                for name in paths[0]
            }
        return self._cache[key]


@dataclass(slots=True)
class EstimationResult:
    """
    Outcome of an AML solve.

    ``std_errors`` equals ``sqrt(diag(omega_H) / n_obs)`` whenever
    ``omega_H`` is present.
    """

    theta_hat: ParamVector
    beta_hat: ParamVector
    criterion: float
    omega_H: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    iterations: int = 0
    converged: bool = False
    n_obs: int = 0
    H: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_hat": self.theta_hat.as_dict(),
            "beta_hat": self.beta_hat.as_dict(),
            "criterion": self.criterion,
            "omega_H": None
            if self.omega_H is None
            else self.omega_H.tolist(),
            "std_errors": None
            if self.std_errors is None
            else dict(zip(self.theta_hat.names, self.std_errors.tolist())),
            "iterations": self.iterations,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "H": self.H,
        }


def simulated_score_paths(
    model: ModelContract,
    theta: np.ndarray,
    beta: np.ndarray,
    bank: SimBank,
    data: Dataset,
) -> np.ndarray:
    """
    Simulated pseudo-scores, shape (H, p).

    An integer-valued component is handled by the piecewise-linear
    extension: scores simulated at its floor and ceiling are blended
    linearly with the same innovations.
    """
    theta = np.asarray(theta, dtype=float)
    integer_idx = np.flatnonzero(np.asarray(model.integer_mask, dtype=bool))
    if integer_idx.size == 0:
        scores = model.simulated_scores(theta, beta, bank, data)
    else:
        j = int(integer_idx[0])
        floor = math.floor(theta[j])
        weight = theta[j] - floor
        theta_lo = theta.copy()
        theta_lo[j] = floor
        scores = model.simulated_scores(theta_lo, beta, bank, data)
        if weight > 0.0:
            theta_hi = theta.copy()
            theta_hi[j] = floor + 1
            scores = (1.0 - weight) * scores + weight * model.simulated_scores(
                theta_hi, beta, bank, data
            )
    scores = np.asarray(scores, dtype=float)
    if not np.isfinite(scores).all():
        raise SimulationError(
            f"Simulated pseudo-scores are not finite at theta={theta}",
            theta=theta,
        )
    return scores


def score_weights(contributions: torch.Tensor) -> np.ndarray:
    """Inverse sample variances of the observed contributions (1 if degenerate)."""
    variances = contributions.var(dim=0).numpy()
    usable = np.isfinite(variances) & (variances > 0.0)
    return np.where(usable, 1.0 / np.where(usable, variances, 1.0), 1.0)


def _criterion_value(
    model: ModelContract,
    data: Dataset,
    beta: np.ndarray,
    theta: np.ndarray,
    bank: SimBank,
    observed: np.ndarray,
    weights: np.ndarray,
) -> float:
    simulated = simulated_score_paths(model, theta, beta, bank, data).mean(
        axis=0
    )
    diff = observed - simulated
    return float(np.sum(weights * diff * diff))


def constrained_fit(
    model: ModelContract,
    data: Dataset,
    cfg: OptimConfig,
    record_log: bool = False,
) -> ParamVector:
    r"""
    Maximize the constrained log-likelihood over the free parameters.

    Parameters
    ----------
    model : ModelContract
        The model plug-in.

    data : Dataset
        Observed data (nonempty).

    cfg : OptimConfig
        Optimizer settings; the quasi-Newton method is used.

    record_log : bool, optional
        Whether to log optimizer progress. Default is False.

    Returns
    -------
    ParamVector
        The constrained estimate, with masked entries at their fixed values.

    Raises
    ------
    ValueError
        If ``data`` is empty.
    NonFiniteObjectiveError
        If the log-likelihood is non-finite at every start.
    AmlError
        If the optimizer fails without improving on any start.
    """
    if data.n == 0:
        raise ValueError("constrained_fit needs a nonempty dataset.")
    mask = np.asarray(model.constraint_mask, dtype=bool)
    template = model.param_vector(model.initial_beta(data))
    lower, upper = model.bounds
    free_bounds = (lower[~mask], upper[~mask])

    def embed(free: np.ndarray) -> np.ndarray:
        return template.with_free(free).values

    def objective(free: np.ndarray) -> float:
        return -model.loglik_constrained(embed(free), data)

    def batched(points: np.ndarray) -> np.ndarray:
        betas = np.stack([embed(point) for point in points])
        return -model.loglik_constrained_batch(betas, data)

    best = None
    for start in model.constrained_starts(data):
        try:
            result = minimize(
                objective,
                np.asarray(start, dtype=float)[~mask],
                cfg,
                method=OptimMethod.QuasiNewton,
                bounds=free_bounds,
                batched=batched,
                record_log=record_log,
            )
        except NonFiniteObjectiveError:
            logger.warning(f"Constrained log-likelihood not finite at {start}")
            continue
        if best is None or result.fun < best.fun:
            best = result
    if best is None:
        raise NonFiniteObjectiveError(
            "Constrained log-likelihood is non-finite at every start."
        )
    if not best.converged:
        if len(best.history["J"]) <= 1:
            raise AmlError(f"Constrained fit failed: {best.status.name}")
        logger.warning(
            f"Constrained fit stopped with status {best.status.name}"
        )
    return template.with_free(best.x)


def aml_criterion(
    model: ModelContract,
    data: Dataset,
    beta_hat: ParamVector,
    theta: ParamVector,
    bank: SimBank,
    weights: np.ndarray | None = None,
) -> float:
    r"""
    Squared distance between observed and averaged simulated pseudo-scores.

    Returns ``|| w^{1/2} (S_T(beta_hat) - (1/H) sum_h S_T^{(h)}(theta, beta_hat)) ||^2``
    with unit weights unless ``weights`` is given.

    Raises
    ------
    ValueError
        If ``beta_hat`` is not in the constrained set or ``theta`` is
        outside the model bounds.
    SimulationError
        If the simulated pseudo-scores are not finite at ``theta``.
    """
    if not beta_hat.in_constrained_set():
        raise ValueError(
            f"beta_hat={beta_hat.values} does not satisfy the constraint."
        )
    theta_values = np.asarray(theta.values, dtype=float)
    model.check_bounds(theta_values)
    observed = model.pseudo_score(beta_hat.values, data)
    weights = np.ones(model.p) if weights is None else np.asarray(weights)
    return _criterion_value(
        model, data, beta_hat.values, theta_values, bank, observed, weights
    )


def _perturbed_starts(
    start: np.ndarray,
    count: int,
    bank: SimBank,
    bounds: tuple[np.ndarray, np.ndarray],
) -> list[np.ndarray]:
    if count == 0:
        return []
    anchor = bank.streams[0]
    stream = RngStream(anchor.seed, (anchor.stream_id & ~0xFFFF) | PERTURB_PATH)
    noise = stream.generator().standard_normal((count, start.size))
    scale = 0.1 * np.maximum(np.abs(start), 0.1)
    return [np.clip(start + scale * row, *bounds) for row in noise]


def solve_aml(
    model: ModelContract,
    data: Dataset,
    bank: SimBank,
    cfg: OptimConfig,
    beta_hat: ParamVector | None = None,
    compute_variance: bool = True,
    record_log: bool = False,
) -> EstimationResult:
    r"""
    Approximate maximum likelihood estimator.

    The criterion is the weighted squared distance between the observed
    pseudo-score at ``beta_hat`` and its simulated average, with weights
    equal to the inverse sample variances of the observed per-observation
    contributions. The simplex search starts at ``beta_hat`` and at up to
    ``cfg.n_restarts`` perturbed points; the best criterion wins. Integer
    components are optimized on the piecewise-linear extension and then
    rounded to the nearest integer.

    Parameters
    ----------
    model : ModelContract
        The model plug-in.

    data : Dataset
        Observed data.

    bank : SimBank
        Simulation bank with ``H`` paths of length ``data.n``.

    cfg : OptimConfig
        Optimizer settings.

    beta_hat : ParamVector, optional
        Constrained value to match at. Computed by :func:`constrained_fit`
        when omitted.

    compute_variance : bool, optional
        Whether to attach the asymptotic covariance. Default is True.

    record_log : bool, optional
        Whether to log optimizer progress. Default is False.

    Returns
    -------
    EstimationResult
        Estimates, criterion at the estimate and diagnostics.
    """
    if beta_hat is None:
        beta_hat = constrained_fit(model, data, cfg, record_log=record_log)
    beta = beta_hat.values
    contributions = model.score_contributions(beta, data)
    observed = contributions.mean(dim=0).numpy()
    weights = score_weights(contributions)
    bounds = model.bounds

    def objective(theta: np.ndarray) -> float:
        return _criterion_value(
            model, data, beta, theta, bank, observed, weights
        )

    start = np.clip(beta, *bounds)
    starts = [start] + _perturbed_starts(start, cfg.n_restarts, bank, bounds)
    best, iterations = None, 0
    for x0 in starts:
        try:
            result = minimize(
                objective,
                x0,
                cfg,
                method=OptimMethod.NelderMead,
                bounds=bounds,
                record_log=record_log,
            )
        except (NonFiniteObjectiveError, SimulationError) as exc:
            logger.warning(f"AML start {x0} skipped: {exc}")
            continue
        iterations += result.iterations
        if best is None or result.fun < best.fun:
            best = result
    if best is None:
        raise SimulationError(
            "AML criterion could not be evaluated at any start.", theta=start
        )

    theta = best.x.copy()
    integer_mask = np.asarray(model.integer_mask or (False,) * model.p)
    criterion = best.fun
    if integer_mask.any():
        theta[integer_mask] = np.clip(np.round(theta[integer_mask]), *(
            b[integer_mask] for b in bounds
        ))
        criterion = objective(theta)
    if not best.converged:
        logger.warning(f"AML solver stopped with status {best.status.name}")

    result = EstimationResult(
        theta_hat=model.param_vector(theta),
        beta_hat=beta_hat,
        criterion=criterion,
        iterations=iterations,
        converged=best.converged,
        n_obs=int(contributions.shape[0]),
        H=bank.H,
    )
    if compute_variance:
        try:
            omega = asymptotic_variance(
                model, data, result.theta_hat, beta_hat, bank, cfg
            )
        except IdentificationError as exc:
            logger.warning(f"Asymptotic variance unavailable: {exc}")
        else:
            result.omega_H = omega
            result.std_errors = np.sqrt(np.diag(omega) / result.n_obs)
    return result


def asymptotic_variance(
    model: ModelContract,
    data: Dataset,
    theta_hat: ParamVector,
    beta_hat: ParamVector,
    bank: SimBank,
    cfg: OptimConfig,
) -> np.ndarray:
    r"""
    Asymptotic covariance ``(1 + 1/H) J^{-1} I J^{-1}'``.

    ``J`` is minus the central-difference Jacobian in ``theta`` of the
    H-averaged simulated pseudo-score at ``(theta_hat, beta_hat)``; ``I``
    is the long-run variance of the observed per-observation contributions
    at ``beta_hat``. Negative eigenvalues are floored at zero.

    Raises
    ------
    IdentificationError
        If ``J`` is singular or numerically ill-conditioned.
    """
    beta = beta_hat.values
    step = max(cfg.fd_step, model.jacobian_step)

    def averaged(theta: np.ndarray) -> np.ndarray:
        return simulated_score_paths(model, theta, beta, bank, data).mean(
            axis=0
        )

    try:
        J = -central_diff_jacobian(
            averaged, theta_hat.values, step, *model.bounds
        )
    except (NonFiniteObjectiveError, SimulationError) as exc:
        raise IdentificationError(f"Jacobian unavailable: {exc}") from exc
    contributions = model.score_contributions(beta, data)
    info = long_run_variance(contributions, model.hac_lags).numpy()
    if not np.isfinite(J).all() or np.linalg.cond(J) > _MAX_CONDITION:
        raise IdentificationError(
            "Derivative of the simulated pseudo-score is singular."
        )
    try:
        J_inv = np.linalg.inv(J)
    except LinAlgError as exc:
        raise IdentificationError(str(exc)) from exc
    omega = (1.0 + 1.0 / bank.H) * J_inv @ info @ J_inv.T
    omega = 0.5 * (omega + omega.T)
    eigenvalues, eigenvectors = np.linalg.eigh(omega)
    eigenvalues = np.maximum(eigenvalues, 0.0)
    omega = (eigenvectors * eigenvalues) @ eigenvectors.T
    return 0.5 * (omega + omega.T)


def parametric_bootstrap(
    model: ModelContract,
    theta_hat: ParamVector,
    T: int,
    B: int,
    bank_template: SimBank,
    cfg: OptimConfig,
    data: Dataset | None = None,
) -> np.ndarray:
    r"""
    Bootstrap standard errors of the AML estimator.

    ``B`` datasets are simulated at ``theta_hat`` (reusing the exogenous
    design of ``data`` when given) and re-estimated with fresh banks of
    ``bank_template.H`` paths; the seeds derive from the template's seed.

    Raises
    ------
    ValueError
        If ``B < 2``.
    BootstrapFailureError
        If more than 20% of the replications fail or fewer than two
        succeed.
    """
    if B < 2:
        raise ValueError(f"parametric_bootstrap needs B >= 2, given {B=}")
    seed = bank_template.streams[0].seed ^ _BOOTSTRAP_SALT
    estimates, dropped = [], 0
    for b in range(B):
        if data is not None:
            stream = RngStream(seed, RngStream.make_stream_id(b, DATA_PATH))
            sample = model.simulate(theta_hat.values, T, stream, data)
        else:
            sample = model.synthetic_dataset(theta_hat.values, T, seed, b)
        bank = SimBank.create(seed, b, bank_template.H, T)
        try:
            result = solve_aml(model, sample, bank, cfg, compute_variance=False)
        except (AmlError, LinAlgError, ValueError) as exc:
            logger.warning(f"Bootstrap replication {b} dropped: {exc}")
            dropped += 1
            continue
        if not result.converged:
            logger.warning(f"Bootstrap replication {b} dropped: not converged")
            dropped += 1
            continue
        estimates.append(result.theta_hat.values)
    if dropped > 0.2 * B or len(estimates) < 2:
        raise BootstrapFailureError(
            f"{dropped} of {B} bootstrap replications failed.",
            dropped=dropped,
            total=B,
        )
    return np.std(np.stack(estimates), axis=0, ddof=1)


def as_tensor(values) -> torch.Tensor:
    return torch.as_tensor(values, dtype=DTYPE)


def read_table(
    path: str, columns: list[str] | None = None, allow_missing: tuple[str, ...] = ()
) -> pd.DataFrame:
    """
    Read a numeric CSV table.

    Parameters
    ----------
    path : str
        CSV file with a header row.

    columns : list[str], optional
        Required columns; all columns are kept when omitted.

    allow_missing : tuple[str, ...], optional
        Columns in which empty cells are legal (read as ``nan``).

    Raises
    ------
    DataParseError
        If the file is empty, misses a required column or holds a
        non-numeric cell; ``line`` is the one-based file line.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise DataParseError(f"{path} is empty", path=path) from exc
    except pd.errors.ParserError as exc:
        raise DataParseError(f"{path}: {exc}", path=path) from exc
    if frame.empty:
        raise DataParseError(f"{path} holds no data rows", path=path)
    frame.columns = [name.strip() for name in frame.columns]
    if columns is not None:
        missing = [name for name in columns if name not in frame.columns]
        if missing:
            raise DataParseError(f"{path} misses columns {missing}", path=path)
        frame = frame[columns]
    numeric = {}
    for name in frame.columns:
        raw = frame[name].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() & ~((raw == "") & (name in allow_missing))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataParseError(
                f"{path}: bad value {raw.iloc[row]!r} in column {name!r}",
                path=path,
                line=row + 2,
            )
        numeric[name] = values.astype(float)
    return pd.DataFrame(numeric)


def read_returns(path: str, demean: bool = False) -> Dataset:
    """Single-column return series (the first column of the file)."""
    frame = read_table(path)
    y = as_tensor(frame.iloc[:, 0].to_numpy())
    if demean:
        y = y - y.mean()
    return Dataset(y)
