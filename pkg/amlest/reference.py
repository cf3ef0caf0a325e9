"""
Exact maximum likelihood baselines.

`msm_ml_fit` maximizes the Hamilton-filter likelihood of the MSM model
over ``(m0, gamma_bar, b, sigma)`` for every ``k_bar`` of a grid and keeps
the best grid point. `GaussianLocationModel` is the unconditional
``N(theta, scale^2)`` location model, in which nothing is constrained;
`gaussian_location_oracle` uses it to compare AML, UAML and the sample
mean.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from . import OptimMethod
from .core import (
    Dataset,
    EstimationResult,
    ModelContract,
    SimBank,
    as_tensor,
    solve_aml,
)
from .errors import AmlError, DenseGuardError
from .msm import DENSE_GUARD, _ZETA_LOWER, _ZETA_UPPER, _as_returns, _msm_filter
from .numerics import OptimConfig, RngStream, minimize, numerical_hessian

logger = logging.getLogger(__name__)

_TIE_TOL = 1e-8
_ZETA_NAMES = ("m0", "gamma_bar", "b", "sigma")


@dataclass(slots=True)
class MlGridResult:
    """
    Grid maximum likelihood for the MSM model.

    Attributes
    ----------
    k_bars : list[int]
        Grid points that were fitted successfully, in grid order.

    zetas : dict[int, numpy.ndarray]
        Optimized ``(m0, gamma_bar, b, sigma)`` per ``k_bar``.

    logliks : dict[int, float]
        Average log-likelihood ``L_T`` at the optimum per ``k_bar``.

    std_errors : dict[int, numpy.ndarray]
        Asymptotic standard errors per ``k_bar`` from the numerical
        Hessian of ``T L_T``; ``nan`` where unavailable (``b`` at
        ``k_bar = 1``).

    covariances : dict[int, numpy.ndarray]
        Inverse Hessians of ``-T L_T`` per ``k_bar``, with ``nan`` rows and
        columns for parameters held fixed.

    best_k_bar : int
        Grid point with the largest log-likelihood; ties within 1e-8 go
        to the smallest ``k_bar``.

    n_obs : int
        Number of returns.
    """

    k_bars: list[int] = field(default_factory=list)
    zetas: dict[int, np.ndarray] = field(default_factory=dict)
    logliks: dict[int, float] = field(default_factory=dict)
    std_errors: dict[int, np.ndarray] = field(default_factory=dict)
    covariances: dict[int, np.ndarray] = field(default_factory=dict)
    best_k_bar: int = 0
    n_obs: int = 0

    @property
    def theta_hat(self) -> np.ndarray:
        """``(m0, gamma_bar, b, sigma, k_bar)`` at the best grid point."""
        return np.append(self.zetas[self.best_k_bar], float(self.best_k_bar))

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_k_bar": self.best_k_bar,
            "n_obs": self.n_obs,
            "grid": [
                {
                    "k_bar": k,
                    "loglik": self.logliks[k],
                    "total_loglik": self.logliks[k] * self.n_obs,
                    **dict(zip(_ZETA_NAMES, self.zetas[k].tolist())),
                    **{
                        f"se_{name}": value
                        for name, value in zip(
                            _ZETA_NAMES, self.std_errors[k].tolist()
                        )
                    },
                }
                for k in self.k_bars
            ],
        }


def _fit_grid_point(
    r: torch.Tensor,
    k_bar: int,
    cfg: OptimConfig,
    mu: float,
    dense: bool,
) -> tuple[np.ndarray, float, np.ndarray]:
    T = r.shape[1]
    # b does not enter the k_bar = 1 model
    free = np.array([True, True, k_bar > 1, True])
    scale = max(float(r.std()), 1e-6)
    starts = [
        np.array([1.4, 0.5, 3.0, scale]),
        np.array([1.7, 0.2, 6.0, scale]),
    ]

    def batch(points: np.ndarray) -> np.ndarray:
        zeta = np.repeat(starts[0][None, :], len(points), axis=0)
        zeta[:, free] = points
        valid = ((zeta >= _ZETA_LOWER) & (zeta <= _ZETA_UPPER)).all(axis=1)
        safe = np.where(valid[:, None], zeta, _ZETA_LOWER + 0.5)
        state = _msm_filter(
            as_tensor(safe),
            k_bar,
            r,
            torch.zeros(len(safe), dtype=torch.long),
            mu,
            dense=dense,
        )
        values = -state.loglik_accum.numpy() / T
        return np.where(valid, values, np.inf)

    def objective(point: np.ndarray) -> float:
        return float(batch(point[None, :])[0])

    bounds = (_ZETA_LOWER[free], _ZETA_UPPER[free])
    best = None
    for start in starts:
        result = minimize(
            objective,
            start[free],
            cfg,
            method=OptimMethod.QuasiNewton,
            bounds=bounds,
            batched=batch,
        )
        if best is None or result.fun < best.fun:
            best = result
    if not best.converged and len(best.history["J"]) <= 1:
        raise AmlError(f"ML fit at k_bar={k_bar} failed: {best.status.name}")

    zeta = starts[0].copy()
    zeta[free] = best.x
    cov = np.full((4, 4), np.nan)
    try:
        hess = numerical_hessian(lambda v: T * objective(v), best.x)
        cov[np.ix_(free, free)] = np.linalg.inv(hess)
    except np.linalg.LinAlgError as exc:
        logger.warning(f"ML Hessian at k_bar={k_bar} is singular: {exc}")
    return zeta, -best.fun, cov


def msm_ml_fit(
    returns,
    grid=tuple(range(1, 8)),
    cfg: OptimConfig | None = None,
    mu: float = 0.0,
    dense: bool = True,
    threads: int = 1,
) -> MlGridResult:
    r"""
    MSM maximum likelihood over a ``k_bar`` grid.

    For each ``k_bar`` the Hamilton-filter likelihood is maximized over
    ``(m0, gamma_bar, b, sigma)`` by the quasi-Newton method; the reported
    estimate is the grid point with the largest likelihood.

    Parameters
    ----------
    returns : array-like
        Return series.

    grid : Iterable[int], optional
        ``k_bar`` values. Default is 1..7.

    cfg : OptimConfig, optional
        Optimizer settings.

    mu : float, optional
        Fixed return mean. Default is 0.

    dense : bool, optional
        Whether the filters use the dense transition. Default is True.

    threads : int, optional
        Number of grid points fitted concurrently. Default is 1.

    Returns
    -------
    MlGridResult
        Per-grid-point fits and the selected ``k_bar``.

    Raises
    ------
    ValueError
        If the grid is empty or holds a non-positive value.
    DenseGuardError
        If ``dense`` and a grid value exceeds the dense guard.
    AmlError
        If every grid point fails.
    """
    grid = sorted({int(k) for k in grid})
    if not grid or grid[0] < 1:
        raise ValueError(f"ML grid must hold positive k_bar values, given {grid}")
    if dense and grid[-1] > DENSE_GUARD:
        raise DenseGuardError(
            f"ML grid exceeds the dense guard {DENSE_GUARD}: {grid}",
            k_bar=grid[-1],
        )
    cfg = OptimConfig() if cfg is None else cfg
    r = _as_returns(returns)

    def task(k_bar: int):
        try:
            return _fit_grid_point(r, k_bar, cfg, mu, dense)
        except (AmlError, ValueError) as exc:
            logger.warning(f"ML grid point k_bar={k_bar} skipped: {exc}")
            return None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        fits = list(pool.map(task, grid))

    result = MlGridResult(n_obs=r.shape[1])
    for k_bar, fit in zip(grid, fits):
        if fit is None:
            continue
        zeta, loglik, cov = fit
        diag = np.diag(cov)
        result.k_bars.append(k_bar)
        result.zetas[k_bar] = zeta
        result.logliks[k_bar] = loglik
        result.std_errors[k_bar] = np.where(
            diag > 0, np.sqrt(np.abs(diag)), np.nan
        )
        result.covariances[k_bar] = cov
    if not result.k_bars:
        raise AmlError("ML fit failed at every grid point.")
    top = max(result.logliks.values())
    result.best_k_bar = min(
        k for k in result.k_bars if result.logliks[k] >= top - _TIE_TOL
    )
    return result


class GaussianLocationModel(ModelContract):
    """
    ``y_t = theta + scale * nu_t`` with ``nu_t ~ N(0, 1)`` and known scale.

    No parameter is constrained, so the constrained estimate is the MLE,
    the sample mean.

    Parameters
    ----------
    scale : float, optional
        Known standard deviation. Default is 1.
    """

    names = ("theta",)
    constraint_mask = (False,)
    fixed_values = ()
    integer_mask = (False,)
    lower = (-math.inf,)
    upper = (math.inf,)
    hac_lags = 0

    def __init__(self, scale: float = 1.0) -> None:
        if not scale > 0:
            raise ValueError(f"scale must be positive, given {scale}")
        self.scale = scale

    def innovation_key(self) -> str:
        return "gaussian-location"

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        e = (data.y - float(beta[0])) / self.scale
        return float(
            -0.5 * math.log(2.0 * math.pi) - math.log(self.scale) - 0.5 * (e * e).mean()
        )

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        e = (data.y[None, :] - as_tensor(betas)[:, :1]) / self.scale
        values = -0.5 * (e * e).mean(dim=1)
        return (values - 0.5 * math.log(2.0 * math.pi) - math.log(self.scale)).numpy()

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        return ((data.y - float(beta[0])) / self.scale**2)[:, None]

    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        return {"nu": stream.standard_normal(T)}

    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        return Dataset(float(theta[0]) + self.scale * innovations["nu"])

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: SimBank,
        data: Dataset,
    ) -> np.ndarray:
        nu = bank.stacked(self)["nu"]
        y = float(theta[0]) + self.scale * nu.mean(dim=1)
        return ((y - float(beta[0])) / self.scale**2)[:, None].numpy()

    def initial_beta(self, data: Dataset) -> np.ndarray:
        return np.array([float(data.y.mean())])


@dataclass(slots=True)
class OracleReport:
    """
    Outcome of :func:`gaussian_location_oracle`.

    ``aml``, ``uaml`` and ``mle`` hold one estimate per replication.
    ``variance_ratio`` is ``Var(AML) / Var(MLE)`` across replications
    (``nan`` with a single replication) and ``expected_ratio`` is
    ``1 + 1/H``.
    """

    theta0: float
    T: int
    H: int
    aml: np.ndarray
    uaml: np.ndarray
    mle: np.ndarray
    variance_ratio: float
    expected_ratio: float
    max_gap: float
    uaml_bias: float

    def to_dict(self) -> dict[str, float]:
        return {
            "theta0": self.theta0,
            "T": self.T,
            "H": self.H,
            "replications": int(self.aml.size),
            "aml_bias": float(self.aml.mean() - self.theta0),
            "uaml_bias": self.uaml_bias,
            "mle_bias": float(self.mle.mean() - self.theta0),
            "variance_ratio": self.variance_ratio,
            "expected_ratio": self.expected_ratio,
            "max_gap": self.max_gap,
        }


def gaussian_location_oracle(
    T: int,
    H: int,
    seed: int,
    replications: int = 1,
    theta0: float = 0.0,
    uaml_shift: float = 1.0,
    cfg: OptimConfig | None = None,
) -> OracleReport:
    r"""
    Efficiency check of AML against the MLE in the Gaussian location model.

    Each replication simulates ``N(theta0, 1)`` data, computes the sample
    mean, the AML estimate from the constrained (here: unrestricted) MLE
    and the UAML estimate from the deliberately wrong value
    ``theta0 + uaml_shift``. AML agrees with the MLE up to simulation noise
    and its variance exceeds the MLE variance by the factor ``1 + 1/H``.

    Raises
    ------
    ValueError
        If ``T < 2``, ``H < 1`` or ``replications < 1``.
    """
    if T < 2 or H < 1 or replications < 1:
        raise ValueError(
            f"Invalid oracle design: {T=}, {H=}, {replications=}"
        )
    cfg = OptimConfig() if cfg is None else cfg
    model = GaussianLocationModel()
    aml, uaml, mle = (np.empty(replications) for _ in range(3))
    wrong = model.param_vector([theta0 + uaml_shift])
    for rep in range(replications):
        data = model.synthetic_dataset(np.array([theta0]), T, seed, rep)
        bank = SimBank.create(seed, rep, H, T)
        mle[rep] = float(data.y.mean())
        fit: EstimationResult = solve_aml(
            model, data, bank, cfg, compute_variance=False
        )
        aml[rep] = fit.theta_hat.values[0]
        uaml[rep] = solve_aml(
            model, data, bank, cfg, beta_hat=wrong, compute_variance=False
        ).theta_hat.values[0]
    ratio = (
        float(np.var(aml, ddof=1) / np.var(mle, ddof=1))
        if replications > 1
        else math.nan
    )
    return OracleReport(
        theta0=theta0,
        T=T,
        H=H,
        aml=aml,
        uaml=uaml,
        mle=mle,
        variance_ratio=ratio,
        expected_ratio=1.0 + 1.0 / H,
        max_gap=float(np.max(np.abs(aml - mle))),
        uaml_bias=float(uaml.mean() - theta0),
    )
