"""
Generalized Tobit model of type 2 with logistic selection.

The outcome ``y* = x'theta1 + sigma * eps`` is observed when the
selection variable is nonnegative, which happens with probability
``1 / (1 + exp(-z'theta2 - theta3 * y*))``. Under the constraint
``theta3 = 0`` outcome and selection are independent and the likelihood
is available in closed form.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch.nn.functional import logsigmoid

from . import DTYPE
from .core import Dataset, ModelContract, as_tensor, read_table
from .numerics import RngStream

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(slots=True)
class TobitParams:
    """
    Structural parameters ``(theta1, theta2, theta3, sigma)``.

    Examples
    --------
    >>> params = TobitParams.from_vector([0.1, 0.2, 0.1, 0.2, 1.0, 0.5], 2, 2)
    >>> params.to_vector().tolist()
    [0.1, 0.2, 0.1, 0.2, 1.0, 0.5]
    """

    theta1: np.ndarray
    theta2: np.ndarray
    theta3: float
    sigma: float

    def __post_init__(self) -> None:
        self.theta1 = np.atleast_1d(np.asarray(self.theta1, dtype=float))
        self.theta2 = np.atleast_1d(np.asarray(self.theta2, dtype=float))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, given {self.sigma}")

    @classmethod
    def from_vector(cls, values, p1: int, p2: int) -> "TobitParams":
        values = np.asarray(values, dtype=float)
        return cls(
            values[:p1],
            values[p1 : p1 + p2],
            float(values[p1 + p2]),
            float(values[p1 + p2 + 1]),
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.theta1, self.theta2, [self.theta3, self.sigma]]
        )


def _loglik_batch(
    theta1: torch.Tensor,
    theta2: torch.Tensor,
    sigma: torch.Tensor,
    data: Dataset,
) -> torch.Tensor:
    # theta1 (B, p1), theta2 (B, p2), sigma (B,)
    observed = data.observed[:, None]
    y = torch.nan_to_num(data.y)[:, None]
    e = y - data.x @ theta1.T
    lam = data.z @ theta2.T
    outcome = -0.5 * (_LOG_2PI + 2.0 * torch.log(sigma)) - e**2 / (
        2.0 * sigma**2
    )
    terms = torch.where(
        observed, outcome + logsigmoid(lam), logsigmoid(-lam)
    )
    return terms.mean(dim=0)


def tobit_loglik_constrained(
    theta1, theta2, sigma: float, data: Dataset
) -> float:
    r"""
    Average log-likelihood under ``theta3 = 0``.

    Equals
    ``(1/n) [sum_{I1} (-log(2 pi sigma^2)/2 - (y - x'theta1)^2 / (2 sigma^2)
    - log(1 + exp(-z'theta2))) - sum_{I0} log(1 + exp(z'theta2))]``.

    Raises
    ------
    ValueError
        If ``sigma <= 0``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, given {sigma}")
    return float(
        _loglik_batch(
            as_tensor(theta1)[None, :],
            as_tensor(theta2)[None, :],
            as_tensor([sigma]),
            data,
        )[0]
    )


def tobit_score_contributions(
    theta1, theta2, sigma: float, data: Dataset
) -> torch.Tensor:
    """
    Per-unit pseudo-score contributions, shape (n, p1 + p2 + 2).

    Columns are ordered ``(theta1, theta2, theta3, sigma)``. Observed units
    contribute ``(x e / sigma^2, z / (1 + e^lam), y / (1 + e^lam),
    -1/sigma + e^2/sigma^3)`` and missing units
    ``(0, -z / (1 + e^-lam), -x'theta1 / (1 + e^-lam), 0)`` with
    ``e = y - x'theta1`` and ``lam = z'theta2``.
    """
    theta1, theta2 = as_tensor(theta1), as_tensor(theta2)
    observed = data.observed
    obs = observed.to(DTYPE)[:, None]
    miss = 1.0 - obs
    xb = data.x @ theta1
    lam = data.z @ theta2
    e = torch.where(observed, torch.nan_to_num(data.y) - xb, 0.0)
    y = torch.where(observed, torch.nan_to_num(data.y), 0.0)
    p_miss = torch.sigmoid(-lam)[:, None]
    p_obs = torch.sigmoid(lam)[:, None]
    d_theta1 = obs * data.x * (e / sigma**2)[:, None]
    d_theta2 = obs * data.z * p_miss - miss * data.z * p_obs
    d_theta3 = obs * y[:, None] * p_miss - miss * xb[:, None] * p_obs
    d_sigma = obs * (-1.0 / sigma + e**2 / sigma**3)[:, None]
    return torch.cat([d_theta1, d_theta2, d_theta3, d_sigma], dim=1)


def tobit_pseudo_score(theta1, theta2, sigma: float, data: Dataset) -> np.ndarray:
    """Full-dimensional pseudo-score at ``(theta1, theta2, 0, sigma)``."""
    return (
        tobit_score_contributions(theta1, theta2, sigma, data)
        .mean(dim=0)
        .numpy()
    )


def tobit_design(
    n: int, p1: int, p2: int, stream: RngStream
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Regressors ``(1, u_1, ..., u_k)`` with i.i.d. U[0, 1] entries.

    ``x`` and ``z`` share the same draws column by column.
    """
    k = max(p1, p2) - 1
    draws = torch.from_numpy(stream.generator().random((n, k)))
    design = torch.cat([torch.ones(n, 1, dtype=DTYPE), draws], dim=1)
    return design[:, :p1].clone(), design[:, :p2].clone()


def _simulate(
    params: TobitParams,
    x: torch.Tensor,
    z: torch.Tensor,
    eps: torch.Tensor,
    u: torch.Tensor,
) -> Dataset:
    y_star = x @ as_tensor(params.theta1) + params.sigma * eps
    prob = torch.sigmoid(z @ as_tensor(params.theta2) + params.theta3 * y_star)
    observed = u < prob
    y = torch.where(observed, y_star, torch.nan)
    return Dataset(y, x, z, observed)


def tobit_simulate(
    params: TobitParams, x: torch.Tensor, z: torch.Tensor, stream: RngStream
) -> Dataset:
    """
    Draw outcomes and selection for a fixed design.

    ``y* = x'theta1 + sigma eps``; the unit is observed with probability
    ``1 / (1 + exp(-z'theta2 - theta3 y*))``.
    """
    generator = stream.generator()
    n = x.shape[0]
    eps = torch.from_numpy(generator.standard_normal(n))
    u = torch.from_numpy(generator.random(n))
    return _simulate(params, x, z, eps, u)


class TobitModel(ModelContract):
    """
    Generalized Tobit plug-in with ``theta3 = 0`` as the constraint.

    Parameters
    ----------
    p1, p2 : int, optional
        Numbers of outcome and selection coefficients. Default is 2 each.
    """

    hac_lags = 0
    # Selection is an indicator of the innovations, so simulated scores
    # move in steps under common random numbers.
    jacobian_step = 2e-2

    def __init__(self, p1: int = 2, p2: int = 2) -> None:
        if p1 < 1 or p2 < 1:
            raise ValueError(f"p1 and p2 must be positive, given {p1=}, {p2=}")
        self.p1, self.p2 = p1, p2
        self.names = (
            tuple(f"theta1{j + 1}" for j in range(p1))
            + tuple(f"theta2{j + 1}" for j in range(p2))
            + ("theta3", "sigma")
        )
        p = p1 + p2 + 2
        self.constraint_mask = tuple(j == p - 2 for j in range(p))
        self.fixed_values = (0.0,)
        self.integer_mask = (False,) * p
        self.lower = (-math.inf,) * (p - 1) + (1e-6,)
        self.upper = (math.inf,) * p

    def innovation_key(self) -> str:
        return "tobit"

    def split(self, values: np.ndarray) -> TobitParams:
        return TobitParams.from_vector(values, self.p1, self.p2)

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        params = self.split(beta)
        return tobit_loglik_constrained(
            params.theta1, params.theta2, params.sigma, data
        )

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        betas = as_tensor(betas)
        sigma = betas[:, -1]
        values = _loglik_batch(
            betas[:, : self.p1],
            betas[:, self.p1 : self.p1 + self.p2],
            sigma.clamp_min(1e-300),
            data,
        )
        return torch.where(sigma > 0, values, -torch.inf).numpy()

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        params = self.split(beta)
        return tobit_score_contributions(
            params.theta1, params.theta2, params.sigma, data
        )

    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        generator = stream.generator()
        return {
            "eps": torch.from_numpy(generator.standard_normal(T)),
            "u": torch.from_numpy(generator.random(T)),
        }

    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        if data is None or data.x is None or data.z is None:
            raise ValueError("Tobit simulation needs the x and z design.")
        return _simulate(
            self.split(theta), data.x, data.z, innovations["eps"], innovations["u"]
        )

    def draw_design(self, T: int, stream: RngStream) -> Dataset:
        x, z = tobit_design(T, self.p1, self.p2, stream)
        return Dataset(torch.full((T,), torch.nan, dtype=DTYPE), x, z)

    def initial_beta(self, data: Dataset) -> np.ndarray:
        """OLS on the observed units, logit intercept for selection, theta3 = 0."""
        observed = data.observed
        x_obs = data.x[observed].numpy()
        y_obs = data.y[observed].numpy()
        theta1 = np.zeros(self.p1)
        sigma = 1.0
        if y_obs.size > self.p1:
            theta1, *_ = np.linalg.lstsq(x_obs, y_obs, rcond=None)
            resid = y_obs - x_obs @ theta1
            sigma = max(float(np.sqrt(np.mean(resid**2))), 1e-3)
        share = float(observed.to(DTYPE).mean())
        share = min(max(share, 1e-3), 1.0 - 1e-3)
        theta2 = np.zeros(self.p2)
        theta2[0] = math.log(share / (1.0 - share))
        return np.concatenate([theta1, theta2, [0.0, sigma]])

    def load_dataset(self, path: str, demean: bool = False) -> Dataset:
        """CSV with columns ``y`` (empty when missing), ``x1..xp1``, ``z1..zp2``."""
        columns = (
            ["y"]
            + [f"x{j + 1}" for j in range(self.p1)]
            + [f"z{j + 1}" for j in range(self.p2)]
        )
        frame = read_table(path, columns, allow_missing=("y",))
        y = as_tensor(frame["y"].to_numpy())
        return Dataset(
            y,
            as_tensor(frame[columns[1 : 1 + self.p1]].to_numpy()),
            as_tensor(frame[columns[1 + self.p1 :]].to_numpy()),
            ~torch.isnan(y),
        )
