"""
Probit model with AR(1) latent errors.

``y_t = 1{x_t'theta1 + u_t > 0}`` with ``u_t = theta2 u_{t-1} + nu_t`` and
standard Gaussian ``nu``. Under ``theta2 = 0`` the likelihood is the
standard Probit likelihood; the pseudo-score adds the lag-one product of
generalized residuals in the ``theta2`` direction.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.signal import lfilter
from torch.special import log_ndtr, ndtr

from . import DTYPE
from .core import Dataset, ModelContract, SimBank, as_tensor, read_table
from .numerics import RngStream

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_TAIL = 8.0


@dataclass(slots=True)
class ProbitParams:
    """Index coefficients ``theta1`` and AR coefficient ``theta2`` in (-1, 1)."""

    theta1: np.ndarray
    theta2: float

    def __post_init__(self) -> None:
        self.theta1 = np.atleast_1d(np.asarray(self.theta1, dtype=float))
        if not -1.0 < self.theta2 < 1.0:
            raise ValueError(f"theta2 must lie in (-1, 1), given {self.theta2}")

    @classmethod
    def from_vector(cls, values) -> "ProbitParams":
        values = np.asarray(values, dtype=float)
        return cls(values[:-1], float(values[-1]))

    def to_vector(self) -> np.ndarray:
        return np.append(self.theta1, self.theta2)


def _residual(s: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    direct_cdf = ndtr(s)
    pdf = torch.exp(-0.5 * s * s - _LOG_SQRT_2PI)
    direct = pdf * (y - direct_cdf) / (direct_cdf * (1.0 - direct_cdf))
    # Mills-ratio form: phi/Phi for y = 1 and -phi/Phi(-s) for y = 0
    log_pdf = -0.5 * s * s - _LOG_SQRT_2PI
    guarded = torch.where(
        y > 0.5,
        torch.exp(log_pdf - log_ndtr(s)),
        -torch.exp(log_pdf - log_ndtr(-s)),
    )
    return torch.where(s.abs() <= _TAIL, direct, guarded)


def probit_generalized_residual(theta1, x, y) -> torch.Tensor:
    r"""
    Generalized residual under ``theta2 = 0``.

    ``phi(s) (y - Phi(s)) / (Phi(s) (1 - Phi(s)))`` with ``s = x'theta1``;
    beyond ``|s| > 8`` the equivalent log-space Mills-ratio form is used.

    Parameters
    ----------
    theta1 : array-like
        Index coefficients of length q.

    x : array-like
        Regressors of shape (q,) or (T, q).

    y : array-like
        Binary outcomes, scalar or of shape (T,).

    Examples
    --------
    >>> round(float(probit_generalized_residual([1.0], [0.0], 1.0)), 7)
    0.7978846
    >>> round(float(probit_generalized_residual([1.0], [0.0], 0.0)), 7)
    -0.7978846
    """
    s = as_tensor(x) @ as_tensor(theta1)
    return _residual(s, as_tensor(y))


def probit_loglik(theta1, data: Dataset) -> float:
    """Average standard Probit log-likelihood."""
    s = data.x @ as_tensor(theta1)
    return float(torch.where(data.y > 0.5, log_ndtr(s), log_ndtr(-s)).mean())


def _contributions(theta1, data: Dataset) -> torch.Tensor:
    residual = probit_generalized_residual(theta1, data.x, data.y)
    lagged = torch.zeros_like(residual)
    lagged[1:] = residual[1:] * residual[:-1]
    return torch.cat([data.x * residual[:, None], lagged[:, None]], dim=1)


def probit_pseudo_score(theta1, data: Dataset) -> np.ndarray:
    r"""
    Pseudo-score at ``(theta1, 0)``.

    The first q entries are the Probit score ``mean(x_t u_t)`` and the last
    is ``(1/T) sum_{t >= 2} u_{t-1} u_t`` with ``u`` the generalized
    residuals.

    Raises
    ------
    ValueError
        If fewer than two observations are given.
    """
    if data.n < 2:
        raise ValueError(f"probit_pseudo_score needs T >= 2, given T={data.n}")
    return _contributions(theta1, data).mean(dim=0).numpy()


def _latent(theta2: float, nu: np.ndarray) -> np.ndarray:
    # stationary start: u_1 = nu_1 / sqrt(1 - theta2^2)
    nu = np.array(nu, dtype=float)
    nu[..., 0] /= math.sqrt(1.0 - theta2 * theta2)
    return lfilter([1.0], [1.0, -theta2], nu, axis=-1)


def probit_simulate(params: ProbitParams, x: torch.Tensor, stream: RngStream) -> Dataset:
    """
    Draw binary outcomes for the design ``x`` (T, q).

    The AR(1) errors start from their stationary law ``N(0, 1/(1 - theta2^2))``.
    """
    nu = stream.generator().standard_normal(x.shape[0])
    u = as_tensor(_latent(params.theta2, nu))
    y = (x @ as_tensor(params.theta1) + u > 0).to(DTYPE)
    return Dataset(y, x)


class ProbitModel(ModelContract):
    """
    Dynamic Probit plug-in with ``theta2 = 0`` as the constraint.

    Parameters
    ----------
    q : int, optional
        Number of index coefficients. Default is 1.
    """

    hac_lags = None
    # Outcomes are indicators of the innovations.
    jacobian_step = 2e-2

    def __init__(self, q: int = 1) -> None:
        if q < 1:
            raise ValueError(f"q must be positive, given {q=}")
        self.q = q
        self.names = tuple(f"theta1{j + 1}" for j in range(q)) + ("theta2",)
        self.constraint_mask = (False,) * q + (True,)
        self.fixed_values = (0.0,)
        self.integer_mask = (False,) * (q + 1)
        self.lower = (-math.inf,) * q + (-0.99,)
        self.upper = (math.inf,) * q + (0.99,)

    def innovation_key(self) -> str:
        return "probit"

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        return probit_loglik(np.asarray(beta)[: self.q], data)

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        s = data.x @ as_tensor(np.asarray(betas)[:, : self.q]).T
        y = data.y[:, None]
        return torch.where(y > 0.5, log_ndtr(s), log_ndtr(-s)).mean(dim=0).numpy()

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        return _contributions(np.asarray(beta)[: self.q], data)

    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        return {"nu": torch.from_numpy(stream.generator().standard_normal(T))}

    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        if data is None or data.x is None:
            raise ValueError("Probit simulation needs the x design.")
        u = as_tensor(_latent(float(theta[-1]), innovations["nu"].numpy()))
        y = (data.x @ as_tensor(theta[: self.q]) + u > 0).to(DTYPE)
        return Dataset(y, data.x)

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: SimBank,
        data: Dataset,
    ) -> np.ndarray:
        nu = bank.stacked(self)["nu"].numpy()
        u = as_tensor(_latent(float(theta[-1]), nu))
        index = data.x @ as_tensor(theta[: self.q])
        y = (index[None, :] + u > 0).to(DTYPE)
        s = (data.x @ as_tensor(np.asarray(beta)[: self.q]))[None, :].expand_as(y)
        residual = _residual(s, y)
        lagged = (residual[:, 1:] * residual[:, :-1]).sum(dim=1) / y.shape[1]
        first = (residual[:, :, None] * data.x[None]).mean(dim=1)
        return torch.cat([first, lagged[:, None]], dim=1).numpy()

    def draw_design(self, T: int, stream: RngStream) -> Dataset:
        x = torch.from_numpy(stream.generator().standard_normal((T, self.q)))
        return Dataset(torch.zeros(T, dtype=DTYPE), x)

    def initial_beta(self, data: Dataset) -> np.ndarray:
        return np.zeros(self.q + 1)

    def load_dataset(self, path: str, demean: bool = False) -> Dataset:
        """CSV with a 0/1 column ``y`` and regressors ``x1..xq``."""
        columns = ["y"] + [f"x{j + 1}" for j in range(self.q)]
        frame = read_table(path, columns)
        return Dataset(
            as_tensor(frame["y"].to_numpy()),
            as_tensor(frame[columns[1:]].to_numpy()),
        )
