"""
Stable distributions with parameters ``(a, b, c, mu)``.

The constrained model is the Cauchy law (``a = 1``, ``b = 0``), whose
likelihood is explicit. The pseudo-score completes the Cauchy score in
``(c, mu)`` with two likelihood differences: towards the Gaussian
(``a = 2``, a Normal with variance ``2 c^2``) and towards the Landau law
(``a = 1``, ``b = 1``). Simulation uses the Chambers-Mallows-Stuck
transform in the S1 parametrization.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.stats import levy_stable

from . import DTYPE, LandauForm
from .core import (
    Dataset,
    EstimationResult,
    ModelContract,
    ParamVector,
    SimBank,
    as_tensor,
    solve_aml,
)
from .numerics import OptimConfig, RngStream

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)
# exp(700) is the largest power that stays finite in float64
_LANDAU_CLAMP = -700.0


@dataclass(slots=True)
class StableParams:
    """
    Stable parameters.

    Attributes
    ----------
    a : float
        Stability index in (0, 2].
    b : float
        Skewness in [-1, 1].
    c : float
        Scale, positive.
    mu : float
        Location.
    """

    a: float
    b: float
    c: float
    mu: float

    def __post_init__(self) -> None:
        if not 0.0 < self.a <= 2.0:
            raise ValueError(f"a must lie in (0, 2], given {self.a}")
        if not -1.0 <= self.b <= 1.0:
            raise ValueError(f"b must lie in [-1, 1], given {self.b}")
        if not self.c > 0.0:
            raise ValueError(f"c must be positive, given {self.c}")

    @classmethod
    def from_vector(cls, values) -> "StableParams":
        return cls(*(float(v) for v in values))

    def to_vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.mu])


def cauchy_loglik(c: float, mu: float, y) -> float:
    r"""
    Average Cauchy log-likelihood ``-log(pi c) - mean(log(1 + ((y - mu)/c)^2))``.

    Examples
    --------
    >>> import math
    >>> abs(cauchy_loglik(2.0, 1.0, [1.0]) + math.log(2.0 * math.pi)) < 1e-15
    True
    """
    if not c > 0:
        raise ValueError(f"c must be positive, given {c}")
    z = (as_tensor(y) - mu) / c
    return float(-_LOG_PI - math.log(c) - torch.log1p(z * z).mean())


def _cauchy_batch(c: torch.Tensor, mu: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    z = (y[None, :] - mu[:, None]) / c[:, None]
    return -_LOG_PI - torch.log(c) - torch.log1p(z * z).mean(dim=1)


def landau_logpdf(
    y, c: float, mu: float, form: LandauForm = LandauForm.Approximation
) -> torch.Tensor:
    r"""
    Log density of the Landau law with scale ``c`` and location ``mu``.

    The approximation is
    ``f(y) = exp(-z/2 - exp(-z)/2) / (sqrt(2 pi) c)`` with
    ``z = (y - mu) / c``, evaluated with ``z`` clamped at -700. The exact
    form is the stable density with ``a = 1``, ``b = 1`` and scale
    ``pi / 2`` in ``z``.

    Examples
    --------
    >>> import math
    >>> value = float(landau_logpdf([0.3], 2.0, 0.3)[0])
    >>> abs(value - (-0.5 - math.log(math.sqrt(2 * math.pi) * 2.0))) < 1e-14
    True
    """
    z = (as_tensor(y) - mu) / c
    if form is LandauForm.Exact:
        values = levy_stable.logpdf(z.numpy(), 1.0, 1.0, scale=math.pi / 2.0)
        return as_tensor(values) - math.log(c)
    z = z.clamp_min(_LANDAU_CLAMP)
    return -0.5 * _LOG_2PI - math.log(c) - 0.5 * z - 0.5 * torch.exp(-z)


def _contributions(
    c: float, mu: float, y: torch.Tensor, form: LandauForm
) -> torch.Tensor:
    # columns in parameter order (a, b, c, mu); y may carry leading dims
    z = (y - mu) / c
    log_cauchy = -_LOG_PI - math.log(c) - torch.log1p(z * z)
    log_normal = -0.5 * _LOG_2PI - math.log(math.sqrt(2.0) * c) - 0.25 * z * z
    if form is LandauForm.Exact:
        log_landau = landau_logpdf(y.reshape(-1), c, mu, form).reshape(y.shape)
    else:
        zc = z.clamp_min(_LANDAU_CLAMP)
        log_landau = (
            -0.5 * _LOG_2PI - math.log(c) - 0.5 * zc - 0.5 * torch.exp(-zc)
        )
    d_c = -1.0 / c + 2.0 * z * z / (c * (1.0 + z * z))
    d_mu = 2.0 * z / (c * (1.0 + z * z))
    return torch.stack(
        [log_normal - log_cauchy, log_landau - log_cauchy, d_c, d_mu], dim=-1
    )


def stable_pseudo_score(
    c: float, mu: float, y, form: LandauForm = LandauForm.Approximation
) -> np.ndarray:
    r"""
    Pseudo-score at ``(1, 0, c, mu)``, ordered as ``(a, b, c, mu)``.

    The ``a`` entry is ``L(2, 0, c, mu) - L(1, 0, c, mu)`` with the Normal
    ``(mu, 2 c^2)`` likelihood, the ``b`` entry is the Landau minus the
    Cauchy log-likelihood, and the ``(c, mu)`` entries are the analytic
    Cauchy score.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, given {c}")
    return _contributions(c, mu, as_tensor(y), form).mean(dim=-2).numpy()


def _cms(
    a: float,
    b: float,
    c: float,
    mu: float,
    V: torch.Tensor,
    W: torch.Tensor,
) -> torch.Tensor:
    if abs(a - 1.0) < 1e-10:
        half_pi = 0.5 * math.pi
        shifted = half_pi + b * V
        X = (
            shifted * torch.tan(V)
            - b * torch.log(half_pi * W * torch.cos(V) / shifted)
        ) / half_pi
        return c * X + b * c * math.log(c) / half_pi + mu
    t = b * math.tan(0.5 * math.pi * a)
    B = math.atan(t) / a
    S = (1.0 + t * t) ** (0.5 / a)
    X = (
        S
        * torch.sin(a * (V + B))
        / torch.cos(V) ** (1.0 / a)
        * (torch.cos(V - a * (V + B)) / W) ** ((1.0 - a) / a)
    )
    return c * X + mu


def _draw(stream: RngStream, T: int) -> dict[str, torch.Tensor]:
    generator = stream.generator()
    return {
        "V": torch.from_numpy(
            generator.uniform(-0.5 * math.pi, 0.5 * math.pi, T)
        ),
        "W": torch.from_numpy(generator.standard_exponential(T)),
    }


def cms_simulate(params: StableParams, T: int, stream: RngStream) -> torch.Tensor:
    """
    ``T`` i.i.d. stable draws by the Chambers-Mallows-Stuck transform.

    Uses ``V ~ U(-pi/2, pi/2)`` and ``W ~ Exp(1)``; ``a = 2`` gives a
    Normal with variance ``2 c^2`` and ``(a, b) = (1, 0)`` a Cauchy law.
    """
    draws = _draw(stream, T)
    return _cms(params.a, params.b, params.c, params.mu, draws["V"], draws["W"])


class StableModel(ModelContract):
    """
    Stable plug-in with ``(a, b) = (1, 0)`` as the constraint.

    Parameters
    ----------
    landau : LandauForm, optional
        Landau density used in the ``b`` entry of the pseudo-score.
        Default is ``LandauForm.Approximation``.
    """

    names = ("a", "b", "c", "mu")
    constraint_mask = (True, True, False, False)
    fixed_values = (1.0, 0.0)
    integer_mask = (False, False, False, False)
    lower = (0.5, -1.0, 1e-8, -math.inf)
    upper = (2.0, 1.0, math.inf, math.inf)
    hac_lags = 0

    def __init__(self, landau: LandauForm = LandauForm.Approximation) -> None:
        if not isinstance(landau, LandauForm):
            raise TypeError(
                f"landau must be a LandauForm, given {type(landau)=}"
            )
        self.landau = landau

    def innovation_key(self) -> str:
        return "stable"

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        return cauchy_loglik(float(beta[2]), float(beta[3]), data.y)

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        betas = as_tensor(betas)
        c = betas[:, 2]
        values = _cauchy_batch(c.clamp_min(1e-300), betas[:, 3], data.y)
        return torch.where(c > 0, values, -torch.inf).numpy()

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        return _contributions(float(beta[2]), float(beta[3]), data.y, self.landau)

    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        return _draw(stream, T)

    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        a, b, c, mu = (float(v) for v in theta)
        return Dataset(_cms(a, b, c, mu, innovations["V"], innovations["W"]))

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: SimBank,
        data: Dataset,
    ) -> np.ndarray:
        draws = bank.stacked(self)
        a, b, c, mu = (float(v) for v in theta)
        paths = _cms(a, b, c, mu, draws["V"], draws["W"])
        scores = _contributions(float(beta[2]), float(beta[3]), paths, self.landau)
        return scores.mean(dim=1).numpy()

    def initial_beta(self, data: Dataset) -> np.ndarray:
        """Median and half the interquartile range."""
        q1, median, q3 = torch.quantile(
            data.y, torch.tensor([0.25, 0.5, 0.75], dtype=DTYPE)
        ).tolist()
        return np.array([1.0, 0.0, max(0.5 * (q3 - q1), 1e-6), median])


def stable_aml_fit(
    y,
    H: int,
    cfg: OptimConfig,
    seed: int = 0,
    replication: int = 0,
    landau: LandauForm = LandauForm.Approximation,
    beta_hat: ParamVector | None = None,
    compute_variance: bool = True,
) -> EstimationResult:
    """
    AML estimate of ``(a, b, c, mu)`` from the Cauchy fit.

    Raises
    ------
    ValueError
        If fewer than 100 observations are given.
    """
    y = as_tensor(y)
    if y.numel() < 100:
        raise ValueError(f"stable_aml_fit needs T >= 100, given T={y.numel()}")
    model = StableModel(landau)
    bank = SimBank.create(seed, replication, H, y.numel())
    return solve_aml(
        model,
        Dataset(y),
        bank,
        cfg,
        beta_hat=beta_hat,
        compute_variance=compute_variance,
    )
