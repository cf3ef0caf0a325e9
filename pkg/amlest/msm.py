"""
Binomial Markov-Switching Multifractal (MSM) volatility model.

Returns follow ``r_t = mu + sigma * sqrt(g(M_t)) * u_t`` with Gaussian
``u_t`` and ``g`` the product of ``k_bar`` binary multipliers taking the
values ``m0`` and ``2 - m0``. Component ``k`` is renewed with probability
``gamma_k = gamma_bar * b ** (k - k_bar)``, so the last component is the
fastest and switches with probability ``gamma_bar``.

The likelihood is evaluated with a batched Hamilton filter over the
``2 ** k_bar`` states. The AML pseudo-score is built under the constraint
``k_bar = 2``: finite differences of the log-likelihood in
``(m0, gamma_bar, b, sigma)`` and the increment ``L(zeta, 3) - L(zeta, 2)``.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import statsmodels.api as sm
import torch
from scipy.stats import chi2

from . import DTYPE, Device
from .core import (
    Dataset,
    EstimationResult,
    ModelContract,
    ParamVector,
    SimBank,
    as_tensor,
    solve_aml,
)
from .errors import DegenerateRegressorError, DenseGuardError
from .filtering import FilterState, ParticleOutput, bootstrap_particle_filter, hamilton_filter
from .numerics import OptimConfig, RngStream

logger = logging.getLogger(__name__)

K_BAR_MAX = 20
DENSE_GUARD = 14
SCORE_STEP = 1e-4

_LOG_2PI = math.log(2.0 * math.pi)
_ZETA_LOWER = np.array([1.0 + 1e-6, 1e-6, 1.0 + 1e-6, 1e-8])
_ZETA_UPPER = np.array([2.0 - 1e-6, 1.0, 50.0, math.inf])


@dataclass(slots=True)
class MsmParams:
    """
    MSM parameters.

    Attributes
    ----------
    m0 : float
        Multiplier level in [1, 2); ``m0 = 1`` gives constant volatility.
    gamma_bar : float
        Switching probability of the fastest component, in (0, 1].
    b : float
        Frequency spacing, at least 1.
    sigma : float
        Unconditional volatility.
    k_bar : int
        Number of components.
    mu : float, optional
        Return mean, held fixed. Default is 0.

    Examples
    --------
    >>> MsmParams(1.5, 0.4, 2.0, 0.01, 3).gammas().tolist()
    [0.1, 0.2, 0.4]
    """

    m0: float
    gamma_bar: float
    b: float
    sigma: float
    k_bar: int
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not 1.0 <= self.m0 < 2.0:
            raise ValueError(f"m0 must lie in [1, 2), given {self.m0}")
        if not 0.0 < self.gamma_bar <= 1.0:
            raise ValueError(
                f"gamma_bar must lie in (0, 1], given {self.gamma_bar}"
            )
        if not self.b >= 1.0:
            raise ValueError(f"b must be at least 1, given {self.b}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, given {self.sigma}")
        if int(self.k_bar) != self.k_bar or self.k_bar < 1:
            raise ValueError(
                f"k_bar must be a positive integer, given {self.k_bar}"
            )
        self.k_bar = int(self.k_bar)

    @classmethod
    def from_vector(cls, values, mu: float = 0.0) -> "MsmParams":
        m0, gamma_bar, b, sigma, k_bar = (float(v) for v in values)
        return cls(m0, gamma_bar, b, sigma, int(round(k_bar)), mu)

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.m0, self.gamma_bar, self.b, self.sigma, float(self.k_bar)]
        )

    def gammas(self) -> np.ndarray:
        k = np.arange(1, self.k_bar + 1)
        return self.gamma_bar * self.b ** (k - self.k_bar)


def _check_dense(k_bar: int) -> None:
    if k_bar > DENSE_GUARD:
        raise DenseGuardError(
            f"Dense MSM state space supports k_bar <= {DENSE_GUARD}, "
            f"given {k_bar=}",
            k_bar=k_bar,
        )


def _low_counts(k_bar: int) -> torch.Tensor:
    # number of components at m0 in each state; bit 0 of component k
    # (most significant first) means M_k = m0
    d = 1 << k_bar
    shifts = torch.arange(k_bar - 1, -1, -1)
    bits = (torch.arange(d)[:, None] >> shifts) & 1
    return (k_bar - bits.sum(dim=1)).to(DTYPE)


@dataclass(slots=True)
class MsmStateSpace:
    """
    Enumeration of the ``d = 2 ** k_bar`` multiplier vectors.

    State ``j`` encodes component ``k`` in bit ``k_bar - k`` of ``j``; a
    zero bit stands for ``m0`` and a one bit for ``2 - m0``.
    """

    k_bar: int
    m0: float

    def __post_init__(self) -> None:
        if self.k_bar < 1:
            raise ValueError(f"k_bar must be positive, given {self.k_bar}")
        _check_dense(self.k_bar)

    @property
    def d(self) -> int:
        return 1 << self.k_bar

    @property
    def states(self) -> torch.Tensor:
        shifts = torch.arange(self.k_bar - 1, -1, -1)
        bits = (torch.arange(self.d)[:, None] >> shifts) & 1
        return torch.where(
            bits.bool(),
            torch.tensor(2.0 - self.m0, dtype=DTYPE),
            torch.tensor(self.m0, dtype=DTYPE),
        )

    @property
    def g_values(self) -> torch.Tensor:
        return self.states.prod(dim=1)

    @property
    def stationary(self) -> torch.Tensor:
        return torch.full((self.d,), 1.0 / self.d, dtype=DTYPE)


def _kernels(gammas: torch.Tensor) -> torch.Tensor:
    # (B, k) -> (B, k, 2, 2)
    stay = 1.0 - 0.5 * gammas
    move = 0.5 * gammas
    return torch.stack(
        [torch.stack([stay, move], -1), torch.stack([move, stay], -1)], -2
    )


def _dense_transition(gammas: torch.Tensor) -> torch.Tensor:
    B, k_bar = gammas.shape
    kernels = _kernels(gammas)
    A = torch.ones(B, 1, 1, dtype=DTYPE)
    for k in range(k_bar):
        n = A.shape[1]
        A = (A[:, :, None, :, None] * kernels[:, k, None, :, None, :]).reshape(
            B, 2 * n, 2 * n
        )
    return A


def _factored_predict(pi: torch.Tensor, gammas: torch.Tensor) -> torch.Tensor:
    B, k_bar = gammas.shape
    p = pi.reshape(B, *(2,) * k_bar)
    shape = (B,) + (1,) * k_bar
    for k in range(k_bar):
        half = 0.5 * gammas[:, k].reshape(shape)
        p = (1.0 - half) * p + half * p.flip(k + 1)
    return p.reshape(B, -1)


def _row_gammas(zeta: torch.Tensor, k_bar: int) -> torch.Tensor:
    k = torch.arange(1, k_bar + 1, dtype=DTYPE)
    return zeta[:, 1:2] * zeta[:, 2:3] ** (k - k_bar)


def msm_transition(k_bar: int, gamma_bar: float, b: float) -> torch.Tensor:
    r"""
    Dense transition matrix of the multiplier vector.

    ``a_ij = prod_k [(1 - gamma_k) 1{m_k^i = m_k^j} + gamma_k / 2]``, the
    Kronecker product of the per-component kernels
    ``[[1 - gamma_k/2, gamma_k/2], [gamma_k/2, 1 - gamma_k/2]]``.

    Raises
    ------
    DenseGuardError
        If ``k_bar`` exceeds the dense guard.

    Examples
    --------
    >>> [[round(v, 12) for v in row] for row in msm_transition(1, 0.4, 3.0).tolist()]
    [[0.8, 0.2], [0.2, 0.8]]
    """
    _check_dense(k_bar)
    zeta = torch.tensor([[1.5, gamma_bar, b, 1.0]], dtype=DTYPE)
    return _dense_transition(_row_gammas(zeta, k_bar))[0]


@torch.no_grad()
def _msm_filter(
    zeta: torch.Tensor,
    k_bar: int,
    returns: torch.Tensor,
    rows: torch.Tensor,
    mu: float = 0.0,
    keep_history: bool = False,
    dense: bool = True,
) -> FilterState:
    """
    Hamilton filter for ``B`` parameter rows ``zeta`` (B, 4) at one ``k_bar``.

    ``returns`` has shape (R, T) and row ``i`` filters ``returns[rows[i]]``.
    """
    if dense:
        _check_dense(k_bar)
    B, T = zeta.shape[0], returns.shape[1]
    d = 1 << k_bar
    low = _low_counts(k_bar)
    m0, sigma = zeta[:, 0:1], zeta[:, 3:4]
    log_g = low * torch.log(m0) + (k_bar - low) * torch.log(2.0 - m0)
    inv_var = torch.exp(-log_g) / sigma**2
    norm = -0.5 * _LOG_2PI - torch.log(sigma) - 0.5 * log_g
    gammas = _row_gammas(zeta, k_bar)

    def log_density(start: int, stop: int) -> torch.Tensor:
        e2 = (returns[:, start:stop][rows] - mu) ** 2
        return norm[:, None, :] - 0.5 * e2[:, :, None] * inv_var[:, None, :]

    if dense:
        A = _dense_transition(gammas)

        def predict(pi: torch.Tensor) -> torch.Tensor:
            return torch.bmm(pi[:, None, :], A)[:, 0]

    else:

        def predict(pi: torch.Tensor) -> torch.Tensor:
            return _factored_predict(pi, gammas)

    initial = torch.full((B, d), 1.0 / d, dtype=DTYPE)
    return hamilton_filter(log_density, predict, initial, T, keep_history)


def _as_returns(returns) -> torch.Tensor:
    returns = as_tensor(returns)
    if returns.numel() == 0:
        raise ValueError("MSM likelihood needs at least one return.")
    if not torch.isfinite(returns).all():
        raise ValueError("MSM likelihood got non-finite returns.")
    return returns.reshape(1, -1)


def msm_loglik(params: MsmParams, returns, dense: bool = True) -> float:
    r"""
    Average Hamilton-filter log-likelihood ``L_T(theta)``.

    Parameters
    ----------
    params : MsmParams
        Model parameters.

    returns : array-like
        Return series of length T >= 1.

    dense : bool, optional
        Use the dense ``d x d`` transition (guarded at ``k_bar <= 14``)
        instead of the factored per-component update. Default is True.

    Raises
    ------
    ValueError
        If the returns are empty or not finite.
    DenseGuardError
        If ``dense`` and ``k_bar`` exceeds the guard.
    """
    r = _as_returns(returns)
    zeta = as_tensor(params.to_vector()[:4])[None, :]
    state = _msm_filter(
        zeta, params.k_bar, r, torch.zeros(1, dtype=torch.long), params.mu, dense=dense
    )
    return float(state.loglik_accum[0]) / r.shape[1]


def _score_rows(zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center row followed by the clipped plus and minus rows, and spacings."""
    zeta = np.asarray(zeta, dtype=float)
    h = SCORE_STEP * np.maximum(1.0, np.abs(zeta))
    plus = np.minimum(zeta + h, _ZETA_UPPER)
    minus = np.maximum(zeta - h, _ZETA_LOWER)
    rows = np.repeat(zeta[None, :], 9, axis=0)
    rows[1 + np.arange(4), np.arange(4)] = plus
    rows[5 + np.arange(4), np.arange(4)] = minus
    return rows, plus - minus


def msm_score_contributions(zeta, returns, mu: float = 0.0) -> torch.Tensor:
    """Per-date pseudo-score contributions, shape (T, 5)."""
    r = _as_returns(returns)
    rows, spacing = _score_rows(zeta)
    zero = torch.zeros(9, dtype=torch.long)
    two = _msm_filter(as_tensor(rows), 2, r, zero, mu, keep_history=True)
    three = _msm_filter(
        as_tensor(rows[:1]), 3, r, zero[:1], mu, keep_history=True
    )
    hist = two.history
    d_zeta = (hist[1:5] - hist[5:9]) / as_tensor(spacing)[:, None]
    increment = three.history[0] - hist[0]
    return torch.cat([d_zeta, increment[None, :]], dim=0).T


def msm_pseudo_score(zeta, returns, mu: float = 0.0) -> np.ndarray:
    r"""
    Pseudo-score under ``k_bar = 2``.

    The first four components are central differences (relative step
    ``1e-4``, clipped to the parameter domain) of ``L_T(zeta, 2)``; the
    fifth is ``L_T(zeta, 3) - L_T(zeta, 2)``.
    """
    return msm_score_contributions(zeta, returns, mu).mean(dim=0).numpy()


def _path_scores(zeta, paths: torch.Tensor, mu: float) -> torch.Tensor:
    """Pseudo-scores of ``H`` paths (H, T) at one ``zeta``, shape (H, 5)."""
    H, T = paths.shape
    rows, spacing = _score_rows(zeta)
    path_index = torch.arange(H).repeat_interleave(9)
    two = _msm_filter(as_tensor(rows).repeat(H, 1), 2, paths, path_index, mu)
    three = _msm_filter(
        as_tensor(rows[:1]).repeat(H, 1), 3, paths, torch.arange(H), mu
    )
    ll2 = two.loglik_accum.reshape(H, 9) / T
    ll3 = three.loglik_accum / T
    d_zeta = (ll2[:, 1:5] - ll2[:, 5:9]) / as_tensor(spacing)
    return torch.cat([d_zeta, (ll3 - ll2[:, 0])[:, None]], dim=1)


def _draw(stream: RngStream, T: int, K: int) -> dict[str, torch.Tensor]:
    generator = stream.generator()
    return {
        "switch": torch.from_numpy(generator.random((T, K))),
        "bits": torch.from_numpy(generator.random((T, K), dtype=np.float32) < 0.5),
        "u": torch.from_numpy(generator.standard_normal(T)),
    }


def _component_bits(
    theta: np.ndarray, switch: torch.Tensor, bits: torch.Tensor
):
    """Yield, per component ``k = 1..k_bar``, its level bits of shape (H, T)."""
    _, gamma_bar, b, _, k_bar = theta
    k_bar = int(round(k_bar))
    if k_bar > switch.shape[-1]:
        raise ValueError(
            f"k_bar={k_bar} exceeds the {switch.shape[-1]} drawn components"
        )
    T = switch.shape[1]
    t_index = torch.arange(T)
    for k in range(1, k_bar + 1):
        # column 0 holds the fastest component for every k_bar
        column = k_bar - k
        renewed = switch[:, :, column] < gamma_bar * b ** (k - k_bar)
        renewed[:, 0] = True
        last = torch.where(renewed, t_index, 0).cummax(dim=1).values
        yield torch.gather(bits[:, :, column], 1, last)


def _simulate_paths(
    theta: np.ndarray, innovations: dict[str, torch.Tensor], mu: float
) -> torch.Tensor:
    m0, sigma = float(theta[0]), float(theta[3])
    switch, bits, u = (innovations[k] for k in ("switch", "bits", "u"))
    log_g = torch.zeros(u.shape, dtype=DTYPE)
    high = torch.tensor(math.log(2.0 - m0), dtype=DTYPE)
    low = torch.tensor(math.log(m0), dtype=DTYPE)
    for level in _component_bits(theta, switch, bits):
        log_g += torch.where(level, high, low)
    return mu + sigma * torch.exp(0.5 * log_g) * u


def msm_simulate(
    params: MsmParams,
    T: int,
    stream: RngStream,
    k_bar_max: int = K_BAR_MAX,
    return_states: bool = False,
):
    """
    Simulate ``T`` returns.

    The initial multipliers are drawn from the uniform stationary law and
    each component is renewed independently with probability ``gamma_k``.
    With ``return_states`` the multipliers (T, k_bar), ordered
    ``k = 1..k_bar``, are returned as well.
    """
    innovations = {
        name: value[None] for name, value in _draw(stream, T, k_bar_max).items()
    }
    theta = params.to_vector()
    returns = _simulate_paths(theta, innovations, params.mu)[0]
    if not return_states:
        return returns
    states = torch.stack(
        [
            torch.where(level[0], as_tensor(2.0 - params.m0), as_tensor(params.m0))
            for level in _component_bits(
                theta, innovations["switch"], innovations["bits"]
            )
        ],
        dim=1,
    )
    return returns, states


class MsmModel(ModelContract):
    """
    MSM plug-in with ``k_bar = 2`` as the constraint.

    Parameters
    ----------
    k_bar_max : int, optional
        Largest number of components the simulator supports. Default is 20.

    mu : float, optional
        Fixed return mean. Default is 0.

    dense : bool, optional
        Whether the filters use the dense transition. Default is True.
    """

    names = ("m0", "gamma_bar", "b", "sigma", "k_bar")
    constraint_mask = (False, False, False, False, True)
    fixed_values = (2.0,)
    integer_mask = (False, False, False, False, True)
    hac_lags = None
    # Multiplier renewals are indicators of the innovations.
    jacobian_step = 2e-2

    def __init__(
        self, k_bar_max: int = K_BAR_MAX, mu: float = 0.0, dense: bool = True
    ) -> None:
        if k_bar_max < 3:
            raise ValueError(f"k_bar_max must be at least 3, given {k_bar_max}")
        self.k_bar_max, self.mu, self.dense = k_bar_max, mu, dense
        self.lower = tuple(_ZETA_LOWER) + (1.0,)
        self.upper = tuple(_ZETA_UPPER) + (float(k_bar_max),)

    def innovation_key(self) -> str:
        return f"msm:{self.k_bar_max}"

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        return float(self.loglik_constrained_batch(np.asarray(beta)[None], data)[0])

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        zeta = np.asarray(betas, dtype=float)[:, :4]
        valid = ((zeta >= _ZETA_LOWER) & (zeta <= _ZETA_UPPER)).all(axis=1)
        safe = np.where(valid[:, None], zeta, _ZETA_LOWER + 0.5)
        r = _as_returns(data.y)
        state = _msm_filter(
            as_tensor(safe),
            2,
            r,
            torch.zeros(len(safe), dtype=torch.long),
            self.mu,
            dense=self.dense,
        )
        values = state.loglik_accum.numpy() / r.shape[1]
        return np.where(valid, values, -np.inf)

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        return msm_score_contributions(np.asarray(beta)[:4], data.y, self.mu)

    def draw_innovations(
        self, stream: RngStream, T: int, data: Dataset | None = None
    ) -> dict[str, torch.Tensor]:
        return _draw(stream, T, self.k_bar_max)

    def simulate_from(
        self,
        theta: np.ndarray,
        innovations: dict[str, torch.Tensor],
        data: Dataset | None = None,
    ) -> Dataset:
        batch = {name: value[None] for name, value in innovations.items()}
        return Dataset(_simulate_paths(theta, batch, self.mu)[0])

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: SimBank,
        data: Dataset,
    ) -> np.ndarray:
        paths = _simulate_paths(theta, bank.stacked(self), self.mu)
        return _path_scores(np.asarray(beta)[:4], paths, self.mu).numpy()

    def initial_beta(self, data: Dataset) -> np.ndarray:
        scale = max(float(data.y.std()), 1e-6)
        return np.array([1.4, 0.5, 3.0, scale, 2.0])

    def constrained_starts(self, data: Dataset) -> list[np.ndarray]:
        start = self.initial_beta(data)
        return [start, np.array([1.7, 0.2, 6.0, start[3], 2.0])]


def msm_aml_fit(
    returns,
    H: int,
    cfg: OptimConfig,
    seed: int = 0,
    replication: int = 0,
    k_bar_max: int = K_BAR_MAX,
    beta_hat: ParamVector | None = None,
    compute_variance: bool = True,
) -> EstimationResult:
    """
    AML estimate of ``(m0, gamma_bar, b, sigma, k_bar)`` from a return series.

    ``k_bar`` is optimized on the piecewise-linear extension of the
    simulated pseudo-score and rounded to the nearest integer.

    Raises
    ------
    ValueError
        If fewer than 100 returns are given.
    """
    y = as_tensor(returns)
    if y.numel() < 100:
        raise ValueError(f"msm_aml_fit needs T >= 100, given T={y.numel()}")
    model = MsmModel(k_bar_max)
    bank = SimBank.create(seed, replication, H, y.numel())
    return solve_aml(
        model,
        Dataset(y),
        bank,
        cfg,
        beta_hat=beta_hat,
        compute_variance=compute_variance,
    )


def msm_particle_filter(
    params: MsmParams,
    returns,
    N: int,
    stream: RngStream,
    alphas: tuple[float, ...] = (0.01, 0.05),
    device: Device = Device.CPU,
) -> ParticleOutput:
    r"""
    One-step-ahead VaR and ES forecasts from a bootstrap particle filter.

    Each particle carries ``k_bar`` binary components (no state-space
    enumeration), so any ``k_bar`` is supported. The forecast for date
    ``t`` uses the returns before ``t`` only.

    Parameters
    ----------
    params : MsmParams
        Model parameters.

    returns : array-like
        Return series.

    N : int
        Number of particles, at least 1000.

    stream : RngStream
        Seeds the filter's torch generator.

    alphas : tuple[float, ...], optional
        Tail probabilities. Default is (0.01, 0.05).

    device : Device, optional
        Device of the particle cloud. Default is ``Device.CPU``.

    Returns
    -------
    ParticleOutput
        VaR (positive loss), ES and ESS per date.

    Raises
    ------
    ValueError
        If ``N < 1000``.
    ParticleCollapseError
        If all weights vanish at some date.
    """
    if N < 1000:
        raise ValueError(f"msm_particle_filter needs N >= 1000, given {N=}")
    torch_device = torch.device("cuda" if device is Device.GPU else "cpu")
    generator = torch.Generator(device=torch_device)
    generator.manual_seed(int(stream.generator().integers(2**62)))
    gammas = as_tensor(params.gammas()).to(torch_device)
    k_bar = params.k_bar
    high = as_tensor(math.log(2.0 - params.m0)).to(torch_device)
    low = as_tensor(math.log(params.m0)).to(torch_device)
    mu, sigma = params.mu, params.sigma

    def log_g(particles: torch.Tensor) -> torch.Tensor:
        return torch.where(particles, high, low).sum(dim=1)

    def propagate(particles: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        shape = particles.shape
        renewed = torch.rand(shape, generator=gen, dtype=DTYPE, device=torch_device) < gammas
        fresh = torch.rand(shape, generator=gen, dtype=DTYPE, device=torch_device) < 0.5
        return torch.where(renewed, fresh, particles)

    def predictive(particles: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        noise = torch.randn(
            particles.shape[0], generator=gen, dtype=DTYPE, device=torch_device
        )
        return mu + sigma * torch.exp(0.5 * log_g(particles)) * noise

    def log_weight(particles: torch.Tensor, r: float) -> torch.Tensor:
        lg = log_g(particles)
        return -0.5 * lg - (r - mu) ** 2 / (2.0 * sigma**2 * torch.exp(lg))

    initial = (
        torch.rand((N, k_bar), generator=generator, dtype=DTYPE, device=torch_device)
        < 0.5
    )
    return bootstrap_particle_filter(
        as_tensor(returns).reshape(-1),
        initial,
        propagate,
        predictive,
        log_weight,
        tuple(alphas),
        generator,
    )


@dataclass(slots=True)
class EsRegression:
    """OLS fit of realized tail returns on ES forecasts with the (0, 1) Wald test."""

    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    r_squared: float
    wald: float
    p_value: float
    n: int

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.__slots__}


def es_backtest(tail_returns, es_forecasts) -> EsRegression:
    r"""
    Regress realized tail returns on the matching ES forecasts.

    The Wald statistic tests ``(intercept, slope) = (0, 1)`` with the
    conventional OLS covariance and is referred to a chi-squared law with
    two degrees of freedom.

    Raises
    ------
    ValueError
        If fewer than 10 observations are given or the lengths differ.
    DegenerateRegressorError
        If the ES forecasts are constant.

    Examples
    --------
    >>> import numpy as np
    >>> x = -np.linspace(0.02, 0.05, 12)
    >>> fit = es_backtest(x, x)
    >>> round(fit.slope, 10), round(fit.p_value, 10)
    (1.0, 1.0)
    """
    y = np.asarray(tail_returns, dtype=float).reshape(-1)
    x = np.asarray(es_forecasts, dtype=float).reshape(-1)
    if y.shape != x.shape:
        raise ValueError(f"length mismatch: {y.size} returns, {x.size} forecasts")
    if y.size < 10:
        raise ValueError(f"es_backtest needs at least 10 observations, given {y.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateRegressorError("ES forecasts are constant.")
    fit = sm.OLS(y, sm.add_constant(x, has_constant="add")).fit()
    params = np.asarray(fit.params)
    diff = params - np.array([0.0, 1.0])
    if np.allclose(diff, 0.0, rtol=0.0, atol=1e-10):
        wald = 0.0
    else:
        try:
            wald = float(diff @ np.linalg.solve(fit.cov_params(), diff))
        except np.linalg.LinAlgError:
            wald = math.inf
    se = np.asarray(fit.bse)
    return EsRegression(
        intercept=float(params[0]),
        slope=float(params[1]),
        se_intercept=float(se[0]),
        se_slope=float(se[1]),
        r_squared=float(fit.rsquared),
        wald=wald,
        p_value=float(chi2.sf(wald, 2)),
        n=int(y.size),
    )
