"""
ARCH(1)-like stochastic volatility.

``r_{t+1} = mu + sigma_t u_{t+1}`` with ``sigma_t^2 = k_t + eta_t``,
``k_t = omega + alpha eps_t^2`` and a latent AR(1) correction
``eta_t = rho eta_{t-1} + varpi chi_t``; ``u`` and ``chi`` are standard
Gaussian and ``sigma_t^2`` is floored at a small positive value.

Under ``rho = 0`` the likelihood is a product of univariate integrals over
``eta``, computed by adaptive quadrature or Gauss-Hermite nodes. The
pseudo-score replaces the latent volatility functionals in the latent
score by those of an ARCH(1) model fitted to the same returns.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch.special import ndtr

from . import DTYPE, QuadratureKind
from .core import Dataset, ModelContract, SimBank, as_tensor
from .errors import NonFiniteObjectiveError, QuadratureError
from .numerics import QuadratureRule, RngStream, gauss_hermite_nodes, integrate

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-8

_LOG_2PI = math.log(2.0 * math.pi)
_ALPHA_MAX = 0.999
_QML_ITERS = 200
_QML_HALVINGS = 30
_QML_TOL = 1e-12


@dataclass(slots=True)
class GsvParams:
    """Parameters ``(mu, omega, alpha, varpi, rho)``."""

    mu: float
    omega: float
    alpha: float
    varpi: float
    rho: float = 0.0

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, given {self.omega}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), given {self.alpha}")
        if not self.varpi >= 0:
            raise ValueError(f"varpi must be nonnegative, given {self.varpi}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), given {self.rho}")

    @classmethod
    def from_vector(cls, values) -> "GsvParams":
        return cls(*(float(v) for v in values))

    def to_vector(self) -> np.ndarray:
        return np.array([self.mu, self.omega, self.alpha, self.varpi, self.rho])


@dataclass(slots=True)
class FilteredVol:
    """
    Plug-in volatility functionals for dates ``1..T-1``.

    Attributes
    ----------
    var, inv_var, inv_var2 : torch.Tensor
        ``sigma_hat^2``, ``1 / sigma_hat^2`` and ``1 / sigma_hat^4``.
    arch : numpy.ndarray
        The fitted ARCH(1) parameters ``(mu, omega, alpha)``.
    """

    var: torch.Tensor
    inv_var: torch.Tensor
    inv_var2: torch.Tensor
    arch: np.ndarray


def _draw(stream: RngStream, T: int) -> dict[str, torch.Tensor]:
    generator = stream.generator()
    return {
        "u": torch.from_numpy(generator.standard_normal(T)),
        "chi": torch.from_numpy(generator.standard_normal(T)),
        "eta0": torch.from_numpy(generator.standard_normal(1)),
    }


def _simulate_paths(
    theta: np.ndarray,
    u: torch.Tensor,
    chi: torch.Tensor,
    eta0: torch.Tensor,
    floor: float,
) -> tuple[torch.Tensor, int]:
    """Simulate ``H`` paths from draws of shape (H, T); returns paths and floor hits."""
    mu, omega, alpha, varpi, rho = (float(v) for v in theta)
    H, T = u.shape
    returns = torch.empty(H, T, dtype=DTYPE)
    eps2 = torch.full((H,), omega / (1.0 - alpha), dtype=DTYPE)
    eta = varpi / math.sqrt(1.0 - rho * rho) * eta0.reshape(H)
    hits = 0
    for t in range(T):
        eta = rho * eta + varpi * chi[:, t]
        var = omega + alpha * eps2 + eta
        low = var < floor
        hits += int(low.sum())
        var = torch.where(low, floor, var)
        eps = torch.sqrt(var) * u[:, t]
        returns[:, t] = mu + eps
        eps2 = eps * eps
    return returns, hits


def gsv_simulate(
    params: GsvParams,
    T: int,
    stream: RngStream,
    floor: float = VARIANCE_FLOOR,
) -> tuple[torch.Tensor, int]:
    """
    Simulate ``T`` returns.

    ``eps_0^2`` starts at ``omega / (1 - alpha)`` and ``eta`` at a draw from
    its stationary law. Returns the series and the number of dates on
    which the variance was floored.
    """
    draws = _draw(stream, T)
    returns, hits = _simulate_paths(
        params.to_vector(), draws["u"][None], draws["chi"][None], draws["eta0"], floor
    )
    if hits:
        logger.warning(f"Variance floored on {hits} of {T} simulated dates")
    return returns[0], hits


def _pairs(r: torch.Tensor, mu) -> tuple[torch.Tensor, torch.Tensor]:
    # (current residual, lagged squared residual) for dates 1..T-1
    e = r - mu
    return e[..., 1:], e[..., :-1] ** 2


def _normal_logpdf(e2: torch.Tensor, var: torch.Tensor) -> torch.Tensor:
    return -0.5 * (_LOG_2PI + torch.log(var) + e2 / var)


def _loglik_gauss_hermite(
    zeta: torch.Tensor, r: torch.Tensor, nodes: int, floor: float
) -> torch.Tensor:
    # zeta (B, 4) -> (B,)
    points, weights = gauss_hermite_nodes(nodes)
    mu, omega, alpha, varpi = (zeta[:, j : j + 1] for j in range(4))
    e, eps2 = _pairs(r[None, :], mu)
    k = omega + alpha * eps2
    var = (k[..., None] + varpi[..., None] * points).clamp_min(floor)
    log_terms = torch.log(weights) + _normal_logpdf((e * e)[..., None], var)
    return torch.logsumexp(log_terms, dim=-1).mean(dim=-1)


def _loglik_adaptive(
    zeta: np.ndarray, r: torch.Tensor, rule: QuadratureRule, floor: float
) -> float:
    mu, omega, alpha, varpi = (float(v) for v in zeta)
    e, eps2 = _pairs(r, mu)
    k = omega + alpha * eps2
    total = 0.0
    for i, (e_i, k_i) in enumerate(zip(e.tolist(), k.tolist())):
        lo = max(-8.0 * varpi, floor - k_i)
        hi = 8.0 * varpi

        def integrand(eta: float) -> float:
            var = k_i + eta
            return math.exp(
                -0.5 * (_LOG_2PI + math.log(var) + e_i * e_i / var)
                - 0.5 * (_LOG_2PI + 2.0 * math.log(varpi) + (eta / varpi) ** 2)
            )

        # mass of eta below the floor keeps the floored variance
        below = math.exp(-0.5 * (_LOG_2PI + math.log(floor) + e_i * e_i / floor))
        below *= float(ndtr(torch.tensor((floor - k_i) / varpi, dtype=DTYPE)))
        density = below + (integrate(integrand, lo, hi, rule, index=i) if lo < hi else 0.0)
        if not density > 0.0:
            raise QuadratureError(
                f"Non-positive likelihood increment at date {i}",
                estimate=density,
                index=i,
            )
        total += math.log(density)
    return total / e.numel()


def gsv_loglik_constrained(
    zeta,
    returns,
    rule: QuadratureRule | None = None,
    floor: float = VARIANCE_FLOOR,
) -> float:
    r"""
    Average log-likelihood under ``rho = 0``.

    Each increment is
    ``int phi(r_i; mu, max(k_i + eta, floor)) varpi^{-1} phi(eta / varpi) d eta``
    with ``k_i = omega + alpha (r_{i-1} - mu)^2``, for ``i = 1..T-1``.

    Parameters
    ----------
    zeta : array-like
        ``(mu, omega, alpha, varpi)``.

    returns : array-like
        Return series of length T >= 2.

    rule : QuadratureRule, optional
        Adaptive (default) or Gauss-Hermite.

    floor : float, optional
        Variance floor. Default is 1e-8.

    Raises
    ------
    QuadratureError
        If an adaptive integral fails; the date index is attached.
    """
    rule = QuadratureRule() if rule is None else rule
    zeta = np.asarray(zeta, dtype=float)
    r = as_tensor(returns)
    if r.numel() < 2:
        raise ValueError("gsv_loglik_constrained needs at least two returns.")
    if rule.kind is QuadratureKind.GaussHermite:
        return float(_loglik_gauss_hermite(as_tensor(zeta)[None], r, rule.nodes, floor)[0])
    return _loglik_adaptive(zeta, r, rule, floor)


def _arch_loglik(r: torch.Tensor, params: torch.Tensor) -> torch.Tensor:
    e, eps2 = _pairs(r, params[:, 0:1])
    var = params[:, 1:2] + params[:, 2:3] * eps2
    return _normal_logpdf(e * e, var).mean(dim=1)


def _arch_scores(r: torch.Tensor, params: torch.Tensor) -> torch.Tensor:
    mu, omega, alpha = (params[:, j : j + 1] for j in range(3))
    e, eps2 = _pairs(r, mu)
    lagged = r[:, :-1] - mu
    var = omega + alpha * eps2
    q = 0.5 * (e * e / var - 1.0) / var
    d_mu = e / var - 2.0 * alpha * lagged * q
    return torch.stack([d_mu, q, q * eps2], dim=-1)


def _arch_valid(params: torch.Tensor) -> torch.Tensor:
    return (params[:, 1] > 0.0) & (params[:, 2] >= 0.0) & (params[:, 2] <= _ALPHA_MAX)


@torch.no_grad()
def fit_arch1(r: torch.Tensor, start: torch.Tensor) -> torch.Tensor:
    """
    Gaussian QML fit of ARCH(1) to each row of ``r`` (H, T).

    BHHH steps with step halving from ``start`` (H, 3); every accepted
    step does not decrease the quasi-likelihood.

    Raises
    ------
    NonFiniteObjectiveError
        If the quasi-likelihood is not finite at a start.
    """
    params = start.clone()
    params[:, 1] = params[:, 1].clamp_min(1e-8)
    params[:, 2] = params[:, 2].clamp(0.0, _ALPHA_MAX)
    ll = _arch_loglik(r, params)
    if not torch.isfinite(ll).all():
        raise NonFiniteObjectiveError(
            "ARCH(1) quasi-likelihood is not finite at the start",
            point=params.numpy(),
        )
    eye = 1e-12 * torch.eye(3, dtype=DTYPE)
    for _ in range(_QML_ITERS):
        scores = _arch_scores(r, params)
        grad = scores.sum(dim=1)
        outer = scores.transpose(1, 2) @ scores + eye
        step = torch.linalg.solve(outer, grad[..., None])[..., 0]
        scale = torch.ones(params.shape[0], dtype=DTYPE)
        accepted = torch.zeros(params.shape[0], dtype=torch.bool)
        new_params, new_ll = params.clone(), ll.clone()
        for _ in range(_QML_HALVINGS):
            candidate = params + scale[:, None] * step
            valid = _arch_valid(candidate)
            cand_ll = torch.where(
                valid,
                _arch_loglik(r, torch.where(valid[:, None], candidate, params)),
                -torch.inf,
            )
            better = ~accepted & (cand_ll >= ll)
            new_params[better] = candidate[better]
            new_ll[better] = cand_ll[better]
            accepted |= better
            if bool(accepted.all()):
                break
            scale = torch.where(accepted, scale, 0.5 * scale)
        gain = new_ll - ll
        params, ll = new_params, new_ll
        if bool((gain.abs() <= _QML_TOL * (1.0 + ll.abs())).all()):
            break
    return params


def _filtered(r: torch.Tensor, arch: torch.Tensor) -> torch.Tensor:
    _, eps2 = _pairs(r, arch[:, 0:1])
    return arch[:, 1:2] + arch[:, 2:3] * eps2


def gsv_filter_plugin(zeta, returns) -> FilteredVol:
    """
    ARCH(1) plug-in filter.

    Fits ARCH(1) by Gaussian QML (started from ``(mu, omega, alpha)`` of
    ``zeta``) and returns ``sigma_hat_t^2 = omega_hat + alpha_hat
    (r_{t-1} - mu_hat)^2`` with its inverse and squared inverse.
    """
    r = as_tensor(returns)[None, :]
    arch = fit_arch1(r, as_tensor(np.asarray(zeta, dtype=float)[:3])[None, :])
    var = _filtered(r, arch)[0]
    return FilteredVol(var, 1.0 / var, var ** -2, arch[0].numpy())


def _contributions(zeta, r: torch.Tensor, var: torch.Tensor) -> torch.Tensor:
    """Per-date pseudo-score contributions (..., T-1, 5) from plug-in variances."""
    mu, omega, alpha, varpi = (float(v) for v in zeta[:4])
    e, eps2 = _pairs(r, mu)
    inv_var = 1.0 / var
    half = 0.5 * (inv_var * inv_var * e * e - inv_var)
    eta = var - omega - alpha * eps2
    # varpi entry is the Gaussian scale score of eta, so it is quadratic in eta
    d_rho = torch.zeros_like(eta)
    d_rho[..., 1:] = eta[..., 1:] * eta[..., :-1] / varpi**2
    return torch.stack(
        [
            inv_var * e,
            half,
            half * eps2,
            -1.0 / varpi + eta * eta / varpi**3,
            d_rho,
        ],
        dim=-1,
    )


def gsv_pseudo_score(zeta, returns, filtered: FilteredVol | None = None) -> np.ndarray:
    r"""
    Pseudo-score at ``(zeta, rho = 0)`` with plug-in volatility functionals.

    Entries, averaged over dates, with ``e = r_t - mu``,
    ``eps^2 = (r_{t-1} - mu)^2`` and ``eta = [sigma^2] - omega - alpha eps^2``:

    - ``mu``: ``[1/sigma^2] e``
    - ``omega``: ``-[1/sigma^2]/2 + [1/sigma^4] e^2 / 2``
    - ``alpha``: the ``omega`` entry times ``eps^2``
    - ``varpi``: ``-1/varpi + eta^2 / varpi^3``, the score of
      ``log N(eta; 0, varpi^2)`` with the filtered residual in place of
      the latent one
    - ``rho``: ``eta_t eta_{t-1} / varpi^2`` (zero on the first date)
    """
    zeta = np.asarray(zeta, dtype=float)
    r = as_tensor(returns)
    if filtered is None:
        filtered = gsv_filter_plugin(zeta, r)
    return _contributions(zeta, r, filtered.var).mean(dim=0).numpy()


class GarchSvModel(ModelContract):
    """
    GARCH-like SV plug-in with ``rho = 0`` as the constraint.

    Parameters
    ----------
    rule : QuadratureRule, optional
        Quadrature of the constrained likelihood. Default is 48
        Gauss-Hermite nodes.

    floor : float, optional
        Variance floor of the simulator and likelihood. Default is 1e-8.
    """

    names = ("mu", "omega", "alpha", "varpi", "rho")
    constraint_mask = (False, False, False, False, True)
    fixed_values = (0.0,)
    integer_mask = (False, False, False, False, False)
    lower = (-math.inf, 1e-8, 0.0, 1e-6, -0.99)
    upper = (math.inf, math.inf, _ALPHA_MAX, math.inf, 0.99)
    hac_lags = None
    jacobian_step = 1e-3

    def __init__(
        self,
        rule: QuadratureRule | None = None,
        floor: float = VARIANCE_FLOOR,
    ) -> None:
        self.rule = (
            QuadratureRule(kind=QuadratureKind.GaussHermite) if rule is None else rule
        )
        if not floor > 0:
            raise ValueError(f"floor must be positive, given {floor}")
        self.floor = floor

    def innovation_key(self) -> str:
        return "garch-sv"

    def loglik_constrained(self, beta: np.ndarray, data: Dataset) -> float:
        return gsv_loglik_constrained(beta[:4], data.y, self.rule, self.floor)

    def loglik_constrained_batch(
        self, betas: np.ndarray, data: Dataset
    ) -> np.ndarray:
        if self.rule.kind is not QuadratureKind.GaussHermite:
            return super().loglik_constrained_batch(betas, data)
        zeta = as_tensor(np.asarray(betas)[:, :4])
        return _loglik_gauss_hermite(zeta, data.y, self.rule.nodes, self.floor).numpy()

    def score_contributions(
        self, beta: np.ndarray, data: Dataset
    ) -> torch.Tensor:
        filtered = gsv_filter_plugin(beta, data.y)
        return _contributions(beta, data.y, filtered.var)

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
        returns, _ = _simulate_paths(
            theta,
            innovations["u"][None],
            innovations["chi"][None],
            innovations["eta0"],
            self.floor,
        )
        return Dataset(returns[0])

    def simulated_scores(
        self,
        theta: np.ndarray,
        beta: np.ndarray,
        bank: SimBank,
        data: Dataset,
    ) -> np.ndarray:
        draws = bank.stacked(self)
        paths, hits = _simulate_paths(
            theta, draws["u"], draws["chi"], draws["eta0"][:, 0], self.floor
        )
        if hits:
            logger.debug(f"Variance floored on {hits} simulated dates at {theta}")
        start = as_tensor(np.asarray(beta)[:3]).repeat(bank.H, 1)
        arch = fit_arch1(paths, start)
        var = _filtered(paths, arch)
        return _contributions(beta, paths, var).mean(dim=1).numpy()

    def initial_beta(self, data: Dataset) -> np.ndarray:
        """ARCH(1) QML fit extended by a small ``varpi`` and ``rho = 0``."""
        r = data.y
        variance = float(r.var())
        start = as_tensor([float(r.mean()), 0.8 * variance, 0.2])[None, :]
        mu, omega, alpha = fit_arch1(r[None, :], start)[0].tolist()
        return np.array([mu, omega, alpha, 0.1 * omega, 0.0])
