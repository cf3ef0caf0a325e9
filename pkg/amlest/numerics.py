"""
Numerical building blocks shared by every model.

Random draws come from counter-based Philox streams keyed by
``(seed, stream_id)`` so that any Monte Carlo cell can be reproduced in
isolation. Optimization wraps :func:`scipy.optimize.minimize`, quadrature
wraps :func:`scipy.integrate.quad`, and the long-run variance is a
Bartlett-kernel HAC estimator computed with torch.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch
from scipy import integrate as sp_integrate
from scipy import optimize as sp_optimize

from . import DTYPE, OptimMethod, OptimStatus, QuadratureKind
from .errors import NonFiniteObjectiveError, QuadratureError

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_PENALTY = 1e100


@dataclass(frozen=True, slots=True)
class RngStream:
    """
    A reproducible random stream.

    Attributes
    ----------
    seed : int
        Master seed (64-bit).

    stream_id : int
        Stream index (64-bit), usually ``make_stream_id(replication, h)``.

    counter : int, optional
        Draw position the stream starts from. Default is 0.

    Examples
    --------
    >>> RngStream.make_stream_id(1, 2)
    65538
    >>> a = RngStream(7, 3).generator().random(3)
    >>> b = RngStream(7, 3).generator().random(3)
    >>> bool((a == b).all())
    True
    """

    seed: int
    stream_id: int
    counter: int = 0

    @staticmethod
    def make_stream_id(replication: int, path: int) -> int:
        if not 0 <= path < (1 << 16):
            raise ValueError(f"path index must lie in [0, 65535], given {path}")
        if replication < 0:
            raise ValueError(
                f"replication must be nonnegative, given {replication}"
            )
        return (replication << 16) | path

    def generator(self) -> np.random.Generator:
        key = ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)
        bit_generator = np.random.Philox(key=key)
        if self.counter:
            bit_generator.advance(self.counter)
        return np.random.Generator(bit_generator)

    def standard_normal(self, size) -> torch.Tensor:
        return torch.from_numpy(self.generator().standard_normal(size))


@dataclass(slots=True)
class OptimConfig:
    """
    Optimizer settings.

    Attributes
    ----------
    max_iters : int, optional
        Iteration budget. Default is 2000.

    x_tol : float, optional
        Absolute parameter tolerance (also used as the projected gradient
        tolerance of the quasi-Newton method). Default is 1e-6.

    f_tol : float, optional
        Absolute objective tolerance. Default is 1e-10.

    fd_step : float, optional
        Relative finite-difference step. Default is 1e-5.

    n_restarts : int, optional
        Number of perturbed starts added to the AML solver's natural start,
        at most 4. Default is 0.
    """

    max_iters: int = 2000
    x_tol: float = 1e-6
    f_tol: float = 1e-10
    fd_step: float = 1e-5
    n_restarts: int = 0

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, given {self.max_iters}")
        for name in ("x_tol", "f_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(
                    f"{name} must be strictly positive, "
                    f"given {getattr(self, name)}"
                )
        if not 0 <= self.n_restarts <= 4:
            raise ValueError(
                f"n_restarts must lie in [0, 4], given {self.n_restarts}"
            )


@dataclass(slots=True)
class QuadratureRule:
    """
    Univariate quadrature settings.

    Attributes
    ----------
    kind : QuadratureKind, optional
        Rule identifier. Default is ``QuadratureKind.Adaptive``.

    abs_tol, rel_tol : float, optional
        Tolerances of the adaptive rule. Default is 1e-10 for both.

    max_subdivisions : int, optional
        Subdivision budget of the adaptive rule. Default is 200.

    nodes : int, optional
        Number of Gauss-Hermite nodes. Default is 48.
    """

    kind: QuadratureKind = QuadratureKind.Adaptive
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    nodes: int = 48

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1 or self.nodes < 1:
            raise ValueError("quadrature budgets must be positive")


@dataclass(slots=True)
class OptimResult:
    """
    Outcome of :func:`minimize`; unpacks as ``(x, fun, status)``.

    ``history`` holds the objective value ('J') and point ('x') of every
    accepted improvement, in evaluation order.
    """

    x: np.ndarray
    fun: float
    status: OptimStatus
    iterations: int = 0
    evaluations: int = 0
    history: dict[str, list] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is OptimStatus.Converged

    def __iter__(self):
        return iter((self.x, self.fun, self.status))


def _fd_points(
    x: np.ndarray,
    step: float,
    lower: np.ndarray | None,
    upper: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    h = step * np.maximum(1.0, np.abs(x))
    plus, minus = x + h, x - h
    if upper is not None:
        plus = np.minimum(plus, upper)
    if lower is not None:
        minus = np.maximum(minus, lower)
    return plus, minus


def _fd_design(x: np.ndarray, plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    p = x.size
    points = np.repeat(x[None, :], 2 * p, axis=0)
    points[np.arange(p), np.arange(p)] = plus
    points[p + np.arange(p), np.arange(p)] = minus
    return points


def central_diff_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    step: float = 1e-5,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    batched: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    r"""
    Central finite-difference gradient.

    Component ``i`` equals ``(f(x + h_i e_i) - f(x - h_i e_i)) / (2 h_i)``
    with ``h_i = step * max(1, |x_i|)``. When bounds are given the two
    evaluation points are clipped into the box and the quotient uses the
    clipped spacing, which falls back to a one-sided difference at an edge.

    Parameters
    ----------
    f : Callable[[numpy.ndarray], float]
        Scalar function of ``p`` reals.

    x : numpy.ndarray
        Evaluation point of shape (p,).

    step : float, optional
        Relative step. Default is 1e-5.

    lower, upper : numpy.ndarray, optional
        Box bounds used for clipping.

    batched : Callable[[numpy.ndarray], numpy.ndarray], optional
        Vectorized version of ``f`` taking an array of shape (n, p) and
        returning n values; when given, all ``2p`` points are evaluated
        in one call.

    Returns
    -------
    numpy.ndarray
        Gradient of shape (p,).

    Raises
    ------
    NonFiniteObjectiveError
        If ``f`` is non-finite at any evaluation point.

    Examples
    --------
    >>> import numpy as np
    >>> g = central_diff_gradient(lambda v: float(v[0] ** 2), np.array([3.0]))
    >>> abs(g[0] - 6.0) < 1e-8
    True
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    plus, minus = _fd_points(x, step, lower, upper)
    points = _fd_design(x, plus, minus)
    if batched is not None:
        values = np.asarray(batched(points), dtype=float)
    else:
        values = np.array([float(f(point)) for point in points])
    if not np.isfinite(values).all():
        bad = points[int(np.argmin(np.isfinite(values)))]
        raise NonFiniteObjectiveError(
            f"Non-finite function value at {bad}", point=bad
        )
    p = x.size
    return (values[:p] - values[p:]) / (plus - minus)


def _one_sided_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    step: float,
    lower: np.ndarray | None,
    upper: np.ndarray | None,
) -> np.ndarray | None:
    # Per-coordinate difference on whichever side is finite; None when some
    # coordinate has no finite neighbour or f(x) itself is not finite.
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f0 = float(f(x))
    if not math.isfinite(f0):
        return None
    plus, minus = _fd_points(x, step, lower, upper)
    grad = np.empty_like(x)
    for i in range(x.size):
        ahead, behind = x.copy(), x.copy()
        ahead[i], behind[i] = plus[i], minus[i]
        f_plus = float(f(ahead)) if plus[i] > x[i] else math.nan
        f_minus = float(f(behind)) if minus[i] < x[i] else math.nan
        if math.isfinite(f_plus) and math.isfinite(f_minus):
            grad[i] = (f_plus - f_minus) / (plus[i] - minus[i])
        elif math.isfinite(f_plus):
            grad[i] = (f_plus - f0) / (plus[i] - x[i])
        elif math.isfinite(f_minus):
            grad[i] = (f0 - f_minus) / (x[i] - minus[i])
        else:
            return None
    return grad


def central_diff_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    step: float = 1e-4,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> np.ndarray:
    """Jacobian (m, p) of a vector function by clipped central differences."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    plus, minus = _fd_points(x, step, lower, upper)
    columns = []
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i], xm[i] = plus[i], minus[i]
        fp = np.asarray(f(xp), dtype=float)
        fm = np.asarray(f(xm), dtype=float)
        if not (np.isfinite(fp).all() and np.isfinite(fm).all()):
            raise NonFiniteObjectiveError(
                f"Non-finite function value near {x}", point=x
            )
        columns.append((fp - fm) / (plus[i] - minus[i]))
    return np.stack(columns, axis=1)


def numerical_hessian(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    step: float = 1e-4,
) -> np.ndarray:
    r"""
    Hessian by central second differences with one Richardson refinement.

    Second differences are taken at steps ``h`` and ``h/2`` and combined as
    ``(4 H(h/2) - H(h)) / 3``, which cancels the leading O(h^2) error.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = x.size
    scale = np.maximum(1.0, np.abs(x))

    def second_differences(h: np.ndarray) -> np.ndarray:
        f0 = float(f(x))
        hess = np.empty((p, p))
        for i in range(p):
            ei = np.zeros(p)
            ei[i] = h[i]
            curvature = float(f(x + ei)) - 2.0 * f0 + float(f(x - ei))
            hess[i, i] = curvature / h[i] ** 2
            for j in range(i):
                ej = np.zeros(p)
                ej[j] = h[j]
                hess[i, j] = hess[j, i] = (
                    float(f(x + ei + ej))
                    - float(f(x + ei - ej))
                    - float(f(x - ei + ej))
                    + float(f(x - ei - ej))
                ) / (4.0 * h[i] * h[j])
        return hess

    coarse = second_differences(step * scale)
    fine = second_differences(0.5 * step * scale)
    hess = (4.0 * fine - coarse) / 3.0
    return 0.5 * (hess + hess.T)


def minimize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    cfg: OptimConfig,
    method: OptimMethod = OptimMethod.NelderMead,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
    batched: Callable[[np.ndarray], np.ndarray] | None = None,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    record_log: bool = False,
) -> OptimResult:
    r"""
    Minimize a scalar function.

    Nelder-Mead serves simulated objectives; the quasi-Newton branch runs
    L-BFGS-B with central finite-difference gradients (or ``jac`` when
    supplied) for smooth log-likelihoods. Non-finite values away from
    ``x0`` are replaced by a large penalty so the search can retreat. A
    central difference that straddles a non-finite point falls back to a
    one-sided difference on the finite side; if the best point has no
    usable gradient at all the status is ``OptimStatus.Failed``.

    Parameters
    ----------
    f : Callable[[numpy.ndarray], float]
        Objective.

    x0 : numpy.ndarray
        Starting point of shape (p,).

    cfg : OptimConfig
        Tolerances, iteration budget and finite-difference step.

    method : OptimMethod, optional
        Default is ``OptimMethod.NelderMead``.

    bounds : tuple[numpy.ndarray, numpy.ndarray], optional
        Lower and upper box bounds; ``numpy.inf`` entries are unbounded.

    batched : Callable[[numpy.ndarray], numpy.ndarray], optional
        Vectorized objective used for the finite-difference gradient.

    jac : Callable[[numpy.ndarray], numpy.ndarray], optional
        Analytic gradient for the quasi-Newton branch.

    record_log : bool, optional
        Whether to log progress lines. Default is False.

    Returns
    -------
    OptimResult
        Best evaluated point, its value and the termination status.
        ``f(x) <= f(x0)`` always holds.

    Raises
    ------
    NonFiniteObjectiveError
        If ``f`` is not finite at ``x0``.

    Examples
    --------
    >>> import numpy as np
    >>> x, fun, status = minimize(lambda v: float((v[0] - 2.0) ** 2),
    ...                           np.zeros(1), OptimConfig())
    >>> abs(x[0] - 2.0) < 1e-6
    True
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    lower = upper = None
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=float)
        upper = np.asarray(bounds[1], dtype=float)
        x0 = np.clip(x0, lower, upper)
    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise NonFiniteObjectiveError(
            f"Objective is not finite at the starting point {x0}", point=x0
        )

    best = {"x": x0.copy(), "fun": f0, "evaluations": 1}
    history = {"J": [f0], "x": [x0.copy()]}

    def objective(x: np.ndarray) -> float:
        value = float(f(x))
        best["evaluations"] += 1
        if not math.isfinite(value):
            return _PENALTY
        if value < best["fun"]:
            best["x"], best["fun"] = np.array(x, dtype=float), value
            history["J"].append(value)
            history["x"].append(best["x"].copy())
        return value

    iterations = {"n": 0}

    def callback(*_) -> None:
        iterations["n"] += 1
        if record_log:
            logger.info(f"Iterations: {iterations['n']}, J: {best['fun']}")

    stalled: list[np.ndarray] = []
    scipy_bounds = (
        sp_optimize.Bounds(lower, upper) if bounds is not None else None
    )
    if method is OptimMethod.NelderMead:
        result = sp_optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=scipy_bounds,
            callback=callback,
            options={
                "maxiter": cfg.max_iters,
                "maxfev": 4 * cfg.max_iters,
                "xatol": cfg.x_tol,
                "fatol": cfg.f_tol,
            },
        )
    elif method is OptimMethod.QuasiNewton:

        def gradient(x: np.ndarray) -> np.ndarray:
            if jac is not None:
                return np.asarray(jac(x), dtype=float)
            try:
                return central_diff_gradient(
                    f, x, cfg.fd_step, lower, upper, batched=batched
                )
            except NonFiniteObjectiveError:
                grad = _one_sided_gradient(f, x, cfg.fd_step, lower, upper)
            if grad is None:
                stalled.append(np.array(x, dtype=float))
                logger.warning(f"No finite difference gradient at {x}")
                return np.zeros_like(x)
            return grad

        result = sp_optimize.minimize(
            objective,
            x0,
            jac=gradient,
            method="L-BFGS-B",
            bounds=scipy_bounds,
            callback=callback,
            options={
                "maxiter": cfg.max_iters,
                "ftol": cfg.f_tol,
                "gtol": cfg.x_tol,
            },
        )
    else:
        raise AttributeError(f"Unsupported optimization method: {method}")

    if any(np.array_equal(point, best["x"]) for point in stalled):
        # a zero placeholder gradient is not a stationary point
        status = OptimStatus.Failed
    elif result.success:
        status = OptimStatus.Converged
    elif result.status == 1 or "maximum" in str(result.message).lower():
        status = OptimStatus.MaxIters
    else:
        status = OptimStatus.Failed
    return OptimResult(
        x=best["x"],
        fun=best["fun"],
        status=status,
        iterations=int(getattr(result, "nit", iterations["n"])),
        evaluations=best["evaluations"],
        history=history,
    )


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rule: QuadratureRule | None = None,
    index: int | None = None,
) -> float:
    r"""
    Univariate integral of ``f`` over ``[lo, hi]`` (infinite ends allowed).

    Raises
    ------
    ValueError
        If ``lo >= hi``.
    QuadratureError
        If the subdivision budget is exhausted; the best estimate is
        attached to the error.

    Examples
    --------
    >>> round(integrate(lambda x: x, 0.0, 1.0), 12)
    0.5
    """
    rule = QuadratureRule() if rule is None else rule
    if not lo < hi:
        raise ValueError(f"integration bounds must satisfy lo < hi, given {lo=}, {hi=}")
    out = sp_integrate.quad(
        f,
        lo,
        hi,
        epsabs=rule.abs_tol,
        epsrel=rule.rel_tol,
        limit=rule.max_subdivisions,
        full_output=1,
    )
    if len(out) > 3:
        raise QuadratureError(
            f"Quadrature did not converge on [{lo}, {hi}]: {out[3]}",
            estimate=float(out[0]),
            index=index,
        )
    return float(out[0])


def gauss_hermite_nodes(nodes: int) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Nodes and weights for expectations under a standard normal.

    ``E[g(X)] ≈ sum(weights * g(points))`` for ``X ~ N(0, 1)``.
    """
    points, weights = np.polynomial.hermite_e.hermegauss(nodes)
    weights = weights / math.sqrt(2.0 * math.pi)
    return (
        torch.as_tensor(points, dtype=DTYPE),
        torch.as_tensor(weights, dtype=DTYPE),
    )


def default_lags(T: int) -> int:
    """Bartlett bandwidth ``floor(4 (T/100)^(2/9))``."""
    return int(math.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


def long_run_variance(series: torch.Tensor, lags: int | None = None) -> torch.Tensor:
    r"""
    Bartlett-kernel long-run covariance of per-observation contributions.

    ``Gamma_0 + sum_{j=1}^{L} (1 - j/(L+1)) (Gamma_j + Gamma_j')`` where
    ``Gamma_j`` is the lag-``j`` sample autocovariance (divisor ``T``) of
    the demeaned series. ``lags=0`` gives the sample covariance.

    Parameters
    ----------
    series : torch.Tensor
        Array of shape (T,) or (T, p).

    lags : int, optional
        Bandwidth ``L``; ``None`` selects :func:`default_lags`.

    Returns
    -------
    torch.Tensor
        Symmetric positive semidefinite matrix of shape (p, p).

    Raises
    ------
    ValueError
        If ``T <= lags``.
    """
    x = torch.as_tensor(series, dtype=DTYPE)
    if x.ndim == 1:
        x = x[:, None]
    T = x.size(0)
    lags = default_lags(T) if lags is None else int(lags)
    if lags < 0 or T <= lags:
        raise ValueError(f"long_run_variance needs T > lags >= 0, given {T=}, {lags=}")
    e = x - x.mean(dim=0, keepdim=True)
    omega = e.T @ e / T
    for j in range(1, lags + 1):
        gamma = e[j:].T @ e[:-j] / T
        omega = omega + (1.0 - j / (lags + 1.0)) * (gamma + gamma.T)
    return 0.5 * (omega + omega.T)
