"""
Filtering engines for latent-state models.

`hamilton_filter` runs the discrete-state forward recursion for a batch
of parameter rows at once; `bootstrap_particle_filter` produces one-step
predictive draws from a resampled particle cloud. Both are driven by
model callables, in the same way the ensemble filters take a process
model ``M`` and a measurement operator ``H``.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import torch

from . import DTYPE
from .errors import ParticleCollapseError

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class FilterState:
    """
    State of a batched Hamilton filter.

    Attributes
    ----------
    pi : torch.Tensor
        Filtered state probabilities of shape (B, d); rows sum to one.

    loglik_accum : torch.Tensor
        Accumulated log-likelihood of each row, shape (B,).

    history : torch.Tensor | None
        Per-date log predictive densities of shape (B, T), kept only
        on request.
    """

    pi: torch.Tensor
    loglik_accum: torch.Tensor
    history: torch.Tensor | None = None


@torch.no_grad()
def hamilton_filter(
    log_density: Callable[[int, int], torch.Tensor],
    predict: Callable[[torch.Tensor], torch.Tensor],
    initial: torch.Tensor,
    T: int,
    keep_history: bool = False,
    chunk: int = 512,
) -> FilterState:
    r"""
    Forward recursion of a finite-state hidden Markov model.

    At each date the probabilities are propagated with ``predict``, weighted
    by the observation densities and renormalized; the log of the
    normalizing constant is the date's log-likelihood contribution.
    Densities are exponentiated after subtracting their per-date maximum
    over states, so underflow cannot zero a row.

    Parameters
    ----------
    log_density : Callable[[int, int], torch.Tensor]
        ``log_density(start, stop)`` returns the log observation densities
        of dates ``start..stop-1`` under every state, shape
        (B, stop - start, d).

    predict : Callable[[torch.Tensor], torch.Tensor]
        Maps filtered probabilities (B, d) to predicted ones (B, d).

    initial : torch.Tensor
        Probabilities (B, d) of the state before the first date.

    T : int
        Number of dates.

    keep_history : bool, optional
        Whether to store the per-date contributions. Default is False.

    chunk : int, optional
        Number of dates whose densities are materialized at once.
        Default is 512.

    Returns
    -------
    FilterState
        Final probabilities, accumulated log-likelihood and, optionally,
        the per-date contributions.

    Raises
    ------
    TypeError
        If ``log_density`` or ``predict`` is not callable.
    """
    if not isinstance(log_density, Callable) or not isinstance(predict, Callable):
        raise TypeError(
            "`log_density` and `predict` must be Callables in hamilton_filter, "
            f"but given {type(log_density)=}, {type(predict)=}"
        )
    B = initial.shape[0]
    state = FilterState(
        pi=initial.clone(),
        loglik_accum=torch.zeros(B, dtype=DTYPE, device=initial.device),
        history=torch.zeros(B, T, dtype=DTYPE, device=initial.device)
        if keep_history
        else None,
    )
    for start in range(0, T, chunk):
        stop = min(start + chunk, T)
        log_f = log_density(start, stop)
        shift = log_f.amax(dim=-1)
        dens = torch.exp(log_f - shift[..., None])
        for i in range(stop - start):
            weighted = predict(state.pi) * dens[:, i]
            norm = weighted.sum(dim=-1)
            state.pi = weighted / norm[:, None]
            step = torch.log(norm) + shift[:, i]
            state.loglik_accum += step
            if keep_history:
                state.history[:, start + i] = step
    return state


@dataclass(slots=True)
class ParticleOutput:
    """
    Per-date output of :func:`bootstrap_particle_filter`.

    ``var`` and ``es`` have shape (T, len(alphas)); VaR is reported as a
    positive loss, ``-q_alpha``, and ES as the mean of the predictive
    draws at or below ``q_alpha``. ``ess`` is the effective sample size
    of the normalized weights at each date.
    """

    var: torch.Tensor
    es: torch.Tensor
    ess: torch.Tensor


@torch.no_grad()
def bootstrap_particle_filter(
    observations: torch.Tensor,
    particles: torch.Tensor,
    propagate: Callable[[torch.Tensor, torch.Generator], torch.Tensor],
    predictive: Callable[[torch.Tensor, torch.Generator], torch.Tensor],
    log_weight: Callable[[torch.Tensor, float], torch.Tensor],
    alphas: tuple[float, ...],
    generator: torch.Generator,
) -> ParticleOutput:
    r"""
    Bootstrap particle filter with systematic resampling at every date.

    For each date the predictive draws are generated from the current
    cloud before the observation is used; the cloud is then weighted by
    the observation density, resampled and propagated to the next date.

    Parameters
    ----------
    observations : torch.Tensor
        1D tensor of T observations.

    particles : torch.Tensor
        Initial cloud of shape (N, ...), distributed as the state at the
        first date.

    propagate : Callable[[torch.Tensor, torch.Generator], torch.Tensor]
        Draws next-date states for every particle.

    predictive : Callable[[torch.Tensor, torch.Generator], torch.Tensor]
        Draws one observation per particle, shape (N,).

    log_weight : Callable[[torch.Tensor, float], torch.Tensor]
        Log observation density of every particle, shape (N,).

    alphas : tuple[float, ...]
        Tail probabilities of the reported VaR and ES.

    generator : torch.Generator
        Source of the filter's randomness, on the particles' device.

    Returns
    -------
    ParticleOutput
        VaR, ES and ESS per date, on the CPU.

    Raises
    ------
    ParticleCollapseError
        If every particle weight vanishes at some date.
    """
    if not all(0.0 < alpha < 1.0 for alpha in alphas):
        raise ValueError(f"alphas must lie in (0, 1), given {alphas}")
    T = observations.numel()
    N = particles.shape[0]
    device = particles.device
    levels = torch.tensor(alphas, dtype=DTYPE, device=device)
    var = torch.empty(T, len(alphas), dtype=DTYPE)
    es = torch.empty(T, len(alphas), dtype=DTYPE)
    ess = torch.empty(T, dtype=DTYPE)
    offsets = torch.arange(N, dtype=DTYPE, device=device)
    for t in range(T):
        draws = predictive(particles, generator)
        quantiles = torch.quantile(draws, levels)
        var[t] = -quantiles.cpu()
        for a in range(len(alphas)):
            es[t, a] = draws[draws <= quantiles[a]].mean().cpu()

        log_w = log_weight(particles, float(observations[t]))
        top = log_w.max()
        if not torch.isfinite(top):
            raise ParticleCollapseError(
                f"All particle weights vanished at date {t}", date=t
            )
        w = torch.exp(log_w - top)
        w = w / w.sum()
        ess[t] = float(1.0 / torch.sum(w * w))

        u0 = torch.rand(1, generator=generator, dtype=DTYPE, device=device)
        positions = (u0 + offsets) / N
        cumulative = torch.cumsum(w, dim=0)
        cumulative[-1] = 1.0
        index = torch.searchsorted(cumulative, positions).clamp_max(N - 1)
        particles = propagate(particles[index], generator)
    low = ess < 0.01 * N
    if low.any():
        logger.warning(
            f"Particle ESS fell below 1% of N on {int(low.sum())} of {T} dates"
        )
    return ParticleOutput(var, es, ess)
