"""Logistic birth-death chain: parameters, transition rates, and generator.

The chain lives on {0, 1, 2, ...} with per-capita birth rate ``b``,
mortality rate ``mu``, and a quadratic competition term whose weight
``gamma`` is scaled by the system size ``L``:

    up-rate    beta(x)  = b*x        (unmodified; beta(0) = 1)
               beta(x)  = b*(x+1)    (modified: no absorbing state)
    down-rate  alpha(x) = mu*x + gamma*x**2 / L

The modified variant is the ergodic one used by all stationary and
first-passage analysis; the unmodified variant matches the mean-field
lattice dynamics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

from .errors import DomainError


class Variant(enum.Enum):
    UNMODIFIED = "unmodified"
    MODIFIED = "modified"


@dataclass(frozen=True)
class ChainParams:
    """Immutable parameter set for one chain instance.

    ``allow_subcritical=True`` permits b <= mu for exploratory simulation;
    analytic operations still refuse such parameter sets because their
    asymptotics require a supercritical drift.
    """

    b: float
    mu: float
    gamma: float
    L: int
    variant: Variant = Variant.MODIFIED
    allow_subcritical: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.b) and math.isfinite(self.mu) and math.isfinite(self.gamma)):
            raise DomainError("rates must be finite")
        if self.b <= 0:
            raise DomainError(f"birth rate must be positive, got b={self.b}")
        if self.mu < 0:
            raise DomainError(f"mortality rate must be nonnegative, got mu={self.mu}")
        if self.gamma < 0:
            raise DomainError(f"competition weight must be nonnegative, got gamma={self.gamma}")
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"system size must be an integer >= 1, got L={self.L}")
        object.__setattr__(self, "L", int(self.L))
        if self.b <= self.mu and not self.allow_subcritical:
            raise DomainError(
                f"b={self.b} <= mu={self.mu}: subcritical parameters are refused "
                "(pass allow_subcritical=True for exploratory simulation)"
            )

    def with_variant(self, variant: Variant) -> "ChainParams":
        return replace(self, variant=variant)

    def require_supercritical(self, what: str) -> None:
        if self.b <= self.mu:
            raise DomainError(f"{what} requires b > mu (got b={self.b}, mu={self.mu})")


@dataclass(frozen=True)
class RatePair:
    """Down-rate ``alpha`` and up-rate ``beta`` at a single state."""

    alpha: float
    beta: float


def rates(params: ChainParams, x: int) -> RatePair:
    """Transition rates at state ``x`` (total on x >= 0)."""
    if x < 0:
        raise DomainError(f"state must be nonnegative, got x={x}")
    alpha = params.mu * x + params.gamma * x * x / params.L
    if params.variant is Variant.MODIFIED:
        beta = params.b * (x + 1)
    else:
        beta = params.b * x if x >= 1 else 1.0
    return RatePair(alpha=alpha, beta=beta)


def equilibrium_point(params: ChainParams) -> int:
    """State where up- and down-rates balance.

    Unmodified: floor(L*(b-mu)/gamma).  Modified: floor of the positive
    root of b*(x+1) = mu*x + gamma*x**2/L, which tends to
    L*(b-mu)/gamma + b/(b-mu): the two variants stay within the bounded
    offset ~b/(b-mu) of each other, negligible relative to L.
    """
    params.require_supercritical("equilibrium_point")
    if params.gamma == 0:
        raise DomainError("equilibrium_point requires gamma > 0 (no positive equilibrium)")
    if params.variant is Variant.UNMODIFIED:
        return math.floor(params.L * (params.b - params.mu) / params.gamma)
    g_over_L = params.gamma / params.L
    drift = params.b - params.mu
    root = (drift + math.sqrt(drift * drift + 4.0 * g_over_L * params.b)) / (2.0 * g_over_L)
    return math.floor(root)


def rate_balance_state(params: ChainParams) -> int:
    """floor(L*(b-mu)/gamma): the unmodified balance point.

    This is the mode of the modified chain's stationary law and the anchor
    state for the harmonic / exit-interval constructions, regardless of
    variant.
    """
    params.require_supercritical("rate_balance_state")
    if params.gamma == 0:
        raise DomainError("rate_balance_state requires gamma > 0")
    return math.floor(params.L * (params.b - params.mu) / params.gamma)


def apply_generator(params: ChainParams, psi: Callable[[int], float], x: int) -> float:
    """Generator applied to ``psi`` at ``x``:

    ``alpha_x*psi(x-1) - (alpha_x+beta_x)*psi(x) + beta_x*psi(x+1)``,
    reducing to ``beta_0*(psi(1) - psi(0))`` at x = 0.
    """
    r = rates(params, x)
    if x == 0:
        return r.beta * (psi(1) - psi(0))
    return r.alpha * psi(x - 1) - (r.alpha + r.beta) * psi(x) + r.beta * psi(x + 1)
