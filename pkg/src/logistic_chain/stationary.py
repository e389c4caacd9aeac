"""Exact stationary law of the modified chain, in log space.

The invariant distribution of an ergodic birth-death chain is the
product form

    pi(x) = S^-1 * beta_0 ... beta_{x-1} / (alpha_1 ... alpha_x),

normalised by the partition sum S.  Weights at the system sizes of
interest span thousands of orders of magnitude, so everything is carried
as logs and normalised by log-sum-exp.  On top of the exact law this
module provides the Gaussian local-limit density (variance L*b/gamma),
the large-deviations rate for macroscopic offsets, and the
Euler-Maclaurin evaluation of the log products that drive both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotErgodicError
from .model import ChainParams, Variant, rates

_LOG_2PI = math.log(2.0 * math.pi)


def _require_ergodic(params: ChainParams) -> None:
    if params.variant is not Variant.MODIFIED:
        raise NotErgodicError("chain not ergodic: absorbing state at 0 (use the modified variant)")
    if params.gamma <= 0:
        raise DomainError("stationary law requires gamma > 0")


def _log_weight_increments(params: ChainParams, n_max: int) -> np.ndarray:
    """log(beta_x / alpha_{x+1}) for x = 0..n_max-1, vectorised."""
    x = np.arange(n_max, dtype=np.float64)
    log_beta = np.log(params.b) + np.log1p(x)          # beta_x = b*(x+1)
    xp1 = x + 1.0
    log_alpha = np.log(xp1) + np.log(params.mu + params.gamma * xp1 / params.L)
    return log_beta - log_alpha


def log_stationary_weight(params: ChainParams, x: int) -> float:
    """Unnormalised log pi weight: sum of log beta_j (j<x) minus log alpha_j (j<=x)."""
    _require_ergodic(params)
    if x < 0:
        raise DomainError(f"state must be nonnegative, got x={x}")
    if x == 0:
        return 0.0
    return float(np.sum(_log_weight_increments(params, x)))


@dataclass(frozen=True)
class StationaryLaw:
    """Normalised invariant law on {0..n_max} with a certified tail bound."""

    params: ChainParams
    n_max: int
    log_weights: np.ndarray = field(repr=False)
    log_norm: float
    tail_bound: float

    @property
    def log_pmf(self) -> np.ndarray:
        return self.log_weights - self.log_norm

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    @property
    def mode(self) -> int:
        """Argmax state; ties broken toward the larger state."""
        w = self.log_weights
        return int(np.flatnonzero(w == w.max()).max())

    def log_prob(self, x: int) -> float:
        if not (0 <= x <= self.n_max):
            raise DomainError(f"state {x} outside truncation [0, {self.n_max}]")
        return float(self.log_weights[x] - self.log_norm)


def build_stationary(params: ChainParams, tail_tol: float = 1e-12) -> StationaryLaw:
    """Construct the law truncated where the neglected tail mass is < tail_tol.

    The truncation point starts at the smallest state >= 2*mode with
    weight ratio beta_x/alpha_{x+1} < 1/2; past it the weights are
    dominated by a geometric sequence, giving an explicit bound on the
    neglected mass, and the bound is tightened by extending until it
    drops below ``tail_tol``.
    """
    _require_ergodic(params)
    if not (0.0 < tail_tol < 1.0):
        raise DomainError(f"tail_tol must be in (0, 1), got {tail_tol}")
    b, mu, g, L = params.b, params.mu, params.gamma, params.L
    center = max(1, math.floor(L * (b - mu) / g))
    # ratio < 1/2  <=>  mu + gamma*(x+1)/L > 2b
    half_point = math.ceil(L * (2.0 * b - mu) / g)
    n_max = max(2 * center, half_point, 8)
    while True:
        incr = _log_weight_increments(params, n_max + 1)
        log_w = np.concatenate(([0.0], np.cumsum(incr)))   # states 0..n_max+1
        m = log_w[: n_max + 1].max()
        log_norm = m + math.log(np.exp(log_w[: n_max + 1] - m).sum())
        r = rates(params, n_max + 1)
        ratio = r.beta / rates(params, n_max + 2).alpha
        # neglected mass <= w(n_max+1) / (1 - ratio), normalised
        log_tail = log_w[n_max + 1] - math.log1p(-ratio) - log_norm
        tail = math.exp(log_tail)
        if tail < tail_tol:
            return StationaryLaw(
                params=params,
                n_max=n_max,
                log_weights=log_w[: n_max + 1],
                log_norm=float(log_norm),
                tail_bound=tail,
            )
        n_max += max(32, n_max // 4)


def local_clt_density(params: ChainParams, k: float) -> float:
    """Gaussian density at offset k from the mode, variance sigma^2 = L*b/gamma."""
    params.require_supercritical("local_clt_density")
    if params.gamma <= 0:
        raise DomainError("local_clt_density requires gamma > 0")
    sigma2 = params.L * params.b / params.gamma
    return math.exp(-0.5 * k * k / sigma2) / math.sqrt(2.0 * math.pi * sigma2)


def ld_rate(params: ChainParams, delta: float) -> float:
    """Large-deviations rate for pi(mode + delta*L) ~ exp(-L * rate) / sqrt(L).

    rate = (b/gamma) * f(delta*gamma/b) with f(z) = (1+z)*ln(1+z) - z,
    the closed form of int_0^z ln(1+x) dx (valid for any z > -1, unlike
    the power series of f, whose radius is 1).
    """
    params.require_supercritical("ld_rate")
    if params.gamma <= 0:
        raise DomainError("ld_rate requires gamma > 0")
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    z = delta * params.gamma / params.b
    return (params.b / params.gamma) * ((1.0 + z) * math.log1p(z) - z)


def euler_maclaurin_log_product(r: int, omega: float) -> float:
    """Euler-Maclaurin value of sum_{k=0}^{r} ln(1 + omega*k), up to O(omega):

    (1/omega + r + 1/2) * ln(1 + r*omega) - r.
    """
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    if omega <= 0:
        raise DomainError(f"omega must be positive, got {omega}")
    return (1.0 / omega + r + 0.5) * math.log1p(r * omega) - r


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """TV distance between two distributions on 0..max(len); shorter is zero-padded."""
    n = max(len(p), len(q))
    pp = np.zeros(n)
    qq = np.zeros(n)
    pp[: len(p)] = p
    qq[: len(q)] = q
    return 0.5 * float(np.abs(pp - qq).sum())
