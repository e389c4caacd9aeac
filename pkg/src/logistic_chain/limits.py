"""Fluid (LLN) limit, Gaussian fluctuation (CLT) moments, and OU exit rates.

The density Z_L(t) = N_L(t)/L converges to the logistic flow

    dZ/dt = F(Z) = gamma * Z * (z_star - Z),    z_star = (b - mu)/gamma,

with closed-form solution Z(t) = z_star*z0 / (z0 + (z_star - z0)*e^(-gamma*z_star*t)).
The sqrt(L)-scaled fluctuations are Gaussian with mean zeta0 * M_t and
variance M_t^2 * int_0^t M_u^-2 G(Z(u)) du, where M_t = e^(int_0^t F'(Z)),
F'(z) = b - mu - 2*gamma*z and G(z) = (b+mu)*z + gamma*z^2.  At z0 = z_star
the fluctuation is an Ornstein-Uhlenbeck process with drift mu - b and
infinitesimal variance 2b(b-mu)/gamma.

The OU first-exit tail P{tau_A > t} decays at rate 2*nu(A), where nu(A) = m
exactly when A^2 is the smallest positive root of
sum_k (-2 A^2)^k / (2k)! * m!/(m-k)!  (Breiman's condition, stated for the
OU normalised to unit stationary variance and unit relaxation rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConvergenceError, DomainError
from .model import ChainParams


@dataclass(frozen=True)
class FluidState:
    """Density value Z(t) together with the equilibrium density z_star."""

    z: float
    z_star: float


@dataclass(frozen=True)
class GaussMoments:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise DomainError(f"variance must be nonnegative, got {self.variance}")


def z_star(params: ChainParams) -> float:
    params.require_supercritical("z_star")
    if params.gamma <= 0:
        raise DomainError("z_star requires gamma > 0")
    return (params.b - params.mu) / params.gamma


def drift_F(params: ChainParams, z: float) -> float:
    """F(z) = b*z - mu*z - gamma*z^2, the fluid drift."""
    if z < 0:
        raise DomainError(f"density must be nonnegative, got z={z}")
    return (params.b - params.mu) * z - params.gamma * z * z


def variance_G(params: ChainParams, z: float) -> float:
    """G(z) = (b + mu)*z + gamma*z^2, the fluid jump-variance density."""
    if z < 0:
        raise DomainError(f"density must be nonnegative, got z={z}")
    return (params.b + params.mu) * z + params.gamma * z * z


def fluid_solution(params: ChainParams, z0: float, t: float) -> FluidState:
    """Closed-form solution of dZ/dt = gamma*Z*(z_star - Z), Z(0) = z0."""
    if z0 < 0:
        raise DomainError(f"z0 must be nonnegative, got {z0}")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    zs = z_star(params)
    if z0 == 0.0:
        return FluidState(z=0.0, z_star=zs)
    denom = z0 + (zs - z0) * math.exp(-params.gamma * zs * t)
    return FluidState(z=zs * z0 / denom, z_star=zs)


def _log_growth_factor(params: ChainParams, z0: float, z_t: float, t: float) -> float:
    """log M_t with M_t = e^(int_0^t F'(Z(u)) du) = (Z(t)/z0)^2 * e^(-gamma*z_star*t).

    The closed form follows from int_0^t Z du = (gamma*z_star*t - ln(Z(t)/z0))/gamma,
    itself a consequence of d(ln Z)/dt = gamma*(z_star - Z).
    """
    return 2.0 * math.log(z_t / z0) - params.gamma * z_star(params) * t


def clt_moments(
    params: ChainParams, z0: float, zeta0: float, t: float, quad_tol: float = 1e-10
) -> GaussMoments:
    """Mean and variance of the Gaussian fluctuation at time t from Z(0) = z0.

    mean = zeta0 * M_t; variance = int_0^t (M_t/M_u)^2 G(Z(u)) du, with the
    growth factor M in closed form and a single adaptive quadrature.
    """
    if z0 <= 0:
        raise DomainError(f"z0 must be positive, got {z0}")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    zs = z_star(params)
    z_t = fluid_solution(params, z0, t).z
    log_M_t = _log_growth_factor(params, z0, z_t, t)
    mean = zeta0 * math.exp(log_M_t)
    if t == 0.0:
        return GaussMoments(mean=zeta0, variance=0.0)

    g_zs = params.gamma * zs

    def integrand(u):
        z_u = fluid_solution(params, z0, u).z
        # (M_t/M_u)^2 = (Z(t)/Z(u))^4 * e^(-2*gamma*z_star*(t-u)) <= bounded
        log_ratio2 = 2.0 * (2.0 * math.log(z_t / z_u) - g_zs * (t - u))
        return math.exp(log_ratio2) * variance_G(params, z_u)

    value, abserr = quad(integrand, 0.0, t, epsabs=quad_tol, epsrel=quad_tol, limit=300)
    if not math.isfinite(value) or abserr > max(quad_tol, 1e-6 * abs(value)):
        raise ConvergenceError(
            f"variance quadrature did not converge (value={value}, abserr={abserr})"
        )
    return GaussMoments(mean=mean, variance=max(value, 0.0))


def ou_params(params: ChainParams) -> tuple[float, float]:
    """(q, a): OU drift q = mu - b < 0 and infinitesimal variance a = 2b(b-mu)/gamma."""
    params.require_supercritical("ou_params")
    if params.gamma <= 0:
        raise DomainError("ou_params requires gamma > 0")
    q = params.mu - params.b
    a = 2.0 * params.b * (params.b - params.mu) / params.gamma
    return q, a


def _breiman_poly_coeffs(m: int) -> np.ndarray:
    """Coefficients c_k of p(u) = sum_k c_k u^k, c_k = (-2)^k m!/((2k)! (m-k)!)."""
    coeffs = np.empty(m + 1)
    for k in range(m + 1):
        coeffs[k] = (-2.0) ** k * math.factorial(m) / (
            math.factorial(2 * k) * math.factorial(m - k)
        )
    return coeffs


def _poly_eval(coeffs: np.ndarray, u: float) -> float:
    acc = 0.0
    for c in coeffs[::-1]:
        acc = acc * u + c
    return acc


def breiman_nu(m: int) -> float:
    """Threshold A with exit rate nu(A) = m: sqrt of the smallest positive root
    of the degree-m Breiman polynomial in u = A^2.

    Bracketed bisection from the first sign change on a u-grid, polished by
    a few Newton steps.
    """
    if m < 1 or int(m) != m:
        raise DomainError(f"m must be a positive integer, got {m}")
    coeffs = _breiman_poly_coeffs(int(m))
    dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))
    step = 0.05 / m
    lo, p_lo = 0.0, _poly_eval(coeffs, 0.0)       # p(0) = 1
    hi = step
    while True:
        p_hi = _poly_eval(coeffs, hi)
        if p_hi == 0.0:
            return math.sqrt(hi)
        if p_hi < 0.0:
            break
        lo, p_lo = hi, p_hi
        hi += step
        if hi > 4.0:
            raise ConvergenceError(f"no positive root found for Breiman polynomial m={m}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        p_mid = _poly_eval(coeffs, mid)
        if p_mid == 0.0:
            return math.sqrt(mid)
        if p_mid > 0.0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(4):
        d = _poly_eval(dcoeffs, u)
        if d == 0.0:
            break
        u_next = u - _poly_eval(coeffs, u) / d
        if not (lo * 0.5 <= u_next <= hi * 2.0):
            break
        u = u_next
    return math.sqrt(u)


def breiman_nu_inverse(A: float, m_max: int = 12) -> float:
    """nu(A) by inverting the integer-point table (A(m), m), m = 1..m_max.

    Linear interpolation between the tabulated thresholds; exact at the
    table points.  Raises for A above A(1) or below A(m_max) (rate outside
    the tabulated range).
    """
    if A <= 0:
        raise DomainError(f"A must be positive, got {A}")
    table = np.array([breiman_nu(m) for m in range(1, m_max + 1)])
    if A > table[0] * (1.0 + 1e-12):
        raise DomainError(f"A={A} exceeds the m=1 threshold {table[0]}; extend the table downward")
    if A < table[-1] * (1.0 - 1e-12):
        raise DomainError(f"A={A} below the m={m_max} threshold {table[-1]}; raise m_max")
    A_clamped = min(max(A, table[-1]), table[0])
    # np.interp needs increasing x
    return float(np.interp(A_clamped, table[::-1], np.arange(m_max, 0, -1, dtype=float)))


@dataclass(frozen=True)
class ExitTailResult:
    """Empirical OU exit-tail survival curve with its fitted decay slope.

    The walker is the fluctuation in natural OU units (barrier measured in
    stationary standard deviations); in the original time units the
    expected tail slope is -2*nu(A)*(b - mu).
    """

    threshold: float
    t_grid: np.ndarray = field(repr=False)
    survival: np.ndarray = field(repr=False)
    fitted_slope: float
    expected_slope: float
    n_reps: int


def ou_exit_tail_check(
    params: ChainParams,
    threshold: float,
    t_grid,
    n_reps: int,
    seed,
    dt: float | None = None,
) -> ExitTailResult:
    """Simulate OU first exits from [-threshold, +threshold] and fit the tail rate.

    Transitions are sampled exactly over each grid step (Gaussian with the
    OU conditional mean and variance), and barrier crossings between grid
    points are resolved by the Brownian-bridge crossing probability, which
    removes the O(sqrt(dt)) shallow-slope bias of naive endpoint checks
    (``dt`` defaults to a hundredth of the relaxation time).  The
    threshold is measured in units of the stationary standard deviation
    sqrt(a/(-2q)), which is the normalisation Breiman's root condition
    assumes; times stay in the chain's own units, so the expected tail
    slope is -2*nu(A)*(b-mu).
    """
    if threshold <= 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    if n_reps < 1:
        raise DomainError(f"n_reps must be >= 1, got {n_reps}")
    q, _ = ou_params(params)
    relax = -1.0 / q
    if dt is None:
        dt = relax / 100.0
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or len(t_grid) < 2 or (np.diff(t_grid) <= 0).any():
        raise DomainError("t_grid must be an increasing vector of at least two times")

    # standardised step: X_{k+1} = rho X_k + sqrt(1-rho^2) N(0,1), rho = e^(q dt)
    rho = math.exp(q * dt)
    noise_sd = math.sqrt(1.0 - rho * rho)
    horizon = float(t_grid[-1])
    n_steps = int(math.ceil(horizon / dt)) + 1

    rng = np.random.default_rng(_as_seed(seed))
    x = np.zeros(n_reps)
    exit_time = np.full(n_reps, np.inf)
    active = np.arange(n_reps)
    for k in range(1, n_steps + 1):
        x_old = x[active]
        x_new = rho * x_old + noise_sd * rng.standard_normal(len(active))
        exited = np.abs(x_new) >= threshold
        # Brownian-bridge crossing between the endpoints (local diffusion
        # coefficient of the standardised OU is 2)
        inside = ~exited
        if inside.any():
            u, v = x_old[inside], x_new[inside]
            p_up = np.exp(-(threshold - u) * (threshold - v) / dt)
            p_dn = np.exp(-(threshold + u) * (threshold + v) / dt)
            bridge = rng.random(inside.sum()) < p_up + p_dn
            exited[inside] |= bridge
        x[active] = x_new
        if exited.any():
            exit_time[active[exited]] = (k - 0.5) * dt
            active = active[~exited]
            if len(active) == 0:
                break

    survival = np.array([(exit_time > t).mean() for t in t_grid])
    fitted = _fit_tail_slope(t_grid, survival)
    expected = -2.0 * breiman_nu_inverse(threshold) * (-q)
    return ExitTailResult(
        threshold=threshold,
        t_grid=t_grid,
        survival=survival,
        fitted_slope=fitted,
        expected_slope=expected,
        n_reps=n_reps,
    )


def _fit_tail_slope(t_grid: np.ndarray, survival: np.ndarray) -> float:
    """OLS slope of log-survival over the clean exponential window [0.01, 0.5]."""
    mask = (survival <= 0.5) & (survival >= 0.01)
    if mask.sum() < 2:
        raise ConvergenceError("survival curve has fewer than two points in the fit window")
    ts = t_grid[mask]
    logs = np.log(survival[mask])
    slope, _ = np.polyfit(ts, logs, 1)
    return float(slope)


def _as_seed(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)
