"""Mean first-passage times for the modified chain, analytically and by linear solve.

The one-step descent time out of state y+1 is

    E tau_{y+1 -> y} = S_{y+1} / alpha_{y+1},
    S_y = 1 + beta_y/alpha_{y+1} + beta_y*beta_{y+1}/(alpha_{y+1}*alpha_{y+2}) + ...

and longer descents telescope over the steps.  For the logistic rates the
series collapses onto the degenerated hypergeometric function:

    S_y = F(mu*L/gamma + y + 1, b*L/gamma),

which ties the passage times to the asymptotic machinery in
:mod:`logistic_chain.special`.  (Note the "+ 1": the first denominator of
the S_y series is mu*L/gamma + y + 1, so that is the hypergeometric A.)

Everything exponentially large lives in log scale; the harmonic function
used for two-sided exits changes sign at the well bottom and is kept as
(sign, log|.|).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError, NotErgodicError
from .model import ChainParams, Variant, rate_balance_state, rates
from .special import MAX_SERIES_TERMS, RegimeTag, hypergeom_asymptotic, hypergeom_series
from .stationary import build_stationary


class Method(enum.Enum):
    SERIES_EXACT = "series-exact"
    HYPERGEOM_ASYMPTOTIC = "hypergeom-asymptotic"
    LINEAR_SOLVE_ORACLE = "linear-solve-oracle"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class PassageEstimate:
    """A mean first-passage time, as log of the mean.

    ``stderr`` is present only for Monte-Carlo estimates; ``regime`` only
    for hypergeometric-asymptotic ones; ``log_asymptotic`` carries a
    closed-form asymptotic companion value when one exists.
    """

    log_mean_time: float
    method: Method
    stderr: float | None = None
    regime: "RegimeTag | None" = None
    log_asymptotic: float | None = None

    def __post_init__(self):
        if self.method is Method.MONTE_CARLO:
            if self.stderr is None or self.stderr <= 0:
                raise DomainError("Monte-Carlo estimates must carry a positive stderr")
        elif self.stderr is not None:
            raise DomainError(f"method {self.method.value} must not carry a stderr")
        if self.regime is not None and self.method is not Method.HYPERGEOM_ASYMPTOTIC:
            raise DomainError("regime tags belong to hypergeometric-asymptotic estimates")

    @property
    def mean_time(self) -> float:
        return math.exp(self.log_mean_time)


def _require_modified(params: ChainParams) -> None:
    if params.variant is not Variant.MODIFIED:
        raise NotErgodicError("passage-time series require the modified (ergodic) variant")
    if params.gamma <= 0:
        raise DomainError("passage-time series require gamma > 0")
    params.require_supercritical("passage times")


def _log_rate_arrays(params: ChainParams, n_top: int):
    """(log beta_x, log alpha_x) for x = 0..n_top (log alpha_0 = -inf)."""
    x = np.arange(n_top + 1, dtype=np.float64)
    log_beta = np.log(params.b) + np.log1p(x)
    with np.errstate(divide="ignore"):
        log_alpha = np.log(x) + np.log(params.mu + params.gamma * x / params.L)
    return log_beta, log_alpha


def _series_top_index(params: ChainParams, k_min: int) -> int:
    """Smallest index >= k_min where beta_k/alpha_{k+1} < 1/2."""
    half_point = math.ceil(params.L * (2.0 * params.b - params.mu) / params.gamma)
    return max(k_min, half_point)


def log_S(params: ChainParams, y: int, rel_tol: float = 1e-12, cross_check: bool = True) -> float:
    """log S_y by direct series summation.

    With ``cross_check=True`` (default) the value is verified against the
    hypergeometric identity S_y = F(mu*L/gamma + y + 1, b*L/gamma) to 1e-8
    relative in log; a mismatch raises :class:`ConvergenceError`.
    """
    _require_modified(params)
    if y < 0:
        raise DomainError(f"y must be nonnegative, got y={y}")
    if not (0.0 < rel_tol < 1.0):
        raise DomainError(f"rel_tol must be in (0, 1), got {rel_tol}")
    log_rel_tol = math.log(rel_tol)
    log_term = 0.0
    log_sum = 0.0
    k = y
    for n in range(1, MAX_SERIES_TERMS + 1):
        r = rates(params, k)
        r_next = rates(params, k + 1)
        ratio = r.beta / r_next.alpha
        log_term += math.log(ratio)
        log_sum = np.logaddexp(log_sum, log_term)
        k += 1
        if log_term - log_sum < log_rel_tol and ratio < 1.0:
            break
    else:
        raise ConvergenceError(f"S_y series did not converge for y={y}, params={params}")
    log_sum = float(log_sum)
    if cross_check:
        A = params.mu * params.L / params.gamma + y + 1.0
        z = params.b * params.L / params.gamma
        log_f = hypergeom_series(A, z, rel_tol=min(rel_tol, 1e-12)).log_value
        if abs(log_sum - log_f) > 1e-8 * max(1.0, abs(log_f)):
            raise ConvergenceError(
                f"S_y series disagrees with F({A}, {z}): {log_sum} vs {log_f}"
            )
    return log_sum


def log_S_table(params: ChainParams, k_max: int) -> np.ndarray:
    """log S_k for k = 0..k_max in one pass.

    Seeds the tail by direct summation at an index where the term ratio is
    below 1/2, then applies the exact downward recurrence
    S_k = 1 + (beta_k/alpha_{k+1}) * S_{k+1} in log form.
    """
    _require_modified(params)
    if k_max < 0:
        raise DomainError(f"k_max must be nonnegative, got {k_max}")
    k_top = _series_top_index(params, k_max)
    out = np.empty(k_top + 1)
    out[k_top] = log_S(params, k_top, cross_check=False)
    log_beta, log_alpha = _log_rate_arrays(params, k_top + 1)
    for k in range(k_top - 1, -1, -1):
        step = log_beta[k] - log_alpha[k + 1]
        out[k] = np.logaddexp(0.0, step + out[k + 1])
    return out[: k_max + 1]


def mean_step_time(params: ChainParams, y: int, asymptotic: bool = False) -> PassageEstimate:
    """E tau_{y+1 -> y} = S_{y+1} / alpha_{y+1}.

    Exact series value by default; ``asymptotic=True`` evaluates S_{y+1}
    through the large-A hypergeometric regimes instead (appropriate for
    large L) and tags the estimate with the regime actually used.
    """
    _require_modified(params)
    if y < 0:
        raise DomainError(f"y must be nonnegative, got y={y}")
    log_alpha = math.log(rates(params, y + 1).alpha)
    if asymptotic:
        A = params.mu * params.L / params.gamma + y + 2.0
        z = params.b * params.L / params.gamma
        value = hypergeom_asymptotic(A, z)
        return PassageEstimate(
            log_mean_time=value.log_value - log_alpha,
            method=Method.HYPERGEOM_ASYMPTOTIC,
            regime=value.regime,
        )
    log_s = log_S(params, y + 1, cross_check=False)
    return PassageEstimate(log_mean_time=log_s - log_alpha, method=Method.SERIES_EXACT)


def mean_passage(params: ChainParams, x: int, y: int) -> PassageEstimate:
    """E tau_{x -> y} for x > y >= 0: log-sum-exp of the one-step descent times."""
    _require_modified(params)
    if not x > y >= 0:
        raise DomainError(f"need x > y >= 0, got x={x}, y={y}")
    log_s = log_S_table(params, x)
    _, log_alpha = _log_rate_arrays(params, x)
    ks = np.arange(y + 1, x + 1)
    log_terms = log_s[ks] - log_alpha[ks]
    m = log_terms.max()
    total = m + math.log(np.exp(log_terms - m).sum())
    return PassageEstimate(log_mean_time=float(total), method=Method.SERIES_EXACT)


def mean_passage_to_zero(params: ChainParams) -> PassageEstimate:
    """E tau_{n* -> 0} from the well bottom down to extinction level 0.

    The exact sum over descent steps is primary; for mu > 0 the closed
    asymptotic (b/mu^2) * ln(b/(b-mu)) * S_1 rides along as metadata
    (the two agree only in the large-L limit).
    """
    _require_modified(params)
    n_star = rate_balance_state(params)
    exact = mean_passage(params, n_star, 0)
    log_asym = None
    if params.mu > 0:
        prefactor = (params.b / params.mu ** 2) * math.log(params.b / (params.b - params.mu))
        log_asym = math.log(prefactor) + log_S(params, 1, cross_check=False)
    return PassageEstimate(
        log_mean_time=exact.log_mean_time,
        method=Method.SERIES_EXACT,
        log_asymptotic=log_asym,
    )


class SignedLog(NamedTuple):
    """A real number as (sign, log|value|); sign 0 encodes exact zero."""

    sign: int
    log_abs: float

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)


def psi2(params: ChainParams, x: int) -> SignedLog:
    """Harmonic function anchored at the well bottom n*: psi2(n*) = 0, psi2(n*+1) = 1.

    Below n* the value is the negated sum of descending products
    beta_{n*}...beta_{x+1} / (alpha_{n*}...alpha_{x+1}); above it is
    1 + ascending products of alpha/beta.  The generator annihilates it at
    every state x >= 1.  Magnitudes grow like e^(const*L), hence the
    signed-log representation.
    """
    _require_modified(params)
    if x < 0:
        raise DomainError(f"state must be nonnegative, got x={x}")
    n_star = rate_balance_state(params)
    if x == n_star:
        return SignedLog(0, -math.inf)
    if x > n_star:
        sign, logs = _psi2_above(params, n_star, x)
    else:
        sign, logs = _psi2_below(params, n_star, x)
    return SignedLog(sign, logs)


def _psi2_above(params: ChainParams, n_star: int, x: int):
    # psi2(x) = 1 + sum_{m=1}^{x-1-n*} prod_{j=1}^{m} alpha(n*+j)/beta(n*+j)
    log_beta, log_alpha = _log_rate_arrays(params, x)
    js = np.arange(n_star + 1, x)
    acc = 0.0
    if len(js):
        cum = np.cumsum(log_alpha[js] - log_beta[js])
        m = max(0.0, cum.max())
        acc = m + math.log(math.exp(-m) + np.exp(cum - m).sum())
    return 1, float(acc)


def _psi2_below(params: ChainParams, n_star: int, x: int):
    # psi2(x) = -sum over k = n*..x+1 of prod beta(j)/alpha(j), j from n* down to k
    log_beta, log_alpha = _log_rate_arrays(params, n_star)
    ks = np.arange(n_star, x, -1)
    cum = np.cumsum(log_beta[ks] - log_alpha[ks])
    m = cum.max()
    return -1, float(m + math.log(np.exp(cum - m).sum()))


def _g_plus(u: float) -> float:
    """int_0^u ln(1+x) dx = (1+u)ln(1+u) - u."""
    return (1.0 + u) * math.log1p(u) - u


def _g_minus(u: float) -> float:
    """-int_0^u ln(1-x) dx = (1-u)ln(1-u) + u."""
    return (1.0 - u) * math.log1p(-u) + u


def symmetric_delta2(params: ChainParams, delta1: float, tol: float = 1e-12) -> float:
    """The delta2 > 0 balancing the exit interval around the well bottom.

    Solves -int_0^{delta1*c} ln(1-x) dx = int_0^{delta2*c} ln(1+x) dx with
    c = 1 - mu/b, by bisection on the closed forms of both integrals.
    Under this choice the two boundary values of psi2 agree to leading
    exponential order, which makes the exit split asymptotically even.
    """
    params.require_supercritical("symmetric_delta2")
    if not (0.0 < delta1 < 1.0):
        raise DomainError(f"delta1 must be in (0, 1), got {delta1}")
    c = 1.0 - params.mu / params.b
    if delta1 * c >= 1.0:
        raise DomainError(f"delta1*c = {delta1 * c} >= 1: logarithmic singularity")
    target = _g_minus(delta1 * c)
    lo, hi = delta1, max(2.0 * delta1, 1.0)
    while _g_plus(hi * c) < target:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _g_plus(mid * c) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ExitInterval:
    """Resolved symmetric exit interval [n1, n2] around the well bottom n*."""

    n_star: int
    n1: int
    n2: int
    delta1: float
    delta2: float
    rho1: float


def symmetric_exit_interval(params: ChainParams, delta1: float) -> ExitInterval:
    _require_modified(params)
    if not (0.0 < delta1 < 1.0):
        raise DomainError(f"delta1 must be in (0, 1), got {delta1}")
    n_star = rate_balance_state(params)
    delta2 = symmetric_delta2(params, delta1)
    n1 = int(round((1.0 - delta1) * n_star))
    n2 = int(round((1.0 + delta2) * n_star))
    if not 0 <= n1 < n_star < n2:
        raise DomainError(
            f"degenerate exit interval n1={n1}, n*={n_star}, n2={n2}; increase L or delta1"
        )
    rho1 = 1.0 - (1.0 - params.mu / params.b) * delta1
    return ExitInterval(n_star=n_star, n1=n1, n2=n2, delta1=delta1, delta2=delta2, rho1=rho1)


def exit_split_probability(params: ChainParams, delta1: float) -> float:
    """P(hit n2 before n1 | start at n*), exact, via the harmonic scale psi2."""
    iv = symmetric_exit_interval(params, delta1)
    lo = psi2(params, iv.n1)
    hi = psi2(params, iv.n2)
    # P = -psi2(n1) / (psi2(n2) - psi2(n1)) with psi2(n1) < 0 < psi2(n2)
    log_den = np.logaddexp(hi.log_abs, lo.log_abs)
    return math.exp(lo.log_abs - log_den)


@dataclass(frozen=True)
class ExitEstimate:
    """Mean exit time from n* to the symmetric boundary pair {n1, n2}."""

    interval: ExitInterval
    log_mean_time: float          # exact: boundary-value solution off the S_y series
    log_asymptotic: float         # (b/g)*L*ln(rho1) + delta1*(1 - ln rho1)*n* - ln(sqrt L)
    method: Method = Method.SERIES_EXACT

    @property
    def mean_time(self) -> float:
        return math.exp(self.log_mean_time)


def mean_exit_symmetric(params: ChainParams, delta1: float) -> ExitEstimate:
    """Mean exit time u(n*) of the two-sided problem, exact plus asymptotic.

    The exact value assembles the particular solution psi1(x) = E tau_{x -> n1}
    with the harmonic psi2, fixing both constants from u(n1) = u(n2) = 0, so
    it solves the boundary-value problem identically (the half-weight
    shortcut c1 = -psi1(n2)/2 is recovered in the symmetric large-L limit
    but would miss the oracle at finite L).
    """
    iv = symmetric_exit_interval(params, delta1)
    log_s = log_S_table(params, iv.n2)
    _, log_alpha = _log_rate_arrays(params, iv.n2)
    ks = np.arange(iv.n1 + 1, iv.n2 + 1)
    log_steps = log_s[ks] - log_alpha[ks]
    acc = np.logaddexp.accumulate(log_steps)
    log_psi1_nstar = float(acc[iv.n_star - (iv.n1 + 1)])
    log_psi1_n2 = float(acc[-1])

    p2_lo = psi2(params, iv.n1)
    p2_hi = psi2(params, iv.n2)
    log_den = np.logaddexp(p2_hi.log_abs, p2_lo.log_abs)
    # c2 = -psi1(n2)/(psi2(n2)-psi2(n1)) < 0;  c1 = -c2*psi2(n1) < 0
    log_c1 = log_psi1_n2 - log_den + p2_lo.log_abs
    if log_c1 >= log_psi1_nstar:
        raise ConvergenceError(
            f"exit-time assembly lost positivity at params={params}, delta1={delta1}"
        )
    log_u = log_psi1_nstar + math.log1p(-math.exp(log_c1 - log_psi1_nstar))

    log_asym = (
        (params.b / params.gamma) * params.L * math.log(iv.rho1)
        + delta1 * (1.0 - math.log(iv.rho1)) * iv.n_star
        - 0.5 * math.log(params.L)
    )
    return ExitEstimate(interval=iv, log_mean_time=log_u, log_asymptotic=log_asym)


@dataclass(frozen=True)
class RecurrenceEstimate:
    """Recurrence-time scales for returns to a state k.

    ``log_scale`` is the heuristic 1/pi(k); ``log_mean_return`` is the exact
    CTMC mean return time 1/(pi(k)*(alpha_k+beta_k)) (holding time at k
    plus the excursion away).
    """

    state: int
    log_scale: float
    log_mean_return: float


def recurrence_time_estimate(params: ChainParams, k: int, tail_tol: float = 1e-12) -> RecurrenceEstimate:
    _require_modified(params)
    if k < 0:
        raise DomainError(f"state must be nonnegative, got {k}")
    law = build_stationary(params, tail_tol=tail_tol)
    log_pi = law.log_prob(k)
    r = rates(params, k)
    return RecurrenceEstimate(
        state=k,
        log_scale=-log_pi,
        log_mean_return=-log_pi - math.log(r.alpha + r.beta),
    )


# --- linear-solve oracles -------------------------------------------------
#
# Independent evaluation route: mean hitting times solve the generator
# system L u = -1 with Dirichlet data at the targets.  These dense solves
# are exact up to truncation of the state space and never reuse the series.

def _truncation_top(params: ChainParams, above: int) -> int:
    return _series_top_index(params, above) + 80


def hitting_time_oracle(params: ChainParams, y: int, n_top: int | None = None) -> np.ndarray:
    """u[x] = E tau_{x -> y} for x = y..n_top, from the truncated linear system.

    The top state reflects (its up-rate is dropped); with the default
    n_top the truncation error is far below 1e-10 relative.
    """
    _require_modified(params)
    if y < 0:
        raise DomainError(f"y must be nonnegative, got y={y}")
    if n_top is None:
        n_top = _truncation_top(params, 2 * rate_balance_state(params))
    if n_top <= y:
        raise DomainError(f"n_top={n_top} must exceed y={y}")
    n = n_top - y + 1
    ab = np.zeros((3, n))
    rhs = np.full(n, -1.0)
    rhs[0] = 0.0
    ab[1, 0] = 1.0                      # u(y) = 0
    for i, x in enumerate(range(y + 1, n_top + 1), start=1):
        r = rates(params, x)
        beta = 0.0 if x == n_top else r.beta   # reflecting truncation at the top
        if i + 1 < n:
            ab[0, i + 1] = beta         # a[i, i+1], stored column-indexed
        ab[1, i] = -(r.alpha + beta)
        ab[2, i - 1] = r.alpha          # a[i, i-1]
    return solve_banded((1, 1), ab, rhs)


def hitting_time_oracle_mp(params: ChainParams, y: int, n_top: int | None = None,
                           dps: int = 60) -> np.ndarray:
    """Extended-precision variant of :func:`hitting_time_oracle`.

    Plain Thomas elimination on the same tridiagonal system, carried out in
    mpmath arithmetic.  Needed because once a single descent step exceeds
    ~e^30 the double-precision system is singular to working precision
    (consecutive hitting times agree beyond machine epsilon) and any f64
    solver returns noise.  Returns float64 logs of u to keep the result
    representable: log u[x - y] for x = y..n_top (log u[0] = -inf).
    """
    from mpmath import mp, mpf

    _require_modified(params)
    if y < 0:
        raise DomainError(f"y must be nonnegative, got y={y}")
    if n_top is None:
        n_top = _truncation_top(params, 2 * rate_balance_state(params))
    if n_top <= y:
        raise DomainError(f"n_top={n_top} must exceed y={y}")
    n = n_top - y + 1
    with mp.workdps(dps):
        # rows i = 1..n-1 for states x = y+i: a u[i-1] + b u[i] + c u[i+1] = -1
        cp = [mpf(0)] * n       # modified superdiagonal
        dp = [mpf(0)] * n       # modified rhs
        cp[0] = mpf(0)          # Dirichlet row u(y) = 0
        dp[0] = mpf(0)
        for i, x in enumerate(range(y + 1, n_top + 1), start=1):
            r = rates(params, x)
            a = mpf(r.alpha)
            c = mpf(0.0 if x == n_top else r.beta)
            b = -(a + c) if x == n_top else -(a + mpf(r.beta))
            denom = b - a * cp[i - 1]
            cp[i] = c / denom
            dp[i] = (mpf(-1) - a * dp[i - 1]) / denom
        u = [mpf(0)] * n
        u[-1] = dp[-1]
        for i in range(n - 2, -1, -1):
            u[i] = dp[i] - cp[i] * u[i + 1]
        out = np.empty(n)
        out[0] = -math.inf
        for i in range(1, n):
            out[i] = float(mp.log(u[i]))
    return out


def exit_time_oracle(params: ChainParams, n1: int, n2: int) -> np.ndarray:
    """u[x] = E tau_{x -> {n1, n2}} for x = n1..n2 (Dirichlet at both ends)."""
    _require_modified(params)
    if not 0 <= n1 < n2:
        raise DomainError(f"need 0 <= n1 < n2, got n1={n1}, n2={n2}")
    n = n2 - n1 + 1
    ab = np.zeros((3, n))
    rhs = np.full(n, -1.0)
    rhs[0] = 0.0
    rhs[-1] = 0.0
    ab[1, 0] = 1.0
    ab[1, -1] = 1.0
    for i, x in enumerate(range(n1 + 1, n2), start=1):
        r = rates(params, x)
        ab[0, i + 1] = r.beta
        ab[1, i] = -(r.alpha + r.beta)
        ab[2, i - 1] = r.alpha
    return solve_banded((1, 1), ab, rhs)
