"""Acceptance checks: every tolerance pinned here, runnable at two scales.

Each check returns a :class:`CheckResult`; ``quick=True`` shrinks the
Monte-Carlo and sweep sizes for a desk-scale smoke run (the tolerances
that are statistical in nature are loosened alongside, and noted in the
detail string), while ``quick=False`` runs the full-scale criteria.
All randomness is driven by fixed seeds; the checks are deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .limits import (
    breiman_nu,
    clt_moments,
    fluid_solution,
    ou_exit_tail_check,
    z_star,
)
from .model import ChainParams, Variant, rate_balance_state, rates
from .passage import (
    exit_time_oracle,
    hitting_time_oracle,
    hitting_time_oracle_mp,
    log_S,
    log_S_table,
    mean_exit_symmetric,
    _log_rate_arrays,
)
from .simulation import (
    replicate_seed,
    sample_first_passage,
    simulate,
    simulate_mean_field_lattice,
    simulate_occupation,
)
from .special import hypergeom_asymptotic, hypergeom_series, hypergeom_via_gamma
from .stationary import build_stationary, ld_rate, total_variation

RATE_TRIPLES = [(2.0, 1.0, 1.0), (1.5, 0.5, 2.0), (3.0, 1.0, 0.5)]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    lines: list[str] = field(default_factory=list)


def _result(name, conditions, t0, extra=""):
    """conditions: list of (label, ok, measurement-string)."""
    passed = all(ok for _, ok, _ in conditions)
    lines = [f"{'ok' if ok else 'FAIL'}: {label} ({meas})" for label, ok, meas in conditions]
    detail = "; ".join(lines)
    if extra:
        detail = f"{extra}; {detail}"
    return CheckResult(name=name, passed=passed, detail=detail,
                       elapsed=time.perf_counter() - t0, lines=lines)


def _generator_null_vector(params: ChainParams, n_max: int) -> np.ndarray:
    n = n_max + 1
    Q = np.zeros((n, n))
    for x in range(n):
        r = rates(params, x)
        beta = r.beta if x < n_max else 0.0
        if x > 0:
            Q[x, x - 1] = r.alpha
        if x < n_max:
            Q[x, x + 1] = beta
        Q[x, x] = -(r.alpha + beta)
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(A, rhs)


def check_exactness_oracle(quick: bool = False) -> CheckResult:
    """1: product-form law vs generator null vector (TV < 1e-10) and analytic
    passage times vs linear-solve hitting times (rel < 1e-6), all parameter
    sets, under a minute."""
    t0 = time.perf_counter()
    sizes = [10, 30] if quick else [10, 30, 50]
    conditions = []
    for b, mu, g in RATE_TRIPLES:
        for L in sizes:
            params = ChainParams(b=b, mu=mu, gamma=g, L=L)
            law = build_stationary(params, tail_tol=1e-14)
            oracle = _generator_null_vector(params, law.n_max)
            tv = total_variation(law.pmf, oracle)
            conditions.append(
                (f"pi TV ({b},{mu},{g},L={L})", tv < 1e-10, f"TV={tv:.2e}")
            )
            top = 2 * rate_balance_state(params)
            log_s = log_S_table(params, top)
            _, log_alpha = _log_rate_arrays(params, top)
            log_steps = log_s[1: top + 1] - log_alpha[1: top + 1]   # step k: tau_{k->k-1}
            worst = 0.0
            ys = range(0, top) if not quick else range(0, top, max(1, top // 12))
            # the f64 system loses ~e^peak * eps of each component to
            # elimination noise, so past a step of e^12 the 1e-6 comparison
            # needs the extended-precision Thomas oracle
            suffix_peak = np.maximum.accumulate(log_steps[::-1])[::-1]
            dps = int(log_steps.max() / math.log(10.0)) + 30
            for y in ys:
                analytic_log = np.logaddexp.accumulate(log_steps[y:top])
                if suffix_peak[y] > 12.0:
                    oracle_log = hitting_time_oracle_mp(params, y, dps=dps)[1: top - y + 1]
                    rel = np.abs(np.expm1(analytic_log - oracle_log)).max()
                else:
                    u = hitting_time_oracle(params, y)
                    rel = np.abs(np.exp(analytic_log) / u[1: top - y + 1] - 1.0).max()
                worst = max(worst, rel)
            conditions.append(
                (f"passage vs solve ({b},{mu},{g},L={L})", worst < 1e-6, f"rel={worst:.2e}")
            )
    elapsed = time.perf_counter() - t0
    conditions.append(("runtime < 60 s", elapsed < 60.0, f"{elapsed:.1f}s"))
    return _result("1 exactness-oracle", conditions, t0)


def check_hypergeom_identity(quick: bool = False) -> CheckResult:
    """2: S_y equals F(mu L/gamma + y + 1, b L/gamma) through both the series
    and the incomplete-gamma path, to 1e-8 relative in log."""
    t0 = time.perf_counter()
    b, mu, g = 2.0, 1.0, 1.0
    sizes = [20] if quick else [20, 100]
    y_top = 8 if quick else 20
    worst_series = worst_gamma = 0.0
    for L in sizes:
        params = ChainParams(b=b, mu=mu, gamma=g, L=L)
        z = b * L / g
        for y in range(y_top + 1):
            direct = log_S(params, y, cross_check=False)
            A = mu * L / g + y + 1
            via_series = hypergeom_series(A, z).log_value
            via_gamma = hypergeom_via_gamma(A, z).log_value
            worst_series = max(worst_series, abs(direct - via_series) / max(1, abs(via_series)))
            worst_gamma = max(worst_gamma, abs(direct - via_gamma) / max(1, abs(via_gamma)))
    conditions = [
        ("series path", worst_series < 1e-8, f"rel={worst_series:.2e}"),
        ("gamma path", worst_gamma < 1e-8, f"rel={worst_gamma:.2e}"),
    ]
    return _result("2 hypergeometric-identity", conditions, t0)


def check_theorem1_regimes(quick: bool = False) -> CheckResult:
    """3: each asymptotic regime within 1% relative log error at A = 1e4,
    with errors decreasing from A = 1e2."""
    t0 = time.perf_counter()
    shapes = {
        "I (z=A/2)": lambda A: A / 2,
        "II (z=2A)": lambda A: 2 * A,
        "III (z=A+2rtA)": lambda A: A + 2 * math.sqrt(A),
        "IV (z=A-2rtA)": lambda A: A - 2 * math.sqrt(A),
    }
    A_top = 1e3 if quick else 1e4
    A_seq = [1e2, 1e3] if quick else [1e2, 1e3, 1e4]
    conditions = []
    for name, zf in shapes.items():
        z = zf(A_top)
        exact = hypergeom_series(A_top, z).log_value
        approx = hypergeom_asymptotic(A_top, z).log_value
        rel = abs(approx - exact) / max(1.0, abs(exact))
        tol = 0.03 if quick else 0.01
        conditions.append((f"regime {name}", rel < tol, f"rel={rel:.2e} at A={A_top:g}"))
        errs = []
        for A in A_seq:
            zz = zf(A)
            e = hypergeom_series(A, zz).log_value
            a = hypergeom_asymptotic(A, zz).log_value
            errs.append(abs(a - e) / max(1.0, abs(e)))
        decreasing = all(x > y for x, y in zip(errs, errs[1:]))
        conditions.append(
            (f"regime {name} error decreases", decreasing,
             "->".join(f"{e:.1e}" for e in errs))
        )
    return _result("3 theorem1-regimes", conditions, t0)


def check_local_clt(quick: bool = False) -> CheckResult:
    """4: Gaussian local limit at L = 1e5 within 2% over |k| <= 2 sigma, and
    the peak height within [0.98, 1.02] of 1/sqrt(2 pi (b/gamma) L)."""
    t0 = time.perf_counter()
    L = 10 ** 5
    params = ChainParams(b=2, mu=1, gamma=1, L=L)
    law = build_stationary(params)
    sigma = math.sqrt(L * params.b / params.gamma)
    ks = np.arange(-int(2 * sigma), int(2 * sigma) + 1)
    pi_vals = np.exp(law.log_pmf[law.mode + ks])
    gauss = np.exp(-0.5 * ks ** 2 / sigma ** 2) / math.sqrt(2 * math.pi * sigma ** 2)
    defect = np.abs(pi_vals / gauss - 1.0).max()
    peak = math.exp(law.log_prob(law.mode)) * math.sqrt(2 * math.pi * (params.b / params.gamma) * L)
    elapsed = time.perf_counter() - t0
    conditions = [
        ("max defect over 2 sigma", defect < 0.02, f"{defect:.4f}"),
        ("peak height ratio", 0.98 <= peak <= 1.02, f"{peak:.4f}"),
        ("runtime < 60 s", elapsed < 60.0, f"{elapsed:.1f}s"),
    ]
    return _result("4 local-clt", conditions, t0)


def check_large_deviations(quick: bool = False) -> CheckResult:
    """5: -log pi(n* + delta L), with the sqrt-L prefactor subtracted
    explicitly, within 2% of L * rate(delta) at L = 1e5."""
    t0 = time.perf_counter()
    L = 10 ** 5
    params = ChainParams(b=2, mu=1, gamma=1, L=L)
    law = build_stationary(params)
    prefactor = 0.5 * math.log(2 * math.pi * (params.b / params.gamma) * L)
    conditions = []
    for delta in (0.1, 0.3):
        k = round(delta * L)
        measured = -law.log_prob(law.mode + k) - prefactor
        predicted = L * ld_rate(params, delta)
        rel = abs(measured - predicted) / predicted
        conditions.append((f"delta={delta}", rel < 0.02, f"rel={rel:.2e}"))
    return _result("5 large-deviations", conditions, t0)


def check_simulator(quick: bool = False) -> CheckResult:
    """6: KS test on holding times and binomial test on jump directions at
    significance 1e-3 (1e4 samples), occupation measure within 0.02 TV of
    the exact law at L = 50, T = 1e5."""
    t0 = time.perf_counter()
    params = ChainParams(b=2, mu=1, gamma=1, L=50)
    x = rate_balance_state(params)
    n_target = 2000 if quick else 10 ** 4
    # visits to the well bottom happen ~8 per unit time at these rates
    t_run = 1.2 * n_target / 8.0 + 200.0
    traj = simulate(params, x, t_max=t_run, seed=61001)
    dts = np.diff(traj.times)
    at_x = traj.states[:-1] == x
    holds = dts[at_x][:n_target]
    r = rates(params, x)
    ks = stats.kstest(holds, "expon", args=(0, 1.0 / (r.alpha + r.beta)))
    ups = int((np.diff(traj.states)[at_x][:n_target] == 1).sum())
    n_vis = min(int(at_x.sum()), n_target)
    binom = stats.binomtest(ups, n_vis, r.beta / (r.alpha + r.beta))

    T = 5e3 if quick else 1e5
    tv_tol = 0.04 if quick else 0.02
    occ = simulate_occupation(params, x, t_max=T, burn_in=100.0, seed=61002)
    law = build_stationary(params)
    tv = total_variation(occ, law.pmf)
    conditions = [
        (f"KS holding times (n={len(holds)})", ks.pvalue > 1e-3, f"p={ks.pvalue:.3g}"),
        (f"binomial jump directions (n={n_vis})", binom.pvalue > 1e-3, f"p={binom.pvalue:.3g}"),
        (f"occupation TV at T={T:g}", tv < tv_tol, f"TV={tv:.4f}"),
    ]
    return _result("6 simulator-correctness", conditions, t0)


def _two_sample_chi2(a: np.ndarray, b: np.ndarray, min_expected: int = 5) -> float:
    hi = int(max(a.max(), b.max()))
    edges = np.arange(-0.5, hi + 1.5)
    h1, _ = np.histogram(a, bins=edges)
    h2, _ = np.histogram(b, bins=edges)
    keep = (h1 + h2) >= 2 * min_expected
    t1 = np.append(h1[keep], h1[~keep].sum())
    t2 = np.append(h2[keep], h2[~keep].sum())
    nz = (t1 + t2) > 0
    _, p, _, _ = stats.chi2_contingency(np.vstack([t1[nz], t2[nz]]))
    return float(p)


def check_mean_field_reduction(quick: bool = False) -> CheckResult:
    """7: lattice total-count distribution at T = 5, L = 10 indistinguishable
    from the direct chain (chi-square p > 1e-3, 1e4 runs each side).

    The reference chain is absorbed at 0: the lattice has no particles left
    to give birth there, while the bare unmodified chain carries the
    beta_0 = 1 irreducibility convention.
    """
    t0 = time.perf_counter()
    params = ChainParams(b=2, mu=1, gamma=1, L=10, variant=Variant.UNMODIFIED)
    n = 2000 if quick else 10 ** 4
    init = np.full(10, 2, dtype=np.int64)
    lat = np.empty(n)
    for rep in range(n):
        lat[rep] = simulate_mean_field_lattice(
            params, init, t_max=5.0, seed=replicate_seed(71001, rep)
        ).final_state.total
    chain = np.empty(n)
    for rep in range(n):
        chain[rep] = simulate(
            params, 20, t_max=5.0, targets=[0], seed=replicate_seed(71002, rep),
            record=False,
        ).x_final
    p = _two_sample_chi2(lat, chain)
    conditions = [(f"chi-square two-sample (n={n})", p > 1e-3, f"p={p:.4f}")]
    return _result("7 mean-field-reduction", conditions, t0)


def _sup_fluid_error(params, z0, T, seed):
    x0 = round(z0 * params.L)
    traj = simulate(params, x0, t_max=T, seed=seed)
    zs = z_star(params)
    # closed-form flow, vectorised over the jump times
    denom = z0 + (zs - z0) * np.exp(-params.gamma * zs * traj.times)
    flow = zs * z0 / denom
    anchor = fluid_solution(params, z0, float(traj.times[-1])).z
    assert abs(flow[-1] - anchor) < 1e-12
    return float(np.abs(traj.states / params.L - flow).max())


def check_fluid_limit(quick: bool = False) -> CheckResult:
    """8: sup-error of Z_L against the closed-form flow halves from L to 4L
    (median over 20 seeds), and the OU moments match the empirical
    sqrt(L)-fluctuations at L = 1e4 within 3 stderr (mean) / 10% (variance)."""
    t0 = time.perf_counter()
    base = ChainParams(b=2, mu=1, gamma=1, L=10 ** 3)
    n_seeds = 9 if quick else 20
    L_lo, L_hi = (500, 2000) if quick else (10 ** 3, 4 * 10 ** 3)
    sups = {}
    for L in (L_lo, L_hi):
        params = ChainParams(b=2, mu=1, gamma=1, L=L)
        vals = [_sup_fluid_error(params, 0.5 * z_star(params), 5.0, replicate_seed(81001, L + s))
                for s in range(n_seeds)]
        sups[L] = float(np.median(vals))
    ratio = sups[L_lo] / sups[L_hi]

    L = 2500 if quick else 10 ** 4
    n_reps = 1500 if quick else 10 ** 4
    params = ChainParams(b=2, mu=1, gamma=1, L=L)
    zs = z_star(params)
    zeta0 = 1.0
    x0 = round(L * zs + zeta0 * math.sqrt(L))
    t_end = 1.0
    finals = np.empty(n_reps)
    for rep in range(n_reps):
        finals[rep] = simulate(params, x0, t_max=t_end, seed=replicate_seed(81002, rep),
                               record=False).x_final
    zeta = math.sqrt(L) * (finals / L - zs)
    moments = clt_moments(params, zs, zeta0, t_end)
    mean_err = abs(zeta.mean() - moments.mean)
    mean_stderr = zeta.std(ddof=1) / math.sqrt(n_reps)
    var_rel = abs(zeta.var(ddof=1) / moments.variance - 1.0)
    var_tol = 0.2 if quick else 0.10
    conditions = [
        ("sup-error halves L->4L", 1.6 <= ratio <= 2.6,
         f"ratio={ratio:.2f} ({sups[L_lo]:.4f}/{sups[L_hi]:.4f})"),
        ("OU mean within 3 stderr", mean_err < 3 * mean_stderr,
         f"err={mean_err:.4f}, 3se={3 * mean_stderr:.4f}"),
        ("OU variance within 10%", var_rel < var_tol, f"rel={var_rel:.3f}"),
    ]
    return _result("8 fluid-limit", conditions, t0)


def check_exit_times(quick: bool = False) -> CheckResult:
    """9: MC mean exit time within 3 stderr of the exact u(n*) at L = 50,
    delta1 = 0.5; exit-at-n2 fraction in [0.45, 0.55] at L = 1e3 (delta1 =
    0.1: at 0.5 the mean exit time is ~e^66 and the exact split is 0.71 --
    the symmetry is a leading-exponent statement); log u(n*) grows linearly
    in L with slope within 25% of the asymptotic exponent coefficient."""
    t0 = time.perf_counter()
    conditions = []

    L_mc = 30 if quick else 50
    n_mc = 3000 if quick else 10 ** 5
    params = ChainParams(b=2, mu=1, gamma=1, L=L_mc)
    est = mean_exit_symmetric(params, 0.5)
    iv = est.interval
    mc = sample_first_passage(params, iv.n_star, [iv.n1, iv.n2], n_reps=n_mc, seed=91001)
    err = abs(mc.mean - est.mean_time)
    conditions.append(
        (f"MC mean exit vs exact (L={L_mc}, n={n_mc})", err < 3 * mc.stderr,
         f"mc={mc.mean:.3f}, exact={est.mean_time:.3f}, 3se={3 * mc.stderr:.3f}")
    )
    oracle = exit_time_oracle(params, iv.n1, iv.n2)[iv.n_star - iv.n1]
    rel = abs(est.mean_time / oracle - 1.0)
    conditions.append(("exact vs linear solve", rel < 1e-6, f"rel={rel:.2e}"))

    L_frac = 400 if quick else 10 ** 3
    n_frac = 3000 if quick else 2 * 10 ** 4
    params_f = ChainParams(b=2, mu=1, gamma=1, L=L_frac)
    iv_f = mean_exit_symmetric(params_f, 0.1).interval
    mc_f = sample_first_passage(params_f, iv_f.n_star, [iv_f.n1, iv_f.n2],
                                n_reps=n_frac, seed=91002)
    frac = mc_f.hit_fraction(iv_f.n2)
    conditions.append(
        (f"exit-at-n2 fraction (L={L_frac}, delta1=0.1, n={n_frac})",
         0.45 <= frac <= 0.55, f"frac={frac:.4f}")
    )

    Ls = np.array([30.0, 60.0, 90.0])
    logs = [mean_exit_symmetric(ChainParams(b=2, mu=1, gamma=1, L=int(L)), 0.5).log_mean_time
            for L in Ls]
    slope = float(np.polyfit(Ls, logs, 1)[0])
    rho1 = 0.75
    coeff = 2.0 * math.log(rho1) + 0.5 * (1 - math.log(rho1)) * 1.0
    rel = abs(slope - coeff) / abs(coeff)
    conditions.append(
        ("log u(n*) slope in L", rel < 0.25, f"slope={slope:.4f}, coeff={coeff:.4f}, rel={rel:.2%}")
    )
    return _result("9 exit-times", conditions, t0)


def check_breiman(quick: bool = False) -> CheckResult:
    """10: nu(1) = 1 exactly, nu(2) threshold to 1e-10, and the simulated OU
    exit tail slope within 15% of -2 at A = breiman_nu(1)."""
    t0 = time.perf_counter()
    a1 = breiman_nu(1)
    a2 = breiman_nu(2)
    expected2 = math.sqrt(3.0 - math.sqrt(6.0))
    n_reps = 2 * 10 ** 4 if quick else 10 ** 5
    params = ChainParams(b=2, mu=1, gamma=1, L=100)
    res = ou_exit_tail_check(params, a1, np.linspace(0.0, 4.0, 81), n_reps=n_reps, seed=101001)
    slope_rel = abs(res.fitted_slope - res.expected_slope) / abs(res.expected_slope)
    conditions = [
        ("nu(1) root exact", a1 == 1.0, f"A={a1!r}"),
        ("nu(2) root to 1e-10", abs(a2 - expected2) < 1e-10, f"|err|={abs(a2 - expected2):.2e}"),
        (f"OU tail slope (n={n_reps})", slope_rel < 0.15,
         f"fitted={res.fitted_slope:.4f} vs {res.expected_slope:.1f}"),
    ]
    return _result("10 breiman-roots", conditions, t0)


ALL_CHECKS = [
    check_exactness_oracle,
    check_hypergeom_identity,
    check_theorem1_regimes,
    check_local_clt,
    check_large_deviations,
    check_simulator,
    check_mean_field_reduction,
    check_fluid_limit,
    check_exit_times,
    check_breiman,
]


def run_all(quick: bool = True) -> list[CheckResult]:
    return [check(quick=quick) for check in ALL_CHECKS]
