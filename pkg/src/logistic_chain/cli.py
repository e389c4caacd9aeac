"""Command-line interface: every analysis and simulation behind one executable.

Reproducibility rules: every randomized subcommand either receives an
explicit ``--seed`` or generates one and prints it to stderr; the
effective configuration is echoed into the output header (``# config:``
line for CSV, a ``config`` object for JSON), and parsing that header
reproduces the run.  A ``key=value`` config file can seed any flag;
explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, EventCapError
from .limits import breiman_nu, clt_moments, fluid_solution
from .model import ChainParams, Variant, rate_balance_state
from .passage import (
    exit_time_oracle,
    hitting_time_oracle_mp,
    mean_exit_symmetric,
    mean_passage,
    mean_passage_to_zero,
    exit_split_probability,
)
from .simulation import (
    sample_first_passage,
    simulate,
    simulate_mean_field_lattice,
    write_trajectory,
)
from .special import hypergeom_asymptotic, hypergeom_series, hypergeom_via_gamma
from .stationary import build_stationary, ld_rate, local_clt_density
from . import validation

OUTDIR_ENV = "LOGISTIC_CHAIN_OUTDIR"

_PARAM_KEYS = ("b", "mu", "gamma", "L", "variant", "seed", "out", "output")


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DomainError(f"config line is not key=value: {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _resolve(args, key, cast, default=None, required=False):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    cfg = getattr(args, "_config_values", {})
    if key in cfg:
        return cast(cfg[key])
    if required and default is None:
        raise DomainError(f"missing required option --{key}")
    return default


def _chain_params(args, variant_default="modified") -> ChainParams:
    variant = _resolve(args, "variant", str, variant_default)
    return ChainParams(
        b=_resolve(args, "b", float, required=True),
        mu=_resolve(args, "mu", float, required=True),
        gamma=_resolve(args, "gamma", float, required=True),
        L=_resolve(args, "L", int, required=True),
        variant=Variant(variant),
    )


def _resolve_seed(args) -> int:
    seed = _resolve(args, "seed", int)
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}", file=sys.stderr)
    return int(seed)


def _open_out(args):
    out = _resolve(args, "out", str)
    if out is None:
        return sys.stdout, False
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not os.path.isabs(out):
        out = os.path.join(outdir, out)
    return open(out, "w"), True


def config_echo(command: str, settings: dict) -> str:
    payload = {"command": command, "version": __version__}
    payload.update(settings)
    return json.dumps(payload, sort_keys=True)


def parse_config_header(text: str) -> dict:
    """Recover the effective run configuration from an output document."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(stripped)["config"]
    for line in text.splitlines():
        if line.startswith("# config: "):
            return json.loads(line[len("# config: "):])
    raise DomainError("no config header found")


def _params_dict(params: ChainParams) -> dict:
    return {
        "b": params.b, "mu": params.mu, "gamma": params.gamma,
        "L": params.L, "variant": params.variant.value,
    }


def _write_csv(fh, command, settings, header, rows):
    fh.write(f"# config: {config_echo(command, settings)}\n")
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_json(fh, command, settings, payload):
    doc = {"config": json.loads(config_echo(command, settings))}
    doc.update(payload)
    json.dump(doc, fh, indent=2, sort_keys=True)
    fh.write("\n")


# --- subcommands -------------------------------------------------------------

def _cmd_stationary(args) -> int:
    params = _chain_params(args)
    tail_tol = _resolve(args, "tail-tol", float, 1e-12)
    law = build_stationary(params, tail_tol=tail_tol)
    mode = law.mode
    rows = []
    for x in range(law.n_max + 1):
        pi = math.exp(law.log_prob(x))
        gauss = local_clt_density(params, x - mode)
        ratio = pi / gauss if gauss > 0 else math.inf
        rows.append((x, pi, gauss, ratio))
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "stationary",
                   {**_params_dict(params), "tail_tol": tail_tol, "mode": mode},
                   ["x", "pi", "gauss", "ratio"], rows)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_ldcheck(args) -> int:
    sizes = [int(v) for v in _resolve(args, "L-list", str, "1000,10000,100000").split(",")]
    deltas = [float(v) for v in _resolve(args, "deltas", str, "0.1,0.3").split(",")]
    b = _resolve(args, "b", float, required=True)
    mu = _resolve(args, "mu", float, required=True)
    gamma = _resolve(args, "gamma", float, required=True)
    rows = []
    for L in sizes:
        params = ChainParams(b=b, mu=mu, gamma=gamma, L=L)
        law = build_stationary(params)
        prefactor = 0.5 * math.log(2 * math.pi * (b / gamma) * L)
        for delta in deltas:
            k = round(delta * L)
            measured = -law.log_prob(law.mode + k) - prefactor
            predicted = L * ld_rate(params, delta)
            rows.append((L, delta, measured, predicted))
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "ldcheck", {"b": b, "mu": mu, "gamma": gamma,
                                   "L_list": sizes, "deltas": deltas},
                   ["L", "delta", "measured", "predicted"], rows)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_hypergeom(args) -> int:
    A = _resolve(args, "A", float, required=True)
    z = _resolve(args, "z", float, required=True)
    rel_tol = _resolve(args, "rel-tol", float, 1e-12)
    h_threshold = _resolve(args, "h-threshold", float, None)
    series = hypergeom_series(A, z, rel_tol=rel_tol)
    payload = {
        "log_series": series.log_value,
        "series_regime": series.regime.kind.value,
    }
    kwargs = {} if h_threshold is None else {"h_threshold": h_threshold}
    asym = hypergeom_asymptotic(A, z, **kwargs)
    payload["log_asymptotic"] = asym.log_value
    payload["asymptotic_regime"] = asym.regime.kind.value
    if asym.regime.h is not None:
        payload["asymptotic_h"] = asym.regime.h
    if A > 2 and z > 0:
        payload["log_gamma_path"] = hypergeom_via_gamma(A, z).log_value
    fh, close = _open_out(args)
    try:
        _write_json(fh, "hypergeom", {"A": A, "z": z, "rel_tol": rel_tol}, payload)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_passage(args) -> int:
    params = _chain_params(args)
    delta1 = _resolve(args, "delta1", float)
    n_mc = _resolve(args, "mc", int, 0)
    payload = {}
    if delta1 is not None:
        est = mean_exit_symmetric(params, delta1)
        iv = est.interval
        oracle = exit_time_oracle(params, iv.n1, iv.n2)[iv.n_star - iv.n1]
        payload.update({
            "kind": "symmetric-exit",
            "n_star": iv.n_star, "n1": iv.n1, "n2": iv.n2,
            "delta1": iv.delta1, "delta2": iv.delta2, "rho1": iv.rho1,
            "log_exact": est.log_mean_time,
            "log_asymptotic": est.log_asymptotic,
            "log_oracle": math.log(oracle),
            "exit_at_n2_probability": exit_split_probability(params, delta1),
        })
        if n_mc:
            seed = _resolve_seed(args)
            mc = sample_first_passage(
                params, iv.n_star, [iv.n1, iv.n2], n_reps=n_mc, seed=seed,
                n_threads=_resolve(args, "threads", int, 1),
            )
            payload["monte_carlo"] = {
                "mean": mc.mean, "stderr": mc.stderr, "n_reps": mc.n_reps,
                "seed": seed, "hit_fraction_n2": mc.hit_fraction(iv.n2),
            }
    else:
        x = _resolve(args, "x", int, required=True)
        y = _resolve(args, "y", int)
        if y is None:
            y = 0
        payload.update({
            "kind": "hitting-time",
            "x": x, "y": y,
            "log_exact": mean_passage(params, x, y).log_mean_time,
            "log_oracle": float(hitting_time_oracle_mp(params, y, n_top=max(
                x, 2 * rate_balance_state(params)) + 40)[x - y]),
        })
        if y == 0:
            down = mean_passage_to_zero(params)
            if down.log_asymptotic is not None:
                payload["log_asymptotic_to_zero_from_nstar"] = down.log_asymptotic
        if n_mc:
            seed = _resolve_seed(args)
            mc = sample_first_passage(
                params, x, [y], n_reps=n_mc, seed=seed,
                n_threads=_resolve(args, "threads", int, 1),
            )
            payload["monte_carlo"] = {
                "mean": mc.mean, "stderr": mc.stderr, "n_reps": mc.n_reps, "seed": seed,
            }
    fh, close = _open_out(args)
    try:
        _write_json(fh, "passage", {**_params_dict(params)}, payload)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_passage_mc(args) -> int:
    params = _chain_params(args)
    x0 = _resolve(args, "x0", int, required=True)
    targets = [int(v) for v in _resolve(args, "targets", str, required=True).split(",")]
    n_reps = _resolve(args, "n-reps", int, 1000)
    seed = _resolve_seed(args)
    threads = _resolve(args, "threads", int, 1)
    res = sample_first_passage(params, x0, targets, n_reps=n_reps, seed=seed,
                               n_threads=threads)
    payload = {
        "mean": res.mean,
        "stderr": res.stderr,
        "n_reps": res.n_reps,
        "hit_fractions": {str(t): res.hit_fraction(t) for t in targets},
        "quantiles": {
            "q10": float(np.quantile(res.times, 0.1)),
            "q50": float(np.quantile(res.times, 0.5)),
            "q90": float(np.quantile(res.times, 0.9)),
        },
    }
    fh, close = _open_out(args)
    try:
        _write_json(fh, "passage-mc",
                    {**_params_dict(params), "x0": x0, "targets": targets,
                     "n_reps": n_reps, "seed": seed, "threads": threads},
                    payload)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_simulate(args) -> int:
    params = _chain_params(args)
    x0 = _resolve(args, "x0", int, required=True)
    t_max = _resolve(args, "t-max", float)
    targets_s = _resolve(args, "targets", str)
    targets = [int(v) for v in targets_s.split(",")] if targets_s else None
    seed = _resolve_seed(args)
    fmt = _resolve(args, "format", str, "csv")
    max_events = _resolve(args, "max-events", int, 10 ** 9)
    traj = simulate(params, x0, t_max=t_max, targets=targets, seed=seed,
                    max_events=max_events)
    settings = {**_params_dict(params), "x0": x0, "t_max": t_max,
                "targets": targets, "seed": seed,
                "stop_reason": traj.stop_reason.value, "t_final": traj.t_final}
    if fmt == "binary":
        out = _resolve(args, "out", str, required=True)
        outdir = os.environ.get(OUTDIR_ENV)
        if outdir and not os.path.isabs(out):
            out = os.path.join(outdir, out)
        with open(out, "wb") as fh:
            write_trajectory(traj, fh)
        return 0
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "simulate", settings, ["time", "state"],
                   zip(traj.times.tolist(), traj.states.tolist()))
    finally:
        if close:
            fh.close()
    return 0


def _cmd_lattice(args) -> int:
    params = _chain_params(args, variant_default="unmodified")
    per_site = _resolve(args, "init-per-site", int)
    counts_s = _resolve(args, "init-counts", str)
    if counts_s:
        counts = np.array([int(v) for v in counts_s.split(",")], dtype=np.int64)
    elif per_site is not None:
        counts = np.full(params.L, per_site, dtype=np.int64)
    else:
        raise DomainError("lattice needs --init-per-site or --init-counts")
    t_max = _resolve(args, "t-max", float, required=True)
    seed = _resolve_seed(args)
    competition = _resolve(args, "competition", str, "include-self")
    res = simulate_mean_field_lattice(params, counts, t_max=t_max, seed=seed,
                                      competition=competition)
    rows = zip(res.lattice.times.tolist(), res.lattice.sites.tolist(),
               res.lattice.deltas.tolist(), res.lattice.totals.tolist())
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "lattice",
                   {**_params_dict(params), "seed": seed, "t_max": t_max,
                    "competition": competition,
                    "init_counts": counts.tolist(),
                    "final_counts": res.final_state.site_counts.tolist()},
                   ["time", "site", "delta", "total"], rows)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_limits(args) -> int:
    params = _chain_params(args)
    z0 = _resolve(args, "z0", float, required=True)
    zeta0 = _resolve(args, "zeta0", float, 1.0)
    t_grid = [float(v) for v in _resolve(args, "t-grid", str, "0.0,0.25,0.5,1.0,2.0").split(",")]
    quad_tol = _resolve(args, "quad-tol", float, 1e-10)
    n_mc = _resolve(args, "mc", int, 0)
    settings = {**_params_dict(params), "z0": z0, "zeta0": zeta0, "quad_tol": quad_tol}

    empirical = None
    if n_mc:
        seed = _resolve_seed(args)
        settings.update({"mc": n_mc, "seed": seed})
        from .simulation import replicate_seed

        x0 = round(z0 * params.L)
        horizon = max(t_grid)
        samples = np.empty((n_mc, len(t_grid)))
        for rep in range(n_mc):
            traj = simulate(params, x0, t_max=horizon, seed=replicate_seed(seed, rep))
            idx = np.searchsorted(traj.times, t_grid, side="right") - 1
            samples[rep] = traj.states[idx] / params.L
        empirical = samples

    rows = []
    for j, t in enumerate(t_grid):
        flow = fluid_solution(params, z0, t)
        moments = clt_moments(params, z0, zeta0, t, quad_tol=quad_tol)
        row = [t, flow.z, moments.mean, moments.variance]
        if empirical is not None:
            zeta = math.sqrt(params.L) * (empirical[:, j] - flow.z)
            row += [float(zeta.mean()), float(zeta.var(ddof=1)) if n_mc > 1 else 0.0]
        rows.append(tuple(row))
    header = ["t", "Z", "mean", "var"] + (["empirical_mean", "empirical_var"] if empirical is not None else [])
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "limits", settings, header, rows)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_breiman(args) -> int:
    m_max = _resolve(args, "m-max", int, 8)
    rows = [(m, breiman_nu(m)) for m in range(1, m_max + 1)]
    fh, close = _open_out(args)
    try:
        _write_csv(fh, "breiman", {"m_max": m_max}, ["m", "A"], rows)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_validate(args) -> int:
    quick = not getattr(args, "full", False)
    results = validation.run_all(quick=quick)
    width = max(len(r.name) for r in results)
    all_pass = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  ({r.elapsed:6.1f}s)")
        if not r.passed:
            all_pass = False
            for line in r.lines:
                print(f"    {line}")
    print("all criteria passed" if all_pass else "SOME CRITERIA FAILED")
    return 0 if all_pass else 1


# --- parser ------------------------------------------------------------------

def _add_param_flags(sp):
    sp.add_argument("--b", type=float, help="per-capita birth rate")
    sp.add_argument("--mu", type=float, help="per-capita mortality rate")
    sp.add_argument("--gamma", type=float, help="competition weight")
    sp.add_argument("--L", type=int, help="system size")
    sp.add_argument("--variant", choices=["modified", "unmodified"])
    sp.add_argument("--config", help="key=value config file; flags win")
    sp.add_argument("--out", help=f"output path (joined to ${OUTDIR_ENV} when relative)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logistic-chain",
        description="Logistic birth-death chain: stationary law, passage times, "
                    "scaling limits, and exact simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stationary", help="exact stationary law vs the Gaussian local limit")
    _add_param_flags(sp)
    sp.add_argument("--tail-tol", type=float)
    sp.set_defaults(func=_cmd_stationary)

    sp = sub.add_parser("ldcheck", help="large-deviations decay vs the rate function")
    _add_param_flags(sp)
    sp.add_argument("--L-list", dest="L_list")
    sp.add_argument("--deltas")
    sp.set_defaults(func=_cmd_ldcheck)

    sp = sub.add_parser("hypergeom", help="evaluate F(A, z) by all paths")
    sp.add_argument("--A", type=float)
    sp.add_argument("--z", type=float)
    sp.add_argument("--rel-tol", dest="rel_tol", type=float)
    sp.add_argument("--h-threshold", dest="h_threshold", type=float)
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_hypergeom)

    sp = sub.add_parser("passage", help="mean first-passage times (exact, asymptotic, oracle)")
    _add_param_flags(sp)
    sp.add_argument("--x", type=int)
    sp.add_argument("--y", type=int)
    sp.add_argument("--delta1", type=float, help="symmetric exit interval instead of x/y")
    sp.add_argument("--mc", type=int, help="add a Monte-Carlo entry with this many replicates")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=_cmd_passage)

    sp = sub.add_parser("passage-mc", help="Monte-Carlo first-passage summary")
    _add_param_flags(sp)
    sp.add_argument("--x0", type=int)
    sp.add_argument("--targets")
    sp.add_argument("--n-reps", dest="n_reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=_cmd_passage_mc)

    sp = sub.add_parser("simulate", help="one exact trajectory (CSV or binary frame)")
    _add_param_flags(sp)
    sp.add_argument("--x0", type=int)
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.add_argument("--targets")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--format", choices=["csv", "binary"])
    sp.add_argument("--max-events", dest="max_events", type=int)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("lattice", help="mean-field lattice simulation")
    _add_param_flags(sp)
    sp.add_argument("--init-per-site", dest="init_per_site", type=int)
    sp.add_argument("--init-counts", dest="init_counts")
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.add_argument("--competition", choices=["include-self", "exclude-self"])
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=_cmd_lattice)

    sp = sub.add_parser("limits", help="fluid flow and CLT moments, optionally vs Monte Carlo")
    _add_param_flags(sp)
    sp.add_argument("--z0", type=float)
    sp.add_argument("--zeta0", type=float)
    sp.add_argument("--t-grid", dest="t_grid")
    sp.add_argument("--quad-tol", dest="quad_tol", type=float)
    sp.add_argument("--mc", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=_cmd_limits)

    sp = sub.add_parser("breiman", help="OU exit-rate thresholds A(m)")
    sp.add_argument("--m-max", dest="m_max", type=int)
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_breiman)

    sp = sub.add_parser("validate", help="run the acceptance checks")
    sp.add_argument("--quick", action="store_true", help="desk-scale run (default)")
    sp.add_argument("--full", action="store_true", help="full-scale criteria")
    sp.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config_path = getattr(args, "config", None)
        args._config_values = _read_config_file(config_path) if config_path else {}
        return args.func(args)
    except (DomainError, ConvergenceError, EventCapError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
