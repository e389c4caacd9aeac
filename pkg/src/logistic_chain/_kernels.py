"""Hot event loops for the exact simulators.

Each kernel consumes pre-drawn random buffers (one exponential and one or
two uniforms per event, all indexed together) and returns control to the
wrapper whenever a buffer runs dry, an output chunk fills, or a stopping
condition fires.  Drawing the buffers from independent per-purpose
generator streams makes the event sequence independent of the chunk size,
so trajectories are bit-reproducible for a given seed no matter how the
work is scheduled.

The kernels are compiled with numba when it is importable and run as
plain Python otherwise; both paths consume the buffers in the same order
and therefore produce identical trajectories.
"""

from __future__ import annotations

import math

STATUS_NEED_BUFFER = 0
STATUS_TIME_LIMIT = 1
STATUS_HIT_TARGET = 2
STATUS_ABSORBED = 3
STATUS_EVENT_CAP = 4
STATUS_OUT_FULL = 5
STATUS_OCC_FULL = 6


def _chain_kernel(b, mu, g_over_L, modified, x, t, t_max, targets,
                  exp_buf, uni_buf, events_left, record,
                  out_times, out_states, occ, occ_on, burn_in):
    """Advance one birth-death trajectory; see module docstring for the contract.

    Returns (status, consumed, n_out, t, x, events_done).
    """
    i = 0
    nout = 0
    done = 0
    nbuf = exp_buf.shape[0]
    out_cap = out_times.shape[0]
    occ_cap = occ.shape[0]
    while True:
        if events_left - done <= 0:
            return STATUS_EVENT_CAP, i, nout, t, x, done
        if i >= nbuf:
            return STATUS_NEED_BUFFER, i, nout, t, x, done
        if record and nout >= out_cap:
            return STATUS_OUT_FULL, i, nout, t, x, done
        if occ_on and x >= occ_cap:
            return STATUS_OCC_FULL, i, nout, t, x, done
        if modified:
            beta = b * (x + 1.0)
        else:
            beta = b * x if x >= 1 else 1.0
        alpha = mu * x + g_over_L * x * x
        q = alpha + beta
        if q <= 0.0:
            if occ_on and math.isfinite(t_max):
                lo = t if t > burn_in else burn_in
                if t_max > lo:
                    occ[x] += t_max - lo
            if math.isfinite(t_max):
                t = t_max
            return STATUS_ABSORBED, i, nout, t, x, done
        dt = exp_buf[i] / q
        if t + dt > t_max:
            if occ_on:
                lo = t if t > burn_in else burn_in
                if t_max > lo:
                    occ[x] += t_max - lo
            return STATUS_TIME_LIMIT, i + 1, nout, t_max, x, done
        if occ_on:
            lo = t if t > burn_in else burn_in
            hi = t + dt
            if hi > lo:
                occ[x] += hi - lo
        t = t + dt
        if uni_buf[i] * q < beta:
            x = x + 1
        else:
            x = x - 1
        i += 1
        done += 1
        if record:
            out_times[nout] = t
            out_states[nout] = x
            nout += 1
        for k in range(targets.shape[0]):
            if x == targets[k]:
                return STATUS_HIT_TARGET, i, nout, t, x, done


def _lattice_kernel(b, mu, g_over_L, include_self, counts, n_total, t, t_max,
                    exp_buf, type_buf, pick_buf, events_left, record,
                    out_times, out_sites, out_deltas, out_totals):
    """Advance one mean-field lattice trajectory.

    Births at total rate b*N place the offspring on a uniform site; deaths
    (mortality plus competition) remove a uniformly chosen particle.  The
    embedded total count therefore follows the unmodified chain rates
    exactly.  Returns (status, consumed, n_out, t, n_total, events_done).
    """
    i = 0
    nout = 0
    done = 0
    nbuf = exp_buf.shape[0]
    out_cap = out_times.shape[0]
    n_sites = counts.shape[0]
    while True:
        if events_left - done <= 0:
            return STATUS_EVENT_CAP, i, nout, t, n_total, done
        if i >= nbuf:
            return STATUS_NEED_BUFFER, i, nout, t, n_total, done
        if record and nout >= out_cap:
            return STATUS_OUT_FULL, i, nout, t, n_total, done
        rb = b * n_total
        if include_self:
            rd = mu * n_total + g_over_L * n_total * n_total
        else:
            rd = mu * n_total + g_over_L * n_total * (n_total - 1.0)
        q = rb + rd
        if q <= 0.0:
            if math.isfinite(t_max):
                t = t_max
            return STATUS_ABSORBED, i, nout, t, n_total, done
        dt = exp_buf[i] / q
        if t + dt > t_max:
            return STATUS_TIME_LIMIT, i + 1, nout, t_max, n_total, done
        t = t + dt
        if type_buf[i] * q < rb:
            site = int(pick_buf[i] * n_sites)
            if site >= n_sites:
                site = n_sites - 1
            counts[site] += 1
            n_total += 1
            delta = 1
        else:
            target = pick_buf[i] * n_total
            site = n_sites - 1
            c = 0.0
            for s in range(n_sites):
                c += counts[s]
                if target < c:
                    site = s
                    break
            counts[site] -= 1
            n_total -= 1
            delta = -1
        i += 1
        done += 1
        if record:
            out_times[nout] = t
            out_sites[nout] = site
            out_deltas[nout] = delta
            out_totals[nout] = n_total
            nout += 1


try:
    import numba

    chain_kernel = numba.njit(cache=True)(_chain_kernel)
    lattice_kernel = numba.njit(cache=True)(_lattice_kernel)
except ImportError:  # pragma: no cover - exercised only without numba
    chain_kernel = _chain_kernel
    lattice_kernel = _lattice_kernel
