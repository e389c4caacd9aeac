"""Exact stochastic simulation of the chain and of the mean-field lattice.

Classic event-driven scheme: at state x the holding time is
Exp(alpha_x + beta_x) and the jump goes up with probability
beta_x/(alpha_x + beta_x).  No tau-leaping anywhere; the distribution-level
checks downstream need exactness.

Reproducibility contract: a trajectory is a pure function of
(params, x0, stopping rule, seed).  Replicate r of a Monte-Carlo run uses
the stream derived from ``SeedSequence(entropy=seed, spawn_key=(r,))``, a
counter-based split, so results do not depend on how replicates are
scheduled across workers.
"""

from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, EventCapError
from .model import ChainParams, Variant
from .passage import Method, PassageEstimate

_CHUNK = 1 << 14
DEFAULT_MAX_EVENTS = 10 ** 9


class StopReason(enum.Enum):
    TIME_LIMIT = "time-limit"
    HIT_TARGET = "hit-target"
    ABSORBED = "absorbed"


@dataclass(frozen=True)
class Trajectory:
    """One sample path: state at times[i] is states[i]; times[0] = 0 holds x0."""

    params: ChainParams
    seed: int | None
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    stop_reason: StopReason
    t_final: float
    hit_state: int | None = None

    @property
    def n_events(self) -> int:
        return len(self.times) - 1

    @property
    def x_final(self) -> int:
        return int(self.states[-1])


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def replicate_seed(seed: int, rep: int) -> np.random.SeedSequence:
    """Deterministic per-replicate stream key: master seed plus counter."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(rep,))


def simulate(
    params: ChainParams,
    x0: int,
    *,
    t_max: float | None = None,
    targets=None,
    seed,
    max_events: int = DEFAULT_MAX_EVENTS,
    record: bool = True,
) -> Trajectory:
    """Simulate until the time limit or the first visit to ``targets``.

    At least one stopping rule is required.  ``record=False`` keeps only
    the endpoint (the returned arrays hold just the initial and final
    points), which matters for long runs.
    """
    if x0 < 0:
        raise DomainError(f"x0 must be nonnegative, got {x0}")
    if t_max is None and targets is None:
        raise DomainError("need a stopping rule: t_max, targets, or both")
    if t_max is not None and not t_max > 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    targets_arr = np.asarray(sorted(set(targets)) if targets else [], dtype=np.int64)
    t_limit = math.inf if t_max is None else float(t_max)

    ss = _seed_sequence(seed)
    exp_ss, uni_ss = ss.spawn(2)
    exp_rng = np.random.default_rng(exp_ss)
    uni_rng = np.random.default_rng(uni_ss)

    if targets_arr.size and x0 in targets_arr:
        return Trajectory(
            params=params,
            seed=seed if isinstance(seed, int) else None,
            times=np.zeros(1),
            states=np.array([x0], dtype=np.int64),
            stop_reason=StopReason.HIT_TARGET,
            t_final=0.0,
            hit_state=x0,
        )

    t, x = 0.0, int(x0)
    events_left = int(max_events)
    chunks_t, chunks_s = [], []
    no_occ = np.empty(0, dtype=np.float64)
    while True:
        exp_buf = exp_rng.standard_exponential(_CHUNK)
        uni_buf = uni_rng.random(_CHUNK)
        consumed_all = 0
        while True:
            out_t = np.empty(_CHUNK, dtype=np.float64) if record else np.empty(0)
            out_s = np.empty(_CHUNK, dtype=np.int64) if record else np.empty(0, dtype=np.int64)
            status, consumed, n_out, t, x, done = _run_chain_chunk(
                params, x, t, t_limit, targets_arr,
                exp_buf[consumed_all:], uni_buf[consumed_all:],
                events_left, record, out_t, out_s, no_occ, 0.0,
            )
            consumed_all += consumed
            events_left -= done
            if record and n_out:
                chunks_t.append(out_t[:n_out])
                chunks_s.append(out_s[:n_out])
            if status == _kernels.STATUS_OUT_FULL:
                continue
            break
        if status == _kernels.STATUS_NEED_BUFFER:
            continue
        if status == _kernels.STATUS_EVENT_CAP:
            raise EventCapError(
                f"event budget {max_events} exhausted before the stopping rule "
                f"(params={params}, x0={x0}, t_max={t_max}, targets={list(targets_arr)})"
            )
        break

    stop = {
        _kernels.STATUS_TIME_LIMIT: StopReason.TIME_LIMIT,
        _kernels.STATUS_HIT_TARGET: StopReason.HIT_TARGET,
        _kernels.STATUS_ABSORBED: StopReason.ABSORBED,
    }[status]
    if record:
        times = np.concatenate([np.zeros(1)] + chunks_t) if chunks_t else np.zeros(1)
        states = np.concatenate([np.array([x0], dtype=np.int64)] + chunks_s) \
            if chunks_s else np.array([x0], dtype=np.int64)
    else:
        times = np.array([0.0, t]) if t > 0 else np.zeros(1)
        states = np.array([x0, x], dtype=np.int64) if t > 0 else np.array([x0], dtype=np.int64)
    return Trajectory(
        params=params,
        seed=seed if isinstance(seed, int) else None,
        times=times,
        states=states,
        stop_reason=stop,
        t_final=float(t),
        hit_state=int(x) if stop is StopReason.HIT_TARGET else None,
    )


def _run_chain_chunk(params, x, t, t_limit, targets_arr, exp_buf, uni_buf,
                     events_left, record, out_t, out_s, occ, burn_in):
    return _kernels.chain_kernel(
        float(params.b), float(params.mu), float(params.gamma) / params.L,
        params.variant is Variant.MODIFIED,
        int(x), float(t), float(t_limit), targets_arr,
        exp_buf, uni_buf, int(events_left), bool(record),
        out_t, out_s, occ, occ.shape[0] > 0, float(burn_in),
    )


@dataclass(frozen=True)
class FirstPassageResult:
    """Monte-Carlo first-passage sample with its summary statistics."""

    params: ChainParams
    x0: int
    targets: tuple[int, ...]
    seed: int
    times: np.ndarray = field(repr=False)
    hit_states: np.ndarray = field(repr=False)
    mean: float
    stderr: float

    @property
    def n_reps(self) -> int:
        return len(self.times)

    def hit_fraction(self, state: int) -> float:
        return float(np.mean(self.hit_states == state))

    @property
    def estimate(self) -> PassageEstimate:
        return PassageEstimate(
            log_mean_time=math.log(self.mean),
            method=Method.MONTE_CARLO,
            stderr=self.stderr,
        )


def _passage_replicates(params, x0, targets, seed, reps, max_events):
    out_t = np.empty(len(reps))
    out_x = np.empty(len(reps), dtype=np.int64)
    for j, rep in enumerate(reps):
        traj = simulate(
            params, x0, targets=targets, seed=replicate_seed(seed, rep),
            max_events=max_events, record=False,
        )
        out_t[j] = traj.t_final
        out_x[j] = traj.x_final
    return out_t, out_x


def _passage_worker(args):
    return _passage_replicates(*args)


def sample_first_passage(
    params: ChainParams,
    x0: int,
    targets,
    n_reps: int,
    seed: int,
    *,
    n_threads: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> FirstPassageResult:
    """n_reps independent first-passage times to ``targets`` from ``x0``.

    Replicate streams are derived from (seed, replicate index); the result
    is identical for any ``n_threads``.
    """
    if n_reps < 1:
        raise DomainError(f"n_reps must be >= 1, got {n_reps}")
    targets = tuple(sorted(set(int(s) for s in targets)))
    if not targets:
        raise DomainError("targets must be nonempty")
    all_reps = list(range(n_reps))
    if n_threads > 1:
        blocks = [all_reps[i::n_threads] for i in range(n_threads)]
        with ProcessPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(
                _passage_worker,
                [(params, x0, targets, seed, blk, max_events) for blk in blocks],
            ))
        times = np.empty(n_reps)
        hits = np.empty(n_reps, dtype=np.int64)
        for blk, (bt, bx) in zip(blocks, parts):
            times[blk] = bt
            hits[blk] = bx
    else:
        times, hits = _passage_replicates(params, x0, targets, seed, all_reps, max_events)
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / math.sqrt(n_reps)) if n_reps > 1 else 0.0
    return FirstPassageResult(
        params=params, x0=x0, targets=targets, seed=seed,
        times=times, hit_states=hits, mean=mean, stderr=max(stderr, 1e-300),
    )


def occupation_measure(traj: Trajectory, burn_in: float) -> np.ndarray:
    """Time-weighted state histogram after ``burn_in``, normalised.

    Index i of the returned array is the occupation fraction of state i.
    """
    if burn_in < 0:
        raise DomainError(f"burn_in must be nonnegative, got {burn_in}")
    if traj.t_final <= burn_in:
        raise DomainError(
            f"trajectory ends at t={traj.t_final}, nothing after burn_in={burn_in}"
        )
    starts = traj.times
    ends = np.concatenate([traj.times[1:], [traj.t_final]])
    w = np.clip(ends, burn_in, None) - np.clip(starts, burn_in, None)
    w = np.maximum(w, 0.0)
    hist = np.bincount(traj.states, weights=w)
    return hist / w.sum()


def simulate_occupation(
    params: ChainParams,
    x0: int,
    t_max: float,
    burn_in: float,
    seed,
    *,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> np.ndarray:
    """Occupation measure of a fresh trajectory, accumulated in a streaming pass.

    Identical to ``occupation_measure(simulate(...), burn_in)`` for the same
    seed, but requires O(max state) memory instead of O(events).
    """
    if not t_max > burn_in >= 0:
        raise DomainError(f"need t_max > burn_in >= 0, got t_max={t_max}, burn_in={burn_in}")
    ss = _seed_sequence(seed)
    exp_ss, uni_ss = ss.spawn(2)
    exp_rng = np.random.default_rng(exp_ss)
    uni_rng = np.random.default_rng(uni_ss)
    occ = np.zeros(max(4 * (x0 + 1), 256), dtype=np.float64)
    no_targets = np.empty(0, dtype=np.int64)
    no_out_t = np.empty(0)
    no_out_s = np.empty(0, dtype=np.int64)
    t, x = 0.0, int(x0)
    events_left = int(max_events)
    while True:
        exp_buf = exp_rng.standard_exponential(_CHUNK)
        uni_buf = uni_rng.random(_CHUNK)
        consumed_all = 0
        while True:
            status, consumed, _, t, x, done = _run_chain_chunk(
                params, x, t, t_max, no_targets,
                exp_buf[consumed_all:], uni_buf[consumed_all:],
                events_left, False, no_out_t, no_out_s, occ, burn_in,
            )
            consumed_all += consumed
            events_left -= done
            if status == _kernels.STATUS_OCC_FULL:
                occ = np.concatenate([occ, np.zeros(len(occ))])
                continue
            break
        if status == _kernels.STATUS_NEED_BUFFER:
            continue
        if status == _kernels.STATUS_EVENT_CAP:
            raise EventCapError(f"event budget {max_events} exhausted at t={t} < t_max={t_max}")
        break
    total = occ.sum()
    if total <= 0:
        raise DomainError("no occupation mass accumulated after burn_in")
    return occ[: occ.nonzero()[0].max() + 1] / total


# --- mean-field lattice ----------------------------------------------------

@dataclass(frozen=True)
class LatticeState:
    """Per-site particle counts on the box of |Q_L| = L sites."""

    site_counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.site_counts.sum())


@dataclass(frozen=True)
class LatticeTrajectory:
    """Event log of the lattice process; states are reconstructible exactly.

    ``sites``/``deltas`` give the per-event site and its +-1 change;
    ``totals`` tracks the population after each event.
    """

    initial: LatticeState
    times: np.ndarray = field(repr=False)
    sites: np.ndarray = field(repr=False)
    deltas: np.ndarray = field(repr=False)
    totals: np.ndarray = field(repr=False)
    t_final: float

    def site_occupation_time(self) -> np.ndarray:
        """Time integral of each site's count over [0, t_final]."""
        counts = self.initial.site_counts.astype(np.float64).copy()
        acc = np.zeros_like(counts)
        t_prev = 0.0
        for t, s, d in zip(self.times, self.sites, self.deltas):
            acc += counts * (t - t_prev)
            counts[s] += d
            t_prev = t
        acc += counts * (self.t_final - t_prev)
        return acc


@dataclass(frozen=True)
class LatticeResult:
    lattice: LatticeTrajectory
    total: Trajectory
    final_state: LatticeState


def simulate_mean_field_lattice(
    params: ChainParams,
    initial,
    t_max: float,
    seed,
    *,
    competition: str = "include-self",
    max_events: int = DEFAULT_MAX_EVENTS,
) -> LatticeResult:
    """Exact simulation of the uniform-kernel lattice model on L sites.

    Each particle births at rate b with the offspring placed on a
    uniformly random site, dies at rate mu, and dies from competition at
    rate gamma*N/L (``include-self``: every ordered pair including
    self-pairs contributes, making the aggregate down-rate exactly
    mu*N + gamma*N^2/L, the unmodified chain's).  ``exclude-self`` drops
    self-pairs, giving the aggregate gamma*N*(N-1)/L instead.
    """
    if competition not in ("include-self", "exclude-self"):
        raise DomainError(f"unknown competition convention {competition!r}")
    if not t_max > 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    counts0 = np.asarray(
        initial.site_counts if isinstance(initial, LatticeState) else initial,
        dtype=np.int64,
    ).copy()
    if counts0.ndim != 1 or len(counts0) != params.L:
        raise DomainError(f"initial counts must be a vector of length L={params.L}")
    if (counts0 < 0).any():
        raise DomainError("site counts must be nonnegative")

    ss = _seed_sequence(seed)
    exp_rng, type_rng, pick_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    counts = counts0.copy()
    n_total = int(counts.sum())
    t = 0.0
    events_left = int(max_events)
    chunks = []
    while True:
        exp_buf = exp_rng.standard_exponential(_CHUNK)
        type_buf = type_rng.random(_CHUNK)
        pick_buf = pick_rng.random(_CHUNK)
        consumed_all = 0
        while True:
            out_t = np.empty(_CHUNK, dtype=np.float64)
            out_site = np.empty(_CHUNK, dtype=np.int64)
            out_delta = np.empty(_CHUNK, dtype=np.int64)
            out_total = np.empty(_CHUNK, dtype=np.int64)
            status, consumed, n_out, t, n_total, done = _kernels.lattice_kernel(
                float(params.b), float(params.mu), float(params.gamma) / params.L,
                competition == "include-self",
                counts, int(n_total), float(t), float(t_max),
                exp_buf[consumed_all:], type_buf[consumed_all:], pick_buf[consumed_all:],
                int(events_left), True,
                out_t, out_site, out_delta, out_total,
            )
            consumed_all += consumed
            events_left -= done
            if n_out:
                chunks.append((out_t[:n_out], out_site[:n_out], out_delta[:n_out], out_total[:n_out]))
            if status == _kernels.STATUS_OUT_FULL:
                continue
            break
        if status == _kernels.STATUS_NEED_BUFFER:
            continue
        if status == _kernels.STATUS_EVENT_CAP:
            raise EventCapError(f"lattice event budget {max_events} exhausted at t={t}")
        break

    if chunks:
        times = np.concatenate([c[0] for c in chunks])
        sites = np.concatenate([c[1] for c in chunks])
        deltas = np.concatenate([c[2] for c in chunks])
        totals = np.concatenate([c[3] for c in chunks])
    else:
        times = np.empty(0)
        sites = np.empty(0, dtype=np.int64)
        deltas = np.empty(0, dtype=np.int64)
        totals = np.empty(0, dtype=np.int64)

    lattice_traj = LatticeTrajectory(
        initial=LatticeState(site_counts=counts0),
        times=times, sites=sites, deltas=deltas, totals=totals,
        t_final=float(t),
    )
    total_traj = Trajectory(
        params=params.with_variant(Variant.UNMODIFIED),
        seed=seed if isinstance(seed, int) else None,
        times=np.concatenate([[0.0], times]),
        states=np.concatenate([[counts0.sum()], totals]).astype(np.int64),
        stop_reason=StopReason.TIME_LIMIT if status == _kernels.STATUS_TIME_LIMIT
        else StopReason.ABSORBED,
        t_final=float(t),
    )
    return LatticeResult(
        lattice=lattice_traj,
        total=total_traj,
        final_state=LatticeState(site_counts=counts.copy()),
    )


# --- compact binary trajectory frames ---------------------------------------

_MAGIC = b"LOGCHTRJ"
_HEADER = struct.Struct("<8sI3dQ4BQqQd")
_RECORD_DTYPE = np.dtype([("time", "<f8"), ("state", "<i8")])

_VARIANT_CODE = {Variant.UNMODIFIED: 0, Variant.MODIFIED: 1}
_STOP_CODE = {StopReason.TIME_LIMIT: 0, StopReason.HIT_TARGET: 1, StopReason.ABSORBED: 2}


def write_trajectory(traj: Trajectory, fh) -> None:
    """Write the documented fixed-width binary frame.

    Header: magic "LOGCHTRJ", version u32, b/mu/gamma f64, L u64, variant u8,
    stop u8, has_seed u8, subcritical-flag u8, seed u64, hit_state i64
    (-1 if none), record count u64, t_final f64; then count little-endian
    (f64 time, i64 state) records, the first at t = 0 holding x0.
    """
    seed = traj.seed
    has_seed = seed is not None and 0 <= seed < 2 ** 64
    header = _HEADER.pack(
        _MAGIC, 1,
        traj.params.b, traj.params.mu, traj.params.gamma,
        traj.params.L,
        _VARIANT_CODE[traj.params.variant],
        _STOP_CODE[traj.stop_reason],
        1 if has_seed else 0,
        1 if traj.params.allow_subcritical else 0,
        seed if has_seed else 0,
        traj.hit_state if traj.hit_state is not None else -1,
        len(traj.times),
        traj.t_final,
    )
    fh.write(header)
    rec = np.empty(len(traj.times), dtype=_RECORD_DTYPE)
    rec["time"] = traj.times
    rec["state"] = traj.states
    fh.write(rec.tobytes())


def read_trajectory(fh) -> Trajectory:
    """Inverse of :func:`write_trajectory`."""
    raw = fh.read(_HEADER.size)
    (magic, version, b, mu, gamma, L, variant_code, stop_code, has_seed,
     subcritical, seed, hit_state, n, t_final) = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise DomainError(f"not a trajectory frame (magic {magic!r})")
    if version != 1:
        raise DomainError(f"unsupported trajectory frame version {version}")
    rec = np.frombuffer(fh.read(n * _RECORD_DTYPE.itemsize), dtype=_RECORD_DTYPE)
    variant = Variant.MODIFIED if variant_code == 1 else Variant.UNMODIFIED
    stop = {0: StopReason.TIME_LIMIT, 1: StopReason.HIT_TARGET, 2: StopReason.ABSORBED}[stop_code]
    params = ChainParams(
        b=b, mu=mu, gamma=gamma, L=int(L), variant=variant,
        allow_subcritical=bool(subcritical),
    )
    return Trajectory(
        params=params,
        seed=int(seed) if has_seed else None,
        times=rec["time"].copy(),
        states=rec["state"].copy(),
        stop_reason=stop,
        t_final=t_final,
        hit_state=int(hit_state) if hit_state >= 0 and stop is StopReason.HIT_TARGET else None,
    )
