import io
import math

import numpy as np
import pytest
from scipy import stats

import logistic_chain.simulation as sim
from logistic_chain import (
    ChainParams,
    DomainError,
    EventCapError,
    StopReason,
    Trajectory,
    Variant,
    build_stationary,
    mean_step_time,
    occupation_measure,
    rate_balance_state,
    rates,
    read_trajectory,
    replicate_seed,
    sample_first_passage,
    simulate,
    simulate_mean_field_lattice,
    simulate_occupation,
    total_variation,
    write_trajectory,
)
from conftest import make_params


class TestDeterminism:
    def test_bit_identical_reruns(self):
        p = make_params(2, 1, 1, 20)
        a = simulate(p, 10, t_max=10.0, seed=42)
        b = simulate(p, 10, t_max=10.0, seed=42)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.states, b.states)
        assert a.stop_reason is b.stop_reason
        assert a.t_final == b.t_final

    def test_chunk_size_does_not_matter(self, monkeypatch):
        p = make_params(2, 1, 1, 20)
        ref = simulate(p, 10, t_max=5.0, seed=7)
        monkeypatch.setattr(sim, "_CHUNK", 61)
        small = simulate(p, 10, t_max=5.0, seed=7)
        assert np.array_equal(ref.times, small.times)
        assert np.array_equal(ref.states, small.states)

    def test_record_off_same_endpoint(self):
        p = make_params(2, 1, 1, 20)
        full = simulate(p, 10, t_max=5.0, seed=11)
        slim = simulate(p, 10, t_max=5.0, seed=11, record=False)
        assert slim.x_final == full.x_final
        assert slim.t_final == full.t_final
        assert slim.n_events <= 1

    def test_replicate_seed_is_counterbased(self):
        a = replicate_seed(99, 3).generate_state(4)
        b = replicate_seed(99, 3).generate_state(4)
        c = replicate_seed(99, 4).generate_state(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestTrajectoryInvariants:
    def test_times_increase_steps_unit(self):
        p = make_params(2, 1, 1, 30)
        traj = simulate(p, 25, t_max=20.0, seed=5)
        assert (np.diff(traj.times) > 0).all()
        assert set(np.abs(np.diff(traj.states))) == {1}
        assert traj.stop_reason is StopReason.TIME_LIMIT
        assert traj.t_final == 20.0

    def test_hit_target_stops_exactly(self):
        p = make_params(2, 1, 1, 30)
        n_star = rate_balance_state(p)
        traj = simulate(p, n_star + 5, targets=[n_star], seed=3)
        assert traj.stop_reason is StopReason.HIT_TARGET
        assert traj.hit_state == n_star
        assert traj.states[-1] == n_star
        assert n_star not in traj.states[:-1]

    def test_event_cap_raises(self):
        p = make_params(2, 1, 1, 30)
        with pytest.raises(EventCapError):
            simulate(p, 25, t_max=1e9, seed=1, max_events=100)

    def test_needs_stopping_rule(self):
        p = make_params(2, 1, 1, 30)
        with pytest.raises(DomainError):
            simulate(p, 25, seed=1)


class TestAgainstTheory:
    def test_yule_process_mean(self):
        # gamma = mu = 0, unmodified: pure birth with E N(t) = x0 e^(bt)
        p = ChainParams(b=1.0, mu=0.0, gamma=0.0, L=10, variant=Variant.UNMODIFIED)
        t_end, n = 2.0, 4000
        finals = np.array([
            simulate(p, 1, t_max=t_end, seed=replicate_seed(2024, r), record=False).x_final
            for r in range(n)
        ], dtype=float)
        expected = math.exp(t_end)
        stderr = finals.std(ddof=1) / math.sqrt(n)
        assert abs(finals.mean() - expected) < 3 * stderr

    def test_holding_times_are_exponential(self):
        p = make_params(2, 1, 1, 50)
        x = rate_balance_state(p)
        traj = simulate(p, x, t_max=400.0, seed=8)
        dts = np.diff(traj.times)
        holds = dts[traj.states[:-1] == x]
        assert len(holds) > 2000
        r = rates(p, x)
        res = stats.kstest(holds, "expon", args=(0, 1.0 / (r.alpha + r.beta)))
        assert res.pvalue > 1e-3

    def test_jump_direction_frequencies(self):
        p = make_params(2, 1, 1, 50)
        x = rate_balance_state(p) + 5
        traj = simulate(p, x, t_max=400.0, seed=9)
        at_x = traj.states[:-1] == x
        ups = int((np.diff(traj.states)[at_x] == 1).sum())
        visits = int(at_x.sum())
        r = rates(p, x)
        res = stats.binomtest(ups, visits, r.beta / (r.alpha + r.beta))
        assert visits > 2000
        assert res.pvalue > 1e-3


class TestFirstPassageSampling:
    def test_target_equals_start(self):
        p = make_params(2, 1, 1, 30)
        res = sample_first_passage(p, 12, [12], n_reps=50, seed=1)
        assert (res.times == 0.0).all()
        assert (res.hit_states == 12).all()

    def test_step_time_against_analytic(self):
        p = make_params(2, 1, 1, 30)
        n_star = rate_balance_state(p)
        res = sample_first_passage(p, n_star + 1, [n_star], n_reps=20_000, seed=77)
        analytic = mean_step_time(p, n_star).mean_time
        assert abs(res.mean - analytic) < 3 * res.stderr

    def test_thread_count_invariance(self):
        p = make_params(2, 1, 1, 20)
        serial = sample_first_passage(p, 25, [20], n_reps=12, seed=5, n_threads=1)
        parallel = sample_first_passage(p, 25, [20], n_reps=12, seed=5, n_threads=3)
        assert np.array_equal(serial.times, parallel.times)
        assert np.array_equal(serial.hit_states, parallel.hit_states)

    def test_estimate_carries_stderr(self):
        p = make_params(2, 1, 1, 20)
        res = sample_first_passage(p, 25, [20], n_reps=100, seed=5)
        est = res.estimate
        assert est.stderr == res.stderr
        assert est.mean_time == pytest.approx(res.mean)


class TestOccupation:
    def test_point_mass_degenerate_trajectory(self):
        p = make_params(2, 1, 1, 20)
        traj = Trajectory(
            params=p, seed=None, times=np.zeros(1), states=np.array([5]),
            stop_reason=StopReason.TIME_LIMIT, t_final=3.0,
        )
        occ = occupation_measure(traj, burn_in=1.0)
        assert occ[5] == 1.0
        assert occ.sum() == 1.0

    def test_burn_in_must_leave_mass(self):
        p = make_params(2, 1, 1, 20)
        traj = simulate(p, 10, t_max=1.0, seed=2)
        with pytest.raises(DomainError):
            occupation_measure(traj, burn_in=2.0)

    def test_matches_exact_law(self):
        p = make_params(2, 1, 1, 50)
        traj = simulate(p, rate_balance_state(p), t_max=4000.0, seed=31)
        occ = occupation_measure(traj, burn_in=100.0)
        law = build_stationary(p)
        assert total_variation(occ, law.pmf) < 0.05

    def test_streaming_equals_trajectory_route(self):
        p = make_params(2, 1, 1, 40)
        seed = 12345
        traj = simulate(p, 40, t_max=500.0, seed=seed)
        via_traj = occupation_measure(traj, burn_in=50.0)
        via_stream = simulate_occupation(p, 40, t_max=500.0, burn_in=50.0, seed=seed)
        n = max(len(via_traj), len(via_stream))
        a = np.zeros(n); a[:len(via_traj)] = via_traj
        b = np.zeros(n); b[:len(via_stream)] = via_stream
        assert np.allclose(a, b, atol=1e-12)

    def test_independent_seeds_agree(self):
        p = make_params(2, 1, 1, 50)
        occ1 = simulate_occupation(p, 50, t_max=4000.0, burn_in=100.0, seed=1)
        occ2 = simulate_occupation(p, 50, t_max=4000.0, burn_in=100.0, seed=2)
        assert total_variation(occ1, occ2) < 0.05

    def test_tv_to_law_decreases_with_horizon(self):
        # ergodic averaging: mean TV over 5 seeds drops along T = 1e3, 1e4, 1e5
        p = make_params(2, 1, 1, 50)
        law = build_stationary(p)
        means = []
        for T in (1e3, 1e4, 1e5):
            tvs = [
                total_variation(
                    simulate_occupation(p, 50, t_max=T, burn_in=50.0,
                                        seed=replicate_seed(4040, s)),
                    law.pmf,
                )
                for s in range(5)
            ]
            means.append(np.mean(tvs))
        assert means[0] > means[1] > means[2]


class TestLattice:
    def test_total_is_site_sum_after_every_event(self):
        p = ChainParams(b=2, mu=1, gamma=1, L=10, variant=Variant.UNMODIFIED)
        init = np.full(10, 2, dtype=np.int64)
        res = simulate_mean_field_lattice(p, init, t_max=5.0, seed=14)
        counts = init.astype(np.int64).copy()
        for s, d, n_after in zip(res.lattice.sites, res.lattice.deltas, res.lattice.totals):
            counts[s] += d
            assert counts.sum() == n_after
            assert (counts >= 0).all()
        assert np.array_equal(counts, res.final_state.site_counts)
        assert res.total.states[-1] == res.final_state.total

    def test_deterministic(self):
        p = ChainParams(b=2, mu=1, gamma=1, L=10, variant=Variant.UNMODIFIED)
        init = np.full(10, 2, dtype=np.int64)
        r1 = simulate_mean_field_lattice(p, init, t_max=5.0, seed=3)
        r2 = simulate_mean_field_lattice(p, init, t_max=5.0, seed=3)
        assert np.array_equal(r1.lattice.times, r2.lattice.times)
        assert np.array_equal(r1.lattice.sites, r2.lattice.sites)

    def test_sites_exchangeable(self):
        # uniform dispersal: long-run per-site occupation times match across
        # sites (each site carries ~1000 correlated time units here; the
        # cross-site spread sits near 8 % at this sample size)
        p = ChainParams(b=2, mu=1, gamma=1, L=10, variant=Variant.UNMODIFIED)
        init = np.full(10, 1, dtype=np.int64)
        occ = np.zeros(10)
        for r in range(60):
            res = simulate_mean_field_lattice(p, init, t_max=30.0, seed=replicate_seed(500, r))
            occ += res.lattice.site_occupation_time()
        assert np.abs(occ / occ.mean() - 1.0).max() < 0.15

    def test_total_count_distribution_matches_chain(self):
        # the embedded total is statistically the unmodified chain; the
        # reference chain is absorbed at 0 (targets=[0]) because the lattice
        # has no particles left to give birth there, whereas the bare
        # unmodified chain carries the beta_0 = 1 irreducibility convention
        p = ChainParams(b=2, mu=1, gamma=1, L=10, variant=Variant.UNMODIFIED)
        init = np.full(10, 2, dtype=np.int64)
        n = 1500
        lat = np.array([
            simulate_mean_field_lattice(p, init, t_max=5.0, seed=replicate_seed(81, r))
            .final_state.total
            for r in range(n)
        ])
        chain = np.array([
            simulate(p, 20, t_max=5.0, targets=[0], seed=replicate_seed(82, r),
                     record=False).x_final
            for r in range(n)
        ])
        edges = np.arange(-0.5, max(lat.max(), chain.max()) + 1.5)
        h1, _ = np.histogram(lat, bins=edges)
        h2, _ = np.histogram(chain, bins=edges)
        keep = (h1 + h2) >= 10
        tail1 = h1[~keep].sum()
        tail2 = h2[~keep].sum()
        t1 = np.append(h1[keep], tail1)
        t2 = np.append(h2[keep], tail2)
        _, pvalue, _, _ = stats.chi2_contingency(np.vstack([t1, t2]))
        assert pvalue > 1e-3

    def test_absorbed_when_empty(self):
        p = ChainParams(b=2, mu=1, gamma=1, L=5, variant=Variant.UNMODIFIED)
        res = simulate_mean_field_lattice(p, np.zeros(5, dtype=np.int64), t_max=2.0, seed=1)
        assert res.total.stop_reason is StopReason.ABSORBED
        assert res.final_state.total == 0
        assert res.lattice.t_final == 2.0

    def test_competition_convention_flag(self):
        p = ChainParams(b=2, mu=1, gamma=1, L=5, variant=Variant.UNMODIFIED)
        init = np.full(5, 4, dtype=np.int64)
        with pytest.raises(DomainError):
            simulate_mean_field_lattice(p, init, t_max=1.0, seed=1, competition="bogus")
        res = simulate_mean_field_lattice(p, init, t_max=1.0, seed=1, competition="exclude-self")
        assert res.lattice.t_final == 1.0


class TestBinaryFormat:
    def test_round_trip(self):
        p = make_params(2, 1, 1, 25)
        traj = simulate(p, 20, t_max=8.0, seed=99)
        buf = io.BytesIO()
        write_trajectory(traj, buf)
        buf.seek(0)
        back = read_trajectory(buf)
        assert back.params == traj.params
        assert back.seed == 99
        assert back.stop_reason is traj.stop_reason
        assert back.t_final == traj.t_final
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.states, traj.states)

    def test_round_trip_hit_target(self):
        p = make_params(2, 1, 1, 25)
        traj = simulate(p, 30, targets=[25], seed=4)
        buf = io.BytesIO()
        write_trajectory(traj, buf)
        buf.seek(0)
        back = read_trajectory(buf)
        assert back.hit_state == 25

    def test_byte_identical_for_same_seed(self):
        p = make_params(2, 1, 1, 25)
        bufs = []
        for _ in range(2):
            traj = simulate(p, 20, t_max=8.0, seed=1234)
            buf = io.BytesIO()
            write_trajectory(traj, buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]

    def test_rejects_garbage(self):
        with pytest.raises(DomainError):
            read_trajectory(io.BytesIO(b"\x00" * 200))


class TestStoppingRuleInteraction:
    def test_time_limit_wins_over_far_target(self):
        p = make_params(2, 1, 1, 30)
        traj = simulate(p, 30, t_max=0.5, targets=[0], seed=21)
        assert traj.stop_reason is StopReason.TIME_LIMIT
        assert traj.t_final == 0.5

    def test_near_target_wins_over_long_horizon(self):
        p = make_params(2, 1, 1, 30)
        traj = simulate(p, 31, t_max=1e6, targets=[30], seed=21)
        assert traj.stop_reason is StopReason.HIT_TARGET
        assert traj.t_final < 1e6

    def test_unreachable_target_hits_event_cap(self):
        # hitting 10*n* from n* would take e^(huge) events; the cap must fire
        p = make_params(2, 1, 1, 30)
        with pytest.raises(EventCapError):
            sample_first_passage(p, 30, [300], n_reps=2, seed=1, max_events=20_000)


class TestRecurrenceMc:
    def test_mean_return_time_regenerative(self):
        # cycle at k = holding Exp(alpha+beta) + re-entry passage from k+-1;
        # its mean must match 1/(pi(k)(alpha_k+beta_k))
        from logistic_chain import recurrence_time_estimate

        p = make_params(2, 1, 1, 20)
        k = rate_balance_state(p)
        r = rates(p, k)
        q = r.alpha + r.beta
        n = 20_000
        up = sample_first_passage(p, k + 1, [k], n_reps=n, seed=301)
        down = sample_first_passage(p, k - 1, [k], n_reps=n, seed=302)
        p_up = r.beta / q
        mc_mean = 1.0 / q + p_up * up.mean + (1 - p_up) * down.mean
        mc_stderr = math.hypot(p_up * up.stderr, (1 - p_up) * down.stderr)
        exact = math.exp(recurrence_time_estimate(p, k).log_mean_return)
        assert abs(mc_mean - exact) < 3 * mc_stderr
