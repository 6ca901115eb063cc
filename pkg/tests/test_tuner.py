import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracktuner.controller import GainSet
from tracktuner.paths import Maneuver
from tracktuner.tuner import (
    NULL_ACTION,
    NUM_ACTIONS,
    NUM_BINS,
    ErrorState,
    StateBin,
    TerminalRecord,
    TerminalTracker,
    TrainingConfig,
    apply_action,
    decode_action,
    discretize,
    encode_action,
    epsilon_greedy,
    initial_gains,
    load_q_table,
    most_frequent_terminal_gains,
    new_q_table,
    q_update,
    reward,
    save_q_table,
    train,
    weighted_distance,
)

LANE = TrainingConfig.for_maneuver(Maneuver.LANE_CHANGE)
ROUND = TrainingConfig.for_maneuver(Maneuver.ROUNDABOUT)


class TestActionCodec:
    def test_all_zero_action_is_midpoint_index(self):
        assert decode_action(40) == (0, 0, 0, 0)
        assert encode_action((0, 0, 0, 0)) == 40

    def test_corners(self):
        assert decode_action(0) == (-1, -1, -1, -1)
        assert decode_action(80) == (1, 1, 1, 1)

    def test_bijection(self):
        seen = set()
        for idx in range(NUM_ACTIONS):
            adj = decode_action(idx)
            assert all(a in (-1, 0, 1) for a in adj)
            assert encode_action(adj) == idx
            seen.add(adj)
        assert len(seen) == NUM_ACTIONS

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            decode_action(81)
        with pytest.raises(ValueError):
            decode_action(-1)


class TestDiscretize:
    E_HIGH = (3.0, 0.4)

    def test_zero_maps_to_first_bin(self):
        assert discretize(ErrorState(0.0, 0.0), (0.0, 0.0), self.E_HIGH) == StateBin(0, 0)

    def test_high_edge_clamps_to_last_bin(self):
        b = discretize(ErrorState(3.0, 0.4), (0.0, 0.0), self.E_HIGH)
        assert b == StateBin(NUM_BINS - 1, NUM_BINS - 1)
        b = discretize(ErrorState(99.0, 99.0), (0.0, 0.0), self.E_HIGH)
        assert b == StateBin(NUM_BINS - 1, NUM_BINS - 1)

    def test_midpoint_bin(self):
        # 1.5/3.0 * 40 = bin 20
        b = discretize(ErrorState(1.5, 0.2), (0.0, 0.0), self.E_HIGH)
        assert b == StateBin(20, 20)

    @given(st.floats(min_value=0.0, max_value=3.0),
           st.floats(min_value=0.0, max_value=3.0))
    def test_monotone_in_error(self, a, b):
        lo, hi = sorted((a, b))
        ba = discretize(ErrorState(lo, 0.0), (0.0, 0.0), self.E_HIGH)
        bb = discretize(ErrorState(hi, 0.0), (0.0, 0.0), self.E_HIGH)
        assert ba.iy <= bb.iy

    def test_surjective_onto_bins(self):
        hits = {
            discretize(ErrorState(e, 0.0), (0.0, 0.0), self.E_HIGH).iy
            for e in np.linspace(0.0, 3.0, 4000)
        }
        assert hits == set(range(NUM_BINS))


class TestDistanceAndReward:
    def test_weighted_distance_oracle(self):
        # sqrt(0.6^2 + 10 * 0.5^2) = sqrt(10.6) / ... with ey=0.6, etheta=1.0:
        # sqrt(0.36 + 10) is not the frozen case; use ey=0.6, etheta=1.0
        d = weighted_distance(ErrorState(0.6, 1.0))
        assert d == pytest.approx(math.sqrt(10.36))
        d = weighted_distance(ErrorState(math.sqrt(0.6), 1.0))
        assert d == pytest.approx(3.255764119219941)  # sqrt(10.6)

    def test_zero_distance(self):
        assert weighted_distance(ErrorState(0.0, 0.0)) == 0.0

    def test_heading_weight_is_ten(self):
        only_y = weighted_distance(ErrorState(1.0, 0.0))
        only_t = weighted_distance(ErrorState(0.0, 1.0))
        assert only_t == pytest.approx(math.sqrt(10) * only_y)

    def test_reward_improvement_oracle(self):
        assert reward(0.0, 1.0) == pytest.approx(0.5)  # 1 - 1/2

    def test_reward_collision_oracle(self):
        assert reward(1.0, 0.0, collided=True) == pytest.approx(-1.5)

    def test_reward_zero_when_static(self):
        assert reward(2.0, 2.0) == 0.0

    @given(st.floats(min_value=0.0, max_value=100.0),
           st.floats(min_value=0.0, max_value=100.0))
    def test_reward_sign_tracks_improvement(self, d_new, d_old):
        # sign never inverts; sub-ulp differences may round the reward to 0
        r = reward(d_new, d_old)
        if d_new < d_old:
            assert r >= 0
        elif d_new > d_old:
            assert r <= 0
        assert -1.0 <= r <= 1.0

    def test_reward_strictly_positive_on_real_improvement(self):
        assert reward(0.5, 1.0) > 0
        assert reward(1.0, 0.5) < 0

    @given(st.floats(min_value=0.0, max_value=100.0),
           st.floats(min_value=0.0, max_value=100.0))
    def test_collision_penalty_shifts_down(self, d_new, d_old):
        assert reward(d_new, d_old, collided=True) == pytest.approx(
            reward(d_new, d_old) - 1.0
        )


class TestQTable:
    def test_shape_and_zero_init(self):
        q = new_q_table()
        assert q.shape == (NUM_BINS, NUM_BINS, NUM_ACTIONS)
        assert not q.any()

    def test_single_update_oracle(self):
        q = new_q_table()
        s = StateBin(3, 4)
        q_update(q, s, 7, 1.0, StateBin(3, 4), alpha=0.5, gamma=0.9)
        assert q[3, 4, 7] == pytest.approx(0.5)
        # only one entry moved
        assert np.count_nonzero(q) == 1

    def test_bellman_fixed_point(self):
        # constant reward r, self-loop: Q converges to r / (1 - gamma)
        q = new_q_table()
        s = StateBin(0, 0)
        for _ in range(3000):
            q_update(q, s, 0, 1.0, s, alpha=0.5, gamma=0.9)
        assert q[0, 0, 0] == pytest.approx(10.0, rel=1e-6)

    def test_uses_max_of_next_state(self):
        q = new_q_table()
        nxt = StateBin(5, 5)
        q[5, 5, 13] = 2.0
        s = StateBin(1, 1)
        q_update(q, s, 0, 0.0, nxt, alpha=1.0, gamma=0.5)
        assert q[1, 1, 0] == pytest.approx(1.0)

    def test_save_load_round_trip(self, tmp_path):
        q = new_q_table()
        q[1, 2, 3] = 0.123456789
        q[39, 39, 80] = -4.5
        f = tmp_path / "table.qtab"
        save_q_table(q, f)
        back = load_q_table(f)
        assert back.shape == q.shape
        assert back[1, 2, 3] == pytest.approx(0.123456789, rel=1e-10)
        assert back[39, 39, 80] == -4.5


class TestEpsilonGreedy:
    def test_greedy_picks_argmax(self):
        q = new_q_table()
        q[0, 0, 55] = 3.0
        rng = np.random.default_rng(0)
        assert epsilon_greedy(q, StateBin(0, 0), 0.0, rng) == 55

    def test_greedy_tie_resolves_to_smallest_index(self):
        q = new_q_table()
        q[0, 0, 10] = 1.0
        q[0, 0, 20] = 1.0
        rng = np.random.default_rng(0)
        assert epsilon_greedy(q, StateBin(0, 0), 0.0, rng) == 10

    def test_greedy_tie_prefers_holding_the_gains(self):
        q = new_q_table()
        q[0, 0, 10] = 1.0
        q[0, 0, NULL_ACTION] = 1.0
        rng = np.random.default_rng(0)
        assert epsilon_greedy(q, StateBin(0, 0), 0.0, rng) == NULL_ACTION

    def test_all_zero_table_holds_the_gains(self):
        rng = np.random.default_rng(0)
        assert epsilon_greedy(new_q_table(), StateBin(7, 9), 0.0, rng) == NULL_ACTION

    def test_exploration_is_roughly_uniform(self):
        rng = np.random.default_rng(1234)
        q = new_q_table()
        counts = Counter(
            epsilon_greedy(q, StateBin(0, 0), 1.0, rng) for _ in range(81000)
        )
        assert set(counts) == set(range(NUM_ACTIONS))
        # each action ~1000 draws; sigma ~ sqrt(1000); allow 5 sigma
        for n in counts.values():
            assert abs(n - 1000) < 5 * math.sqrt(1000)

    def test_epsilon_validated(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            epsilon_greedy(new_q_table(), StateBin(0, 0), 1.5, rng)


class TestApplyAction:
    H = (0.58, 5.0, 5.0, 0.07)
    K_MIN = GainSet(0.1, 1.0, 1.0, 0.7)
    K_MAX = GainSet(3.0, 21.0, 21.0, 0.98)

    def test_step_sizes(self):
        g = apply_action(GainSet(1.55, 11.0, 11.0, 0.84), (1, 1, -1, 0),
                         self.H, self.K_MIN, self.K_MAX)
        assert g.as_tuple() == (2.13, 16.0, 6.0, 0.84)

    def test_clamps_at_range_edges(self):
        g = apply_action(GainSet(3.0, 21.0, 1.0, 0.98), (1, 1, -1, 1),
                         self.H, self.K_MIN, self.K_MAX)
        assert g.kv == 3.0
        assert g.kl == 21.0
        assert g.ks == 1.0
        assert g.ki == 0.98

    def test_locked_components_hold(self):
        g = apply_action(GainSet(1.55, 11.0, 11.0, 0.84), (1, 1, 1, 1),
                         self.H, self.K_MIN, self.K_MAX,
                         locked=(True, False, True, False))
        assert g.kv == 1.55
        assert g.kl == 16.0
        assert g.ks == 11.0
        assert g.ki == pytest.approx(0.91)

    def test_values_stay_on_rounded_lattice(self):
        g = GainSet(1.55, 11.0, 11.0, 0.84)
        for _ in range(100):
            g = apply_action(g, (1, -1, 1, 1), self.H, self.K_MIN, self.K_MAX)
        for v in g.as_tuple():
            assert v == round(v, 9)


class TestLocking:
    def test_locks_after_five_identical(self):
        t = TerminalTracker()
        g = GainSet(2.0, 10.0, 11.0, 0.84)
        for d in (5.0, 4.0, 3.0, 2.0, 1.0):
            t.record(g, d)
        t.evaluate_locks()
        assert t.locked == [True, True, True, True]
        assert t.locked_values == [2.0, 10.0, 11.0, 0.84]
        assert t.best_distance == 1.0

    def test_partial_lock(self):
        t = TerminalTracker()
        for i, d in enumerate((5.0, 4.0, 3.0, 2.0, 1.0)):
            t.record(GainSet(2.0, 10.0 + i, 11.0, 0.84), d)
        t.evaluate_locks()
        assert t.locked == [True, False, True, True]

    def test_no_lock_before_five(self):
        t = TerminalTracker()
        for d in (3.0, 2.0, 1.0):
            t.record(GainSet(2.0, 10.0, 11.0, 0.84), d)
        t.evaluate_locks()
        assert t.locked == [False, False, False, False]

    def test_window_slides(self):
        t = TerminalTracker()
        t.record(GainSet(1.0, 10.0, 11.0, 0.84), 9.0)
        for d in (5.0, 4.0, 3.0, 2.0, 1.0):
            t.record(GainSet(2.0, 10.0, 11.0, 0.84), d)
        t.evaluate_locks()
        # the odd first record fell out of the 5-deep window
        assert t.locked[0] is True


class TestInitialGains:
    def test_midpoints(self):
        g = initial_gains(LANE)
        assert g.as_tuple() == (1.55, 11.0, 11.0, 0.84)

    def test_locked_values_override_midpoints(self):
        t = TerminalTracker()
        t.locked = [True, False, False, False]
        t.locked_values = [2.42, None, None, None]
        g = initial_gains(LANE, t)
        assert g.as_tuple() == (2.42, 11.0, 11.0, 0.84)


class TestTrainingConfig:
    def test_table_defaults_lane(self):
        assert LANE.loop_time == 5.0
        assert LANE.e_high == (3.0, 0.4)
        assert LANE.k_min.as_tuple() == (0.1, 1.0, 1.0, 0.7)
        assert LANE.k_max.as_tuple() == (3.0, 21.0, 21.0, 0.98)
        assert LANE.h_consts == (0.58, 5.0, 5.0, 0.07)
        assert LANE.step_limit == 130
        assert LANE.episodes == 30

    def test_table_defaults_roundabout(self):
        assert ROUND.loop_time == 30.0
        assert ROUND.e_high == (1.0, 0.1)
        assert ROUND.k_min.as_tuple() == (1.0, 1.0, 1.0, 0.7)
        assert ROUND.k_max.as_tuple() == (5.8, 21.0, 21.0, 0.98)
        assert ROUND.h_consts == (1.2, 5.0, 5.0, 0.07)
        assert ROUND.step_limit == 100
        assert ROUND.episodes == 20

    def test_shared_defaults(self):
        assert LANE.gamma == 0.9
        assert LANE.epsilon_start == 1.0
        assert LANE.resolved_epsilon_decay() == pytest.approx(1.0 / 15.0)
        assert ROUND.resolved_epsilon_decay() == pytest.approx(1.0 / 10.0)

    def test_validation(self):
        bad = TrainingConfig.for_maneuver(Maneuver.LANE_CHANGE, episodes=0)
        with pytest.raises(ValueError):
            bad.validate()


class TestTrain:
    def desk_cfg(self, **kw):
        kw.setdefault("loop_time", 1.0)
        kw.setdefault("episodes", 4)
        kw.setdefault("step_limit", 15)
        kw.setdefault("seed", 0)
        return TrainingConfig.for_maneuver(Maneuver.LANE_CHANGE, **kw)

    def test_deterministic(self):
        cfg = self.desk_cfg()
        q1, curve1, hist1 = train(cfg)
        q2, curve2, hist2 = train(cfg)
        assert np.array_equal(q1, q2)
        assert [(r.index, r.reward_sum, r.steps) for r in curve1] == [
            (r.index, r.reward_sum, r.steps) for r in curve2
        ]
        assert [(h.episode, h.gains, h.distance) for h in hist1] == [
            (h.episode, h.gains, h.distance) for h in hist2
        ]

    def test_curve_length_matches_episodes(self):
        cfg = self.desk_cfg()
        _, curve, _ = train(cfg)
        assert len(curve) == 4
        assert [r.index for r in curve] == [0, 1, 2, 3]

    def test_first_episode_terminates_at_first_step(self):
        # anything beats the initial infinite best distance
        cfg = self.desk_cfg()
        _, curve, hist = train(cfg)
        assert curve[0].steps == 1
        assert curve[0].terminal_gains is not None
        assert hist[0].episode == 0

    def test_terminal_distances_strictly_improve(self):
        cfg = self.desk_cfg(episodes=8)
        _, _, hist = train(cfg)
        ds = [h.distance for h in hist]
        assert ds == sorted(ds, reverse=True)
        assert len(set(ds)) == len(ds)

    def test_seed_changes_trajectory(self):
        a = train(self.desk_cfg())[1]
        b = train(self.desk_cfg(seed=99))[1]
        assert [r.reward_sum for r in a] != [r.reward_sum for r in b]

    def test_gains_stay_in_range(self):
        cfg = self.desk_cfg(episodes=6)
        _, _, hist = train(cfg)
        for rec in hist:
            for v, lo, hi in zip(rec.gains.as_tuple(), cfg.k_min.as_tuple(),
                                 cfg.k_max.as_tuple()):
                assert lo <= v <= hi


class TestMostFrequent:
    def rec(self, gains, d=1.0):
        return TerminalRecord(0, gains, d)

    def test_plain_mode(self):
        a = GainSet(2.0, 10.0, 11.0, 0.84)
        b = GainSet(3.0, 16.0, 11.0, 0.84)
        hists = [[self.rec(a), self.rec(b), self.rec(a)]]
        assert most_frequent_terminal_gains(hists) == a

    def test_tie_breaks_on_total_distance(self):
        a = GainSet(2.0, 10.0, 11.0, 0.84)
        b = GainSet(3.0, 16.0, 11.0, 0.84)
        hists = [[self.rec(a, 5.0), self.rec(b, 1.0)]]
        assert most_frequent_terminal_gains(hists) == b

    def test_empty_history_raises(self):
        with pytest.raises(ValueError):
            most_frequent_terminal_gains([[]])
