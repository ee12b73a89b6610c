import numpy as np
import pytest

from fdrlslice import agent, neural
from fdrlslice.agent import (AgentNet, AgentState, ReplayBuffer, Transition,
                             action_space, apply_penalty, build_state,
                             clip_to_spare, compute_reward, decay_epsilon,
                             epsilon_at, new_agent, select_action, sync_target,
                             td_targets, train_step)
from fdrlslice.env import gamma


def make_net(sizes=(3, 8, 4), seed=0, eps=0.0):
    return new_agent(sizes, np.random.default_rng(seed), epsilon_start=eps)


class TestBuildState:
    def test_all_zero(self):
        s = build_state(AgentState(0.0, 0, 0), 100, 1e6)
        assert np.array_equal(s, [0.0, 0.0, 0.0])

    def test_full_spare(self):
        s = build_state(AgentState(20.0, 0, 100), 100, 1e6)
        assert s[2] == 1.0

    def test_offered_clamps_at_two(self):
        s = build_state(AgentState(20.0, 3_000_000, 0), 100, 1e6)
        assert s[1] == 2.0

    def test_components_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            s = build_state(
                AgentState(float(rng.uniform(-30, 120)),
                           int(rng.integers(0, 10**10)),
                           int(rng.integers(0, 200))),
                100, float(rng.uniform(1, 1e9)))
            assert np.all(s >= 0.0) and np.all(s <= 2.0)


class TestActionSpace:
    def test_default_granularity(self):
        assert action_space(100, 10) == list(range(0, 101, 10))
        assert len(action_space(100, 10)) == 11

    def test_fine_chunks(self):
        assert len(action_space(100, 2)) == 51
        assert len(action_space(100, 5)) == 21

    def test_chunk_equals_capacity(self):
        assert action_space(100, 100) == [0, 100]


class TestSelectAction:
    def test_greedy_argmax(self):
        rng = np.random.default_rng(0)
        assert select_action(np.array([1.0, 3.0, 2.0]), 0.0, rng) == 1

    def test_tie_break_lowest_index(self):
        rng = np.random.default_rng(0)
        assert select_action(np.array([5.0, 5.0, 1.0]), 0.0, rng) == 0

    def test_full_exploration_uniform(self):
        rng = np.random.default_rng(1)
        q = np.zeros(5)
        counts = np.zeros(5)
        n = 10_000
        for _ in range(n):
            counts[select_action(q, 1.0, rng)] += 1
        assert np.all(np.abs(counts / n - 0.2) < 0.05 * 1.0)


class TestReward:
    def _rho(self, snr, chunk, interval_s=60.0):
        c = gamma(chunk, snr) * interval_s
        return -c, 2 * c

    def _reward_at_alpha(self, alpha, alloc, snr, chunk, mode="normalized"):
        offered = gamma(alloc, snr) * 60.0 - alpha
        return compute_reward(alloc, snr, offered, chunk, 60.0, mode)

    def test_zero_gap(self):
        assert self._reward_at_alpha(0.0, 50, 25.0, 10) == pytest.approx(0.0, abs=1e-12)

    def test_vertex(self):
        _, rho_up = self._rho(25.0, 10)
        r = self._reward_at_alpha(rho_up / 2, 50, 25.0, 10)
        assert r == pytest.approx(0.25, abs=1e-12)

    def test_overprovision_normalized(self):
        _, rho_up = self._rho(25.0, 10)
        r = self._reward_at_alpha(2 * rho_up, 50, 25.0, 10)
        assert r == pytest.approx(-1.0, abs=1e-12)

    def test_lower_boundary_value(self):
        rho_low, _ = self._rho(18.0, 10)
        r = self._reward_at_alpha(rho_low, 50, 18.0, 10)
        assert r == pytest.approx(-0.75, abs=1e-9)

    def test_middle_branch_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            snr = float(rng.uniform(-10, 35))
            chunk = int(rng.choice([2, 5, 10]))
            rho_low, rho_up = self._rho(snr, chunk)
            alpha = float(rng.uniform(rho_low, rho_up))
            r = self._reward_at_alpha(alpha, 50, snr, chunk)
            assert -2.0 <= r <= 0.25 + 1e-12

    def test_literal_mode_outer_branches_in_bits(self):
        rho_low, rho_up = self._rho(25.0, 10)
        r = self._reward_at_alpha(2 * rho_up, 50, 25.0, 10, mode="literal")
        assert r == pytest.approx(-rho_up, rel=1e-9)
        r = self._reward_at_alpha(2 * rho_low, 50, 25.0, 10, mode="literal")
        assert r == pytest.approx(2 * rho_low - 4 * rho_low, rel=1e-9)


class TestPenalty:
    def test_violation_overrides(self):
        assert apply_penalty(60, 50, 100.0, 0.25) == -100.0

    def test_boundary_not_violating(self):
        assert apply_penalty(50, 50, 100.0, 0.17) == 0.17

    def test_zero_proposal(self):
        assert apply_penalty(0, 0, 100.0, -0.3) == -0.3

    def test_clip_to_spare(self):
        assert clip_to_spare(60, 50, 10) == 50
        assert clip_to_spare(60, 47, 10) == 40
        assert clip_to_spare(30, 50, 10) == 30
        assert clip_to_spare(10, 3, 10) == 0


class TestReplayBuffer:
    def _tr(self, k):
        return Transition(np.array([float(k)]), 0, 0.0, np.array([0.0]))

    def test_ring_capacity(self):
        buf = ReplayBuffer(3, np.random.default_rng(0))
        for k in range(5):
            buf.push(self._tr(k))
        assert len(buf) == 3
        kept = sorted(tr.state[0] for tr in buf._data)
        assert kept == [2.0, 3.0, 4.0]

    def test_sampling_reproducible(self):
        def fill(seed):
            buf = ReplayBuffer(100, np.random.default_rng(seed))
            for k in range(50):
                buf.push(self._tr(k))
            return [tr.state[0] for tr in buf.sample(10)]

        assert fill(7) == fill(7)

    def test_batch_without_replacement(self):
        buf = ReplayBuffer(100, np.random.default_rng(1))
        for k in range(20):
            buf.push(self._tr(k))
        batch = buf.sample(20)
        assert sorted(tr.state[0] for tr in batch) == [float(k) for k in range(20)]


class TestTraining:
    def _batch(self, rng, net, n=4):
        na = net.online.layer_sizes[-1]
        dim = net.online.layer_sizes[0]
        return [
            Transition(rng.normal(size=dim), int(rng.integers(na)),
                       float(rng.normal()), rng.normal(size=dim))
            for _ in range(n)
        ]

    def test_zero_discount_targets_equal_rewards(self):
        net = make_net()
        batch = self._batch(np.random.default_rng(0), net)
        y = td_targets(net, batch, 0.0)
        assert np.allclose(y, [tr.reward for tr in batch])

    def test_double_uses_target_evaluation(self):
        net = make_net(seed=1)
        # make target differ from online
        net.target = neural.init_params(net.online.layer_sizes,
                                        np.random.default_rng(99))
        batch = self._batch(np.random.default_rng(2), net)
        y_double = td_targets(net, batch, 0.9, double=True)
        next_states = np.stack([tr.next_state for tr in batch])
        best = np.argmax(neural.forward_batch(net.online, next_states), axis=1)
        evald = neural.forward_batch(net.target, next_states)[
            np.arange(len(batch)), best]
        expected = np.array([tr.reward for tr in batch]) + 0.9 * evald
        assert np.allclose(y_double, expected)

    def test_vanilla_flag_uses_online_max(self):
        net = make_net(seed=1)
        net.target = neural.init_params(net.online.layer_sizes,
                                        np.random.default_rng(99))
        batch = self._batch(np.random.default_rng(3), net)
        y = td_targets(net, batch, 0.9, double=False)
        next_states = np.stack([tr.next_state for tr in batch])
        expected = (np.array([tr.reward for tr in batch])
                    + 0.9 * neural.forward_batch(net.online, next_states).max(axis=1))
        assert np.allclose(y, expected)

    def test_insufficient_buffer_is_noop(self):
        net = make_net()
        buf = ReplayBuffer(10, np.random.default_rng(0))
        assert train_step(net, buf, 4, 0.9, 0.001) is None

    def test_single_transition_regression_converges(self):
        rng = np.random.default_rng(5)
        net = make_net(seed=5)
        tr = Transition(rng.normal(size=3), 2, 1.0, rng.normal(size=3))
        buf = ReplayBuffer(10, np.random.default_rng(0))
        buf.push(tr)
        y = td_targets(net, [tr], 0.9)[0]  # frozen target
        for _ in range(3000):
            q_target = td_targets(net, [tr], 0.9)
            grads = neural.backward_batch(net.online, tr.state[None, :],
                                          np.array([tr.action_index]),
                                          np.array([y]))
            net.online, net.opt = neural.adam_update(net.online, grads,
                                                     net.opt, 0.005)
        q = neural.forward(net.online, tr.state)[tr.action_index]
        assert q == pytest.approx(y, abs=1e-3)

    def test_train_step_moves_online_only(self):
        net = make_net(seed=2)
        buf = ReplayBuffer(100, np.random.default_rng(0))
        for tr in self._batch(np.random.default_rng(1), net, n=32):
            buf.push(tr)
        target_before = net.target.vector.copy()
        online_before = net.online.vector.copy()
        loss = train_step(net, buf, 32, 0.99, 0.001)
        assert loss is not None and loss >= 0.0
        assert not np.array_equal(net.online.vector, online_before)
        assert np.array_equal(net.target.vector, target_before)


class TestTargetSync:
    def test_sync_copies(self):
        net = make_net(seed=3)
        net.online = neural.init_params(net.online.layer_sizes,
                                        np.random.default_rng(50))
        sync_target(net)
        rng = np.random.default_rng(0)
        for _ in range(5):
            s = rng.normal(size=3)
            assert np.array_equal(neural.forward(net.online, s),
                                  neural.forward(net.target, s))

    def test_idempotent(self):
        net = make_net(seed=4)
        sync_target(net)
        v = net.target.vector.copy()
        sync_target(net)
        assert np.array_equal(net.target.vector, v)

    def test_training_after_sync_leaves_target(self):
        net = make_net(seed=6)
        sync_target(net)
        before = net.target.vector.copy()
        grads = np.ones(net.online.vector.size)
        net.online, net.opt = neural.adam_update(net.online, grads, net.opt, 0.01)
        assert np.array_equal(net.target.vector, before)


class TestEpsilonSchedule:
    def test_start(self):
        assert epsilon_at(0, 1.0, 0.02, 200) == 1.0

    def test_floor_at_half_horizon(self):
        assert epsilon_at(100, 1.0, 0.02, 200) == pytest.approx(0.02, abs=1e-6)

    def test_held_after_half(self):
        assert epsilon_at(200, 1.0, 0.02, 200) == 0.02
        assert epsilon_at(150, 1.0, 0.02, 200) == 0.02

    def test_decay_epsilon_updates_net(self):
        net = make_net(eps=1.0)
        decay_epsilon(net, 50, 1.0, 0.02, 200)
        assert 0.02 < net.epsilon_greedy < 1.0
        assert net.episode_index == 50


class TestAgentCheckpoint:
    def test_round_trip(self, tmp_path):
        net = make_net(seed=8, eps=0.37)
        net.episode_index = 42
        path = tmp_path / "agent.bin"
        agent.save_agent(net, path)
        loaded = agent.load_agent(path)
        assert loaded.episode_index == 42
        assert loaded.epsilon_greedy == pytest.approx(0.37, abs=1e-7)
        assert np.allclose(loaded.online.vector, net.online.vector, atol=1e-6)
