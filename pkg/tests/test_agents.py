import datetime as dt

import numpy as np
import pytest

from conftest import geometric_market, rate_market
from hiport.agents import (
    AgentSpec,
    Hyperparams,
    Policy,
    PolicySet,
    Td3Trainer,
    clipped_surrogate,
    policy_act,
    run_seed_battery,
    train_base_agent,
)
from hiport.agents.training import BatteryCell
from hiport.data import monthly_partition
from hiport.env import PortfolioEnv, RewardParams, monthly_observations


def make_env_factory(table, mode="metrics", params=None):
    slices = monthly_partition(table)
    obs = monthly_observations(slices, mode, table.tickers)
    return lambda: PortfolioEnv(slices, obs, params or RewardParams())


@pytest.fixture(scope="module")
def dominance_factory():
    table = rate_market({"A": 0.02, "B": -0.01}, dt.date(2010, 1, 1), 25)
    return make_env_factory(table)


@pytest.fixture(scope="module")
def small_factory():
    table = geometric_market(3, dt.date(2015, 1, 1), dt.date(2015, 10, 31), seed=1)
    return make_env_factory(table)


class TestAgentSpec:
    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            AgentSpec("dqn", "metrics", 0)

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            AgentSpec("ppo", "metrics", -1)

    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            Hyperparams(gamma=0.0)


class TestClippedSurrogate:
    def test_clipped_branch_ratio_always_in_band(self):
        rng = np.random.default_rng(0)
        ratio = np.exp(rng.normal(0, 1, 500))
        adv = rng.normal(0, 1, 500)
        eps = 0.2
        objective, clipped_ratio, clipped_active = clipped_surrogate(ratio, adv, eps)
        assert np.all(clipped_ratio >= 1 - eps) and np.all(clipped_ratio <= 1 + eps)
        np.testing.assert_allclose(objective, np.minimum(ratio * adv, clipped_ratio * adv))
        # wherever the clipped branch contributed, its ratio is at the band edge
        assert np.all(np.isin(clipped_ratio[clipped_active], [1 - eps, 1 + eps]))

    def test_inside_band_branches_agree(self):
        ratio = np.array([0.9, 1.0, 1.1])
        adv = np.array([1.0, -2.0, 0.5])
        objective, clipped_ratio, clipped_active = clipped_surrogate(ratio, adv, 0.2)
        np.testing.assert_allclose(clipped_ratio, ratio)
        assert not clipped_active.any()


class TestTrainBaseAgent:
    def test_ppo_dominance(self, dominance_factory):
        policy = train_base_agent(AgentSpec("ppo", "metrics", 0), dominance_factory, 150)
        env = dominance_factory()
        mean_weight = np.mean([policy.act(o)[0] for o in env.observations])
        assert mean_weight > 0.9

    def test_zero_episodes_returns_init(self, small_factory):
        spec = AgentSpec("td3", "metrics", 4)
        policy = train_base_agent(spec, small_factory, 0)
        trainer = Td3Trainer(spec, small_factory())
        for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            np.testing.assert_array_equal(getattr(policy.actor, name), getattr(trainer.actor, name))
        obs = small_factory().observations[0]
        w = policy.act(obs)
        assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-9

    @pytest.mark.parametrize("algo", ["ppo", "sac", "ddpg", "td3"])
    def test_bitwise_determinism(self, small_factory, algo):
        a = train_base_agent(AgentSpec(algo, "metrics", 7), small_factory, 3)
        b = train_base_agent(AgentSpec(algo, "metrics", 7), small_factory, 3)
        for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            np.testing.assert_array_equal(getattr(a.actor, name), getattr(b.actor, name))
        assert a.training_curve == b.training_curve

    @pytest.mark.parametrize("algo", ["ppo", "sac", "ddpg", "td3"])
    def test_constant_prices_zero_reward(self, algo):
        table = rate_market({"A": 0.0, "B": 0.0}, dt.date(2012, 1, 1), 8)
        factory = make_env_factory(table)
        policy = train_base_agent(AgentSpec(algo, "metrics", 1), factory, 4)
        assert policy.training_curve == [0.0, 0.0, 0.0, 0.0]

    def test_unknown_algorithm_rejected(self, small_factory):
        spec = AgentSpec("ppo", "metrics", 0)
        object.__setattr__(spec, "algorithm", "genetic")
        with pytest.raises(ValueError, match="genetic"):
            train_base_agent(spec, small_factory, 1)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_diagnostic(self, small_factory):
        from hiport.agents import TrainingDiverged

        # absurd learning rate blows the parameters up within a few updates
        hp = Hyperparams(actor_lr=1e200, critic_lr=1e200)
        with pytest.raises(TrainingDiverged, match="ppo-metrics-s0"):
            train_base_agent(AgentSpec("ppo", "metrics", 0, hp), small_factory, 5)

    @pytest.mark.parametrize("algo", ["sac", "ddpg", "td3"])
    def test_actions_remain_on_simplex_during_training(self, small_factory, algo, monkeypatch):
        import hiport.agents.offpolicy as offpolicy

        seen = []
        original = offpolicy.PortfolioEnv.step

        def recording_step(self, state, weights):
            seen.append(weights.copy())
            return original(self, state, weights)

        monkeypatch.setattr(offpolicy.PortfolioEnv, "step", recording_step)
        train_base_agent(AgentSpec(algo, "metrics", 2), small_factory, 2)
        assert seen
        for w in seen:
            assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-6


class TestTd3TargetRule:
    def test_target_uses_min_of_twin_critics(self, small_factory):
        spec = AgentSpec("td3", "metrics", 5, Hyperparams(update_start=8, batch_size=16))
        trainer = Td3Trainer(spec, small_factory())
        for _ in range(3):
            trainer.run_episode()
        assert trainer.last_target_components is not None
        q1, q2, used = trainer.last_target_components
        np.testing.assert_array_equal(used, np.minimum(q1, q2))
        # the twins genuinely disagree somewhere, so min is a real choice
        assert np.any(q1 != q2)


class TestPolicyAct:
    def test_simplex_and_determinism(self, small_factory):
        policy = train_base_agent(AgentSpec("ddpg", "metrics", 3), small_factory, 1)
        obs = small_factory().observations[2]
        w1, w2 = policy_act(policy, obs), policy_act(policy, obs)
        np.testing.assert_array_equal(w1, w2)
        assert np.all(w1 >= 0) and abs(w1.sum() - 1) < 1e-9

    def test_output_length_14(self):
        table = geometric_market(14, dt.date(2015, 1, 1), dt.date(2015, 8, 31), seed=2)
        factory = make_env_factory(table)
        policy = train_base_agent(AgentSpec("sac", "metrics", 0), factory, 0)
        assert policy_act(policy, factory().observations[0]).size == 14

    def test_mode_mismatch_rejected(self, small_factory):
        policy = train_base_agent(AgentSpec("ppo", "nlp", 0), _nlp_factory(), 0)
        metrics_obs = small_factory().observations[0]
        with pytest.raises(ValueError, match="mode"):
            policy.act(metrics_obs)


def _nlp_factory():
    from hiport.sentiment import simulate_sentiment

    table = geometric_market(3, dt.date(2015, 1, 1), dt.date(2015, 10, 31), seed=1)
    slices = monthly_partition(table)
    senti = simulate_sentiment(table, seed=0)
    obs = monthly_observations(slices, "nlp", table.tickers, senti)
    return lambda: PortfolioEnv(slices, obs, RewardParams())


class TestPolicyCheckpoint:
    def test_round_trip(self, small_factory, tmp_path):
        policy = train_base_agent(AgentSpec("td3", "metrics", 9), small_factory, 2)
        path = tmp_path / "policy.json"
        policy.save(path)
        loaded = Policy.load(path)
        assert loaded.spec == policy.spec
        assert loaded.checksum() == policy.checksum()
        obs = small_factory().observations[0]
        np.testing.assert_array_equal(loaded.act(obs), policy.act(obs))

    def test_tamper_detected(self, small_factory, tmp_path):
        policy = train_base_agent(AgentSpec("ddpg", "metrics", 0), small_factory, 0)
        path = tmp_path / "policy.json"
        policy.save(path)
        raw = path.read_text()
        tampered = raw.replace('"checksum": "', '"checksum": "00', 1)
        path.write_text(tampered)
        with pytest.raises(ValueError, match="checksum"):
            Policy.load(path)


class TestSeedBattery:
    def test_cardinality_with_init_policies(self, small_factory):
        result = run_seed_battery(
            ["ppo", "sac", "ddpg", "td3"],
            ["metrics"],
            [0, 1, 2, 3, 4],
            lambda mode: small_factory,
            episodes=0,
            eval_fn=lambda p: float(p.actor.b3[0]),
        )
        assert len(result.cells) == 20
        assert all(c.policy is not None for c in result.cells.values())
        assert not result.failures()

    def test_median_selection_odd(self):
        ps = PolicySet()
        for seed, roi in enumerate([5.0, 7.0, 9.0, 11.0, 13.0]):
            spec = AgentSpec("ppo", "metrics", seed)
            ps.cells[("ppo", "metrics", seed)] = BatteryCell(spec, policy="sentinel", eval_roi=roi)
        assert ps.median_cell("ppo", "metrics").eval_roi == 9.0

    def test_median_single_seed(self):
        ps = PolicySet()
        spec = AgentSpec("sac", "nlp", 0)
        ps.cells[("sac", "nlp", 0)] = BatteryCell(spec, policy="sentinel", eval_roi=4.2)
        assert ps.median_cell("sac", "nlp").eval_roi == 4.2

    def test_failures_recorded_and_battery_continues(self, small_factory):
        def flaky_eval(policy):
            if policy.spec.seed == 1:
                raise RuntimeError("boom")
            return 1.0

        result = run_seed_battery(
            ["ddpg"], ["metrics"], [0, 1, 2], lambda mode: small_factory, 0, flaky_eval
        )
        failures = result.failures()
        assert len(failures) == 1
        assert failures[0][0] == ("ddpg", "metrics", 1)
        assert "boom" in failures[0][1]
        assert result.cells[("ddpg", "metrics", 0)].eval_roi == 1.0
