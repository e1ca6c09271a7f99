"""Off-policy agents: deterministic actor-critic, its twin-critic delayed
variant, and the entropy-regularized stochastic variant.

All three share the replay buffer, Polyak-averaged target networks and the
Q(s, a) critic layout (state and raw action concatenated). Raw actions are
unconstrained; the environment sees their simplex projection.
"""

from __future__ import annotations

import numpy as np

from ..env import PortfolioEnv
from ..nets import Mlp3, OptimState, backprop_output_grad, forward_cached, init_mlp3, optim_step
from .common import AgentSpec, Policy, ReplayBuffer, VectorAdam, run_episode


def polyak(target: Mlp3, online: Mlp3, tau: float) -> Mlp3:
    params = {
        name: (1.0 - tau) * getattr(target, name) + tau * getattr(online, name)
        for name in target.params()
    }
    return Mlp3(head=target.head, **params)


def critic_update(critic: Mlp3, opt: OptimState, inputs: np.ndarray, targets: np.ndarray):
    """One MSE step of Q(s,a) toward targets; returns (critic, opt, loss)."""
    q, cache = forward_cached(critic, inputs)
    err = q[:, 0] - targets
    loss = float(np.mean(err**2))
    dout = (2.0 * err / err.size)[:, None]
    grads, _ = backprop_output_grad(critic, cache, dout)
    critic, opt = optim_step(critic, grads, opt)
    return critic, opt, loss


def critic_action_grad(critic: Mlp3, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """dQ/da per sample at (s, a)."""
    inputs = np.concatenate([obs, actions], axis=1)
    _, cache = forward_cached(critic, inputs)
    _, dx = backprop_output_grad(critic, cache, np.ones((obs.shape[0], 1)))
    return dx[:, obs.shape[1] :]


class _OffPolicyBase:
    def __init__(self, spec: AgentSpec, env: PortfolioEnv):
        hp = spec.hyperparams
        self.spec = spec
        self.env = env
        self.hp = hp
        self.obs_dim = env.observations[env.window[0]].values.size
        self.n = env.n_assets
        self.rng = np.random.default_rng(spec.seed)
        self.actor = init_mlp3(self.obs_dim, self.n, hp.hidden1, hp.hidden2, seed=spec.seed, head="linear")
        self.buffer = ReplayBuffer(hp.buffer_capacity, self.obs_dim, self.n, self.rng)

    def _critic(self, seed_offset: int) -> Mlp3:
        return init_mlp3(
            self.obs_dim + self.n, 1, self.hp.hidden1, self.hp.hidden2,
            seed=self.spec.seed + seed_offset, head="linear",
        )

    def explore_act(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def update(self) -> None:
        raise NotImplementedError

    def run_episode(self) -> float:
        state = self.env.reset()
        total, steps = 0.0, 0
        from ..env import project_to_simplex

        while True:
            obs = state.observation.values
            raw = self.explore_act(obs)
            outcome = self.env.step(state, project_to_simplex(raw))
            self.buffer.push(obs, raw, outcome.reward, outcome.state.observation.values, outcome.done)
            if self.buffer.size >= self.hp.update_start:
                self.update()
            total += outcome.reward
            steps += 1
            state = outcome.state
            if outcome.done:
                return total / steps

    def policy(self) -> Policy:
        return Policy(self.actor, self.spec)


class DdpgTrainer(_OffPolicyBase):
    def __init__(self, spec: AgentSpec, env: PortfolioEnv):
        super().__init__(spec, env)
        hp = spec.hyperparams
        self.critic = self._critic(1)
        self.actor_target = self.actor
        self.critic_target = self.critic
        self.actor_opt = OptimState.for_net(self.actor, lr=hp.actor_lr)
        self.critic_opt = OptimState.for_net(self.critic, lr=hp.critic_lr)

    def explore_act(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = forward_cached(self.actor, obs)
        return mean + self.hp.explore_noise * self.rng.standard_normal(self.n)

    def update(self) -> None:
        hp = self.hp
        obs, act, rew, nxt, done = self.buffer.sample(hp.batch_size)
        next_act, _ = forward_cached(self.actor_target, nxt)
        q_next, _ = forward_cached(self.critic_target, np.concatenate([nxt, next_act], axis=1))
        targets = rew + hp.gamma * (1.0 - done) * q_next[:, 0]
        self.critic, self.critic_opt, _ = critic_update(
            self.critic, self.critic_opt, np.concatenate([obs, act], axis=1), targets
        )

        # actor ascends Q(s, mu(s))
        mean, cache = forward_cached(self.actor, obs)
        dq_da = critic_action_grad(self.critic, obs, mean)
        grads, _ = backprop_output_grad(self.actor, cache, -dq_da / obs.shape[0])
        self.actor, self.actor_opt = optim_step(self.actor, grads, self.actor_opt)

        self.actor_target = polyak(self.actor_target, self.actor, hp.tau)
        self.critic_target = polyak(self.critic_target, self.critic, hp.tau)


class Td3Trainer(_OffPolicyBase):
    """Twin critics, target policy smoothing, delayed actor updates."""

    def __init__(self, spec: AgentSpec, env: PortfolioEnv):
        super().__init__(spec, env)
        hp = spec.hyperparams
        self.critic1 = self._critic(1)
        self.critic2 = self._critic(2)
        self.actor_target = self.actor
        self.critic1_target = self.critic1
        self.critic2_target = self.critic2
        self.actor_opt = OptimState.for_net(self.actor, lr=hp.actor_lr)
        self.critic1_opt = OptimState.for_net(self.critic1, lr=hp.critic_lr)
        self.critic2_opt = OptimState.for_net(self.critic2, lr=hp.critic_lr)
        self.update_count = 0
        # (q1', q2', used) of the latest target computation, for inspection
        self.last_target_components: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def explore_act(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = forward_cached(self.actor, obs)
        return mean + self.hp.explore_noise * self.rng.standard_normal(self.n)

    def update(self) -> None:
        hp = self.hp
        obs, act, rew, nxt, done = self.buffer.sample(hp.batch_size)
        next_mean, _ = forward_cached(self.actor_target, nxt)
        noise = np.clip(
            hp.target_noise * self.rng.standard_normal(next_mean.shape),
            -hp.target_noise_clip,
            hp.target_noise_clip,
        )
        next_act = next_mean + noise
        nxt_in = np.concatenate([nxt, next_act], axis=1)
        q1_next = forward_cached(self.critic1_target, nxt_in)[0][:, 0]
        q2_next = forward_cached(self.critic2_target, nxt_in)[0][:, 0]
        q_min = np.minimum(q1_next, q2_next)
        self.last_target_components = (q1_next, q2_next, q_min)
        targets = rew + hp.gamma * (1.0 - done) * q_min

        sa = np.concatenate([obs, act], axis=1)
        self.critic1, self.critic1_opt, _ = critic_update(self.critic1, self.critic1_opt, sa, targets)
        self.critic2, self.critic2_opt, _ = critic_update(self.critic2, self.critic2_opt, sa, targets)

        self.update_count += 1
        if self.update_count % hp.policy_delay == 0:
            mean, cache = forward_cached(self.actor, obs)
            dq_da = critic_action_grad(self.critic1, obs, mean)
            grads, _ = backprop_output_grad(self.actor, cache, -dq_da / obs.shape[0])
            self.actor, self.actor_opt = optim_step(self.actor, grads, self.actor_opt)
            self.actor_target = polyak(self.actor_target, self.actor, hp.tau)
            self.critic1_target = polyak(self.critic1_target, self.critic1, hp.tau)
            self.critic2_target = polyak(self.critic2_target, self.critic2, hp.tau)


class SacTrainer(_OffPolicyBase):
    """Entropy-regularized twin-critic agent with a reparameterized actor.

    The actor mean network pairs with a learned global log-std; the entropy
    bonus keeps the std from collapsing during training. Inference uses the
    mean, matching the rest of the family.
    """

    def __init__(self, spec: AgentSpec, env: PortfolioEnv):
        super().__init__(spec, env)
        hp = spec.hyperparams
        self.critic1 = self._critic(1)
        self.critic2 = self._critic(2)
        self.critic1_target = self.critic1
        self.critic2_target = self.critic2
        self.log_std = np.full(self.n, hp.log_std_init)
        self.actor_opt = OptimState.for_net(self.actor, lr=hp.actor_lr)
        self.critic1_opt = OptimState.for_net(self.critic1, lr=hp.critic_lr)
        self.critic2_opt = OptimState.for_net(self.critic2, lr=hp.critic_lr)
        self.log_std_opt = VectorAdam(self.n, lr=hp.actor_lr)

    def explore_act(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = forward_cached(self.actor, obs)
        return mean + np.exp(self.log_std) * self.rng.standard_normal(self.n)

    def _log_prob(self, zeta: np.ndarray) -> np.ndarray:
        # density of a = mean + std * zeta under the current policy
        return (
            -0.5 * np.sum(zeta**2, axis=1)
            - np.sum(self.log_std)
            - 0.5 * self.n * np.log(2.0 * np.pi)
        )

    def update(self) -> None:
        hp = self.hp
        alpha = hp.entropy_weight
        obs, act, rew, nxt, done = self.buffer.sample(hp.batch_size)
        B = obs.shape[0]
        std = np.exp(self.log_std)

        # critic targets from a fresh next action
        next_mean, _ = forward_cached(self.actor, nxt)
        zeta_next = self.rng.standard_normal(next_mean.shape)
        next_act = next_mean + std * zeta_next
        logp_next = self._log_prob(zeta_next)
        nxt_in = np.concatenate([nxt, next_act], axis=1)
        q1n = forward_cached(self.critic1_target, nxt_in)[0][:, 0]
        q2n = forward_cached(self.critic2_target, nxt_in)[0][:, 0]
        targets = rew + hp.gamma * (1.0 - done) * (np.minimum(q1n, q2n) - alpha * logp_next)

        sa = np.concatenate([obs, act], axis=1)
        self.critic1, self.critic1_opt, _ = critic_update(self.critic1, self.critic1_opt, sa, targets)
        self.critic2, self.critic2_opt, _ = critic_update(self.critic2, self.critic2_opt, sa, targets)

        # actor: minimize alpha*logp - min(Q1, Q2) with reparameterized action
        mean, cache = forward_cached(self.actor, obs)
        zeta = self.rng.standard_normal(mean.shape)
        a_new = mean + std * zeta
        dq1 = critic_action_grad(self.critic1, obs, a_new)
        dq2 = critic_action_grad(self.critic2, obs, a_new)
        q1 = forward_cached(self.critic1, np.concatenate([obs, a_new], axis=1))[0][:, 0]
        q2 = forward_cached(self.critic2, np.concatenate([obs, a_new], axis=1))[0][:, 0]
        dq_da = np.where((q1 <= q2)[:, None], dq1, dq2)
        d_mean = -dq_da / B
        grads, _ = backprop_output_grad(self.actor, cache, d_mean)
        self.actor, self.actor_opt = optim_step(self.actor, grads, self.actor_opt)
        # entropy pushes log_std up (-alpha term); Q pulls via sigma * zeta
        d_log_std = -alpha * np.ones(self.n) - np.mean(dq_da * std * zeta, axis=0)
        self.log_std = self.log_std_opt.step(self.log_std, d_log_std)

        self.critic1_target = polyak(self.critic1_target, self.critic1, hp.tau)
        self.critic2_target = polyak(self.critic2_target, self.critic2, hp.tau)
