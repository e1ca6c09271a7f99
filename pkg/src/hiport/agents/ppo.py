"""On-policy actor-critic with a clipped surrogate objective.

The actor is a Gaussian over unconstrained actions: a state-dependent mean
network plus a learned global log-std vector. Sampled actions reach the
environment through the shared simplex projection.
"""

from __future__ import annotations

import numpy as np

from ..env import PortfolioEnv
from ..nets import OptimState, backprop_output_grad, forward_cached, init_mlp3, optim_step
from .common import AgentSpec, Policy, VectorAdam, gaussian_log_prob, run_episode


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float):
    """Per-sample clipped objective.

    Returns (objective, clipped_ratio, clipped_active) where the clipped
    branch's ratio is always inside [1-eps, 1+eps] by construction and
    ``clipped_active`` marks samples whose contribution came from the
    clipped branch (zero gradient through the ratio there).
    """
    clipped_ratio = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    unclipped = ratio * adv
    clipped = clipped_ratio * adv
    objective = np.minimum(unclipped, clipped)
    return objective, clipped_ratio, clipped < unclipped


class PpoTrainer:
    def __init__(self, spec: AgentSpec, env: PortfolioEnv):
        hp = spec.hyperparams
        self.spec = spec
        self.env = env
        self.hp = hp
        obs_dim = env.observations[env.window[0]].values.size
        n = env.n_assets
        self.rng = np.random.default_rng(spec.seed)
        self.actor = init_mlp3(obs_dim, n, hp.hidden1, hp.hidden2, seed=spec.seed, head="linear")
        self.critic = init_mlp3(obs_dim, 1, hp.hidden1, hp.hidden2, seed=spec.seed + 1, head="linear")
        self.log_std = np.full(n, hp.log_std_init)
        self.actor_opt = OptimState.for_net(self.actor, lr=hp.actor_lr)
        self.critic_opt = OptimState.for_net(self.critic, lr=hp.critic_lr)
        self.log_std_opt = VectorAdam(n, lr=hp.actor_lr)

    def _sample_action(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = forward_cached(self.actor, obs)
        std = np.exp(self.log_std)
        return mean + std * self.rng.standard_normal(mean.shape)

    def run_episode(self) -> float:
        transitions, mean_reward = run_episode(self.env, self._sample_action)
        obs = np.array([t[0] for t in transitions])
        actions = np.array([t[1] for t in transitions])
        rewards = np.array([t[2] for t in transitions])
        self._update(obs, actions, rewards)
        return mean_reward

    def _gae(self, rewards: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # terminal bootstrap is zero: episodes end with the window
        gamma, lam = self.hp.gamma, self.hp.gae_lambda
        T = rewards.size
        adv = np.zeros(T)
        next_value = 0.0
        next_adv = 0.0
        for t in range(T - 1, -1, -1):
            delta = rewards[t] + gamma * next_value - values[t]
            next_adv = delta + gamma * lam * next_adv
            adv[t] = next_adv
            next_value = values[t]
        returns = adv + values
        return adv, returns

    def _update(self, obs: np.ndarray, actions: np.ndarray, rewards: np.ndarray) -> None:
        hp = self.hp
        values = forward_cached(self.critic, obs)[0][:, 0]
        adv, returns = self._gae(rewards, values)
        adv_std = adv.std()
        if adv_std > 1e-12:
            adv = (adv - adv.mean()) / adv_std
        mean_old, _ = forward_cached(self.actor, obs)
        logp_old = gaussian_log_prob(actions, mean_old, self.log_std)

        T = obs.shape[0]
        for _ in range(hp.ppo_epochs):
            order = self.rng.permutation(T)
            for lo in range(0, T, hp.batch_size):
                idx = order[lo : lo + hp.batch_size]
                self._minibatch_step(obs[idx], actions[idx], adv[idx], returns[idx], logp_old[idx])

    def _minibatch_step(self, obs, actions, adv, returns, logp_old) -> None:
        hp = self.hp
        B = obs.shape[0]
        mean, cache = forward_cached(self.actor, obs)
        logp = gaussian_log_prob(actions, mean, self.log_std)
        ratio = np.exp(logp - logp_old)
        _, _, clipped_active = clipped_surrogate(ratio, adv, hp.clip_eps)

        # d(-objective)/d logp: -adv * ratio where the unclipped branch is
        # active, exactly 0 where the clipped branch took over
        g_logp = np.where(clipped_active, 0.0, -adv * ratio) / B
        var = np.exp(2.0 * self.log_std)
        d_mean = g_logp[:, None] * (actions - mean) / var
        grads, _ = backprop_output_grad(self.actor, cache, d_mean)
        self.actor, self.actor_opt = optim_step(self.actor, grads, self.actor_opt)

        d_log_std = np.sum(g_logp[:, None] * ((actions - mean) ** 2 / var - 1.0), axis=0)
        self.log_std = self.log_std_opt.step(self.log_std, d_log_std)

        value, vcache = forward_cached(self.critic, obs)
        d_value = 2.0 * (value - returns[:, None]) / B
        vgrads, _ = backprop_output_grad(self.critic, vcache, d_value)
        self.critic, self.critic_opt = optim_step(self.critic, vgrads, self.critic_opt)

    def policy(self) -> Policy:
        return Policy(self.actor, self.spec)
