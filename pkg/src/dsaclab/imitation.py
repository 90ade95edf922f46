"""Imitation learners: SQIL constants, the DSAC discriminator reward, and BC.

The interaction loop follows the DSAC training procedure: roll out one
episode, route it through the absorbing-state wrapper, then run as many
discriminator updates and afterwards as many SAC updates as the episode had
transitions.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .envs import Env, Trajectory, augment, wrap_for_absorbing_states
from .nets import (
    PROB_EPS,
    Discriminator,
    GaussianPolicy,
    clamped_sigmoid,
    discriminator_logit,
    discriminator_prob,
    mlp_input_gradient,
    policy_log_prob,
    policy_mean_action,
    policy_sample,
)
from .optim import Optimizer
from .replay import Batch, ReplayBuffer
from .sac import RewardedBatch, SacLearner

SQIL = "sqil_constant"
AIRL = "airl_discriminator"


def logit_reward(prob):
    """``log D - log(1 - D)`` of an already clamped probability."""
    prob = np.asarray(prob, dtype=np.float64)
    out = np.log(prob) - np.log1p(-prob)
    return float(out) if out.ndim == 0 else out


def airl_reward(d: Discriminator, states, actions):
    """Discriminator logit reward; positive when (s, a) looks like a demonstration."""
    return logit_reward(discriminator_prob(d, states, actions))


# largest reward magnitude the probability clamp allows
MAX_ABS_REWARD = math.log((1.0 - PROB_EPS) / PROB_EPS)


@dataclass
class ImitationWeights:
    lambda_demo: float = 1.0
    lambda_samp: float = 1.0

    def __post_init__(self):
        if not (self.lambda_demo > 0 and self.lambda_samp > 0):
            raise ValueError("lambda_demo and lambda_samp must be positive")


@dataclass
class RewardProvider:
    variant: str
    discriminator: Discriminator | None = None
    demo_bonus: float = 0.01

    def __post_init__(self):
        if self.variant not in (SQIL, AIRL):
            raise ValueError(f"unknown reward variant {self.variant!r}")
        if not math.isfinite(self.demo_bonus) or self.demo_bonus < 0:
            raise ValueError("demo_bonus must be finite and >= 0")
        if self.variant == AIRL and self.discriminator is None:
            raise ValueError("the discriminator reward needs a discriminator")

    @classmethod
    def sqil(cls) -> "RewardProvider":
        return cls(SQIL, None, demo_bonus=1.0)

    def base_reward(self, states, actions) -> np.ndarray:
        if self.variant == SQIL:
            return np.zeros(len(states))
        return np.atleast_1d(airl_reward(self.discriminator, states, actions))


def _split(batch):
    if isinstance(batch, (Batch, RewardedBatch)):
        return batch.obs, batch.actions
    return batch


def _absorbing_next(batch: Batch, wrapped: bool) -> np.ndarray:
    if not wrapped:
        return np.zeros(len(batch), dtype=bool)
    return batch.next_obs[:, -1] == 1.0


def dsac_reward_assignment(
    rp: RewardProvider,
    demo_batch: Batch,
    samp_batch: Batch,
    weights: ImitationWeights,
    wrapped: bool = False,
) -> tuple[RewardedBatch, RewardedBatch]:
    """Label both minibatches for the soft Bellman update.

    Demonstrations get ``R(s, a) + demo_bonus`` with weight ``lambda_demo``;
    samples get ``R(s, a)`` with weight ``lambda_samp``. With the SQIL
    provider ``R`` is zero and the bonus is 1, so demos earn 1 and samples 0.
    """
    if len(demo_batch) == 0 or len(samp_batch) == 0:
        raise ValueError("both minibatches must be nonempty")
    r_demo = rp.base_reward(demo_batch.obs, demo_batch.actions) + rp.demo_bonus
    r_samp = rp.base_reward(samp_batch.obs, samp_batch.actions)
    out = []
    for b, r, w in ((demo_batch, r_demo, weights.lambda_demo), (samp_batch, r_samp, weights.lambda_samp)):
        out.append(RewardedBatch(b.obs, b.actions, b.next_obs, b.masks, r, np.full(len(b), float(w)), _absorbing_next(b, wrapped)))
    return out[0], out[1]


# ---------------------------------------------------------------- discriminator


def gradient_penalty(d: Discriminator, demo_batch, samp_batch, rng: np.random.Generator) -> Tensor:
    """Zero-centred penalty ``mean ||d logit / d x||^2`` at random interpolates.

    Pairs are formed row by row after truncating both batches to the shorter
    length; each pair gets its own mixing weight drawn from U(0, 1).
    """
    x_demo = d.inputs(*_split(demo_batch))
    x_samp = d.inputs(*_split(samp_batch))
    n = min(len(x_demo), len(x_samp))
    if n == 0:
        raise ValueError("gradient penalty needs nonempty batches")
    eps = rng.uniform(0.0, 1.0, size=(n, 1))
    x_hat = eps * x_demo[:n] + (1.0 - eps) * x_samp[:n]
    grad = mlp_input_gradient(d.params, d.spec, x_hat, prefix="d.")
    return ad.mean(ad.sum(ad.square(grad), axis=1))


def discriminator_cross_entropy(d: Discriminator, demo_batch, samp_batch) -> Tensor:
    x_demo = d.inputs(*_split(demo_batch))
    x_samp = d.inputs(*_split(samp_batch))
    if len(x_demo) == 0 or len(x_samp) == 0:
        raise ValueError("discriminator loss needs nonempty batches")
    p_demo = clamped_sigmoid(discriminator_logit(d, x_demo))
    p_samp = clamped_sigmoid(discriminator_logit(d, x_samp))
    return ad.neg(ad.add(ad.mean(ad.log(p_demo)), ad.mean(ad.log(ad.sub(1.0, p_samp)))))


def discriminator_loss(d: Discriminator, demo_batch, samp_batch, gp_coeff: float = 10.0, rng=None) -> Tensor:
    """Demo-vs-sample cross-entropy (demos labelled 1) plus ``gp_coeff`` times the penalty."""
    loss = discriminator_cross_entropy(d, demo_batch, samp_batch)
    if gp_coeff:
        rng = np.random.default_rng(0) if rng is None else rng
        loss = ad.add(loss, ad.mul(gp_coeff, gradient_penalty(d, demo_batch, samp_batch, rng)))
    return loss


# ---------------------------------------------------------------- behavioural cloning


def bc_loss(policy: GaussianPolicy, demo_batch) -> Tensor:
    """Negative mean log-likelihood of demonstrated actions."""
    obs, actions = _split(demo_batch)
    if len(obs) == 0:
        raise ValueError("BC loss needs a nonempty batch")
    if np.any(np.abs(np.asarray(actions)) > 1.0):
        raise ValueError("demonstrated actions must lie in [-1, 1]")
    return ad.neg(ad.mean(policy_log_prob(policy, obs, actions)))


# ---------------------------------------------------------------- training loop


@dataclass
class LoopConfig:
    algo: str = "dsac"  # sac | sqil | dsac
    total_steps: int = 50_000
    warm_up: int = 10_000
    batch_size: int = 100
    absorbing_wrapper: bool = True
    demo_bonus: float = 0.01
    lambda_demo: float = 1.0
    lambda_samp: float = 1.0
    gp_coeff: float = 10.0
    disc_lr: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8


def rng_streams(seed: int, names=("env", "policy", "minibatch", "gp", "init", "eval")) -> dict[str, np.random.Generator]:
    """Independent generators keyed by name, so adding a consumer never shifts another."""
    import zlib

    return {name: np.random.default_rng([int(seed), zlib.crc32(name.encode())]) for name in names}


@dataclass
class TrainingLoop:
    """Episode-wise interaction loop shared by the expert, SQIL and DSAC.

    For ``algo == "sac"`` the environment reward drives the critic; otherwise
    rewards come from the :class:`RewardProvider`.
    """

    env: Env
    learner: SacLearner
    config: LoopConfig
    rngs: dict
    demos: ReplayBuffer | None = None
    discriminator: Discriminator | None = None
    samples: ReplayBuffer = field(default_factory=lambda: ReplayBuffer(500_000))
    env_steps: int = 0
    iterations: int = 0

    def __post_init__(self):
        c = self.config
        if c.algo not in ("sac", "sqil", "dsac"):
            raise ValueError(f"unknown algo {c.algo!r}")
        if c.algo != "sac" and (self.demos is None or len(self.demos) == 0):
            raise ValueError("imitation needs a nonempty demonstration buffer")
        if c.algo == "dsac":
            if self.discriminator is None:
                raise ValueError("dsac needs a discriminator")
            self.reward_provider = RewardProvider(AIRL, self.discriminator, c.demo_bonus)
            self.disc_opt = Optimizer(self.discriminator.params, c.disc_lr, betas=c.adam_betas, eps=c.adam_eps)
        elif c.algo == "sqil":
            self.reward_provider = RewardProvider.sqil()
        self.weights = ImitationWeights(c.lambda_demo, c.lambda_samp)
        self.wrapped = c.absorbing_wrapper and c.algo != "sac"

    def observe(self, obs: np.ndarray) -> np.ndarray:
        return augment(obs) if self.wrapped else obs

    def collect_episode(self) -> tuple[Trajectory, np.ndarray]:
        env, act_dim = self.env, self.env.spec.act_dim
        obs = env.reset(self.rngs["env"])
        observations, actions, rewards = [obs], [], []
        warm = self.env_steps < self.config.warm_up
        while True:
            if warm:
                a = self.rngs["policy"].uniform(-1.0, 1.0, size=act_dim)
            else:
                with ad.no_grad():
                    a_t, _ = policy_sample(
                        self.learner.params.policy, self.observe(obs), self.rngs["policy"].standard_normal(act_dim)
                    )
                a = a_t.data[0]
            step = env.step(a)
            self.env_steps += 1
            observations.append(step.next_obs)
            actions.append(a)
            rewards.append(step.env_reward)
            obs = step.next_obs
            if step.terminal or step.truncated:
                break
        traj = Trajectory(np.array(observations), np.array(actions), step.terminal, step.truncated, float(np.sum(rewards)))
        return traj, np.array(rewards)

    def _half(self) -> int:
        return max(1, self.config.batch_size // 2)

    def discriminator_update(self) -> float:
        rng = self.rngs["minibatch"]
        m = self._half()
        demo, samp = self.demos.sample_batch(m, rng), self.samples.sample_batch(m, rng)
        loss = discriminator_loss(self.discriminator, demo, samp, self.config.gp_coeff, self.rngs["gp"])
        self.disc_opt.step(ad.backward(loss, self.discriminator.params))
        return float(loss.data)

    def sac_update(self) -> dict:
        rng = self.rngs["minibatch"]
        if self.config.algo == "sac":
            b = self.samples.sample_batch(self.config.batch_size, rng)
            batch = RewardedBatch(b.obs, b.actions, b.next_obs, b.masks, b.env_rewards, np.ones(len(b)))
            stats = self.learner.update(batch, self.rngs["policy"])
            stats["demo_reward"] = float("nan")
            stats["samp_reward"] = float(np.mean(b.env_rewards))
            return stats
        m = self._half()
        demo, samp = self.demos.sample_batch(m, rng), self.samples.sample_batch(m, rng)
        rb_demo, rb_samp = dsac_reward_assignment(self.reward_provider, demo, samp, self.weights, self.wrapped)
        stats = self.learner.update(RewardedBatch.concat([rb_demo, rb_samp]), self.rngs["policy"])
        bonus = self.reward_provider.demo_bonus if self.config.algo == "dsac" else 0.0
        stats["demo_reward"] = float(np.mean(rb_demo.rewards)) - bonus
        stats["samp_reward"] = float(np.mean(rb_samp.rewards))
        return stats

    def iteration(self) -> dict:
        """Collect one episode, then run the discriminator and SAC inner loops."""
        traj, rewards = self.collect_episode()
        if self.wrapped:
            traj_in = wrap_for_absorbing_states(traj)
        else:
            traj_in = traj
        n = self.samples.push_trajectory(traj_in, env_rewards=rewards)
        out = {"episode_return": traj.env_return, "episode_length": len(traj), "updates": 0}
        self.iterations += 1
        if self.env_steps < self.config.warm_up:
            return out
        if self.config.algo == "dsac":
            out["disc_loss"] = float(np.mean([self.discriminator_update() for _ in range(n)]))
        stats = [self.sac_update() for _ in range(n)]
        for k in stats[0]:
            out[k] = float(np.mean([s[k] for s in stats]))
        out["updates"] = n
        return out

    def act(self, obs: np.ndarray) -> np.ndarray:
        return policy_mean_action(self.learner.params.policy, self.observe(obs))


def dsac_train_iteration(loop: TrainingLoop) -> dict:
    """One outer iteration: episode, discriminator updates, then SAC updates."""
    return loop.iteration()


def evaluate_policy(env: Env, act, episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Returns of ``episodes`` noise-free rollouts of ``act``.

    The episodes run in lockstep on copies of ``env`` so ``act`` sees one
    stacked batch of observations per time step. Start states are drawn from
    ``rng`` in episode order, exactly as sequential rollouts would draw them.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    envs = [copy.deepcopy(env) for _ in range(episodes)]
    obs = [e.reset(rng) for e in envs]
    returns = np.zeros(episodes)
    live = list(range(episodes))
    while live:
        actions = np.atleast_2d(act(np.stack([obs[i] for i in live])))
        still = []
        for i, a in zip(live, actions):
            step = envs[i].step(a)
            returns[i] += step.env_reward
            obs[i] = step.next_obs
            if not (step.terminal or step.truncated):
                still.append(i)
        live = still
    return returns
