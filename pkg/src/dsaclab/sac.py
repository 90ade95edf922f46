"""Soft Actor-Critic with twin critics and automatic temperature tuning.

The learner never decides rewards itself: every update receives a
:class:`RewardedBatch` whose ``rewards`` and ``weights`` were assigned by the
caller (environment reward for the expert, constants for SQIL, discriminator
logits for DSAC).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet, Tensor
from .nets import GaussianPolicy, TwinQ, policy_sample, q_values
from .optim import Optimizer


@dataclass
class RewardedBatch:
    obs: np.ndarray
    actions: np.ndarray
    next_obs: np.ndarray
    masks: np.ndarray
    rewards: np.ndarray
    weights: np.ndarray
    # next state is the absorbing state: its value is Q(s_a, 0) with no entropy bonus
    next_absorbing: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.obs)
        if self.next_absorbing is None:
            self.next_absorbing = np.zeros(n, dtype=bool)
        lengths = {len(x) for x in (self.actions, self.next_obs, self.masks, self.rewards, self.weights, self.next_absorbing)}
        if lengths != {n}:
            raise ValueError("RewardedBatch columns have different lengths")

    def __len__(self) -> int:
        return len(self.obs)

    @classmethod
    def concat(cls, parts) -> "RewardedBatch":
        fields = ("obs", "actions", "next_obs", "masks", "rewards", "weights", "next_absorbing")
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in fields))


@dataclass
class SacParams:
    policy: GaussianPolicy
    critics: TwinQ
    target_critics: TwinQ
    log_alpha: ParamSet
    entropy_target: float

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, hidden=(256, 256), rng=None, init_alpha: float = 1.0, zero: bool = False):
        rng = np.random.default_rng(0) if rng is None else rng
        policy = GaussianPolicy.create(obs_dim, act_dim, hidden, rng, zero)
        critics = TwinQ.create(obs_dim, act_dim, hidden, rng, zero)
        log_alpha = ParamSet.from_arrays({"log_alpha": np.array(math.log(init_alpha))})
        return cls(policy, critics, critics.copy(), log_alpha, entropy_target=-float(act_dim))

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha["log_alpha"].data))

    def checkpoint(self) -> ParamSet:
        return ad.merge([
            self.policy.params,
            self.critics.q1,
            self.critics.q2,
            ParamSet({f"target.{k}": v for k, v in self.target_critics.all_params().items()}),
            self.log_alpha,
        ])


def _noise(noise, n: int, act_dim: int) -> np.ndarray:
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim == 1:
        noise = noise[None, :]
    if noise.shape != (n, act_dim):
        raise ValueError(f"noise must have shape ({n}, {act_dim}), got {noise.shape}")
    return noise


def soft_value(p: SacParams, states, noise, absorbing=None) -> np.ndarray:
    """``min(Q1', Q2')(s, a) - alpha * log pi(a|s)`` with ``a`` drawn via ``noise``.

    Rows flagged in ``absorbing`` use the null action and no entropy term.
    Evaluated on the target critics and never differentiated.
    """
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    eps = _noise(noise, len(s), p.policy.act_dim)
    with ad.no_grad():
        a, logp = policy_sample(p.policy, s, eps)
        actions = a.data
        logp = logp.data
        if absorbing is not None and np.any(absorbing):
            actions = np.where(np.asarray(absorbing)[:, None], 0.0, actions)
            logp = np.where(absorbing, 0.0, logp)
        q1, q2 = q_values(p.target_critics, s, actions)
    v = np.minimum(q1.data, q2.data) - p.alpha * logp
    if not np.all(np.isfinite(v)):
        raise ad.NonFiniteError("soft_value")
    return v


def bellman_targets(p: SacParams, batch: RewardedBatch, gamma: float, noise) -> np.ndarray:
    v_next = soft_value(p, batch.next_obs, noise, batch.next_absorbing)
    y = batch.rewards + batch.masks * gamma * v_next
    if not np.all(np.isfinite(y)):
        raise ad.NonFiniteError("bellman_targets")
    return y


def soft_bellman_error(q_pred: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """Weighted mean squared residual ``mean(w * (Q - y)^2)``; targets are constants."""
    return ad.mean(ad.mul(weights, ad.square(ad.sub(q_pred, targets))))


def critic_loss(p: SacParams, batch: RewardedBatch, gamma: float, noise) -> Tensor:
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    y = bellman_targets(p, batch, gamma, noise)
    q1, q2 = q_values(p.critics, batch.obs, batch.actions)
    return ad.add(soft_bellman_error(q1, y, batch.weights), soft_bellman_error(q2, y, batch.weights))


def _actor_terms(p: SacParams, states, noise):
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if len(s) == 0:
        raise ValueError("actor loss needs at least one state")
    eps = _noise(noise, len(s), p.policy.act_dim)
    a, logp = policy_sample(p.policy, s, eps)
    frozen = p.critics
    q1, q2 = q_values(frozen, s, a, q1=frozen.q1.constants(), q2=frozen.q2.constants())
    return logp, ad.minimum(q1, q2)


def actor_loss(p: SacParams, states, noise) -> Tensor:
    """``mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))``; only the policy receives gradient."""
    logp, q = _actor_terms(p, states, noise)
    return ad.mean(ad.sub(ad.mul(p.alpha, logp), q))


def _temperature_loss(log_alpha: ParamSet, log_probs: np.ndarray, entropy_target: float) -> Tensor:
    alpha = ad.exp(log_alpha["log_alpha"])
    return ad.mean(ad.mul(ad.neg(alpha), log_probs + entropy_target))


def temperature_loss(p: SacParams, states, noise) -> Tensor:
    """``mean(-alpha * (log pi(a|s) + H_target))``; the policy is held fixed."""
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if len(s) == 0:
        raise ValueError("temperature loss needs at least one state")
    with ad.no_grad():
        _, logp = policy_sample(p.policy, s, _noise(noise, len(s), p.policy.act_dim))
    return _temperature_loss(p.log_alpha, logp.data, p.entropy_target)


def polyak_update(targets: TwinQ, live: TwinQ, tau: float) -> None:
    """``target <- (1 - tau) * target + tau * live`` elementwise, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for tgt, src in ((targets.q1, live.q1), (targets.q2, live.q2)):
        if tgt.keys() != src.keys():
            raise ValueError("target and live critics have different parameters")
        for k, t in tgt.items():
            if t.shape != src[k].shape:
                raise ValueError(f"shape mismatch for '{k}'")
            t.data *= 1.0 - tau
            t.data += tau * src[k].data


@dataclass
class SacConfig:
    gamma: float = 0.99
    tau: float = 5e-3
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    alpha_lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_interval: int = 100_000
    actor_clip: float | None = 40.0
    critic_clip: float | None = None
    decay_all: bool = False
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8


@dataclass
class SacLearner:
    """Owns SAC parameters and their optimisers; one call to :meth:`update` is one gradient step."""

    params: SacParams
    config: SacConfig = field(default_factory=SacConfig)

    def __post_init__(self):
        c = self.config
        other_decay = c.lr_decay if c.decay_all else 1.0
        adam = dict(betas=c.adam_betas, eps=c.adam_eps)
        self.actor_opt = Optimizer(self.params.policy.params, c.actor_lr, c.actor_clip, c.lr_decay, c.lr_decay_interval, **adam)
        self.critic_opt = Optimizer(
            self.params.critics.all_params(), c.critic_lr, c.critic_clip, other_decay, c.lr_decay_interval, **adam
        )
        self.alpha_opt = Optimizer(self.params.log_alpha, c.alpha_lr, None, other_decay, c.lr_decay_interval, **adam)
        self.updates = 0

    def update(self, batch: RewardedBatch, rng: np.random.Generator) -> dict:
        p, c = self.params, self.config
        act_dim = p.policy.act_dim
        n = len(batch)

        loss_q = critic_loss(p, batch, c.gamma, rng.standard_normal((n, act_dim)))
        self.critic_opt.step(ad.backward(loss_q, self.critic_opt.params))

        logp, q = _actor_terms(p, batch.obs, rng.standard_normal((n, act_dim)))
        loss_pi = ad.mean(ad.sub(ad.mul(p.alpha, logp), q))
        self.actor_opt.step(ad.backward(loss_pi, self.actor_opt.params))

        loss_alpha = _temperature_loss(p.log_alpha, logp.data, p.entropy_target)
        self.alpha_opt.step(ad.backward(loss_alpha, p.log_alpha))

        polyak_update(p.target_critics, p.critics, c.tau)
        self.updates += 1
        return {
            "critic_loss": float(loss_q.data),
            "actor_loss": float(loss_pi.data),
            "alpha_loss": float(loss_alpha.data),
            "alpha": p.alpha,
            "mean_q": float(np.mean(q.data)),
        }
