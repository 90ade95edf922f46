"""scikit-learn style estimators over the training harness.

Each estimator is a thin shell: constructor arguments are the run settings,
``fit`` trains, ``predict`` maps observations to deterministic actions and
``score`` returns the mean noise-free evaluation return.

>>> model = DSAC(env="point_goal_v1", total_steps=20_000, network_profile="desk")
>>> model.fit(demos).score()                                   # doctest: +SKIP
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import RunConfig
from .envs import Trajectory, env_spec
from .harness import evaluate, run_imitation, train_expert
from .replay import DemoFile, load_demos

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


class _RunEstimator(BaseEstimator):
    _algo = ""

    def __init__(self, env="point_goal_v1", seed=1, total_steps=50_000, warm_up=10_000,
                 network_profile="full", absorbing_wrapper=True, eval_interval=5_000,
                 eval_episodes=10, extra=None):
        self.env = env
        self.seed = seed
        self.total_steps = total_steps
        self.warm_up = warm_up
        self.network_profile = network_profile
        self.absorbing_wrapper = absorbing_wrapper
        self.eval_interval = eval_interval
        self.eval_episodes = eval_episodes
        self.extra = extra

    def _config(self) -> RunConfig:
        extra = dict(self.extra or {})
        unknown = sorted(set(extra) - _CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown run settings in extra: {', '.join(unknown)}")
        values = {k: v for k, v in self.get_params(deep=False).items() if k != "extra"}
        values.update(extra)
        values["algo"] = self._algo if self._algo != "sac" else "dsac"
        return RunConfig(**values).validate()

    def _finish(self, cfg: RunConfig, result):
        self.config_ = cfg
        self.result_ = result
        self.checkpoint_ = result.checkpoint
        self.n_features_in_ = env_spec(cfg.env).obs_dim
        self._actor = result.checkpoint.actor()
        return self

    def predict(self, X) -> np.ndarray:
        """Deterministic actions for raw environment observations, one row each."""
        check_is_fitted(self, "checkpoint_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but {type(self).__name__} expects {self.n_features_in_}")
        return self._actor(X)

    def score(self, X=None, y=None) -> float:
        """Mean evaluation return over ``eval_episodes`` fixed start states.

        ``X`` and ``y`` are accepted for API compatibility and ignored; the
        score comes from rolling the policy out in the environment.
        """
        check_is_fitted(self, "checkpoint_")
        return float(np.mean(evaluate(self.config_, self._actor)))


def _as_trajectories(X, env: str) -> list[Trajectory]:
    if isinstance(X, DemoFile):
        return list(X.trajectories)
    if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
        return list(load_demos(X, env_spec(env)).trajectories)
    trajs = list(X)
    if not all(isinstance(t, Trajectory) for t in trajs):
        raise TypeError("demonstrations must be Trajectory objects, a DemoFile or a demo file path")
    return trajs


class SACExpert(_RunEstimator):
    """Soft actor-critic trained on the environment reward; ``total_steps`` sets the budget."""

    _algo = "sac"

    def fit(self, X=None, y=None):
        cfg = self._config()
        return self._finish(cfg, train_expert(cfg.replace(expert_steps=cfg.total_steps)))


class _Imitator(_RunEstimator):
    def fit(self, X, y=None):
        """Train from demonstrations: Trajectory objects, a DemoFile or a demo file path."""
        cfg = self._config()
        return self._finish(cfg, run_imitation(cfg, _as_trajectories(X, cfg.env)))


class SQIL(_Imitator):
    """Soft Q imitation: constant reward 1 on demonstrations and 0 on own samples."""

    _algo = "sqil"


class DSAC(_Imitator):
    """Discriminator soft actor-critic: rewards come from a learned demo/sample discriminator."""

    _algo = "dsac"


class BehavioralCloning(_Imitator):
    """Maximum-likelihood policy on demonstration pairs.

    ``fit`` takes either demonstrations (as for the other imitators) or an
    observation matrix ``X`` with the matching action matrix ``y``.
    ``total_steps`` counts gradient steps.
    """

    _algo = "bc"

    def __init__(self, env="point_goal_v1", seed=1, total_steps=10_000, warm_up=0,
                 network_profile="full", absorbing_wrapper=True, eval_interval=1_000,
                 eval_episodes=10, extra=None):
        super().__init__(env, seed, total_steps, warm_up, network_profile, absorbing_wrapper,
                         eval_interval, eval_episodes, extra)

    def fit(self, X, y=None):
        if y is None:
            return super().fit(X)
        cfg = self._config()
        spec = env_spec(cfg.env)
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        y = y.reshape(len(y), -1)
        if X.shape[1] != spec.obs_dim or y.shape[1] != spec.act_dim:
            raise ValueError(f"{cfg.env} needs {spec.obs_dim} observation and {spec.act_dim} action columns")
        # each pair becomes a one-step truncated episode; only (obs, action) reaches the loss
        trajs = [Trajectory(np.stack([o, o]), a[None], terminal=False, truncated=True) for o, a in zip(X, y)]
        return self._finish(cfg, run_imitation(cfg, trajs))
