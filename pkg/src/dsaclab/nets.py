"""Policy, twin-critic and discriminator networks as functions over ParamSets.

Every function accepts either one state (1-D) or a row batch (2-D). Batched
inputs return arrays/tensors with a leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet, Tensor

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
TANH_EPS = 1e-6
# 1e-7 nudged so that 1 - PROB_EPS is exact: the clamp is then symmetric and
# logit(lower) == -logit(upper) to the last bit
PROB_EPS = 1.0 - (1.0 - 1e-7)
# tanh rounds to exactly 1.0 beyond |u| ~ 19; keep actions strictly inside the box
ACTION_BOUND = float(np.nextafter(1.0, 0.0))
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# hidden sizes per profile: (policy/critic, discriminator)
PROFILES = {
    "full": ((256, 256), (100, 100)),
    "desk": ((64, 64), (32, 32)),
}


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    hidden_activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("MLP input and output dims must be >= 1")
        if len(self.hidden_dims) < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("MLP needs at least one hidden layer of width >= 1")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.hidden_activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


def init_mlp(spec: MlpSpec, rng: np.random.Generator, prefix: str = "", zero: bool = False) -> ParamSet:
    """Uniform fan-in initialisation, bound ``1/sqrt(fan_in)``."""
    arrays = {}
    for i, (n_in, n_out) in enumerate(spec.layer_dims):
        bound = 1.0 / math.sqrt(n_in)
        if zero:
            arrays[f"{prefix}l{i}.weight"] = np.zeros((n_in, n_out))
            arrays[f"{prefix}l{i}.bias"] = np.zeros(n_out)
        else:
            arrays[f"{prefix}l{i}.weight"] = rng.uniform(-bound, bound, size=(n_in, n_out))
            arrays[f"{prefix}l{i}.bias"] = rng.uniform(-bound, bound, size=n_out)
    return ParamSet.from_arrays(arrays)


def _layers(params: ParamSet, prefix: str, n_layers: int):
    return [(params[f"{prefix}l{i}.weight"], params[f"{prefix}l{i}.bias"]) for i in range(n_layers)]


def mlp_forward(params: ParamSet, spec: MlpSpec, x, prefix: str = "") -> Tensor:
    act = ad.relu if spec.hidden_activation == "relu" else ad.tanh
    layers = _layers(params, prefix, len(spec.layer_dims))
    h = ad.as_tensor(x)
    for w, b in layers[:-1]:
        h = act(ad.linear(h, w, b))
    w, b = layers[-1]
    return ad.linear(h, w, b)


def mlp_input_gradient(params: ParamSet, spec: MlpSpec, x, prefix: str = "") -> Tensor:
    """d(output)/d(input) for a scalar-output MLP, built from differentiable ops.

    Returns an (n, input_dim) tensor whose entries are themselves functions of
    the parameters, so penalties on it can be differentiated again.
    """
    if spec.output_dim != 1:
        raise ValueError("input gradient is only defined for scalar-output networks")
    layers = _layers(params, prefix, len(spec.layer_dims))
    h = ad.as_tensor(x)
    slopes = []
    for w, b in layers[:-1]:
        pre = ad.linear(h, w, b)
        if spec.hidden_activation == "tanh":
            h = ad.tanh(pre)
            slopes.append(ad.sub(1.0, ad.square(h)))
        else:
            h = ad.relu(pre)
            slopes.append(Tensor((pre.data > 0).astype(np.float64)))
    w_out, _ = layers[-1]
    # back-propagate a unit output through the layers, symbolically
    g = ad.mul(slopes[-1], ad.transpose(w_out))
    for (w, _), slope in zip(reversed(layers[1:-1]), reversed(slopes[:-1])):
        g = ad.mul(ad.matmul(g, ad.transpose(w)), slope)
    return ad.matmul(g, ad.transpose(layers[0][0]))


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite {what}")


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


# ---------------------------------------------------------------- policy


@dataclass
class GaussianPolicy:
    """Squashed-Gaussian policy; the MLP emits (mean, log-std) per action dim."""

    spec: MlpSpec
    params: ParamSet

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, hidden=(256, 256), rng=None, zero: bool = False):
        spec = MlpSpec(obs_dim, tuple(hidden), 2 * act_dim, "relu")
        rng = np.random.default_rng(0) if rng is None else rng
        return cls(spec, init_mlp(spec, rng, prefix="pi.", zero=zero))

    @property
    def act_dim(self) -> int:
        return self.spec.output_dim // 2

    def mean_logstd(self, states, params: ParamSet | None = None) -> tuple[Tensor, Tensor]:
        out = mlp_forward(self.params if params is None else params, self.spec, states, prefix="pi.")
        k = self.act_dim
        return ad.columns(out, 0, k), ad.clamp(ad.columns(out, k, 2 * k), LOG_STD_MIN, LOG_STD_MAX)


def policy_sample(policy: GaussianPolicy, states, noise, params: ParamSet | None = None):
    """Reparameterised sample ``tanh(mu + sigma * noise)`` and its log-density.

    Returns ``(actions, log_prob)`` as tensors of shape (n, act_dim) and (n,).
    Gradients reach the policy parameters through both outputs.
    """
    s, _ = _as_batch(states)
    eps, _ = _as_batch(noise)
    _check_finite(s, "state")
    if eps.shape != (s.shape[0], policy.act_dim):
        raise ValueError(f"noise shape {eps.shape} does not match ({s.shape[0]}, {policy.act_dim})")
    mu, log_std = policy.mean_logstd(s, params)
    u = ad.add(mu, ad.mul(ad.exp(log_std), eps))
    a = ad.clamp(ad.tanh(u), -ACTION_BOUND, ACTION_BOUND)
    # log N(u; mu, sigma) = -noise^2/2 - log sigma - log(2 pi)/2 per component
    const = -0.5 * np.sum(eps * eps, axis=1) - policy.act_dim * _HALF_LOG_2PI
    log_det = ad.sum(ad.log(ad.add(ad.sub(1.0, ad.square(a)), TANH_EPS)), axis=1)
    log_prob = ad.sub(ad.sub(const, ad.sum(log_std, axis=1)), log_det)
    return a, log_prob


def policy_log_prob(policy: GaussianPolicy, states, actions, params: ParamSet | None = None) -> Tensor:
    """Log-density of given squashed actions; actions are clipped just inside (-1, 1)."""
    s, _ = _as_batch(states)
    a, _ = _as_batch(actions)
    _check_finite(s, "state")
    if a.shape != (s.shape[0], policy.act_dim):
        raise ValueError(f"action shape {a.shape} does not match ({s.shape[0]}, {policy.act_dim})")
    a = np.clip(a, -1.0 + TANH_EPS, 1.0 - TANH_EPS)
    u = np.arctanh(a)
    mu, log_std = policy.mean_logstd(s, params)
    z = ad.mul(ad.sub(u, mu), ad.exp(ad.neg(log_std)))
    log_det = np.sum(np.log(1.0 - a * a + TANH_EPS), axis=1)
    per_dim = ad.sub(ad.mul(-0.5, ad.square(z)), log_std)
    return ad.sub(ad.sum(per_dim, axis=1), log_det + policy.act_dim * _HALF_LOG_2PI)


def policy_mean_action(policy: GaussianPolicy, states) -> np.ndarray:
    """Deterministic action ``tanh(mu(s))`` used for evaluation and demos."""
    s, single = _as_batch(states)
    _check_finite(s, "state")
    with ad.no_grad():
        mu, _ = policy.mean_logstd(s)
    a = np.clip(np.tanh(mu.data), -ACTION_BOUND, ACTION_BOUND)
    return a[0] if single else a


# ---------------------------------------------------------------- critics


@dataclass
class TwinQ:
    spec: MlpSpec
    q1: ParamSet
    q2: ParamSet

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, hidden=(256, 256), rng=None, zero: bool = False):
        spec = MlpSpec(obs_dim + act_dim, tuple(hidden), 1, "relu")
        rng = np.random.default_rng(0) if rng is None else rng
        return cls(spec, init_mlp(spec, rng, "q1.", zero), init_mlp(spec, rng, "q2.", zero))

    def copy(self) -> "TwinQ":
        return TwinQ(self.spec, self.q1.copy(), self.q2.copy())

    def all_params(self) -> ParamSet:
        return ad.merge([self.q1, self.q2])


def q_values(q: TwinQ, states, actions, q1: ParamSet | None = None, q2: ParamSet | None = None):
    """Both critic estimates, each shaped (n,)."""
    a_t = actions if isinstance(actions, Tensor) else Tensor(_as_batch(actions)[0])
    s, _ = _as_batch(states)
    if s.shape[1] + a_t.shape[1] != q.spec.input_dim:
        raise ValueError(f"state+action dim {s.shape[1] + a_t.shape[1]} != critic input {q.spec.input_dim}")
    x = ad.concatenate([Tensor(s), a_t], axis=1)
    out1 = mlp_forward(q.q1 if q1 is None else q1, q.spec, x, prefix="q1.")
    out2 = mlp_forward(q.q2 if q2 is None else q2, q.spec, x, prefix="q2.")
    return ad.reshape(out1, (-1,)), ad.reshape(out2, (-1,))


# ---------------------------------------------------------------- discriminator


@dataclass
class Discriminator:
    spec: MlpSpec
    params: ParamSet
    # ignore the trailing absorbing-indicator column of the observation
    drop_indicator: bool = False

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, hidden=(100, 100), rng=None, zero: bool = False, drop_indicator: bool = False):
        spec = MlpSpec(obs_dim - int(drop_indicator) + act_dim, tuple(hidden), 1, "tanh")
        rng = np.random.default_rng(0) if rng is None else rng
        return cls(spec, init_mlp(spec, rng, "d.", zero), drop_indicator)

    def copy(self) -> "Discriminator":
        return Discriminator(self.spec, self.params.copy(), self.drop_indicator)

    def inputs(self, states, actions) -> np.ndarray:
        s, _ = _as_batch(states)
        if self.drop_indicator:
            s = s[:, :-1]
        return discriminator_inputs(s, actions)


def discriminator_inputs(states, actions) -> np.ndarray:
    s, _ = _as_batch(states)
    a, _ = _as_batch(actions)
    return np.concatenate([s, a], axis=1)


def discriminator_logit(d: Discriminator, x) -> Tensor:
    x_arr = x if isinstance(x, Tensor) else Tensor(_as_batch(x)[0])
    if x_arr.shape[1] != d.spec.input_dim:
        raise ValueError(f"discriminator expects input dim {d.spec.input_dim}, got {x_arr.shape[1]}")
    return ad.reshape(mlp_forward(d.params, d.spec, x_arr, prefix="d."), (-1,))


def clamped_sigmoid(logit) -> Tensor:
    return ad.clamp(ad.sigmoid(logit), PROB_EPS, 1.0 - PROB_EPS)


def discriminator_prob(d: Discriminator, states, actions):
    """Probability in [1e-7, 1 - 1e-7] that (s, a) came from the demonstrations."""
    single = np.asarray(states).ndim == 1
    with ad.no_grad():
        p = clamped_sigmoid(discriminator_logit(d, d.inputs(states, actions))).data
    return float(p[0]) if single else p


def profile_sizes(profile: str):
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown network profile {profile!r}; choose from {sorted(PROFILES)}") from None
