"""Adam, global-norm clipping and the step-decay learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, ParamSet, Tensor


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # contiguous storage when created by ``packed``; m/v/param entries are views into it
    flat: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params: ParamSet, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros(t.shape) for k, t in params.items()},
            v={k: np.zeros(t.shape) for k, t in params.items()},
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )

    @classmethod
    def packed(cls, params: ParamSet, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        """Like ``for_params`` but moves ``params`` into one contiguous buffer.

        Each tensor's ``data`` is rebound to a view of that buffer, so updates
        are a few vector ops instead of a loop over tensors.
        """
        flat_p = np.concatenate([t.data.ravel() for t in params.values()]) if params else np.zeros(0)
        flat_m = np.zeros_like(flat_p)
        flat_v = np.zeros_like(flat_p)
        m, v = {}, {}
        offset = 0
        for k, t in params.items():
            n = t.data.size
            shape = t.shape
            t.data = flat_p[offset:offset + n].reshape(shape)
            m[k] = flat_m[offset:offset + n].reshape(shape)
            v[k] = flat_v[offset:offset + n].reshape(shape)
            offset += n
        return cls(m, v, beta1=beta1, beta2=beta2, eps=eps, flat=(flat_p, flat_m, flat_v))

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "m": {k: a.tolist() for k, a in self.m.items()},
            "v": {k: a.tolist() for k, a in self.v.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AdamState":
        return cls(
            m={k: np.asarray(a, dtype=np.float64) for k, a in doc["m"].items()},
            v={k: np.asarray(a, dtype=np.float64) for k, a in doc["v"].items()},
            step=int(doc["step"]),
            beta1=float(doc["beta1"]),
            beta2=float(doc["beta2"]),
            eps=float(doc["eps"]),
        )


def _is_packed(params: ParamSet, state: AdamState) -> bool:
    if state.flat is None:
        return False
    flat_p = state.flat[0]
    return all(t.data.base is flat_p for t in params.values())


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState, lr: float) -> ParamSet:
    """Apply one bias-corrected Adam update to ``params`` in place."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if params.keys() != grads.keys() or params.keys() != state.m.keys():
        raise ValueError("params, grads and optimizer state must name the same tensors")
    for name, p in params.items():
        g = grads[name].data
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ValueError(f"shape mismatch for '{name}': param {p.shape}, grad {g.shape}")

    b1, b2, t = state.beta1, state.beta2, state.step + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    if _is_packed(params, state):
        pairs = [(state.flat, np.concatenate([g.data.ravel() for g in grads.values()]))]
    else:
        pairs = [((params[k].data, state.m[k], state.v[k]), grads[k].data) for k in params]
    for _, g in pairs:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("adam_step", where="gradient")
    state.step = t
    for (p, m, v), g in pairs:
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def clip_global_norm(grads: ParamSet, max_norm: float) -> ParamSet:
    """Rescale ``grads`` so that their joint L2 norm is at most ``max_norm``."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = grads.global_norm()
    if not math.isfinite(norm):
        raise NonFiniteError("clip_global_norm")
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    out = ParamSet()
    for k, g in grads.items():
        out[k] = Tensor(g.data * scale)
    return out


def lr_at_step(step: int, initial_lr: float, decay: float, interval: int) -> float:
    """``initial_lr * decay ** (step // interval)``."""
    if step < 0 or interval <= 0 or not 0 < decay <= 1:
        raise ValueError("need step >= 0, interval > 0 and 0 < decay <= 1")
    return initial_lr * decay ** (step // interval)


@dataclass
class Optimizer:
    """Adam bound to one ParamSet, with optional clipping and lr decay."""

    params: ParamSet
    lr: float = 1e-3
    clip_norm: float | None = None
    lr_decay: float = 1.0
    lr_decay_interval: int = 100_000
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState.packed(self.params, self.betas[0], self.betas[1], self.eps)

    def current_lr(self) -> float:
        return lr_at_step(self.state.step, self.lr, self.lr_decay, self.lr_decay_interval)

    def step(self, grads: ParamSet) -> None:
        if self.clip_norm is not None:
            grads = clip_global_norm(grads, self.clip_norm)
        adam_step(self.params, grads, self.state, self.current_lr())
