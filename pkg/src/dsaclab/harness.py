"""Experiment pipeline: expert training, demo recording, imitation runs,
evaluation, seed sweeps and plots.

Every run writes into its own directory:

``config.txt``
    the fully resolved configuration; feeding it back reproduces the run.
``metrics.csv``
    one row per evaluation (columns in :data:`METRIC_COLUMNS`).
``iterations.csv``
    one row per collected episode, with the reward diagnostics.
``timing.csv``
    wall-clock seconds per evaluation row. Kept apart from the metrics so
    that repeated runs produce byte-identical metrics files.
``checkpoint.json``
    all learned parameters plus the metadata needed to rebuild the policy.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet
from .config import RunConfig
from .envs import Trajectory, augment, env_spec, make_env, wrap_for_absorbing_states
from .imitation import LoopConfig, TrainingLoop, bc_loss, evaluate_policy, rng_streams
from .nets import Discriminator, GaussianPolicy, MlpSpec, policy_mean_action, profile_sizes
from .optim import Optimizer
from .replay import DemoFormatError, ReplayBuffer, demo_buffer, load_demos, save_demos
from .sac import SacConfig, SacLearner, SacParams

log = logging.getLogger("dsaclab")

METRIC_COLUMNS = (
    "step", "eval_mean", "eval_std", "demo_reward_mean", "samp_reward_mean",
    "critic_loss", "actor_loss", "disc_loss", "alpha", "wall_time_s",
)
ITERATION_COLUMNS = (
    "iteration", "env_steps", "episode_return", "episode_length", "updates",
    "demo_reward", "samp_reward", "disc_loss", "critic_loss", "actor_loss", "alpha",
)
EXPERT_STEPS = {"point_goal_v1": 100_000, "pendulum_v1": 150_000}
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint is unreadable or belongs to a different setup."""


class WrapperMismatchError(ValueError):
    """Demonstrations were wrapped but the run has the absorbing wrapper off."""


class MetricsFormatError(ValueError):
    pass


# ---------------------------------------------------------------- checkpoints


@dataclass
class Checkpoint:
    env: str
    env_spec: dict
    algo: str
    wrapped: bool
    hidden: tuple[int, ...]
    params: ParamSet

    def policy(self) -> GaussianPolicy:
        spec = env_spec(self.env)
        obs_dim = spec.obs_dim + int(self.wrapped)
        policy_params = ParamSet({k: v for k, v in self.params.items() if k.startswith("pi.")})
        mlp = MlpSpec(obs_dim, tuple(self.hidden), 2 * spec.act_dim, "relu")
        policy = GaussianPolicy(mlp, policy_params)
        expected = GaussianPolicy.create(obs_dim, spec.act_dim, self.hidden, zero=True).params
        if {k: v.shape for k, v in expected.items()} != {k: v.shape for k, v in policy_params.items()}:
            raise CheckpointError("policy parameters do not match the recorded architecture")
        return policy

    def actor(self):
        """Deterministic batch policy over raw environment observations."""
        policy, wrapped = self.policy(), self.wrapped
        return lambda obs: policy_mean_action(policy, augment(obs) if wrapped else obs)

    def to_json(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "env": self.env,
            "env_spec": self.env_spec,
            "algo": self.algo,
            "wrapped": self.wrapped,
            "hidden": list(self.hidden),
            "params": self.params.to_json(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def load_checkpoint(path, expected_env: str | None = None) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint {path} does not exist") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    try:
        ckpt = Checkpoint(
            doc["env"], doc["env_spec"], doc["algo"], bool(doc["wrapped"]),
            tuple(int(h) for h in doc["hidden"]), ParamSet.from_json(doc["params"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    if expected_env is not None and ckpt.env != expected_env:
        raise CheckpointError(f"checkpoint was trained on {ckpt.env!r}, not {expected_env!r}")
    try:
        current = env_spec(ckpt.env).to_json()
    except ValueError as e:
        raise CheckpointError(str(e)) from e
    if json.loads(json.dumps(current)) != ckpt.env_spec:
        raise CheckpointError(f"environment constants of {ckpt.env!r} changed since the checkpoint was written")
    ckpt.policy()  # validates the architecture
    return ckpt


# ---------------------------------------------------------------- building blocks


def sac_config(cfg: RunConfig) -> SacConfig:
    return SacConfig(
        gamma=cfg.gamma,
        tau=cfg.tau,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        alpha_lr=cfg.alpha_lr,
        lr_decay=cfg.lr_decay,
        lr_decay_interval=cfg.lr_decay_interval,
        actor_clip=cfg.actor_clip or None,
        critic_clip=cfg.critic_clip or None,
        decay_all=cfg.decay_all_networks,
        adam_betas=(cfg.adam_beta1, cfg.adam_beta2),
        adam_eps=cfg.adam_eps,
    )


def build_loop(cfg: RunConfig, algo: str, demos: list[Trajectory] | None = None) -> TrainingLoop:
    """Fresh learner, buffers and RNG streams for ``algo`` in {"sac", "sqil", "dsac"}."""
    spec = env_spec(cfg.env)
    rngs = rng_streams(cfg.seed)
    wrapped = cfg.absorbing_wrapper and algo != "sac"
    obs_dim = spec.obs_dim + int(wrapped)
    hidden, disc_hidden = profile_sizes(cfg.network_profile)
    params = SacParams.create(obs_dim, spec.act_dim, hidden, rngs["init"], init_alpha=cfg.init_alpha)
    discriminator = None
    if algo == "dsac":
        discriminator = Discriminator.create(
            obs_dim, spec.act_dim, disc_hidden, rngs["init"], drop_indicator=wrapped and not cfg.disc_sees_indicator
        )
    loop_cfg = LoopConfig(
        algo=algo,
        total_steps=cfg.total_steps,
        warm_up=cfg.warm_up,
        batch_size=cfg.batch_size,
        absorbing_wrapper=cfg.absorbing_wrapper,
        demo_bonus=cfg.demo_bonus,
        lambda_demo=cfg.lambda_demo,
        lambda_samp=cfg.lambda_samp,
        gp_coeff=cfg.gp_coeff,
        disc_lr=cfg.disc_lr,
        adam_betas=(cfg.adam_beta1, cfg.adam_beta2),
        adam_eps=cfg.adam_eps,
    )
    return TrainingLoop(
        make_env(cfg.env),
        SacLearner(params, sac_config(cfg)),
        loop_cfg,
        rngs,
        demos=demo_buffer(demos) if demos else None,
        discriminator=discriminator,
        samples=ReplayBuffer(cfg.buffer_capacity),
    )


def prepare_demos(trajectories: list[Trajectory], wrapper: bool) -> list[Trajectory]:
    """Wrap demos for a wrapper-on run; refuse wrapped demos in a wrapper-off run."""
    if not trajectories:
        raise DemoFormatError("the demonstration set holds no trajectories")
    if wrapper:
        return [wrap_for_absorbing_states(t) for t in trajectories]
    if any(t.wrapped for t in trajectories):
        raise WrapperMismatchError(
            "demonstrations carry the absorbing indicator but absorbing_wrapper is off; "
            "record unwrapped demos or turn the wrapper on"
        )
    return list(trajectories)


def evaluate(cfg: RunConfig, act, episodes: int | None = None) -> np.ndarray:
    """Noise-free returns; every call replays the same start states for ``cfg.seed``."""
    rng = rng_streams(cfg.seed, names=("eval",))["eval"]
    return evaluate_policy(make_env(cfg.env), act, episodes or cfg.eval_episodes, rng)


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    metrics: list[dict]
    iterations: list[dict] = field(default_factory=list)
    timing: list[dict] = field(default_factory=list)
    checkpoint: Checkpoint | None = None
    reached_target: bool = False
    env_steps: int = 0
    wall_time_s: float = 0.0

    @property
    def final_eval(self) -> float:
        return self.metrics[-1]["eval_mean"] if self.metrics else float("nan")

    @property
    def best_eval(self) -> float:
        return max((m["eval_mean"] for m in self.metrics), default=float("nan"))


def _mean(rows, key) -> float:
    vals = [r[key] for r in rows if key in r and r[key] is not None and not math.isnan(r[key])]
    return float(np.mean(vals)) if vals else float("nan")


class _Recorder:
    """Turns per-iteration stats into evaluation rows on the configured cadence."""

    def __init__(self, cfg: RunConfig, total: int, act):
        self.cfg, self.total, self.act = cfg, total, act
        self.next_eval = cfg.eval_interval
        self.pending: list[dict] = []
        self.metrics: list[dict] = []
        self.timing: list[dict] = []
        self.start = time.perf_counter()
        self.reached = False

    def add(self, stats: dict) -> None:
        self.pending.append(stats)

    def due(self, progress: int) -> bool:
        return progress >= self.next_eval or progress >= self.total

    def record(self, progress: int, alpha: float) -> dict:
        interval = self.cfg.eval_interval
        if progress >= self.total:
            label = self.total
        else:
            label = (progress // interval) * interval
        self.next_eval = (progress // interval + 1) * interval
        returns = evaluate(self.cfg, self.act)
        elapsed = time.perf_counter() - self.start
        rows = self.pending
        row = {
            "step": label,
            "eval_mean": float(np.mean(returns)),
            "eval_std": float(np.std(returns)),
            "demo_reward_mean": _mean(rows, "demo_reward"),
            "samp_reward_mean": _mean(rows, "samp_reward"),
            "critic_loss": _mean(rows, "critic_loss"),
            "actor_loss": _mean(rows, "actor_loss"),
            "disc_loss": _mean(rows, "disc_loss"),
            "alpha": alpha,
            "wall_time_s": elapsed if self.cfg.wall_time_in_metrics else None,
        }
        self.pending = []
        self.metrics.append(row)
        self.timing.append({"step": label, "wall_time_s": elapsed})
        log.info("step %d  eval %.3f +- %.3f  (%.1fs)", label, row["eval_mean"], row["eval_std"], elapsed)
        target = self.cfg.stop_at_return
        if target is not None and row["eval_mean"] >= target:
            self.reached = True
        return row

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def _run_loop(cfg: RunConfig, loop: TrainingLoop, total: int) -> RunResult:
    act = lambda obs: policy_mean_action(loop.learner.params.policy, loop.observe(obs))
    rec = _Recorder(cfg, total, act)
    iterations = []
    while loop.env_steps < total and not rec.reached:
        out = loop.iteration()
        row = {"iteration": loop.iterations, "env_steps": loop.env_steps}
        row.update({k: out.get(k) for k in ITERATION_COLUMNS if k not in row})
        iterations.append(row)
        rec.add(out)
        if rec.due(loop.env_steps):
            rec.record(min(loop.env_steps, total), loop.learner.params.alpha)
    return RunResult(rec.metrics, iterations, rec.timing, reached_target=rec.reached,
                     env_steps=loop.env_steps, wall_time_s=rec.elapsed)


def _checkpoint(cfg: RunConfig, algo: str, loop: TrainingLoop) -> Checkpoint:
    parts = [loop.learner.params.checkpoint()]
    if loop.discriminator is not None:
        parts.append(loop.discriminator.params)
    return Checkpoint(
        cfg.env, json.loads(json.dumps(env_spec(cfg.env).to_json())), algo, loop.wrapped,
        tuple(profile_sizes(cfg.network_profile)[0]), ad.merge(parts),
    )


def train_expert(cfg: RunConfig, out_dir=None) -> RunResult:
    """SAC on the true environment reward."""
    total = cfg.expert_steps or EXPERT_STEPS[cfg.env]
    loop = build_loop(cfg, "sac")
    result = _run_loop(cfg, loop, total)
    result.checkpoint = _checkpoint(cfg, "sac", loop)
    if out_dir is not None:
        write_run(out_dir, cfg, result)
    return result


def run_bc(cfg: RunConfig, demos: list[Trajectory]) -> RunResult:
    """Behavioural cloning; ``total_steps`` counts gradient steps instead of env steps."""
    spec = env_spec(cfg.env)
    rngs = rng_streams(cfg.seed)
    wrapped = cfg.absorbing_wrapper
    hidden, _ = profile_sizes(cfg.network_profile)
    policy = GaussianPolicy.create(spec.obs_dim + int(wrapped), spec.act_dim, hidden, rngs["init"])
    opt = Optimizer(policy.params, cfg.actor_lr, cfg.actor_clip or None, cfg.lr_decay, cfg.lr_decay_interval,
                    betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps)
    buffer = demo_buffer(demos)
    act = lambda obs: policy_mean_action(policy, augment(obs) if wrapped else obs)
    rec = _Recorder(cfg, cfg.total_steps, act)
    step = 0
    while step < cfg.total_steps and not rec.reached:
        batch = buffer.sample_batch(cfg.batch_size, rngs["minibatch"])
        loss = bc_loss(policy, batch)
        opt.step(ad.backward(loss, policy.params))
        step += 1
        rec.add({"actor_loss": float(loss.data)})
        if rec.due(step):
            rec.record(step, float("nan"))
    ckpt = Checkpoint(cfg.env, json.loads(json.dumps(spec.to_json())), "bc", wrapped, tuple(hidden), policy.params)
    return RunResult(rec.metrics, [], rec.timing, ckpt, rec.reached, 0, rec.elapsed)


def run_imitation(cfg: RunConfig, demos: list[Trajectory], out_dir=None) -> RunResult:
    """SQIL, DSAC or BC from demonstrations, as selected by ``cfg.algo``."""
    demos = prepare_demos(demos, cfg.absorbing_wrapper)
    if cfg.algo == "bc":
        result = run_bc(cfg, demos)
    else:
        loop = build_loop(cfg, cfg.algo, demos)
        result = _run_loop(cfg, loop, cfg.total_steps)
        result.checkpoint = _checkpoint(cfg, cfg.algo, loop)
    if out_dir is not None:
        write_run(out_dir, cfg, result)
    return result


def imitate_from_file(cfg: RunConfig, demo_path, out_dir=None) -> RunResult:
    demo_file = load_demos(demo_path, env_spec(cfg.env))
    return run_imitation(cfg, demo_file.trajectories, out_dir)


def record_demos(ckpt: Checkpoint, n: int, seed: int) -> list[Trajectory]:
    """``n`` noise-free expert episodes; ``seed`` drives the start states."""
    if n < 1:
        raise ValueError("need at least one demonstration episode")
    env = make_env(ckpt.env)
    act = ckpt.actor()
    rng = rng_streams(seed, names=("env",))["env"]
    trajectories = []
    for _ in range(n):
        obs = env.reset(rng)
        observations, actions, total = [obs], [], 0.0
        while True:
            a = act(obs)
            step = env.step(a)
            observations.append(step.next_obs)
            actions.append(a)
            total += step.env_reward
            obs = step.next_obs
            if step.terminal or step.truncated:
                break
        trajectories.append(Trajectory(np.array(observations), np.array(actions), step.terminal, step.truncated, total))
    return trajectories


def record_demos_to_file(ckpt: Checkpoint, n: int, seed: int, path) -> list[Trajectory]:
    trajectories = record_demos(ckpt, n, seed)
    save_demos(trajectories, path, env_spec(ckpt.env), seed)
    return trajectories


def evaluate_checkpoint(ckpt: Checkpoint, episodes: int = 10, seed: int = 0) -> dict:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = rng_streams(seed, names=("eval",))["eval"]
    returns = evaluate_policy(make_env(ckpt.env), ckpt.actor(), episodes, rng)
    return {
        "env": ckpt.env,
        "episodes": episodes,
        "seed": seed,
        "mean": float(np.mean(returns)),
        "std": float(np.std(returns)),
        "min": float(np.min(returns)),
        "max": float(np.max(returns)),
    }


# ---------------------------------------------------------------- files


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def write_run(out_dir, cfg: RunConfig, result: RunResult) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    write_csv(out / "metrics.csv", METRIC_COLUMNS, result.metrics)
    write_csv(out / "iterations.csv", ITERATION_COLUMNS, result.iterations)
    write_csv(out / "timing.csv", ("step", "wall_time_s"), result.timing)
    if result.checkpoint is not None:
        result.checkpoint.save(out / "checkpoint.json")
    return out


def read_metrics(path) -> list[dict]:
    """Parse a metrics CSV back into rows of floats (missing cells become NaN)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != METRIC_COLUMNS:
                raise MetricsFormatError(f"{path}: header does not match {','.join(METRIC_COLUMNS)}")
            rows = []
            for lineno, raw in enumerate(reader, 2):
                try:
                    row = {k: float(v) if v not in ("", None) else float("nan") for k, v in raw.items()}
                except ValueError as e:
                    raise MetricsFormatError(f"{path}:{lineno}: {e}") from e
                row["step"] = int(row["step"])
                rows.append(row)
    except OSError as e:
        raise MetricsFormatError(f"cannot read {path}: {e}") from e
    steps = [r["step"] for r in rows]
    if steps != sorted(steps):
        raise MetricsFormatError(f"{path}: steps are not non-decreasing")
    return rows


# ---------------------------------------------------------------- sweeps


AGGREGATE_COLUMNS = (
    "step", "n_seeds", "eval_mean", "eval_std", "demo_reward_mean", "samp_reward_mean", "missing_seeds",
)


def aggregate(per_seed: dict[int, list[dict]], failed=()) -> list[dict]:
    """Mean and standard deviation across seeds at every recorded step."""
    steps = sorted({r["step"] for rows in per_seed.values() for r in rows})
    missing = " ".join(str(s) for s in sorted(failed))
    out = []
    for step in steps:
        at = [r for rows in per_seed.values() for r in rows if r["step"] == step]
        evals = np.array([r["eval_mean"] for r in at])
        out.append({
            "step": step,
            "n_seeds": len(at),
            "eval_mean": float(np.mean(evals)),
            "eval_std": float(np.std(evals)),
            "demo_reward_mean": _mean(at, "demo_reward_mean"),
            "samp_reward_mean": _mean(at, "samp_reward_mean"),
            "missing_seeds": missing,
        })
    return out


@dataclass
class SweepResult:
    results: dict[int, RunResult]
    failures: dict[int, str]
    aggregate: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures


def sweep(cfg: RunConfig, seeds, demos: list[Trajectory], out_dir=None) -> SweepResult:
    """One imitation run per seed; a failing seed is reported without stopping the rest."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    results, failures = {}, {}
    for seed in seeds:
        run_cfg = cfg.replace(seed=seed)
        target = None if out_dir is None else Path(out_dir) / f"seed_{seed}"
        try:
            results[seed] = run_imitation(run_cfg, demos, target)
        except Exception as e:  # noqa: BLE001 - sibling runs must continue
            log.error("seed %d failed: %s", seed, e)
            failures[seed] = f"{type(e).__name__}: {e}"
    agg = aggregate({s: r.metrics for s, r in results.items()}, failures)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out_dir) / "aggregate.csv", AGGREGATE_COLUMNS, agg)
        if failures:
            (Path(out_dir) / "failures.txt").write_text("".join(f"{s}: {m}\n" for s, m in sorted(failures.items())))
    return SweepResult(results, failures, agg)


# ---------------------------------------------------------------- plots


def _label_for(metrics_path: Path) -> str:
    cfg_path = metrics_path.parent / "config.txt"
    if cfg_path.exists():
        from .config import parse_assignments

        values = parse_assignments(cfg_path.read_text(encoding="utf-8").splitlines(), str(cfg_path))
        algo = values.get("algo", "?")
        wrapper = values.get("absorbing_wrapper", True)
        return f"{algo}+wrapper" if wrapper and algo in ("sqil", "dsac") else str(algo)
    return metrics_path.stem


def plot_series(metrics_paths, labels=None) -> list[dict]:
    """Per-label, per-step mean and std of the evaluation and reward columns."""
    paths = [Path(p) for p in metrics_paths]
    if not paths:
        raise ValueError("plot needs at least one metrics file")
    labels = list(labels) if labels else [_label_for(p) for p in paths]
    grouped: dict[str, list[list[dict]]] = {}
    for path, label in zip(paths, labels):
        grouped.setdefault(label, []).append(read_metrics(path))
    series = []
    for label, runs in grouped.items():
        for step in sorted({r["step"] for rows in runs for r in rows}):
            at = [r for rows in runs for r in rows if r["step"] == step]
            evals = np.array([r["eval_mean"] for r in at])
            series.append({
                "label": label,
                "step": step,
                "n": len(at),
                "eval_mean": float(np.mean(evals)),
                "eval_std": float(np.std(evals)) if len(at) > 1 else float("nan"),
                "demo_reward": _mean(at, "demo_reward_mean"),
                "samp_reward": _mean(at, "samp_reward_mean"),
            })
    return series


def plot(metrics_paths, out_svg, expert_return: float | None = None, labels=None) -> list[Path]:
    """Score curves (mean with a +-1 std band) and a reward-diagnostic figure, both SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = plot_series(metrics_paths, labels)
    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    rewards_svg = out_svg.with_name(out_svg.stem + "_rewards.svg")
    series_csv = out_svg.with_name(out_svg.stem + "_series.csv")
    write_csv(series_csv, ("label", "step", "n", "eval_mean", "eval_std", "demo_reward", "samp_reward"), series)

    plt.rcParams["svg.hashsalt"] = "dsaclab"
    by_label: dict[str, list[dict]] = {}
    for row in series:
        by_label.setdefault(row["label"], []).append(row)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in by_label.items():
        steps = np.array([r["step"] for r in rows])
        mean = np.array([r["eval_mean"] for r in rows])
        std = np.array([r["eval_std"] for r in rows])
        ax.plot(steps, mean, label=label)
        if np.any(np.isfinite(std)):
            ax.fill_between(steps, mean - std, mean + std, alpha=0.2)
    if expert_return is not None:
        ax.axhline(expert_return, color="black", linestyle="--", label="expert")
    ax.set_xlabel("environment steps")
    ax.set_ylabel("evaluation return (mean, band = +-1 std)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_svg, format="svg", metadata={"Date": None})
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in by_label.items():
        steps = np.array([r["step"] for r in rows])
        demo = np.array([r["demo_reward"] for r in rows])
        samp = np.array([r["samp_reward"] for r in rows])
        if np.any(np.isfinite(demo)):
            ax.plot(steps, demo, label=f"{label} demo")
            ax.plot(steps, samp, linestyle=":", label=f"{label} sample")
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean reward")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(rewards_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [out_svg, rewards_svg, series_csv]
