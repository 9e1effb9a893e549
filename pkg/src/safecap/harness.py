"""End-to-end training loops, metrics and file outputs."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import controller, tabular
from .ccem import CcemConfig, RecedingHorizonPlanner
from .cmdp import Policy, evaluate_policy
from .ensemble import fit as fit_ensemble
from .envs import (GridworldEnv, GridworldSpec, PointMassEnv, PointMassSpec, full_throttle_cost,
                   pointmass_cost_features, pointmass_reward)
from .planner import InfeasibleError, PenaltyWeighting, min_cost_fallback, solve_conservative

log = logging.getLogger(__name__)

CSV_COLUMNS = ("seed", "episode", "return", "cost", "true_cost", "cum_violations", "kappa", "fallback", "wall_ms")
# absolute slack (discounted units) before an exactly evaluated cost counts as a violation
VIOLATION_TOL = 1e-6
FINAL_WINDOW = 10


@dataclass(frozen=True)
class Mode:
    kind: str  # adaptive | fixed | certified | certified_training | none | oracle
    kappa: float | None = None
    delta: float | None = None
    horizon: int | None = None

    @classmethod
    def parse(cls, text: str) -> "Mode":
        text = text.strip()
        name, _, arg = text.partition(":")
        name = name.replace("-", "_")
        try:
            if name in ("adaptive", "none", "oracle") and not arg:
                return cls(name)
            if name == "fixed":
                k = float(arg)
                if k < 0:
                    raise ValueError
                return cls("fixed", kappa=k)
            if name == "certified":
                return cls("certified", delta=float(arg))
            if name == "certified_training":
                d, k = arg.split(",")
                return cls("certified_training", delta=float(d), horizon=int(k))
        except ValueError:
            pass
        raise ValueError(f"cannot parse mode {text!r}")

    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed-{self.kappa:g}"
        if self.kind == "certified":
            return f"certified-{self.delta:g}"
        if self.kind == "certified_training":
            return f"certified-training-{self.delta:g}-{self.horizon}"
        return self.kind


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "gridworld"
    mode: str = "adaptive"
    episodes: int | None = None
    seeds: int = 1
    master_seed: int = 0
    alpha: float = 0.1
    kappa_start: float = 10.0
    kappa_floor: float = 1e-4
    record_wall_time: bool = False
    workers: int = 1
    out: str | None = None
    # gridworld
    side: int = 8
    cost_limit: float = 0.1
    samples_per_episode: int = 500
    rollout_len: int = 100
    init_samples: int = 5000
    # point mass
    kappa_init: float = 1.0
    exploration_steps: int = 1000
    eval_episodes: int = 20
    ensemble_size: int = 5
    estimator: str = "max_std"
    population: int = 500
    elites: int = 50
    iterations: int = 5
    horizon: int = 30
    particles: int = 5
    episode_len: int = 200
    replan_every: int = 1
    cost_features: str = "abs"

    def __post_init__(self):
        if self.experiment not in ("gridworld", "pointmass"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        Mode.parse(self.mode)
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.episodes is not None and self.episodes < 1:
            raise ValueError("episodes must be >= 1")

    @property
    def parsed_mode(self) -> Mode:
        return Mode.parse(self.mode)

    @property
    def n_episodes(self) -> int:
        if self.episodes is not None:
            return self.episodes
        return 30 if self.experiment == "gridworld" else 100

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainRecord:
    seed: int
    episode: int
    ret: float
    cost: float
    true_cost: float
    cum_violations: int
    kappa: float
    fallback: bool
    wall_ms: float = 0.0
    true_ret: float = float("nan")

    def csv_row(self) -> list[str]:
        return [str(self.seed), str(self.episode), repr(self.ret), repr(self.cost), repr(self.true_cost),
                str(self.cum_violations), repr(self.kappa), str(int(self.fallback)), repr(self.wall_ms)]


def seed_sequence(master_seed: int, seed_index: int, stream: int) -> np.random.SeedSequence:
    """Independent stream ``stream`` of run ``seed_index``.

    Derived from the spawn key ``(seed_index, stream)`` so adding seeds or
    streams leaves existing ones untouched.
    """
    return np.random.SeedSequence(master_seed, spawn_key=(seed_index, stream))


# ------------------------------------------------------------------ gridworld

ENV_STREAM, INIT_STREAM, ROLLOUT_STREAM, PLAN_STREAM, EVAL_STREAM, FIT_STREAM = range(6)


def _tabular_weighting(mode: Mode, counts: tabular.CountTable, kappa: float, discount: float) -> PenaltyWeighting:
    if mode.kind in ("certified", "certified_training"):
        table = tabular.certified_penalty(counts, mode.delta, mode.horizon)
        return PenaltyWeighting.certified(table.u, beta=1.0 / (1.0 - discount))
    if mode.kind == "none":
        return PenaltyWeighting.none()
    return PenaltyWeighting.adaptive(tabular.practical_penalty(counts).u, kappa)


def _plan_or_fallback(model, weighting):
    try:
        return solve_conservative(model, weighting), False
    except InfeasibleError:
        return min_cost_fallback(model, weighting), True


def run_gridworld_seed(config: RunConfig, seed_index: int, env: GridworldEnv | None = None) -> list[TrainRecord]:
    mode = config.parsed_mode
    if env is None:
        spec = GridworldSpec(side=config.side, cost_limit=config.cost_limit,
                             seed=seed_sequence(config.master_seed, seed_index, ENV_STREAM))
        env = GridworldEnv(spec)
    g = env.discount
    limit_norm = (1.0 - g) * env.cost_limit
    rollout_rng = np.random.default_rng(seed_sequence(config.master_seed, seed_index, ROLLOUT_STREAM))
    init_rng = np.random.default_rng(seed_sequence(config.master_seed, seed_index, INIT_STREAM))

    counts = tabular.CountTable.empty(env.n_states, env.n_actions)
    if config.init_samples:
        data = env.sample(Policy.uniform(env.n_states, env.n_actions), config.init_samples, config.rollout_len, init_rng)
        counts = counts.record(data.states, data.actions, data.next_states)

    kappa = mode.kappa if mode.kind == "fixed" else 0.0
    ctrl = None
    first_plan = None
    if mode.kind == "adaptive":
        model = env.model(tabular.fit_transitions(counts))
        u = tabular.practical_penalty(counts).u
        found = {}

        def feasible(k):
            try:
                found[k] = solve_conservative(model, PenaltyWeighting.adaptive(u, k))
                return True
            except InfeasibleError:
                return False

        init = controller.exponential_search_init(feasible, config.kappa_start, config.kappa_floor)
        if isinstance(init, controller.FallbackSignal):
            log.info("seed %d: exponential search exhausted after %d halvings", seed_index, init.halvings)
            kappa = 0.0
        else:
            kappa = init
            first_plan = found[init]
        ctrl = controller.ControllerState(kappa=kappa, alpha=config.alpha)

    oracle_plan = None
    records: list[TrainRecord] = []
    violations = 0
    for episode in range(1, config.n_episodes + 1):
        t0 = time.perf_counter()
        if mode.kind == "oracle":
            if oracle_plan is None:
                oracle_plan = _plan_or_fallback(env.metrics_cmdp, PenaltyWeighting.none())
            plan, fallback = oracle_plan
        elif first_plan is not None:
            plan, fallback = first_plan, False
            first_plan = None
        else:
            model = env.model(tabular.fit_transitions(counts))
            plan, fallback = _plan_or_fallback(model, _tabular_weighting(mode, counts, kappa, g))

        data = env.sample(plan.policy, config.samples_per_episode, config.rollout_len, rollout_rng)
        counts = counts.record(data.states, data.actions, data.next_states)
        observed_cost = float(np.mean(data.normalized(data.episode_costs)))
        observed_ret = float(np.mean(data.normalized(data.episode_returns)))
        used_kappa = kappa
        if ctrl is not None:
            kappa = controller.update(ctrl, observed_cost, limit_norm).kappa
        wall = (time.perf_counter() - t0) * 1e3 if config.record_wall_time else 0.0

        # metrics only: exact evaluation under the true dynamics
        truth = evaluate_policy(env.metrics_cmdp, plan.policy)
        violations += int(truth.cost > env.cost_limit + VIOLATION_TOL)
        records.append(TrainRecord(
            seed=seed_index, episode=episode, ret=observed_ret, cost=observed_cost,
            true_cost=(1.0 - g) * truth.cost, cum_violations=violations,
            kappa=float(used_kappa) if mode.kind in ("adaptive", "fixed") else 0.0,
            fallback=fallback, wall_ms=wall, true_ret=(1.0 - g) * truth.ret,
        ))
    return records


# ----------------------------------------------------------------- point mass


def pointmass_limits(spec: PointMassSpec, horizon: int) -> tuple[float, float]:
    """(episode cost limit, planning-window cost limit) at equal per-step budget."""
    episode_limit = spec.limit_fraction * full_throttle_cost(spec)
    per_step = episode_limit / sum(spec.cost_discount ** t for t in range(spec.episode_len))
    window = per_step * sum(spec.cost_discount ** t for t in range(horizon))
    return episode_limit, window


def _pointmass_episode(env, planner, model, cost_model, window_limit, kappa, rng, replan_every):
    spec = env.spec
    s = env.reset()
    planner.reset()
    traj = []
    ret = cost = 0.0
    plan_seq = None
    for t in range(spec.episode_len):
        if t % replan_every == 0 or plan_seq is None:
            planner.act(model, cost_model, s, window_limit, kappa, rng)
            plan_seq = planner._prev
            offset = 0
        a = plan_seq[offset]
        offset += 1
        s2, r, c, _ = env.step(a)
        traj.append((s, a, s2, c))
        ret += spec.discount ** t * r
        cost += spec.cost_discount ** t * c
        s = s2
    return traj, ret, cost


def run_pointmass_seed(config: RunConfig, seed_index: int) -> list[TrainRecord]:
    mode = config.parsed_mode
    if mode.kind not in ("adaptive", "fixed", "none"):
        raise ValueError(f"mode {mode.kind!r} is tabular-only")
    spec = PointMassSpec(episode_len=config.episode_len)
    episode_limit, window_limit = pointmass_limits(spec, config.horizon)
    env = PointMassEnv(spec, np.random.default_rng(seed_sequence(config.master_seed, seed_index, ENV_STREAM)))
    eval_env = PointMassEnv(spec, np.random.default_rng(seed_sequence(config.master_seed, seed_index, EVAL_STREAM)))
    plan_rng = np.random.default_rng(seed_sequence(config.master_seed, seed_index, PLAN_STREAM))
    eval_plan_rng = np.random.default_rng(seed_sequence(config.master_seed, seed_index, EVAL_STREAM + 10))
    fit_seeds = seed_sequence(config.master_seed, seed_index, FIT_STREAM)
    explore_rng = np.random.default_rng(seed_sequence(config.master_seed, seed_index, INIT_STREAM))

    ccem_cfg = CcemConfig(population=config.population, elites=config.elites, iterations=config.iterations,
                          horizon=config.horizon, particles=config.particles, discount=spec.discount,
                          cost_discount=spec.cost_discount, estimator=config.estimator)
    planner = RecedingHorizonPlanner(ccem_cfg, lambda s, a, s2: pointmass_reward(s, a, s2, spec))

    cost_fn = None
    if config.cost_features == "abs":
        cost_fn = lambda s, a: pointmass_cost_features(s, a, spec)  # noqa: E731

    buffer = []
    s = env.reset()
    for t in range(config.exploration_steps):
        a = explore_rng.uniform(-1.0, 1.0, size=1)
        s2, _, c, done = env.step(a)
        buffer.append((s, a, s2, c))
        s = env.reset() if done else s2

    if mode.kind == "fixed":
        kappa = mode.kappa
    elif mode.kind == "adaptive":
        kappa = config.kappa_init
    else:
        kappa = 0.0
    ctrl = controller.ControllerState(kappa, config.alpha) if mode.kind == "adaptive" else None

    records = []
    violations = 0
    for episode in range(1, config.n_episodes + 1):
        t0 = time.perf_counter()
        S, A, S2, C = (np.array(x) for x in zip(*buffer))
        fit_seed = int(np.random.SeedSequence(fit_seeds.entropy, spawn_key=fit_seeds.spawn_key + (episode,))
                       .generate_state(1)[0])
        model, cost_model = fit_ensemble(S, A, S2, C, K=config.ensemble_size, rng_seed=fit_seed,
                                         cost_features=cost_fn)
        traj, ret, cost = _pointmass_episode(env, planner, model, cost_model, window_limit, kappa, plan_rng,
                                             config.replan_every)
        buffer.extend(traj)
        used_kappa = kappa
        if ctrl is not None:
            kappa = controller.update(ctrl, cost, episode_limit).kappa
        wall = (time.perf_counter() - t0) * 1e3 if config.record_wall_time else 0.0

        # metrics only: Monte-Carlo estimate of the frozen planner's cost
        eval_costs = [
            _pointmass_episode(eval_env, planner, model, cost_model, window_limit, used_kappa, eval_plan_rng,
                               config.replan_every)[2]
            for _ in range(config.eval_episodes)
        ]
        true_cost = float(np.mean(eval_costs)) if eval_costs else cost
        violations += int(true_cost > episode_limit)
        records.append(TrainRecord(
            seed=seed_index, episode=episode, ret=ret, cost=cost, true_cost=true_cost,
            cum_violations=violations, kappa=float(used_kappa), fallback=False, wall_ms=wall,
        ))
    return records


# -------------------------------------------------------------------- runners


def _run_one(args):
    config, seed_index = args
    if config.experiment == "gridworld":
        return run_gridworld_seed(config, seed_index)
    return run_pointmass_seed(config, seed_index)


def run(config: RunConfig) -> dict[int, list[TrainRecord]]:
    """All seeds of ``config``; merged by seed index whatever the worker count."""
    jobs = [(config, i) for i in range(config.seeds)]
    if config.workers > 1 and config.seeds > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return {i: recs for i, recs in enumerate(results)}


def run_gridworld(config: RunConfig) -> dict[int, list[TrainRecord]]:
    return run(replace(config, experiment="gridworld"))


def run_pointmass(config: RunConfig) -> dict[int, list[TrainRecord]]:
    return run(replace(config, experiment="pointmass"))


# ------------------------------------------------------------------- outputs


def records_csv(records: list[TrainRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(rec.csv_row())
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({
            "seed": int(row["seed"]), "episode": int(row["episode"]), "return": float(row["return"]),
            "cost": float(row["cost"]), "true_cost": float(row["true_cost"]),
            "cum_violations": int(row["cum_violations"]), "kappa": float(row["kappa"]),
            "fallback": bool(int(row["fallback"])), "wall_ms": float(row["wall_ms"]),
        })
    return out


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


SUMMARY_METRICS = {"return": "ret", "cost": "cost", "true_cost": "true_cost",
                   "cum_violations": "cum_violations", "kappa": "kappa"}


def summarize(runs: dict[int, list[TrainRecord]], config: RunConfig | None = None) -> dict:
    """Per-episode mean/std across seeds, final-episode and final-window aggregates."""
    if not runs:
        raise ValueError("nothing to summarize")
    seeds = sorted(runs)
    n_ep = min(len(runs[s]) for s in seeds)
    window = min(FINAL_WINDOW, n_ep)
    per_episode = {}
    final = {}
    final_window = {}
    for key, attr in SUMMARY_METRICS.items():
        grid = np.array([[getattr(r, attr) for r in runs[s][:n_ep]] for s in seeds], dtype=float)
        per_episode[key] = {"mean": grid.mean(axis=0).tolist(), "std": grid.std(axis=0).tolist()}
        final[key] = _mean_std(grid[:, -1])
        final_window[key] = _mean_std(grid[:, -window:].mean(axis=1))
    true_ret = np.array([[r.true_ret for r in runs[s][:n_ep]] for s in seeds], dtype=float)
    if np.all(np.isfinite(true_ret)):
        final["true_return"] = _mean_std(true_ret[:, -1])
        final_window["true_return"] = _mean_std(true_ret[:, -window:].mean(axis=1))
    fallback_rate = float(np.mean([[r.fallback for r in runs[s][:n_ep]] for s in seeds]))
    out = {
        "n_seeds": len(seeds),
        "n_episodes": n_ep,
        "final_window": window,
        "per_episode": per_episode,
        "final": final,
        "final_window_stats": final_window,
        "fallback_rate": fallback_rate,
    }
    if config is not None:
        out["config"] = asdict(config)
    return out


def write_outputs(runs: dict[int, list[TrainRecord]], config: RunConfig, out_dir) -> dict:
    """One CSV per (mode, seed) plus ``summary.json``; returns the summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label = config.parsed_mode.label()
    for seed, recs in sorted(runs.items()):
        (out_dir / f"{config.experiment}_{label}_seed{seed:03d}.csv").write_text(records_csv(recs))
    summary = summarize(runs, config)
    summary["mode"] = label
    summary["experiment"] = config.experiment
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
