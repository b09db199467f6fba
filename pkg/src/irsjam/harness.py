"""Experiment orchestration: the episode/step training loop for each compared
approach, parameter sweeps over the power budget and the surface size, metric
collection, and persistence (one CSV trace plus one JSON metadata record per
run, one summary CSV per sweep)."""

from __future__ import annotations

import concurrent.futures
import csv
import json
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import (ActionEvaluator, QLearningAgent, WolfPhcAgent,
                     optimal_pa_no_irs)
from .channel import PhaseShiftMatrix
from .codec import ActionCodec, StateCodec, aggregate_magnitude_db, mag_edges_from_samples
from .config import ConfigError, ExperimentConfig
from .environment import AntiJamEnv
from .jammer import make_jammer

TRACE_COLUMNS = ("step", "episode", "reward", "rate", "sum_power_w", "jam_power_w")
_FLOAT_FMT = "%.17g"


@dataclass
class RunRecord:
    """One training run's traces and derived metrics."""

    approach: str
    seed: int
    steps: np.ndarray
    episodes: np.ndarray
    rewards: np.ndarray
    rates: np.ndarray
    sum_powers_w: np.ndarray
    jam_powers_w: np.ndarray
    convergence_iteration: int
    final_rate: float
    config_hash: str
    codec_summary: dict
    config_echo: dict
    axis_name: str | None = None
    axis_value: float | None = None

    @property
    def run_id(self) -> str:
        parts = []
        if self.axis_name is not None:
            parts.append(f"{self.axis_name}{self.axis_value:g}")
        parts.append(self.approach)
        parts.append(f"s{self.seed}")
        return "_".join(parts)

    @property
    def episode_mean_rates(self) -> np.ndarray:
        n_epi = int(self.episodes[-1]) + 1
        return np.array([self.rates[self.episodes == e].mean() for e in range(n_epi)])


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Causal moving average; shorter prefix windows at the start."""
    c = np.cumsum(values, dtype=float)
    out = np.empty_like(c)
    w = min(window, len(values))
    out[:w] = c[:w] / np.arange(1, w + 1)
    out[w:] = (c[w:] - c[:-w]) / w
    return out


def final_plateau(rates: np.ndarray) -> float:
    """Mean rate over the last 10% of the trace (at least one step)."""
    tail = max(1, int(np.ceil(0.1 * len(rates))))
    return float(rates[-tail:].mean())


def convergence_iteration(rates: np.ndarray, window: int, band: float = 0.02) -> int:
    """First step whose moving-average rate stays within ``band`` (relative) of
    the final plateau for the rest of the trace; the trace length when the
    moving average never settles."""
    ma = moving_average(rates, window)
    plateau = final_plateau(rates)
    tol = band * max(abs(plateau), 1e-12)
    inside = np.abs(ma - plateau) <= tol
    idx = len(rates)
    for i in range(len(rates) - 1, -1, -1):
        if not inside[i]:
            break
        idx = i
    return idx


def build_codecs(cfg: ExperimentConfig, env: AntiJamEnv,
                 warmup_rng: np.random.Generator) -> tuple[StateCodec, ActionCodec]:
    """State bins (jamming span from the jammer grid, SINR span from config,
    magnitude quantiles from a deterministic warm-up) and the action codec."""
    cc = cfg.codec
    jam_edges = cc.jam_edges_dbm
    if jam_edges is None:
        grid = cfg.jammer.power_grid_dbm
        lo, hi = (grid[0], grid[-1]) if grid[0] < grid[-1] else (grid[0] - 1, grid[0] + 1)
        jam_edges = np.linspace(lo, hi, cc.n_jam_bins + 1)
    sinr_edges = cc.sinr_edges_db
    if sinr_edges is None:
        sinr_edges = np.linspace(-10.0, 30.0, cc.n_sinr_bins + 1)
    mag_edges = cc.mag_edges_db
    if mag_edges is None:
        # one aggregated magnitude sample per warm-up coherence block,
        # under zero phases (the same magnitudes the initial observation carries)
        samples = []
        for _ in range(cc.warmup_draws):
            obs = env.new_episode(warmup_rng)
            samples.append(aggregate_magnitude_db(obs.channel_magnitudes))
        mag_edges = mag_edges_from_samples(samples, cc.n_mag_bins)
    state_codec = StateCodec(np.asarray(jam_edges, float), np.asarray(sinr_edges, float),
                             np.asarray(mag_edges, float))
    action_codec = ActionCodec(cfg.power_levels_watts, cfg.system.p_max_watts,
                               cc.n_phase_levels, cc.n_phase_groups,
                               cfg.system.n_irs_elements, cfg.system.n_ue)
    return state_codec, action_codec


class _LearningRunner:
    """Wraps a tabular agent: quantizes observations, decodes chosen indices."""

    def __init__(self, agent, state_codec: StateCodec, action_codec: ActionCodec):
        self.agent = agent
        self.state_codec = state_codec
        self.action_codec = action_codec
        self._s = None
        self._a = None

    def begin_episode(self, env, obs):
        self._s = self.state_codec.quantize(obs)

    def act(self, env, rng):
        self._a = self.agent.select_action(self._s, rng)
        decoded = self.action_codec.decode(self._a)
        return decoded.power, decoded.phases

    def learn(self, outcome):
        s_next = self.state_codec.quantize(outcome.next_observation)
        self.agent.update(self._s, self._a, outcome.reward, s_next)
        self._s = s_next

    def end_episode(self):
        self.agent.end_episode()


class _GreedyRunner:
    """Exhaustive immediate-reward optimizer against the previous jammer action;
    the whole-action-space gains are precomputed once per coherence block."""

    def __init__(self, action_codec: ActionCodec):
        self.action_codec = action_codec
        self._evaluator = None

    def begin_episode(self, env, obs):
        self._evaluator = ActionEvaluator(self.action_codec, env.channels,
                                          env.beamformers, env.noise, env.lambda1,
                                          env.reward_power_unit, env.irs_enabled)

    def act(self, env, rng):
        idx = self._evaluator.best(env.last_jam_action, env.channels)
        decoded = self.action_codec.decode(idx)
        return decoded.power, decoded.phases

    def learn(self, outcome):
        pass

    def end_episode(self):
        pass


class _NoIrsRunner:
    """Optimal discrete power split over the direct links only (the environment
    is built with the surface disabled for this approach)."""

    def __init__(self, power_levels, p_max, n_elements):
        self.power_levels = power_levels
        self.p_max = p_max
        self._phi = PhaseShiftMatrix.zeros(n_elements)

    def begin_episode(self, env, obs):
        pass

    def act(self, env, rng):
        pa = optimal_pa_no_irs(env.channels, env.last_jam_action, env.noise,
                               self.power_levels, self.p_max, env.beamformers)
        return pa, self._phi

    def learn(self, outcome):
        pass

    def end_episode(self):
        pass


class _RandomRunner:
    """Uniform random action each step; diagnostic lower bound."""

    def __init__(self, action_codec: ActionCodec):
        self.action_codec = action_codec

    def begin_episode(self, env, obs):
        pass

    def act(self, env, rng):
        decoded = self.action_codec.decode(int(rng.integers(self.action_codec.n_actions)))
        return decoded.power, decoded.phases

    def learn(self, outcome):
        pass

    def end_episode(self):
        pass


def _make_runner(approach: str, cfg: ExperimentConfig, state_codec: StateCodec,
                 action_codec: ActionCodec):
    ac = cfg.agent
    if approach == "wolf-phc":
        agent = WolfPhcAgent(state_codec.n_states, action_codec.n_actions, ac.alpha,
                             ac.gamma, ac.delta_win, ac.delta_lose, ac.epsilon,
                             ac.selection, ac.alpha_decay)
        return _LearningRunner(agent, state_codec, action_codec)
    if approach == "q-learning":
        agent = QLearningAgent(state_codec.n_states, action_codec.n_actions, ac.alpha,
                               ac.gamma, ac.epsilon, ac.alpha_decay)
        return _LearningRunner(agent, state_codec, action_codec)
    if approach == "greedy":
        return _GreedyRunner(action_codec)
    if approach == "no-irs":
        return _NoIrsRunner(cfg.power_levels_watts, cfg.system.p_max_watts,
                            cfg.system.n_irs_elements)
    if approach == "random":
        return _RandomRunner(action_codec)
    raise ConfigError(f"approaches: unknown approach {approach!r}")


def run_training(cfg: ExperimentConfig, approach: str, seed: int,
                 axis_name: str | None = None, axis_value: float | None = None,
                 config_echo: dict | None = None) -> RunRecord:
    """Run the full episode loop for one (config, approach, seed) triple.
    Deterministic: all randomness flows from independent streams spawned off
    the seed (placement, warm-up, per-episode channels, agent, jammer)."""
    placement_rng, warmup_rng, channel_rng, agent_rng, jammer_rng = \
        [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]

    geometry = cfg.geometry.resolve(cfg.system.n_ue, placement_rng)
    env = AntiJamEnv(geometry, cfg.pathloss,
                     n_bs_antennas=cfg.system.n_bs_antennas,
                     n_irs_elements=cfg.system.n_irs_elements,
                     n_jam_antennas=cfg.system.n_jam_antennas,
                     noise_watts=cfg.system.noise_watts,
                     p_max_watts=cfg.system.p_max_watts,
                     lambda1=cfg.reward.lambda1,
                     reward_power_unit=cfg.reward.power_unit,
                     irs_enabled=(approach != "no-irs"),
                     jam_estimate_noise_std=cfg.jammer.estimate_noise_std)
    state_codec, action_codec = build_codecs(cfg, env, warmup_rng)
    runner = _make_runner(approach, cfg, state_codec, action_codec)
    jammer = make_jammer(cfg.jammer.kind, cfg.system.n_ue, cfg.jammer.power_grid_watts,
                         cfg.jammer.direction, cfg.jammer.power_watts,
                         cfg.jammer.alpha, cfg.jammer.gamma, cfg.jammer.epsilon)

    sched = cfg.schedule
    n = sched.n_steps
    rewards = np.empty(n)
    rates = np.empty(n)
    sum_powers = np.empty(n)
    jam_powers = np.empty(n)
    episodes = np.empty(n, dtype=np.int64)

    t = 0
    for ep in range(sched.n_episodes):
        obs = env.new_episode(channel_rng)
        runner.begin_episode(env, obs)
        for _ in range(sched.steps_per_episode):
            pa, phi = runner.act(env, agent_rng)
            outcome = env.step(pa, phi, jammer, jammer_rng)
            runner.learn(outcome)
            rewards[t] = outcome.reward
            rates[t] = outcome.rate
            sum_powers[t] = pa.total
            jam_powers[t] = env.last_jam_action.total_power
            episodes[t] = ep
            t += 1
        runner.end_episode()

    return RunRecord(
        approach=approach, seed=seed,
        steps=np.arange(n, dtype=np.int64), episodes=episodes,
        rewards=rewards, rates=rates, sum_powers_w=sum_powers,
        jam_powers_w=jam_powers,
        convergence_iteration=convergence_iteration(rates, sched.window),
        final_rate=final_plateau(rates),
        config_hash=cfg.config_hash(),
        codec_summary={"state": state_codec.summary(), "action": action_codec.summary()},
        config_echo=config_echo if config_echo is not None else cfg.to_dict(),
        axis_name=axis_name, axis_value=axis_value,
    )


def write_run_record(record: RunRecord, out_dir) -> tuple[Path, Path]:
    """Persist one run: the step trace as CSV and everything else as JSON."""
    out_dir = Path(out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    csv_path = runs_dir / f"run_{record.run_id}.csv"
    meta_path = runs_dir / f"run_{record.run_id}.json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(len(record.steps)):
            writer.writerow([int(record.steps[i]), int(record.episodes[i]),
                             _FLOAT_FMT % record.rewards[i], _FLOAT_FMT % record.rates[i],
                             _FLOAT_FMT % record.sum_powers_w[i],
                             _FLOAT_FMT % record.jam_powers_w[i]])
    meta = {
        "approach": record.approach,
        "seed": record.seed,
        "axis_name": record.axis_name,
        "axis_value": record.axis_value,
        "convergence_iteration": record.convergence_iteration,
        "final_rate": record.final_rate,
        "config_hash": record.config_hash,
        "codec": record.codec_summary,
        "config": record.config_echo,
        "n_steps": int(len(record.steps)),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, meta_path


def load_run_record(meta_path) -> RunRecord:
    """Rebuild a RunRecord from disk, recomputing the derived metrics from the
    persisted trace (they must agree with the stored ones bit for bit)."""
    meta_path = Path(meta_path)
    with open(meta_path) as fh:
        meta = json.load(fh)
    csv_path = meta_path.with_suffix(".csv")
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{csv_path}: unexpected trace columns {header}")
        rows = list(reader)
    cols = list(zip(*rows))
    steps = np.array(cols[0], dtype=np.int64)
    episodes = np.array(cols[1], dtype=np.int64)
    rewards, rates, sum_powers, jam_powers = (np.array(c, dtype=float) for c in cols[2:6])
    window = meta["config"]["schedule"].get("smoothing_window") \
        or max(1, int(np.ceil(0.1 * len(rates))))
    return RunRecord(
        approach=meta["approach"], seed=meta["seed"],
        steps=steps, episodes=episodes, rewards=rewards, rates=rates,
        sum_powers_w=sum_powers, jam_powers_w=jam_powers,
        convergence_iteration=convergence_iteration(rates, window),
        final_rate=final_plateau(rates),
        config_hash=meta["config_hash"], codec_summary=meta["codec"],
        config_echo=meta["config"], axis_name=meta["axis_name"],
        axis_value=meta["axis_value"],
    )


def summarize(records) -> list[dict]:
    """Per (approach, axis value): mean/std of the final rate and the mean
    convergence iteration, sorted for stable output."""
    if not records:
        raise ValueError("no records to summarize")
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.approach, rec.axis_name, rec.axis_value), []).append(rec)

    def sort_key(item):
        (approach, axis_name, axis_value), _ = item
        return (axis_name or "", axis_value if axis_value is not None else 0.0, approach)

    rows = []
    for (approach, axis_name, axis_value), recs in sorted(groups.items(), key=sort_key):
        finals = np.array([r.final_rate for r in recs])
        convs = np.array([r.convergence_iteration for r in recs], dtype=float)
        rows.append({
            "approach": approach,
            "axis_name": axis_name if axis_name is not None else "",
            "axis_value": axis_value if axis_value is not None else "",
            "n_runs": len(recs),
            "mean_final_rate": float(finals.mean()),
            "std_final_rate": float(finals.std()),
            "mean_convergence_iteration": float(convs.mean()),
        })
    return rows


SUMMARY_COLUMNS = ("approach", "axis_name", "axis_value", "n_runs",
                   "mean_final_rate", "std_final_rate", "mean_convergence_iteration")


def write_summary(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row["approach"], row["axis_name"],
                _FLOAT_FMT % row["axis_value"] if row["axis_value"] != "" else "",
                row["n_runs"], _FLOAT_FMT % row["mean_final_rate"],
                _FLOAT_FMT % row["std_final_rate"],
                _FLOAT_FMT % row["mean_convergence_iteration"],
            ])
    return path


def _axis_configs(cfg: ExperimentConfig, axis: str):
    if axis == "p_max":
        for value in cfg.sweep.p_max_dbm:
            yield float(value), cfg.replaced(system={"p_max_dbm": float(value)})
    elif axis == "m_elements":
        for value in cfg.sweep.m_elements:
            yield float(value), cfg.replaced(system={"n_irs_elements": int(value)})
    else:
        raise ConfigError(f"sweep axis must be 'p_max' or 'm_elements', got {axis!r}")


def _run_job(args):
    cfg_dict, approach, seed, axis_name, axis_value = args
    from .config import config_from_dict
    cfg = config_from_dict(cfg_dict)
    try:
        rec = run_training(cfg, approach, seed, axis_name, axis_value)
        return (approach, axis_value, seed), rec, None
    except Exception:
        return (approach, axis_value, seed), None, traceback.format_exc()


def run_sweep(cfg: ExperimentConfig, axis: str, out_dir, approaches=None,
              seeds=None, parallel: int = 1):
    """Cartesian product of (axis value, approach, seed), each an independent
    training run. Records stream to disk as they complete; failures are
    recorded and do not stop the sweep. Returns (records, summary_rows,
    failures)."""
    approaches = list(approaches) if approaches else list(cfg.approaches)
    seeds = list(seeds) if seeds else list(cfg.seeds)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(sub.to_dict(), approach, seed, axis, value)
            for value, sub in _axis_configs(cfg, axis)
            for approach in approaches
            for seed in seeds]

    results = {}
    failures = []
    if parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
            for key, rec, err in pool.map(_run_job, jobs):
                results[key] = (rec, err)
                if rec is not None:
                    write_run_record(rec, out_dir)
    else:
        for job in jobs:
            key, rec, err = _run_job(job)
            results[key] = (rec, err)
            if rec is not None:
                write_run_record(rec, out_dir)

    records = []
    for job in jobs:
        key = (job[1], job[4], job[2])
        rec, err = results[key]
        if rec is None:
            failures.append({"approach": key[0], "axis_value": key[1],
                             "seed": key[2], "error": err})
        else:
            records.append(rec)

    if failures:
        with open(out_dir / "failures.json", "w") as fh:
            json.dump(failures, fh, indent=2)
            fh.write("\n")
    summary_rows = summarize(records) if records else []
    if summary_rows:
        write_summary(summary_rows, out_dir / "summary.csv")
    return records, summary_rows, failures


def run_many(cfg: ExperimentConfig, out_dir, approaches=None, seeds=None,
             parallel: int = 1, config_echo: dict | None = None):
    """All (approach, seed) runs at the configured operating point (no axis).
    Used by the demo and by single-point comparisons."""
    approaches = list(approaches) if approaches else list(cfg.approaches)
    seeds = list(seeds) if seeds else list(cfg.seeds)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    jobs = [(cfg.to_dict(), approach, seed, None, None)
            for approach in approaches for seed in seeds]
    if parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
            out = list(pool.map(_run_job, jobs))
    else:
        out = [_run_job(job) for job in jobs]
    failures = []
    for (key, rec, err) in out:
        if rec is None:
            failures.append({"approach": key[0], "seed": key[2], "error": err})
            continue
        if config_echo is not None:
            rec.config_echo = config_echo
        write_run_record(rec, out_dir)
        records.append(rec)
    if failures:
        with open(out_dir / "failures.json", "w") as fh:
            json.dump(failures, fh, indent=2)
            fh.write("\n")
    summary_rows = summarize(records) if records else []
    if summary_rows:
        write_summary(summary_rows, out_dir / "summary.csv")
    return records, summary_rows, failures
