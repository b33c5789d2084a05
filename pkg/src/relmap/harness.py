"""Experiment orchestration: episodes, training, mapper comparison, output files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import pvgrid
from .clustering import pack_bins, refresh_bin_stats
from .config import SimConfig
from .mapper import MapContext, Mapper, MappingDecision, RLMapper, core_reward, make_mapper
from .reliability import (
    MECHANISMS,
    MTTFReport,
    capped_combined,
    aging_rates,
    evaluate_trace,
    mttf_tc,
    rainflow_ranges,
)
from .thermal import TemperatureTrace, ThermalState, heatmap_csv
from .workload import WorkloadTrace, generate_trace, load_trace, preset_trace, scale_duration

STREAM_PV, STREAM_WORKLOAD, STREAM_EXPLORE = 0, 1, 2


def stream(seed: int, which: int) -> np.random.Generator:
    """Independent generator per (master seed, module) pair."""
    return np.random.default_rng(np.random.SeedSequence([seed, which]))


def stream_seed(seed: int, which: int) -> int:
    return int(np.random.SeedSequence([seed, which]).generate_state(1)[0])


def build_workload(cfg: SimConfig, seed: int) -> WorkloadTrace:
    w = cfg.workload
    s = stream_seed(seed, STREAM_WORKLOAD)
    if w.source == "presets":
        return preset_trace(w.repeats, s, w.arrival_rate)
    if w.source == "synthetic":
        return generate_trace(
            w.n_tasks,
            s,
            duration_range=(w.duration_min, w.duration_max),
            power_range=(w.power_min, w.power_max),
            arrival_rate=w.arrival_rate,
        )
    return load_trace(cfg.resolve(w.source))


def build_frequencies(cfg: SimConfig, seed: int) -> np.ndarray:
    g = cfg.grid
    res = g.pv_cells_per_core
    grid = pvgrid.generate_pv_grid(
        g.rows * res, g.cols * res, stream_seed(seed, STREAM_PV), g.correlation_length, g.p_min
    )
    cp = pvgrid.tile_footprints(grid.shape, (g.rows, g.cols))
    return pvgrid.max_frequencies(grid, cp, g.beta_f).frequencies


@dataclass
class EpisodeResult:
    report: MTTFReport
    decisions: list[MappingDecision]
    final_state: ThermalState
    trace: TemperatureTrace
    queued_at_end: int = 0

    @property
    def bin_reward_total(self) -> float:
        return math.fsum(d.bin_reward for d in self.decisions if math.isfinite(d.bin_reward))

    @property
    def core_reward_total(self) -> float:
        return math.fsum(d.core_reward for d in self.decisions if math.isfinite(d.core_reward))


class Simulation:
    """One pass of a workload trace through the mapping loop.

    Fixed-step thermal integration; arrivals and completions are handled at
    step boundaries.  Bins are re-packed whenever new tasks arrive.
    """

    def __init__(self, cfg: SimConfig, workload: WorkloadTrace, frequencies: np.ndarray):
        self.cfg = cfg
        self.th = cfg.thermal_config()
        self.rel = cfg.reliability_params()
        self.workload = workload
        self.freqs = np.asarray(frequencies, dtype=float)
        if len(self.freqs) != self.th.n_cores:
            raise ValueError("one frequency per core required")

    def _accumulate_rates(self) -> None:
        """Fold samples recorded since the last call into the per-core rate sums."""
        n = len(self.trace)
        if self._rates_upto < n:
            rows = slice(self._rates_upto, n)
            temps = self.trace.as_array()[rows]
            rates = aging_rates(temps, self.rel.aging, self._isub[rows], self._iem[rows])
            self._rate_sum += rates.sum(axis=1)
            self._rates_upto = n

    def _lifetimes(self, core: int) -> tuple[float, float, float, float]:
        n = len(self.trace)
        temps = self.trace.core(core)
        tc = mttf_tc(rainflow_ranges(temps, self.th.sampling_period), self.rel.tc) if n >= 2 else math.inf
        self._accumulate_rates()
        nbti, hci, em = n / self._rate_sum[:, core]
        return tc, float(nbti), float(hci), float(em)

    def _refresh_snapshot(self, core: int) -> float:
        life = self._lifetimes(core)
        cap = self.rel.cap_years
        self.mttf[core] = capped_combined(life, cap)
        self.mttf_tc[core] = min(life[0], cap)
        return self.mttf[core]

    def _context(self, time: float) -> MapContext:
        return MapContext(
            time=time,
            temps=self.temps,
            busy=self.busy,
            partition=self.partition,
            mttf=self.mttf,
            mttf_tc=self.mttf_tc,
            r_v=self.th.r_v,
            ambient=self.th.ambient,
        )

    def _task_counts(self, part):
        return [int(sum(self.busy[c] for c in b)) for b in part.bins]

    def run(self, mapper: Mapper, rng: np.random.Generator, episode: int = 0) -> EpisodeResult:
        th, cl = self.th, self.cfg.clustering
        n = th.n_cores
        dt = th.dt
        spp = th.steps_per_sample
        idle_isub = self.cfg.reliability.idle_isub
        idle_iem = self.cfg.reliability.idle_iem
        nominal = self.cfg.grid.beta_f

        mapper.begin_episode(episode, rng)
        state0 = ThermalState.idle(th)
        self.temps = np.array(state0.temps)
        self.busy = np.zeros(n, dtype=bool)
        power = np.full(n, th.idle_power)
        isub = np.full(n, idle_isub)
        iem = np.full(n, idle_iem)

        tasks = self.workload.tasks
        horizon = int(sum(math.ceil(t.duration / dt) for t in tasks) * 2 + 16)
        cap_samples = horizon // spp + 2
        self.trace = TemperatureTrace(n, th.sampling_period, capacity=cap_samples)
        self._isub = np.empty((cap_samples, n))
        self._iem = np.empty((cap_samples, n))
        self.trace.append(0.0, self.temps)
        self._isub[0], self._iem[0] = isub, iem
        self._rate_sum = np.zeros((3, n))
        self._rates_upto = 0

        cap = self.rel.cap_years
        self.mttf = np.empty(n)
        self.mttf_tc = np.empty(n)
        for c in range(n):
            self._refresh_snapshot(c)
        self.partition = pack_bins(self.temps, cl.epsilon, cl.min_pts)

        arrive_step = [math.ceil(t.arrival / dt - 1e-9) for t in tasks]
        decisions: list[MappingDecision] = []
        running: dict[int, tuple[int, int, int, float]] = {}  # core -> (task idx, end step, decision idx, mttf_old)
        queue: list[int] = []
        nxt = 0
        k = 0
        while nxt < len(tasks) or queue or running:
            now = k * dt
            done = sorted(c for c, (_, end, _, _) in running.items() if end == k)
            for c in done:
                ti, _, di, old = running.pop(c)
                self.busy[c] = False
                power[c], isub[c], iem[c] = th.idle_power, idle_isub, idle_iem
                new = self._refresh_snapshot(c)
                r = core_reward(old, new)
                decisions[di].core_reward = r
                decisions[di].completion_time = now
                mapper.complete(tasks[ti].id, self._context(now), r)

            arrived = False
            while nxt < len(tasks) and arrive_step[nxt] <= k:
                queue.append(nxt)
                nxt += 1
                arrived = True

            if queue and not self.busy.all():
                if arrived:
                    part = pack_bins(self.temps, cl.epsilon, cl.min_pts)
                else:
                    part = refresh_bin_stats(self.partition, self.temps)
                self.partition = part.with_task_counts(self._task_counts(part))
                while queue and not self.busy.all():
                    ti = queue[0]
                    task = tasks[ti]
                    picked = mapper.assign(task, self._context(now))
                    if picked is None:
                        break
                    queue.pop(0)
                    b, c, r_bin = picked
                    if self.busy[c] or c not in self.partition.bins[b]:
                        raise RuntimeError(f"mapper {mapper.name} chose infeasible core {c}")
                    old = self._refresh_snapshot(c)
                    self.busy[c] = True
                    counts = list(self.partition.task_counts)
                    counts[b] += 1
                    self.partition = self.partition.with_task_counts(counts)
                    power[c], isub[c], iem[c] = task.power, task.i_sub, task.i_em
                    steps = max(1, math.ceil(scale_duration(task, self.freqs[c], nominal) / dt - 1e-9))
                    running[c] = (ti, k + steps, len(decisions), old)
                    decisions.append(MappingDecision(task.id, task.arrival, b, c, r_bin, now))

            if not (nxt < len(tasks) or queue or running):
                break
            self.temps = th.advance(self.temps, power)
            k += 1
            if k % spp == 0:
                i = len(self.trace)
                if i == len(self._isub):
                    self._isub = np.concatenate([self._isub, np.empty_like(self._isub)])
                    self._iem = np.concatenate([self._iem, np.empty_like(self._iem)])
                self.trace.append(k * dt, self.temps)
                self._isub[i], self._iem[i] = isub, iem

        m = len(self.trace)
        report = evaluate_trace(self.trace.as_array(), self.rel, th.sampling_period, self._isub[:m], self._iem[:m])
        final = ThermalState(self.temps, time=k * dt, step_index=k)
        return EpisodeResult(report, decisions, final, self.trace, queued_at_end=len(queue))


def run_episode(
    cfg: SimConfig,
    mapper: Mapper | str,
    seed: int,
    episode: int = 0,
    rng: np.random.Generator | None = None,
    workload: WorkloadTrace | None = None,
) -> EpisodeResult:
    """Simulate the configured workload once under ``mapper``."""
    if isinstance(mapper, str):
        mapper = make_mapper(mapper, cfg.rl_settings())
    sim = Simulation(cfg, workload if workload is not None else build_workload(cfg, seed), build_frequencies(cfg, seed))
    return sim.run(mapper, rng if rng is not None else stream(seed, STREAM_EXPLORE), episode)


@dataclass
class TrainingResult:
    mapper: RLMapper
    curve: list[dict] = field(default_factory=list)

    def curve_csv(self) -> str:
        cols = ["episode", "epsilon", "bin_reward", "core_reward", "combined_mttf_years"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.curve:
            w.writerow([row["episode"]] + [repr(float(row[c])) for c in cols[1:]])
        return buf.getvalue()


def train(cfg: SimConfig, episodes: int | None = None, seed: int | None = None, mapper: str | None = None) -> TrainingResult:
    """Train both Q-tables over repeated passes of the same workload."""
    if (mapper or cfg.run.mapper) != "rl":
        raise ValueError("train requires the rl mapper")
    episodes = cfg.run.episodes if episodes is None else episodes
    if episodes < 0:
        raise ValueError("episodes must be >= 0")
    seed = cfg.run.seeds[0] if seed is None else seed
    rl = RLMapper(cfg.rl_settings())
    sim = Simulation(cfg, build_workload(cfg, seed), build_frequencies(cfg, seed))
    rng = stream(seed, STREAM_EXPLORE)
    result = TrainingResult(rl)
    for ep in range(episodes):
        res = sim.run(rl, rng, ep)
        result.curve.append(
            dict(
                episode=ep,
                epsilon=rl.epsilon,
                bin_reward=res.bin_reward_total,
                core_reward=res.core_reward_total,
                combined_mttf_years=res.report.system_average("combined"),
            )
        )
    return result


def evaluate(cfg: SimConfig, mapper_name: str, seed: int, episodes: int | None = None) -> EpisodeResult:
    """Result of one mapper on one seed; the rl mapper is trained first and then run greedily."""
    if mapper_name == "rl":
        trained = train(cfg, episodes, seed).mapper.freeze()
        return run_episode(cfg, trained, seed)
    return run_episode(cfg, mapper_name, seed)


@dataclass
class ComparisonReport:
    labels: list[str]
    seeds: list[int]
    per_seed: dict[str, list[dict[str, float]]]  # label -> one summary per seed
    final_spread: dict[str, list[float]]
    heatmaps: dict[str, list[float]]  # label -> final temperatures of the first seed

    MECHS = MECHANISMS + ("combined",)

    def mean(self, label: str, mech: str) -> float:
        return float(np.mean([s[mech] for s in self.per_seed[label]]))

    def improvement(self, a: str, b: str, mech: str = "combined") -> float:
        """Relative gain of ``a`` over ``b`` on seed-averaged system MTTF."""
        mb = self.mean(b, mech)
        return (self.mean(a, mech) - mb) / mb

    def table(self) -> dict[str, dict[str, float]]:
        return {lab: {m: self.mean(lab, m) for m in self.MECHS} for lab in self.labels}

    def improvements(self) -> dict[str, dict[str, float]]:
        out = {}
        for a in self.labels:
            for b in self.labels:
                if a != b:
                    out[f"{a}_vs_{b}"] = {m: self.improvement(a, b, m) for m in self.MECHS}
        return out

    def to_json(self) -> str:
        doc = {
            "mappers": self.labels,
            "seeds": self.seeds,
            "mttf_years": self.table(),
            "improvement": self.improvements(),
            "final_spread_K": {k: v for k, v in self.final_spread.items()},
            "per_seed": self.per_seed,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _labels(mappers: Sequence[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for m in mappers:
        seen[m] = seen.get(m, 0) + 1
        out.append(m if seen[m] == 1 else f"{m}#{seen[m]}")
    return out


def compare(
    cfg: SimConfig,
    mappers: Sequence[str] | None = None,
    seeds: Sequence[int] | None = None,
    episodes: int | None = None,
) -> ComparisonReport:
    """Evaluate every mapper on the same seeds (same workloads and PV maps)."""
    mappers = list(cfg.run.mappers if mappers is None else mappers)
    seeds = list(cfg.run.seeds if seeds is None else seeds)
    if len(mappers) < 2:
        raise ValueError("compare needs at least two mappers")
    if not seeds:
        raise ValueError("seed list is empty")
    labels = _labels(mappers)
    per_seed = {lab: [] for lab in labels}
    spread = {lab: [] for lab in labels}
    heat = {}
    for lab, name in zip(labels, mappers):
        for s in seeds:
            res = evaluate(cfg, name, s, episodes)
            per_seed[lab].append({m: res.report.system_average(m) for m in ComparisonReport.MECHS})
            spread[lab].append(res.final_state.spread())
            if s == seeds[0]:
                heat[lab] = [float(x) for x in res.final_state.temps]
    return ComparisonReport(labels, seeds, per_seed, spread, heat)


def emit_heatmap(state: ThermalState | Sequence[float], rows: int, cols: int, path: str | Path) -> Path:
    temps = state.temps if isinstance(state, ThermalState) else state
    if len(temps) != rows * cols:
        raise ValueError(f"{len(temps)} cores do not match a {rows}x{cols} grid")
    path = Path(path)
    path.write_text(heatmap_csv(temps, rows, cols))
    return path


def decisions_csv(decisions: Sequence[MappingDecision]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task_id", "arrival_s", "bin_id", "core_id", "bin_reward", "core_reward", "completion_s", "dispatch_s"])
    for d in decisions:
        nums = (d.bin_reward, d.core_reward, d.completion_time, d.dispatch_time)
        w.writerow([d.task_id, repr(float(d.arrival)), d.bin_id, d.core_id] + [repr(float(x)) for x in nums])
    return buf.getvalue()


def write_episode(res: EpisodeResult, cfg: SimConfig, out_dir: str | Path, tag: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.report.to_csv(out / "mttf_report.csv")
    (out / "decisions.csv").write_text(decisions_csv(res.decisions))
    emit_heatmap(res.final_state, cfg.grid.rows, cfg.grid.cols, out / f"heatmap_{tag}.csv")


def write_comparison(rep: ComparisonReport, cfg: SimConfig, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(rep.to_json() + "\n")
    lines = ["mapper," + ",".join(f"{m}_years" for m in ComparisonReport.MECHS)]
    for lab, row in rep.table().items():
        lines.append(lab + "," + ",".join(repr(float(row[m])) for m in ComparisonReport.MECHS))
    (out / "mttf_report.csv").write_text("\n".join(lines) + "\n")
    for lab, temps in rep.heatmaps.items():
        emit_heatmap(temps, cfg.grid.rows, cfg.grid.cols, out / f"heatmap_{lab.replace('#', '_')}.csv")
