"""Two-level task mapping: Q-learning bin selection, then Q-learning core selection.

Baselines (uniform random, greedy on thermal-cycling MTTF) share the same
interface.  They are simplified stand-ins, not reimplementations of any
published method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import BinPartition
from .rlcore import ActionSet, EpsilonSchedule, QTable, State, discretize, q_update, select_action
from .workload import TaskSpec

REWARD_VERBATIM = "verbatim"
REWARD_INVERTED = "inverted"


@dataclass
class MappingDecision:
    task_id: int
    arrival: float
    bin_id: int
    core_id: int
    bin_reward: float
    dispatch_time: float
    core_reward: float = math.nan  # filled in on completion
    completion_time: float = math.nan


@dataclass(frozen=True)
class RLSettings:
    beta_k: float = 0.72
    gamma: float = 0.28
    default_q: float = 0.0
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    temp_width: float = 2.0  # K per bucket
    count_cap: int = 16
    mttf_width: float = 0.5  # years per bucket
    mttf_cap: int = 40  # buckets
    reward_variant: str = REWARD_VERBATIM
    dt_floor: float = 0.1  # K

    def __post_init__(self):
        if self.reward_variant not in (REWARD_VERBATIM, REWARD_INVERTED):
            raise ValueError(f"unknown reward_variant {self.reward_variant!r}")
        if not self.dt_floor > 0:
            raise ValueError("dt_floor must be > 0")
        if self.count_cap < 1 or self.mttf_cap < 1:
            raise ValueError("caps must be >= 1")

    def new_table(self, level: str) -> QTable:
        meta = {"level": level, "temp_width": repr(self.temp_width), "count_cap": str(self.count_cap)}
        if level == "core":
            meta.update(mttf_width=repr(self.mttf_width), mttf_cap=str(self.mttf_cap))
        return QTable(self.beta_k, self.gamma, self.default_q, meta)


@dataclass
class MapContext:
    """What a mapper may observe at decision time."""

    time: float
    temps: np.ndarray
    busy: np.ndarray  # bool per core
    partition: BinPartition
    mttf: np.ndarray  # combined lifetime snapshot per core, years (capped)
    mttf_tc: np.ndarray  # thermal-cycling lifetime snapshot per core, years (capped)
    r_v: float
    ambient: float

    def free_cores(self, cores: Sequence[int] | None = None) -> list[int]:
        ids = range(len(self.busy)) if cores is None else cores
        return [c for c in ids if not self.busy[c]]


# ---------------------------------------------------------------------------
# states and rewards
# ---------------------------------------------------------------------------


def bin_level_state(partition: BinPartition, settings: RLSettings) -> State:
    """Per bin: average-temperature bucket, mapped-task count, core count."""
    feats, widths, caps = [], [], []
    for avg, n_tasks, members in zip(partition.averages, partition.task_counts, partition.bins):
        feats += [avg, n_tasks, len(members)]
        widths += [settings.temp_width, 1, 1]
        caps += [None, settings.count_cap, settings.count_cap]
    return discretize(feats, widths, caps)


def core_level_state(cores: Sequence[int], mttf: np.ndarray, busy: np.ndarray, settings: RLSettings) -> State:
    """Per core of the bin: combined-MTTF bucket and busy flag."""
    feats, widths, caps = [], [], []
    for c in cores:
        feats += [float(mttf[c]), int(bool(busy[c]))]
        widths += [settings.mttf_width, 1]
        caps += [settings.mttf_cap, 1]
    return discretize(feats, widths, caps)


def predicted_delta_t(members: Sequence[int], temps: np.ndarray, busy: np.ndarray, power: float, r_v: float) -> float:
    """Change in bin spread if the task's steady-state rise lands on the coolest free member."""
    members = list(members)
    t = temps[members]
    free = [i for i, c in enumerate(members) if not busy[c]]
    if not free:
        raise ValueError("bin has no free core")
    target = min(free, key=lambda i: (t[i], members[i]))
    before = float(t.max() - t.min())
    after_t = t.copy()
    after_t[target] += r_v * power
    after = float(after_t.max() - after_t.min())
    return abs(after - before)


def bin_reward(t_bin: float, delta_t: float, settings: RLSettings, t_norm: float = 1.0) -> float:
    """Temperature of the chosen bin over the spread change it causes.

    The inverted variant rewards cool bins: ``1 / ((t_bin / t_norm) * dT)``.
    """
    dt = max(delta_t, settings.dt_floor)
    if settings.reward_variant == REWARD_INVERTED:
        return float(1.0 / ((t_bin / t_norm) * dt))
    return float(t_bin / dt)


def core_reward(mttf_old: float, mttf_new: float) -> float:
    """Relative lifetime change of the core that ran the task."""
    if not mttf_old > 0:
        raise ValueError("previous MTTF must be positive")
    return float((mttf_new - mttf_old) / mttf_old)


# ---------------------------------------------------------------------------
# decisions
# ---------------------------------------------------------------------------


def bins_with_free_core(partition: BinPartition) -> ActionSet:
    acts = [b for b, (n, m) in enumerate(zip(partition.task_counts, partition.bins)) if n < len(m)]
    return ActionSet(tuple(acts))


def _after_dispatch(partition: BinPartition, b: int) -> BinPartition:
    counts = list(partition.task_counts)
    counts[b] += 1
    return partition.with_task_counts(counts)


def select_bin(
    task: TaskSpec,
    ctx: MapContext,
    table: QTable,
    settings: RLSettings,
    epsilon: float,
    rng: np.random.Generator,
    learn: bool = True,
) -> tuple[int, float] | None:
    """Pick a bin for ``task`` and apply the immediate Q-update.

    Returns ``None`` when no bin has a free core (the task stays queued).
    """
    part = ctx.partition
    actions = bins_with_free_core(part)
    if not len(actions):
        return None
    s = bin_level_state(part, settings)
    b = select_action(table, s, actions, epsilon, rng)
    members = part.bins[b]
    dT = predicted_delta_t(members, ctx.temps, ctx.busy, task.power, ctx.r_v)
    r = bin_reward(part.averages[b], dT, settings, ctx.ambient)
    if learn:
        nxt = _after_dispatch(part, b)
        q_update(table, s, b, r, bin_level_state(nxt, settings), bins_with_free_core(nxt))
    return b, r


def select_core(
    cores: Sequence[int],
    ctx: MapContext,
    table: QTable,
    settings: RLSettings,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[int, State]:
    """Pick a free core of the bin; the reward arrives when the task completes."""
    free = ctx.free_cores(cores)
    if not free:
        raise ValueError("selected bin has no free core")
    s = core_level_state(cores, ctx.mttf, ctx.busy, settings)
    return select_action(table, s, ActionSet(tuple(free)), epsilon, rng), s


def map_random(cores: Sequence[int], busy: np.ndarray, rng: np.random.Generator) -> int:
    free = [c for c in cores if not busy[c]]
    if not free:
        raise ValueError("no free core")
    return free[int(rng.integers(len(free)))]


def map_tc_greedy(cores: Sequence[int], busy: np.ndarray, mttf_tc: np.ndarray) -> int:
    """Free core with the largest thermal-cycling lifetime; lowest id on ties."""
    free = [c for c in cores if not busy[c]]
    if not free:
        raise ValueError("no free core")
    return min(free, key=lambda c: (-mttf_tc[c], c))


# ---------------------------------------------------------------------------
# mapper objects driven by the simulation loop
# ---------------------------------------------------------------------------


class Mapper:
    name = "base"

    def begin_episode(self, episode: int, rng: np.random.Generator) -> None:
        self.rng = rng

    def assign(self, task: TaskSpec, ctx: MapContext) -> tuple[int, int, float] | None:
        raise NotImplementedError

    def complete(self, task_id: int, ctx: MapContext, reward: float) -> None:
        pass


class RandomMapper(Mapper):
    name = "random"

    def assign(self, task, ctx):
        if not ctx.free_cores():
            return None
        core = map_random(range(len(ctx.busy)), ctx.busy, self.rng)
        return ctx.partition.bin_of(core), core, math.nan


class TCGreedyMapper(Mapper):
    name = "tc_greedy"

    def assign(self, task, ctx):
        if not ctx.free_cores():
            return None
        core = map_tc_greedy(range(len(ctx.busy)), ctx.busy, ctx.mttf_tc)
        return ctx.partition.bin_of(core), core, math.nan


class RLMapper(Mapper):
    """Bin-level and core-level Q-tables with a delayed core-level update."""

    name = "rl"

    def __init__(self, settings: RLSettings | None = None, bin_table: QTable | None = None, core_table: QTable | None = None):
        self.settings = settings or RLSettings()
        self.bin_table = bin_table or self.settings.new_table("bin")
        self.core_table = core_table or self.settings.new_table("core")
        self.epsilon = self.settings.schedule(0)
        self.learning = True
        self._pending: dict[int, tuple[State, int, tuple[int, ...]]] = {}

    def begin_episode(self, episode, rng):
        super().begin_episode(episode, rng)
        self._pending.clear()
        if self.learning:
            self.epsilon = self.settings.schedule(episode)

    @classmethod
    def from_tables(cls, settings: RLSettings, bin_table: QTable, core_table: QTable) -> "RLMapper":
        """Greedy mapper from saved tables; their discretisation must match ``settings``."""
        for level, table in (("bin", bin_table), ("core", core_table)):
            want = settings.new_table(level).meta
            for key, val in want.items():
                if table.meta.get(key) != val:
                    raise ValueError(
                        f"{level} q-table was built with rl.{key}={table.meta.get(key)}, config has {val}"
                    )
        return cls(settings, bin_table, core_table).freeze()

    def freeze(self) -> "RLMapper":
        """Greedy, non-learning copy of this mapper."""
        m = RLMapper(self.settings, self.bin_table.copy(), self.core_table.copy())
        m.learning = False
        m.epsilon = 0.0
        return m

    def assign(self, task, ctx):
        picked = select_bin(task, ctx, self.bin_table, self.settings, self.epsilon, self.rng, self.learning)
        if picked is None:
            return None
        b, r = picked
        members = ctx.partition.bins[b]
        core, s = select_core(members, ctx, self.core_table, self.settings, self.epsilon, self.rng)
        self._pending[task.id] = (s, core, members)
        return b, core, r

    def complete(self, task_id, ctx, reward):
        s, core, members = self._pending.pop(task_id)
        if not self.learning:
            return
        s_next = core_level_state(members, ctx.mttf, ctx.busy, self.settings)
        q_update(self.core_table, s, core, reward, s_next, ActionSet(tuple(ctx.free_cores(members))))


def make_mapper(name: str, settings: RLSettings | None = None) -> Mapper:
    if name == "rl":
        return RLMapper(settings)
    if name == "random":
        return RandomMapper()
    if name == "tc_greedy":
        return TCGreedyMapper()
    raise ValueError(f"unknown mapper {name!r}; expected rl, random or tc_greedy")
