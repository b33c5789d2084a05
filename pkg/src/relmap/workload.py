"""Task streams: synthetic generation, benchmark-named presets and trace files."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

TRACE_HEADER = ("id", "name", "arrival_s", "duration_s", "power_W", "isub_A", "iem_A")


@dataclass(frozen=True)
class TaskSpec:
    id: int
    name: str
    arrival: float  # s
    duration: float  # s at nominal frequency
    power: float  # W
    i_sub: float = 1.0  # A
    i_em: float = 1.0  # A

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"task {self.id}: duration must be > 0")
        if self.power < 0:
            raise ValueError(f"task {self.id}: power must be >= 0")
        if self.arrival < 0:
            raise ValueError(f"task {self.id}: arrival must be >= 0")
        if not self.i_sub > 0:
            raise ValueError(f"task {self.id}: isub must be > 0")
        if not self.i_em > 0:
            raise ValueError(f"task {self.id}: iem must be > 0")


@dataclass(frozen=True)
class WorkloadTrace:
    tasks: tuple[TaskSpec, ...]
    source: str = ""

    def __post_init__(self):
        tasks = tuple(self.tasks)
        ids = [t.id for t in tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("task ids must be unique")
        for a, b in zip(tasks, tasks[1:]):
            if b.arrival < a.arrival:
                raise ValueError(f"arrival times decrease at task {b.id}")
        object.__setattr__(self, "tasks", tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorkloadTrace):
            return NotImplemented
        return self.tasks == other.tasks


def _check_range(name: str, lo: float, hi: float) -> None:
    if not (lo > 0 and hi > 0):
        raise ValueError(f"{name} bounds must be positive")
    if lo > hi:
        raise ValueError(f"{name} bounds inverted: {lo} > {hi}")


def poisson_arrivals(n: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    if not rate > 0:
        raise ValueError("arrival rate must be > 0")
    return np.cumsum(rng.exponential(1.0 / rate, size=n))


def generate_trace(
    n_tasks: int,
    seed: int,
    duration_range: tuple[float, float] = (5.0, 30.0),
    power_range: tuple[float, float] = (1.0, 5.0),
    arrival_rate: float = 0.2,
    isub_range: tuple[float, float] = (0.8, 1.5),
    iem_range: tuple[float, float] = (0.8, 1.5),
) -> WorkloadTrace:
    """Uniform task parameters with Poisson arrivals; deterministic per seed."""
    if n_tasks < 0:
        raise ValueError("n_tasks must be >= 0")
    for name, (lo, hi) in (
        ("duration", duration_range),
        ("power", power_range),
        ("isub", isub_range),
        ("iem", iem_range),
    ):
        _check_range(name, lo, hi)
    rng = np.random.default_rng(seed)
    arrivals = poisson_arrivals(n_tasks, arrival_rate, rng)
    dur = rng.uniform(*duration_range, size=n_tasks)
    pw = rng.uniform(*power_range, size=n_tasks)
    isub = rng.uniform(*isub_range, size=n_tasks)
    iem = rng.uniform(*iem_range, size=n_tasks)
    tasks = tuple(
        TaskSpec(i, "synthetic", float(arrivals[i]), float(dur[i]), float(pw[i]), float(isub[i]), float(iem[i]))
        for i in range(n_tasks)
    )
    return WorkloadTrace(tasks, source=f"synthetic:seed={seed}")


def save_trace(trace: WorkloadTrace, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t in trace:
        w.writerow([t.id, t.name] + [repr(float(x)) for x in (t.arrival, t.duration, t.power, t.i_sub, t.i_em)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


_FIELD_FOR_COLUMN = dict(zip(TRACE_HEADER, ("id", "name", "arrival", "duration", "power", "i_sub", "i_em")))


def parse_trace(text: str, source: str = "<string>") -> WorkloadTrace:
    lines = text.splitlines()
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != TRACE_HEADER:
        raise ValueError(f"{source}:1: expected header {','.join(TRACE_HEADER)}")
    tasks = []
    prev_arrival = None
    ids = set()
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        if len(row) != len(TRACE_HEADER):
            raise ValueError(f"{source}:{lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
        try:
            tid = int(row[0])
            nums = [float(x) for x in row[2:]]
        except ValueError:
            raise ValueError(f"{source}:{lineno}: cannot parse numeric field") from None
        vals = dict(zip(TRACE_HEADER[2:], nums))
        for col, bad in (
            ("arrival_s", vals["arrival_s"] < 0),
            ("duration_s", not vals["duration_s"] > 0),
            ("power_W", vals["power_W"] < 0),
            ("isub_A", not vals["isub_A"] > 0),
            ("iem_A", not vals["iem_A"] > 0),
        ):
            if bad:
                raise ValueError(f"{source}:{lineno}: invalid {col} {vals[col]}")
        if tid in ids:
            raise ValueError(f"{source}:{lineno}: duplicate id {tid}")
        if prev_arrival is not None and vals["arrival_s"] < prev_arrival:
            raise ValueError(f"{source}:{lineno}: arrival_s decreases")
        ids.add(tid)
        prev_arrival = vals["arrival_s"]
        tasks.append(TaskSpec(tid, row[1].strip(), *nums))
    return WorkloadTrace(tuple(tasks), source=source)


def load_trace(path: str | Path) -> WorkloadTrace:
    return parse_trace(Path(path).read_text(), source=str(path))


def scale_duration(task: TaskSpec, frequency: float, nominal_frequency: float) -> float:
    """Execution time on a core at ``frequency`` (linear slowdown)."""
    if not (frequency > 0 and nominal_frequency > 0):
        raise ValueError("frequencies must be positive")
    return task.duration * nominal_frequency / frequency


# ---------------------------------------------------------------------------
# benchmark-named presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskProfile:
    name: str
    suite: str
    duration: float
    power: float
    i_sub: float
    i_em: float


def load_presets(path: str | Path | None = None) -> list[TaskProfile]:
    """Read task profiles; defaults to the bundled SPLASH2/PARSEC-named set."""
    if path is None:
        text = resources.files("relmap").joinpath("data/presets.csv").read_text()
    else:
        text = Path(path).read_text()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    out = []
    for row in list(csv.reader(rows))[1:]:
        name, suite, dur, pw, isub, iem = (c.strip() for c in row)
        out.append(TaskProfile(name, suite, float(dur), float(pw), float(isub), float(iem)))
    return out


def preset_trace(
    repeats: int,
    seed: int,
    arrival_rate: float,
    profiles: Sequence[TaskProfile] | None = None,
) -> WorkloadTrace:
    """Each profile ``repeats`` times, shuffled, with Poisson arrivals."""
    if repeats < 0:
        raise ValueError("repeats must be >= 0")
    profiles = list(profiles) if profiles is not None else load_presets()
    rng = np.random.default_rng(seed)
    pool = [p for _ in range(repeats) for p in profiles]
    order = rng.permutation(len(pool))
    arrivals = poisson_arrivals(len(pool), arrival_rate, rng)
    tasks = tuple(
        TaskSpec(i, pool[j].name, float(arrivals[i]), pool[j].duration, pool[j].power, pool[j].i_sub, pool[j].i_em)
        for i, j in enumerate(order)
    )
    return WorkloadTrace(tasks, source=f"presets:repeats={repeats}:seed={seed}")

