"""Lumped-RC thermal model of a grid of cores.

Each core is one thermal node with a vertical resistance to ambient and a
lateral conductance to its 4-neighbours.  Integration is explicit Euler::

    C dT_i/dt = P_i - (T_i - T_amb)/R_v - sum_j g_l (T_i - T_j)

All temperatures are kelvin.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

KELVIN = 273.15


def celsius_to_kelvin(t_c: float) -> float:
    return t_c + KELVIN


@dataclass(frozen=True)
class ThermalConfig:
    rows: int
    cols: int
    ambient: float = 318.15
    r_v: float = 3.0  # K/W
    g_l: float = 0.15  # W/K
    capacitance: float = 3.0  # J/K
    dt: float = 1.0  # s
    sampling_period: float = 1.0  # s
    idle_power: float = 0.3  # W

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("core grid dimensions must be positive")
        if not self.r_v > 0:
            raise ValueError("r_v must be > 0")
        if self.g_l < 0:
            raise ValueError("g_l must be >= 0")
        if not self.capacitance > 0:
            raise ValueError("capacitance must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        bound = self.capacitance / (1.0 / self.r_v + 4.0 * self.g_l)
        if not self.dt < bound:
            raise ValueError(f"dt={self.dt} violates explicit-Euler stability bound dt < {bound:.6g}")
        ratio = self.sampling_period / self.dt
        if self.sampling_period <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sampling_period must be a positive multiple of dt")
        if self.idle_power < 0:
            raise ValueError("idle_power must be >= 0")

    @classmethod
    def from_celsius(cls, rows: int, cols: int, ambient_c: float, **kw) -> "ThermalConfig":
        return cls(rows, cols, ambient=celsius_to_kelvin(ambient_c), **kw)

    @property
    def n_cores(self) -> int:
        return self.rows * self.cols

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sampling_period / self.dt))

    @cached_property
    def laplacian(self) -> np.ndarray:
        n = self.n_cores
        lap = np.zeros((n, n))
        for r in range(self.rows):
            for c in range(self.cols):
                i = r * self.cols + c
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < self.rows and 0 <= cc < self.cols:
                        j = rr * self.cols + cc
                        lap[i, i] += 1.0
                        lap[i, j] -= 1.0
        return lap

    @cached_property
    def _conductance(self) -> np.ndarray:
        return np.eye(self.n_cores) / self.r_v + self.g_l * self.laplacian

    @cached_property
    def _update(self) -> np.ndarray:
        # T_next = A @ T + (dt/C) * (P + T_amb / R_v)
        return np.eye(self.n_cores) - (self.dt / self.capacitance) * self._conductance

    def steady_state(self, power: Sequence[float]) -> np.ndarray:
        """Equilibrium temperatures for a constant power vector."""
        p = np.asarray(power, dtype=float)
        return self.ambient + np.linalg.solve(self._conductance, p)

    def advance(self, temps: np.ndarray, power: np.ndarray) -> np.ndarray:
        """One unchecked Euler step on raw arrays (hot loop)."""
        k = self.dt / self.capacitance
        return self._update @ temps + k * (power + self.ambient / self.r_v)


@dataclass(frozen=True)
class ThermalState:
    temps: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        t = np.array(self.temps, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "temps", t)

    @classmethod
    def at_ambient(cls, cfg: ThermalConfig) -> "ThermalState":
        return cls(np.full(cfg.n_cores, cfg.ambient))

    @classmethod
    def idle(cls, cfg: ThermalConfig) -> "ThermalState":
        """Equilibrium with every core drawing only idle power."""
        return cls(cfg.steady_state(np.full(cfg.n_cores, cfg.idle_power)))

    @property
    def n_cores(self) -> int:
        return len(self.temps)

    def spread(self) -> float:
        return float(self.temps.max() - self.temps.min())


def _check_power(power: Sequence[float], n: int) -> np.ndarray:
    p = np.asarray(power, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"expected {n} power values, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("per-core power must be finite and non-negative")
    return p


def step(state: ThermalState, per_core_power: Sequence[float], cfg: ThermalConfig) -> ThermalState:
    """Advance ``state`` by one timestep ``cfg.dt``."""
    if state.n_cores != cfg.n_cores:
        raise ValueError(f"state has {state.n_cores} cores, config has {cfg.n_cores}")
    p = _check_power(per_core_power, cfg.n_cores)
    k = state.step_index + 1
    return ThermalState(cfg.advance(state.temps, p), time=k * cfg.dt, step_index=k)


class TemperatureTrace:
    """Uniformly sampled per-core temperature history.

    Backed by a growable array so per-core histories can be read without
    copying while a simulation is still appending.
    """

    def __init__(self, n_cores: int, sampling_period: float, capacity: int = 256):
        if n_cores < 1:
            raise ValueError("n_cores must be positive")
        if not sampling_period > 0:
            raise ValueError("sampling_period must be > 0")
        self.n_cores = n_cores
        self.sampling_period = float(sampling_period)
        self._t = np.empty(max(capacity, 1))
        self._v = np.empty((max(capacity, 1), n_cores))
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemperatureTrace):
            return NotImplemented
        return (
            self.n_cores == other.n_cores
            and self.sampling_period == other.sampling_period
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.as_array(), other.as_array())
        )

    @property
    def times(self) -> np.ndarray:
        return self._t[: self._n]

    def as_array(self) -> np.ndarray:
        """Samples as a ``(n_samples, n_cores)`` array (a view)."""
        return self._v[: self._n]

    def core(self, i: int) -> np.ndarray:
        return self._v[: self._n, i]

    def append(self, time: float, temps: np.ndarray) -> None:
        if self._n == len(self._t):
            self._t = np.concatenate([self._t, np.empty_like(self._t)])
            self._v = np.concatenate([self._v, np.empty_like(self._v)])
        self._t[self._n] = time
        self._v[self._n] = temps
        self._n += 1

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s"] + [f"core_{i}_K" for i in range(self.n_cores)])
        for t, row in zip(self.times, self.as_array()):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def record(trace: TemperatureTrace, state: ThermalState) -> TemperatureTrace:
    """Append one sample per core; the spacing must equal the sampling period."""
    if state.n_cores != trace.n_cores:
        raise ValueError("state and trace core counts differ")
    if len(trace):
        expected = trace.times[-1] + trace.sampling_period
        if abs(state.time - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError(
                f"sample at t={state.time} is out of order; expected t={expected}"
            )
    trace.append(float(state.time), state.temps)
    return trace


def bin_average_temperature(core_ids: Iterable[int], state: ThermalState | np.ndarray) -> float:
    ids = list(core_ids)
    if not ids:
        raise ValueError("bin is empty")
    temps = state.temps if isinstance(state, ThermalState) else np.asarray(state)
    return float(np.mean(temps[ids]))


def heatmap_csv(temps: Sequence[float], rows: int, cols: int) -> str:
    """Row-major kelvin grid, one CSV line per core row."""
    t = np.asarray(temps, dtype=float)
    if t.size != rows * cols:
        raise ValueError(f"{t.size} temperatures do not fill a {rows}x{cols} grid")
    grid = t.reshape(rows, cols)
    return "".join(",".join(f"{v:.10g}" for v in row) + "\n" for row in grid)
