"""Simulation configuration: nested sections loaded from TOML."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .clustering import DEFAULT_EPSILON, DEFAULT_MIN_PTS
from .mapper import REWARD_INVERTED, REWARD_VERBATIM, RLSettings
from .reliability import AgingParams, ReliabilityParams, TCParams
from .rlcore import EpsilonSchedule
from .thermal import ThermalConfig, celsius_to_kelvin


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class GridSection:
    rows: int = 4
    cols: int = 4
    pv_cells_per_core: int = 2  # PV grid resolution along each tile side
    correlation_length: float = 2.0  # cells
    p_min: float = 0.7
    kappa1: float = 50.0
    kappa2: float = 100.0
    gamma_res: float = 2.0
    beta_f: float = 4.0e9  # Hz; also the nominal frequency for task durations


@dataclass(frozen=True)
class ThermalSection:
    ambient: float = 318.15  # K
    ambient_c: float | None = None  # overrides ambient when set
    r_v: float = 3.0
    g_l: float = 0.15
    capacitance: float = 3.0
    dt: float = 1.0
    sampling_period: float = 1.0
    idle_power: float = 0.3


@dataclass(frozen=True)
class ReliabilitySection:
    ea_tc: float = 0.42
    b: float = 2.35
    t_th: float = 1.0
    k: float = 8.62e-5
    q_hci: float = 0.25
    n_hci: float = 3.0
    q_em: float = 0.9
    n_em: float = 1.1
    nbti_a: float = 1.6328
    nbti_b: float = 0.07377
    nbti_c: float = 0.01
    nbti_d: float = 0.06852
    nbti_beta: float = 0.3
    width: float = 1.0
    ref_temp: float = 318.0
    nominal_years: float = 7.0
    tc_ref_amplitude: float = 8.0
    tc_ref_period: float = 60.0
    cap_years: float = 20.0
    idle_isub: float = 0.6  # A drawn by an idle core
    idle_iem: float = 0.6


@dataclass(frozen=True)
class ClusteringSection:
    epsilon: float = DEFAULT_EPSILON
    min_pts: int = DEFAULT_MIN_PTS


@dataclass(frozen=True)
class RLSection:
    beta_k: float = 0.72
    gamma: float = 0.28
    default_q: float = 0.0
    eps_start: float = 0.9
    eps_decay: float = 0.995
    eps_floor: float = 0.05
    temp_width: float = 2.0
    count_cap: int = 16
    mttf_width: float = 0.5
    mttf_cap: int = 40
    reward_variant: str = REWARD_VERBATIM
    dt_floor: float = 0.1


@dataclass(frozen=True)
class WorkloadSection:
    source: str = "presets"  # presets | synthetic | path to a trace CSV
    repeats: int = 10
    n_tasks: int = 100
    arrival_rate: float = 0.25  # tasks per second
    duration_min: float = 5.0
    duration_max: float = 30.0
    power_min: float = 4.0
    power_max: float = 10.0


@dataclass(frozen=True)
class RunSection:
    mapper: str = "rl"
    episodes: int = 100
    seeds: tuple[int, ...] = (0,)
    mappers: tuple[str, ...] = ("rl", "random", "tc_greedy")


@dataclass(frozen=True)
class SimConfig:
    grid: GridSection = field(default_factory=GridSection)
    thermal: ThermalSection = field(default_factory=ThermalSection)
    reliability: ReliabilitySection = field(default_factory=ReliabilitySection)
    clustering: ClusteringSection = field(default_factory=ClusteringSection)
    rl: RLSection = field(default_factory=RLSection)
    workload: WorkloadSection = field(default_factory=WorkloadSection)
    run: RunSection = field(default_factory=RunSection)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        self.validate()

    # -- derived module parameters -------------------------------------

    def thermal_config(self) -> ThermalConfig:
        th = self.thermal
        amb = celsius_to_kelvin(th.ambient_c) if th.ambient_c is not None else th.ambient
        return ThermalConfig(
            self.grid.rows,
            self.grid.cols,
            ambient=amb,
            r_v=th.r_v,
            g_l=th.g_l,
            capacitance=th.capacitance,
            dt=th.dt,
            sampling_period=th.sampling_period,
            idle_power=th.idle_power,
        )

    def reliability_params(self) -> ReliabilityParams:
        r = self.reliability
        tc = TCParams(
            b=r.b,
            t_th=r.t_th,
            ea_tc=r.ea_tc,
            k=r.k,
            ref_temp=r.ref_temp,
            ref_amplitude=r.tc_ref_amplitude,
            ref_period=r.tc_ref_period,
            nominal_years=r.nominal_years,
        )
        aging = AgingParams(
            k=r.k,
            nbti_a=r.nbti_a,
            nbti_b=r.nbti_b,
            nbti_c=r.nbti_c,
            nbti_d=r.nbti_d,
            nbti_beta=r.nbti_beta,
            q_hci=r.q_hci,
            n_hci=r.n_hci,
            width=r.width,
            q_em=r.q_em,
            n_em=r.n_em,
            ref_temp=r.ref_temp,
            nominal_years=r.nominal_years,
        )
        return ReliabilityParams(tc, aging, r.cap_years)

    def rl_settings(self) -> RLSettings:
        r = self.rl
        return RLSettings(
            beta_k=r.beta_k,
            gamma=r.gamma,
            default_q=r.default_q,
            schedule=EpsilonSchedule(r.eps_start, r.eps_decay, r.eps_floor),
            temp_width=r.temp_width,
            count_cap=r.count_cap,
            mttf_width=r.mttf_width,
            mttf_cap=r.mttf_cap,
            reward_variant=r.reward_variant,
            dt_floor=r.dt_floor,
        )

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        g = self.grid
        if g.rows < 1:
            raise ConfigError("grid.rows", "must be >= 1")
        if g.cols < 1:
            raise ConfigError("grid.cols", "must be >= 1")
        if g.pv_cells_per_core < 1:
            raise ConfigError("grid.pv_cells_per_core", "must be >= 1")
        if g.correlation_length < 0:
            raise ConfigError("grid.correlation_length", "must be >= 0")
        if not 0 < g.p_min < 1:
            raise ConfigError("grid.p_min", "must lie in (0, 1)")
        for name in ("kappa1", "kappa2", "gamma_res", "beta_f"):
            if not getattr(g, name) > 0:
                raise ConfigError(f"grid.{name}", "must be > 0")
        self._wrap("thermal", self.thermal_config)
        self._wrap("reliability", self.reliability_params)
        if self.reliability.idle_isub <= 0:
            raise ConfigError("reliability.idle_isub", "must be > 0")
        if self.reliability.idle_iem <= 0:
            raise ConfigError("reliability.idle_iem", "must be > 0")
        if not self.clustering.epsilon > 0:
            raise ConfigError("clustering.epsilon", "must be > 0")
        if self.clustering.min_pts < 1:
            raise ConfigError("clustering.min_pts", "must be >= 1")
        if self.rl.reward_variant not in (REWARD_VERBATIM, REWARD_INVERTED):
            raise ConfigError("rl.reward_variant", f"must be {REWARD_VERBATIM!r} or {REWARD_INVERTED!r}")
        self._wrap("rl", self.rl_settings)
        w = self.workload
        if w.arrival_rate <= 0:
            raise ConfigError("workload.arrival_rate", "must be > 0")
        if w.repeats < 0:
            raise ConfigError("workload.repeats", "must be >= 0")
        if w.n_tasks < 0:
            raise ConfigError("workload.n_tasks", "must be >= 0")
        if not 0 < w.duration_min <= w.duration_max:
            raise ConfigError("workload.duration_min", "need 0 < duration_min <= duration_max")
        if not 0 < w.power_min <= w.power_max:
            raise ConfigError("workload.power_min", "need 0 < power_min <= power_max")
        if w.source not in ("presets", "synthetic") and not self.resolve(w.source).is_file():
            raise ConfigError("workload.source", f"trace file {w.source!r} not found")
        if self.run.mapper not in ("rl", "random", "tc_greedy"):
            raise ConfigError("run.mapper", f"unknown mapper {self.run.mapper!r}")
        for m in self.run.mappers:
            if m not in ("rl", "random", "tc_greedy"):
                raise ConfigError("run.mappers", f"unknown mapper {m!r}")
        if self.run.episodes < 0:
            raise ConfigError("run.episodes", "must be >= 0")
        if not self.run.seeds:
            raise ConfigError("run.seeds", "at least one seed required")

    def _wrap(self, section: str, build) -> None:
        try:
            build()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(self._field_from_message(section, str(exc)), str(exc)) from None

    def _field_from_message(self, section: str, msg: str) -> str:
        """Best guess at the config key an error from a module constructor refers to."""
        m = re.match(r"(?:\w+\.)?(\w+)", msg)
        names = {f.name for f in dataclasses.fields(getattr(self, section))}
        if m:
            for cand in (m.group(1), f"tc_{m.group(1)}", f"eps_{m.group(1)}"):
                if cand in names:
                    return f"{section}.{cand}"
        return section

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    # -- (de)serialisation -------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "base_dir":
                continue
            sec = dataclasses.asdict(getattr(self, f.name))
            out[f.name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    def replace(self, **sections: dict[str, Any]) -> "SimConfig":
        """Copy with some keys of some sections overridden."""
        return from_dict(_merge(self.to_dict(), sections), base_dir=self.base_dir)


_SECTIONS = {
    "grid": GridSection,
    "thermal": ThermalSection,
    "reliability": ReliabilitySection,
    "clustering": ClusteringSection,
    "rl": RLSection,
    "workload": WorkloadSection,
    "run": RunSection,
}


def _merge(base: dict, over: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for sec, vals in over.items():
        out.setdefault(sec, {}).update(vals)
    return out


def from_dict(data: dict[str, Any], base_dir: str | Path = ".") -> SimConfig:
    sections = {}
    for name, raw in data.items():
        if name not in _SECTIONS:
            raise ConfigError(name, "unknown section")
        if not isinstance(raw, dict):
            raise ConfigError(name, "must be a table")
        cls = _SECTIONS[name]
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, val in raw.items():
            if key not in known:
                raise ConfigError(f"{name}.{key}", "unknown key")
            default = known[key].default
            if isinstance(default, tuple):
                if not isinstance(val, (list, tuple)):
                    raise ConfigError(f"{name}.{key}", "must be a list")
                val = tuple(val)
            elif isinstance(default, bool) or default is None:
                pass
            elif isinstance(default, int) and not isinstance(val, bool):
                if not isinstance(val, int):
                    raise ConfigError(f"{name}.{key}", f"must be an integer, got {val!r}")
            elif isinstance(default, float):
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ConfigError(f"{name}.{key}", f"must be a number, got {val!r}")
                val = float(val)
            elif isinstance(default, str) and not isinstance(val, str):
                raise ConfigError(f"{name}.{key}", f"must be a string, got {val!r}")
            kwargs[key] = val
        sections[name] = cls(**kwargs)
    return SimConfig(**sections, base_dir=str(base_dir))


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML parse error: {exc}") from None
    return from_dict(data, base_dir=path.parent)


def bundled_config(name: str) -> SimConfig:
    """Load a config shipped in the package data directory (e.g. ``fixture16``)."""
    text = resources.files("relmap").joinpath(f"data/{name}.toml").read_text()
    return from_dict(tomllib.loads(text))
