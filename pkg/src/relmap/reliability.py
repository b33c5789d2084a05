"""Lifetime models: thermal cycling, NBTI, HCI and electromigration.

Thermal cycles are extracted with Downing's rainflow algorithm and turned
into a lifetime through Coffin-Manson cycles-to-failure and Miner's rule.
The three steady-state mechanisms are Arrhenius-type proportionalities; each
gets a scale constant calibrated so that a core held at a reference
temperature lives a nominal number of years.

Symbol note: the NBTI exponent is ``nbti_beta`` to keep it apart from the
per-core frequency constant and the Q-learning rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

BOLTZMANN_EV = 8.62e-5  # eV/K
SECONDS_PER_YEAR = 365.25 * 24 * 3600.0
MECHANISMS = ("tc", "nbti", "hci", "em")


class ModelDomainError(ValueError):
    """A lifetime model was evaluated outside the region where it is defined."""


@dataclass(frozen=True)
class ThermalCycle:
    amplitude: float  # K, peak-to-valley range
    t_max: float  # K
    duration: float  # s
    weight: float = 1.0  # 1.0 full cycle, 0.5 half cycle

    @property
    def t_min(self) -> float:
        return self.t_max - self.amplitude


# ---------------------------------------------------------------------------
# rainflow
# ---------------------------------------------------------------------------


def reversals(values: Sequence[float], times: Sequence[float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Peaks and valleys of a series, endpoints included.

    Runs of equal values collapse to their first sample.
    """
    v = np.asarray(values, dtype=float)
    t = np.arange(len(v), dtype=float) if times is None else np.asarray(times, dtype=float)
    if len(v) == 0:
        return v, t
    keep = np.ones(len(v), dtype=bool)
    keep[1:] = v[1:] != v[:-1]
    v, t = v[keep], t[keep]
    if len(v) < 3:
        return v, t
    s = np.sign(np.diff(v))
    turn = np.flatnonzero(s[1:] != s[:-1]) + 1
    idx = np.concatenate(([0], turn, [len(v) - 1]))
    return v[idx], t[idx]


def rainflow_ranges(
    samples: Sequence[float],
    sampling_period: float = 1.0,
    times: Sequence[float] | None = None,
) -> np.ndarray:
    """Counted ranges as rows ``(amplitude, t_max, duration, weight)``.

    Downing's simple rainflow count: ranges closed inside the history are
    full cycles; ranges involving the moving starting point, and whatever
    remains at the end, are half cycles.  A full cycle lasts twice the time
    between its two reversals.
    """
    if len(samples) < 2:
        raise ValueError("rainflow needs at least 2 samples")
    if times is None:
        times = np.arange(len(samples)) * float(sampling_period)
    rv, rt = reversals(samples, times)
    vals, ts = rv.tolist(), rt.tolist()

    out: list[tuple[int, int, float]] = []  # (index a, index b, weight)
    stack: list[int] = []
    for i in range(len(vals)):
        stack.append(i)
        while len(stack) >= 3:
            z, y, x = vals[stack[-3]], vals[stack[-2]], vals[stack[-1]]
            if abs(x - y) < abs(y - z):
                break
            if len(stack) == 3:
                # range Y holds the starting point
                out.append((stack[0], stack[1], 0.5))
                stack.pop(0)
            else:
                out.append((stack[-3], stack[-2], 1.0))
                del stack[-3:-1]
    out.extend((a, b, 0.5) for a, b in zip(stack, stack[1:]))
    if not out:
        return np.empty((0, 4))
    ia, ib, w = (np.array(c) for c in zip(*out))
    v, t = np.asarray(vals), np.asarray(ts)
    dur = np.abs(t[ib] - t[ia]) * np.where(w == 1.0, 2.0, 1.0)
    return np.column_stack([np.abs(v[ib] - v[ia]), np.maximum(v[ia], v[ib]), dur, w])


def rainflow(
    samples: Sequence[float],
    sampling_period: float = 1.0,
    times: Sequence[float] | None = None,
) -> list[ThermalCycle]:
    """Downing's rainflow count as a list of :class:`ThermalCycle`."""
    return [ThermalCycle(*row) for row in rainflow_ranges(samples, sampling_period, times).tolist()]


# ---------------------------------------------------------------------------
# thermal cycling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TCParams:
    """Coffin-Manson constants.

    ``a_tc=None`` calibrates the scale so that a reference cycle of
    ``ref_amplitude`` K peaking at ``ref_temp + ref_amplitude`` and repeating
    every ``ref_period`` seconds gives ``nominal_years``.
    """

    a_tc: float | None = None
    b: float = 2.35
    t_th: float = 1.0  # K; amplitude threshold
    ea_tc: float = 0.42  # eV
    k: float = BOLTZMANN_EV
    ref_temp: float = 318.0
    ref_amplitude: float = 20.0
    ref_period: float = 60.0
    nominal_years: float = 7.0

    def __post_init__(self):
        for name in ("b", "t_th", "ea_tc", "k", "ref_period", "nominal_years"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TCParams.{name} must be strictly positive")
        if self.a_tc is None:
            if not self.ref_amplitude > self.t_th:
                raise ValueError("ref_amplitude must exceed t_th")
            unit = (self.ref_amplitude - self.t_th) ** (-self.b) * math.exp(
                self.ea_tc / (self.k * (self.ref_temp + self.ref_amplitude))
            )
            object.__setattr__(
                self, "a_tc", self.nominal_years * SECONDS_PER_YEAR / (unit * self.ref_period)
            )
        elif not self.a_tc > 0:
            raise ValueError("TCParams.a_tc must be strictly positive")


def cycles_to_failure(cycle: ThermalCycle, p: TCParams) -> float | None:
    """Coffin-Manson cycles to failure; ``None`` for a non-damaging cycle."""
    excess = cycle.amplitude - p.t_th
    if excess <= 0:
        return None
    return p.a_tc * excess ** (-p.b) * math.exp(p.ea_tc / (p.k * cycle.t_max))


def mttf_tc(cycles: Sequence[ThermalCycle] | np.ndarray, p: TCParams) -> float:
    """Thermal-cycling lifetime in years by Miner's rule.

    Summed cycle time divided by summed damage ``weight / N``.  Identical full
    cycles reduce to ``N * sum(t) / m``.  ``inf`` when nothing is damaging.
    Accepts cycle objects or the array from :func:`rainflow_ranges`.
    """
    if isinstance(cycles, np.ndarray):
        rows = cycles.reshape(-1, 4)
    else:
        rows = np.array([(c.amplitude, c.t_max, c.duration, c.weight) for c in cycles], dtype=float).reshape(-1, 4)
    amp, t_max, dur, w = rows.T
    ok = amp > p.t_th
    if not ok.any():
        return math.inf
    n = p.a_tc * (amp[ok] - p.t_th) ** (-p.b) * np.exp(p.ea_tc / (p.k * t_max[ok]))
    damage = float(np.sum(w[ok] / n))
    return float(np.sum(dur[ok])) / damage / SECONDS_PER_YEAR


# ---------------------------------------------------------------------------
# NBTI / HCI / EM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgingParams:
    """Constants for the three temperature-activated mechanisms.

    The NBTI fitting constants are placeholders (no published values go with
    these lifetime figures); they keep the log arguments positive on
    300-400 K.  Scale constants left as ``None`` are calibrated to
    ``nominal_years`` at ``ref_temp`` with unit currents.
    """

    k: float = BOLTZMANN_EV
    nbti_a: float = 1.6328
    nbti_b: float = 0.07377
    nbti_c: float = 0.01
    nbti_d: float = 0.06852
    nbti_beta: float = 0.3
    q_hci: float = 0.25  # eV
    n_hci: float = 3.0
    i_sub: float = 1.0  # A
    width: float = 1.0
    q_em: float = 0.9  # eV
    n_em: float = 1.1
    current: float = 1.0  # A
    ref_temp: float = 318.0
    nominal_years: float = 7.0
    nbti_scale: float | None = None
    hci_scale: float | None = None
    em_scale: float | None = None

    def __post_init__(self):
        for name in ("k", "n_hci", "n_em", "nbti_beta", "ref_temp", "nominal_years"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AgingParams.{name} must be strictly positive")
        if not 1.0 <= self.n_em <= 2.0:
            raise ValueError("AgingParams.n_em must lie in [1, 2]")
        t = self.ref_temp
        if self.nbti_scale is None:
            object.__setattr__(self, "nbti_scale", self.nominal_years / _nbti_shape(t, self))
        if self.hci_scale is None:
            object.__setattr__(self, "hci_scale", self.nominal_years / math.exp(self.q_hci / (self.k * t)))
        if self.em_scale is None:
            object.__setattr__(self, "em_scale", self.nominal_years / math.exp(self.q_em / (self.k * t)))
        for name in ("nbti_scale", "hci_scale", "em_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AgingParams.{name} must be strictly positive")


def _nbti_shape(T, p: AgingParams):
    T = np.asarray(T, dtype=float)
    x = p.nbti_a / (1.0 + 2.0 * np.exp(p.nbti_b / (p.k * T)))
    inner = x - p.nbti_c
    if np.any(x <= 0) or np.any(inner <= 0):
        raise ModelDomainError(
            f"NBTI log argument non-positive for A={p.nbti_a}, B={p.nbti_b}, "
            f"C={p.nbti_c} at T={np.min(T)}..{np.max(T)} K"
        )
    term = np.log(x) - np.log(inner)
    out = term * (T / np.exp(-p.nbti_d / (p.k * T))) ** p.nbti_beta
    return float(out) if out.ndim == 0 else out


def _check_temp(T):
    if np.any(np.asarray(T) <= 0):
        raise ValueError("temperature must be positive kelvin")


def mttf_nbti(T, p: AgingParams):
    """NBTI lifetime in years; vectorised over ``T``."""
    _check_temp(T)
    return p.nbti_scale * _nbti_shape(T, p)


def mttf_hci(T, p: AgingParams, i_sub=None):
    """HCI lifetime in years; ``i_sub`` overrides the parameter value."""
    _check_temp(T)
    i_sub = p.i_sub if i_sub is None else i_sub
    if np.any(np.asarray(i_sub) <= 0) or not p.width > 0:
        raise ValueError("substrate current and transistor width must be positive")
    T = np.asarray(T, dtype=float)
    out = p.hci_scale * (np.asarray(i_sub, dtype=float) / p.width) ** (-p.n_hci) * np.exp(p.q_hci / (p.k * T))
    return float(out) if np.ndim(out) == 0 else out


def mttf_em(T, p: AgingParams, current=None):
    """Electromigration lifetime in years; ``current`` overrides the parameter."""
    _check_temp(T)
    current = p.current if current is None else current
    if np.any(np.asarray(current) <= 0):
        raise ValueError("EM current must be positive")
    T = np.asarray(T, dtype=float)
    out = p.em_scale * np.asarray(current, dtype=float) ** (-p.n_em) * np.exp(p.q_em / (p.k * T))
    return float(out) if np.ndim(out) == 0 else out


def aging_rates(T, p: AgingParams, i_sub, current) -> np.ndarray:
    """NBTI, HCI and EM failure rates (1/years) stacked as rows.

    Same models as the ``mttf_*`` functions, evaluated together for a vector
    of core temperatures; used where lifetimes are accumulated sample by
    sample.
    """
    T = np.asarray(T, dtype=float)
    inv_kt = 1.0 / (p.k * T)
    x = p.nbti_a / (1.0 + 2.0 * np.exp(p.nbti_b * inv_kt))
    inner = x - p.nbti_c
    if inner.min() <= 0:
        raise ModelDomainError(f"NBTI log argument non-positive at T={T.min()}..{T.max()} K")
    nbti = p.nbti_scale * np.log(x / inner) * (T * np.exp(p.nbti_d * inv_kt)) ** p.nbti_beta
    hci = p.hci_scale * (np.asarray(i_sub, dtype=float) / p.width) ** (-p.n_hci) * np.exp(p.q_hci * inv_kt)
    em = p.em_scale * np.asarray(current, dtype=float) ** (-p.n_em) * np.exp(p.q_em * inv_kt)
    return 1.0 / np.stack([nbti, hci, em])


def effective_lifetime(lifetimes) -> float:
    """Lifetime under a time-varying stress: reciprocal of the mean failure rate."""
    lt = np.asarray(lifetimes, dtype=float)
    if lt.size == 0:
        raise ValueError("no samples")
    return float(lt.size / np.sum(1.0 / lt))


class Combined(NamedTuple):
    value: float  # arithmetic mean, inf if any component is inf
    infinite: bool
    finite_mean: float  # mean of the finite components (nan if none)


def combined_mttf(values: Sequence[float]) -> Combined:
    v = [float(x) for x in values]
    if len(v) != 4:
        raise ValueError("expected four per-mechanism lifetimes")
    if any(math.isnan(x) or x <= 0 for x in v):
        raise ValueError("lifetimes must be positive")
    finite = [x for x in v if math.isfinite(x)]
    fmean = math.fsum(finite) / len(finite) if finite else math.nan
    if len(finite) < 4:
        return Combined(math.inf, True, fmean)
    return Combined(math.fsum(v) / 4.0, False, fmean)


# ---------------------------------------------------------------------------
# per-core evaluation and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReliabilityParams:
    tc: TCParams = field(default_factory=TCParams)
    aging: AgingParams = field(default_factory=AgingParams)
    cap_years: float = 20.0  # lifetimes above this are not told apart in averages

    def __post_init__(self):
        if not self.cap_years > 0:
            raise ValueError("cap_years must be > 0")


def core_lifetimes(
    temps: np.ndarray,
    params: ReliabilityParams,
    sampling_period: float,
    i_sub: np.ndarray | float | None = None,
    current: np.ndarray | float | None = None,
) -> tuple[float, float, float, float]:
    """TC, NBTI, HCI and EM lifetimes (years) of one core's sampled history."""
    temps = np.asarray(temps, dtype=float)
    if temps.size == 0:
        raise ValueError("empty temperature history")
    if temps.min() <= 0:
        raise ValueError("temperature must be positive kelvin")
    a = params.aging
    tc = mttf_tc(rainflow_ranges(temps, sampling_period), params.tc) if temps.size >= 2 else math.inf
    i_sub = np.broadcast_to(a.i_sub if i_sub is None else i_sub, temps.shape)
    current = np.broadcast_to(a.current if current is None else current, temps.shape)
    if i_sub.min() <= 0 or current.min() <= 0:
        raise ValueError("currents must be positive")
    nbti, hci, em = temps.size / aging_rates(temps, a, i_sub, current).sum(axis=1)
    return tc, float(nbti), float(hci), float(em)


def capped_combined(lifetimes: Sequence[float], cap: float) -> float:
    """Mean of the four lifetimes after clipping each at ``cap``."""
    return math.fsum(min(x, cap) for x in lifetimes) / 4.0


@dataclass
class MTTFReport:
    """Per-core lifetimes (years) for each mechanism plus system averages.

    Raw per-core values keep ``inf`` for cores that saw no damaging cycle;
    system averages clip every value at ``cap_years``.
    """

    tc: np.ndarray
    nbti: np.ndarray
    hci: np.ndarray
    em: np.ndarray
    cap_years: float

    def __post_init__(self):
        for name in MECHANISMS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def n_cores(self) -> int:
        return len(self.tc)

    def per_core(self, i: int) -> tuple[float, float, float, float]:
        return tuple(float(getattr(self, m)[i]) for m in MECHANISMS)

    @property
    def combined(self) -> np.ndarray:
        return np.array([combined_mttf(self.per_core(i)).value for i in range(self.n_cores)])

    @property
    def infinite_flags(self) -> np.ndarray:
        return np.array([combined_mttf(self.per_core(i)).infinite for i in range(self.n_cores)])

    @property
    def combined_capped(self) -> np.ndarray:
        return np.array([capped_combined(self.per_core(i), self.cap_years) for i in range(self.n_cores)])

    def system_average(self, mechanism: str) -> float:
        if mechanism == "combined":
            return float(np.mean(self.combined_capped))
        return float(np.mean(np.minimum(getattr(self, mechanism), self.cap_years)))

    def summary(self) -> dict:
        out = {m: self.system_average(m) for m in MECHANISMS + ("combined",)}
        out["cap_years"] = self.cap_years
        out["n_cores"] = self.n_cores
        out["infinite_cores"] = int(self.infinite_flags.sum())
        return out

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["core,tc_years,nbti_years,hci_years,em_years,combined_years,combined_capped_years"]
        comb, capd = self.combined, self.combined_capped
        for i in range(self.n_cores):
            vals = list(self.per_core(i)) + [comb[i], capd[i]]
            lines.append(",".join([str(i)] + [repr(float(v)) for v in vals]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.summary(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def evaluate_trace(
    temps: np.ndarray,
    params: ReliabilityParams,
    sampling_period: float,
    i_sub: np.ndarray | None = None,
    current: np.ndarray | None = None,
) -> MTTFReport:
    """MTTF report for a ``(n_samples, n_cores)`` temperature history.

    ``i_sub`` and ``current`` are optional arrays of the same shape giving the
    per-sample currents; parameter defaults apply where omitted.
    """
    temps = np.atleast_2d(np.asarray(temps, dtype=float))
    cols = {m: [] for m in MECHANISMS}
    for c in range(temps.shape[1]):
        isub_c = None if i_sub is None else i_sub[:, c]
        cur_c = None if current is None else current[:, c]
        vals = core_lifetimes(temps[:, c], params, sampling_period, isub_c, cur_c)
        for m, v in zip(MECHANISMS, vals):
            cols[m].append(v)
    return MTTFReport(cap_years=params.cap_years, **cols)
