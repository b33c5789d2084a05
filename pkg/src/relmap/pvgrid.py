"""Process-variation grid and the per-core quantities derived from it.

The chip surface is a ``P x Q`` grid of cells, each carrying a dimensionless
variation factor ``p`` in ``(0, 1]``.  Wire geometry and power-grid
resistance scale linearly with ``p``; a core's maximum frequency is set by
the slowest cell on its critical path.

Symbol note: the resistance constant is called ``gamma_res`` and the
frequency constant ``beta_f`` so they do not collide with the Q-learning
discount factor and learning rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

Coord = tuple[int, int]

DEFAULT_P_MIN = 0.7
DEFAULT_KAPPA1 = 50.0  # nm
DEFAULT_KAPPA2 = 100.0  # nm
DEFAULT_GAMMA_RES = 2.0  # ohm
DEFAULT_BETA_F = 4.0e9  # Hz


@dataclass(frozen=True)
class PVGrid:
    values: np.ndarray
    seed: int | None = None
    correlation_length: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("PV grid must be a non-empty 2-D array")
        if np.any(v <= 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
            raise ValueError("PV factors must lie in (0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, xy: Coord) -> float:
        return float(self.values[xy])


@dataclass(frozen=True)
class PhysicalParams:
    """Per-cell wire width, wire height and grid resistance."""

    width: np.ndarray
    height: np.ndarray
    resistance: np.ndarray
    kappa1: float
    kappa2: float
    gamma_res: float


@dataclass(frozen=True)
class CoreFrequencyMap:
    frequencies: np.ndarray  # Hz, one per core
    beta_f: float
    cp_sets: list[list[Coord]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.frequencies)


def _exponential_kernel(rows: int, cols: int, corr: float) -> np.ndarray:
    yy, xx = np.mgrid[0:rows, 0:cols]
    pts = np.column_stack([yy.ravel(), xx.ravel()]).astype(float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    return np.exp(-d / corr)


def generate_pv_grid(
    rows: int,
    cols: int,
    seed: int,
    correlation_length: float = 0.0,
    p_min: float = DEFAULT_P_MIN,
) -> PVGrid:
    """Draw a spatially correlated variation field.

    Independent standard normals are smoothed with an exponential kernel of
    the given correlation length (in cells), rescaled to unit variance, then
    mapped so that +/-3 sigma spans ``[p_min, 1]`` and clamped into it.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if correlation_length < 0:
        raise ValueError("correlation_length must be >= 0")
    if not 0.0 < p_min < 1.0:
        raise ValueError("p_min must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal(rows * cols)
    if correlation_length > 0:
        k = _exponential_kernel(rows, cols, correlation_length)
        z = (k @ z) / np.sqrt((k**2).sum(axis=1))
    center = 0.5 * (1.0 + p_min)
    spread = (1.0 - p_min) / 6.0
    p = np.clip(center + spread * z, p_min, 1.0).reshape(rows, cols)
    return PVGrid(p, seed=seed, correlation_length=correlation_length)


def derive_physical_params(
    grid: PVGrid,
    kappa1: float = DEFAULT_KAPPA1,
    kappa2: float = DEFAULT_KAPPA2,
    gamma_res: float = DEFAULT_GAMMA_RES,
) -> PhysicalParams:
    for name, val in (("kappa1", kappa1), ("kappa2", kappa2), ("gamma_res", gamma_res)):
        if not val > 0:
            raise ValueError(f"{name} must be strictly positive, got {val}")
    p = grid.values
    return PhysicalParams(
        width=kappa1 * p,
        height=kappa2 * p,
        resistance=gamma_res * p,
        kappa1=kappa1,
        kappa2=kappa2,
        gamma_res=gamma_res,
    )


def tile_footprints(grid_shape: tuple[int, int], core_shape: tuple[int, int]) -> list[list[Coord]]:
    """Cells covered by each core's tile, cores numbered row-major.

    The PV grid must divide evenly into the core grid.
    """
    P, Q = grid_shape
    R, C = core_shape
    if R < 1 or C < 1 or P % R or Q % C:
        raise ValueError(f"PV grid {P}x{Q} does not tile evenly into {R}x{C} cores")
    h, w = P // R, Q // C
    sets = []
    for r in range(R):
        for c in range(C):
            sets.append([(r * h + i, c * w + j) for i in range(h) for j in range(w)])
    return sets


def max_frequencies(
    grid: PVGrid, cp_sets: Sequence[Sequence[Coord]], beta_f: float = DEFAULT_BETA_F
) -> CoreFrequencyMap:
    """Per-core maximum frequency: ``beta_f`` times the slowest cell on the path."""
    if not beta_f > 0:
        raise ValueError("beta_f must be strictly positive")
    P, Q = grid.shape
    freqs = np.empty(len(cp_sets))
    clean: list[list[Coord]] = []
    for i, cells in enumerate(cp_sets):
        cells = [(int(x), int(y)) for x, y in cells]
        if not cells:
            raise ValueError(f"critical-path set of core {i} is empty")
        for x, y in cells:
            if not (0 <= x < P and 0 <= y < Q):
                raise ValueError(f"core {i}: cell ({x}, {y}) outside {P}x{Q} grid")
        freqs[i] = beta_f * min(grid.values[x, y] for x, y in cells)
        clean.append(cells)
    return CoreFrequencyMap(freqs, beta_f, clean)


def save_pv_grid(grid: PVGrid, path: str | Path) -> None:
    lines = [f"{grid.rows} {grid.cols}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in grid.values]
    Path(path).write_text("\n".join(lines) + "\n")


def load_pv_grid(path: str | Path) -> PVGrid:
    text = Path(path).read_text().split("\n")
    rows = [ln for ln in text if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty PV grid file")
    try:
        P, Q = (int(t) for t in rows[0].split())
    except ValueError:
        raise ValueError(f"{path}:1: header must be 'P Q'") from None
    if len(rows) - 1 != P:
        raise ValueError(f"{path}: expected {P} rows, found {len(rows) - 1}")
    vals = []
    for i, ln in enumerate(rows[1:], start=2):
        row = [float(t) for t in ln.split()]
        if len(row) != Q:
            raise ValueError(f"{path}:{i}: expected {Q} values, found {len(row)}")
        vals.append(row)
    return PVGrid(np.array(vals))
