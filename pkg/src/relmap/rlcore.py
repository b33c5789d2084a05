"""Tabular Q-learning with epsilon-greedy selection over changing action sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

State = tuple[int, ...]

DEFAULT_BETA_K = 0.72
DEFAULT_GAMMA = 0.28


@dataclass(frozen=True)
class ActionSet:
    actions: tuple[int, ...]
    epoch: int = 0

    def __post_init__(self):
        acts = tuple(int(a) for a in self.actions)
        if len(set(acts)) != len(acts):
            raise ValueError("duplicate actions in action set")
        object.__setattr__(self, "actions", acts)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


def as_actions(actions: ActionSet | Iterable[int]) -> tuple[int, ...]:
    return actions.actions if isinstance(actions, ActionSet) else tuple(int(a) for a in actions)


@dataclass
class QTable:
    """Sparse state-action values; unseen pairs read as ``default``.

    ``meta`` carries discretisation settings so a saved table documents how
    its state codes were formed.
    """

    beta_k: float = DEFAULT_BETA_K
    gamma: float = DEFAULT_GAMMA
    default: float = 0.0
    meta: dict[str, str] = field(default_factory=dict)
    values: dict[tuple[State, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.beta_k < 1.0:
            raise ValueError(f"learning rate must lie in (0, 1), got {self.beta_k}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"discount factor must lie in (0, 1), got {self.gamma}")
        if not math.isfinite(self.default):
            raise ValueError("default Q-value must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def get(self, s: State, a: int) -> float:
        return self.values.get((s, a), self.default)

    def max_q(self, s: State, actions: ActionSet | Iterable[int]) -> float:
        acts = as_actions(actions)
        if not acts:
            return 0.0
        return max(self.get(s, a) for a in acts)

    def copy(self) -> "QTable":
        return QTable(self.beta_k, self.gamma, self.default, dict(self.meta), dict(self.values))

    def save(self, path: str | Path) -> None:
        lines = [
            "# relmap q-table v1",
            f"beta_k={self.beta_k!r} gamma={self.gamma!r} default={self.default!r}",
        ]
        lines.append(" ".join(f"{k}={v}" for k, v in sorted(self.meta.items())))
        for (s, a), v in sorted(self.values.items()):
            lines.append(f"{','.join(map(str, s))}\t{a}\t{float(v)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        text = Path(path).read_text().splitlines()
        if len(text) < 3 or not text[0].startswith("# relmap q-table"):
            raise ValueError(f"{path}: not a q-table file")
        rates = dict(tok.split("=", 1) for tok in text[1].split())
        meta = dict(tok.split("=", 1) for tok in text[2].split()) if text[2].strip() else {}
        table = cls(float(rates["beta_k"]), float(rates["gamma"]), float(rates["default"]), meta)
        for lineno, ln in enumerate(text[3:], start=4):
            if not ln.strip():
                continue
            try:
                s_txt, a_txt, v_txt = ln.split("\t")
                s = tuple(int(x) for x in s_txt.split(",")) if s_txt else ()
                table.values[(s, int(a_txt))] = float(v_txt)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed q-table row") from None
        return table


def q_update(
    table: QTable,
    s: State,
    a: int,
    r: float,
    s_next: State,
    actions_next: ActionSet | Iterable[int],
) -> QTable:
    """One temporal-difference step, in place.

    ``Q(s,a) += beta_k * (r + gamma * max_a' Q(s',a') - Q(s,a))``; the max over
    an empty successor set is 0.
    """
    if not math.isfinite(r):
        raise ValueError(f"reward must be finite, got {r}")
    q = table.get(s, a)
    target = r + table.gamma * table.max_q(s_next, actions_next)
    table.values[(s, a)] = float(q + table.beta_k * (target - q))
    return table


def greedy_action(table: QTable, s: State, actions: ActionSet | Iterable[int]) -> int:
    acts = as_actions(actions)
    if not acts:
        raise ValueError("no available actions")
    # highest value, lowest action index among ties
    return min(acts, key=lambda a: (-table.get(s, a), a))


def select_action(
    table: QTable,
    s: State,
    actions: ActionSet | Iterable[int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    acts = as_actions(actions)
    if not acts:
        raise ValueError("no available actions")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if len(acts) == 1:
        return acts[0]
    if epsilon > 0.0 and rng.random() < epsilon:
        return acts[int(rng.integers(len(acts)))]
    return greedy_action(table, s, acts)


def discretize(
    features: Sequence[float],
    widths: Sequence[float],
    caps: Sequence[int | None],
) -> State:
    """Bucket each feature as ``floor(value / width)``, clipped to its cap."""
    if not (len(features) == len(widths) == len(caps)):
        raise ValueError("features, widths and caps must have equal length")
    out = []
    for v, w, cap in zip(features, widths, caps):
        if not w > 0:
            raise ValueError(f"bucket width must be positive, got {w}")
        b = math.floor(v / w)
        if cap is not None:
            b = min(b, int(cap))
        out.append(int(b))
    return tuple(out)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 0.9
    decay: float = 0.995
    floor: float = 0.05

    def __post_init__(self):
        if not (0.0 <= self.floor <= self.start <= 1.0):
            raise ValueError("need 0 <= floor <= start <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    def __call__(self, episode: int) -> float:
        return max(self.floor, self.start * self.decay**episode)


@dataclass(frozen=True)
class DeterministicMDP:
    """Small finite MDP with deterministic transitions.

    ``transitions[s][a] = (next_state, reward)``.  Used as a learning fixture.
    """

    transitions: dict[Hashable, dict[int, tuple[Hashable, float]]]
    start: Hashable

    def actions(self, s) -> tuple[int, ...]:
        return tuple(sorted(self.transitions[s]))

    def step(self, s, a) -> tuple[Hashable, float]:
        return self.transitions[s][a]


# 2 states x 2 actions.  From state 0, action 1 pays 1 and moves to state 1;
# in state 1, action 0 pays 2 and returns to state 0.  The alternatives pay
# less, so the optimal cycle is 0 -1-> 1 -0-> 0.
TWO_STATE_MDP = DeterministicMDP(
    transitions={
        0: {0: (0, 0.5), 1: (1, 1.0)},
        1: {0: (0, 2.0), 1: (1, 0.2)},
    },
    start=0,
)


def train_tabular(
    mdp: DeterministicMDP,
    episodes: int,
    steps_per_episode: int = 20,
    schedule: EpsilonSchedule = EpsilonSchedule(),
    seed: int = 0,
    beta_k: float = DEFAULT_BETA_K,
    gamma: float = DEFAULT_GAMMA,
) -> tuple[QTable, list[float]]:
    """Epsilon-greedy Q-learning on ``mdp``; returns the table and per-episode return."""
    rng = np.random.default_rng(seed)
    table = QTable(beta_k, gamma)
    curve = []
    for ep in range(episodes):
        eps = schedule(ep)
        s = mdp.start
        total = 0.0
        for _ in range(steps_per_episode):
            a = select_action(table, (s,), mdp.actions(s), eps, rng)
            s2, r = mdp.step(s, a)
            q_update(table, (s,), a, r, (s2,), mdp.actions(s2))
            total += r
            s = s2
        curve.append(total)
    return table, curve
