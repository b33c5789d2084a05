"""Command-line entry point: ``relmap {simulate,train,compare,sweep}``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, SimConfig, bundled_config, load_config, tomllib
from .mapper import RLMapper
from .rlcore import QTable


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


def _load(arg: str | None) -> SimConfig:
    if arg is None:
        return SimConfig()
    p = Path(arg)
    if not p.exists() and p.suffix == "" and "/" not in arg:
        try:
            return bundled_config(arg)
        except FileNotFoundError:
            pass
    if not p.exists():
        raise ConfigError("--config", f"no such file {arg}")
    return load_config(p)


def _with_overrides(cfg: SimConfig, args) -> SimConfig:
    run = {}
    if getattr(args, "mapper", None):
        run["mapper"] = args.mapper
    if getattr(args, "episodes", None) is not None:
        run["episodes"] = args.episodes
    if getattr(args, "seed", None) is not None:
        run["seeds"] = [args.seed]
    return cfg.replace(run=run) if run else cfg


def _seed(cfg: SimConfig) -> int:
    return cfg.run.seeds[0]


def cmd_simulate(cfg: SimConfig, args) -> None:
    name, seed = cfg.run.mapper, _seed(cfg)
    if name == "rl" and args.tables:
        d = Path(args.tables)
        tables = _stage("load q-tables", lambda: (QTable.load(d / "q_bin.txt"), QTable.load(d / "q_core.txt")))
        mapper = _stage("load q-tables", RLMapper.from_tables, cfg.rl_settings(), *tables)
        res = _stage("simulate", harness.run_episode, cfg, mapper, seed)
    else:
        res = _stage("simulate", harness.evaluate, cfg, name, seed)
    _stage("write outputs", harness.write_episode, res, cfg, args.out_dir, name)
    summary = res.report.summary()
    summary.update(mapper=name, seed=seed, final_spread_K=res.final_state.spread(), queued_at_end=res.queued_at_end)
    (Path(args.out_dir) / "mttf_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{name} seed={seed}: combined MTTF {summary['combined']:.3f} years, spread {summary['final_spread_K']:.2f} K")


def cmd_train(cfg: SimConfig, args) -> None:
    seed = _seed(cfg)
    result = _stage("train", harness.train, cfg, cfg.run.episodes, seed, cfg.run.mapper)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "learning_curve.csv").write_text(result.curve_csv())
    result.mapper.bin_table.save(out / "q_bin.txt")
    result.mapper.core_table.save(out / "q_core.txt")
    res = _stage("evaluate", harness.run_episode, cfg, result.mapper.freeze(), seed)
    _stage("write outputs", harness.write_episode, res, cfg, out, "rl")
    last = result.curve[-1]["combined_mttf_years"] if result.curve else float("nan")
    print(f"trained {cfg.run.episodes} episodes on seed {seed}; last training episode {last:.3f} years, "
          f"greedy {res.report.system_average('combined'):.3f} years")


def cmd_compare(cfg: SimConfig, args) -> None:
    mappers = args.mappers.split(",") if args.mappers else None
    rep = _stage("compare", harness.compare, cfg, mappers)
    _stage("write outputs", harness.write_comparison, rep, cfg, args.out_dir)
    for lab, row in rep.table().items():
        print(f"{lab:>10}: combined {row['combined']:.3f} years, spread {sum(rep.final_spread[lab]) / len(rep.seeds):.2f} K")


def _parse_param(text: str) -> tuple[str, str, list]:
    try:
        key, vals = text.split("=", 1)
        section, name = key.split(".", 1)
    except ValueError:
        raise ConfigError("--param", f"expected section.key=v1,v2,... got {text!r}") from None
    out = []
    for v in vals.split(","):
        try:
            out.append(tomllib.loads(f"v = {v}")["v"])
        except tomllib.TOMLDecodeError:
            out.append(v)
    return section, name, out


def cmd_sweep(cfg: SimConfig, args) -> None:
    if not args.param:
        raise ConfigError("--param", "sweep needs at least one --param section.key=v1,v2")
    grid = [_parse_param(p) for p in args.param]
    keys = [f"{s}.{k}" for s, k, _ in grid]
    rows = []
    for combo in itertools.product(*(vals for _, _, vals in grid)):
        over: dict = {}
        for (section, name, _), v in zip(grid, combo):
            over.setdefault(section, {})[name] = v
        point = cfg.replace(**over)
        for seed in point.run.seeds:
            res = _stage(f"sweep {dict(zip(keys, combo))}", harness.evaluate, point, point.run.mapper, seed)
            s = res.report.summary()
            rows.append(list(combo) + [point.run.mapper, seed] + [repr(s[m]) for m in ("tc", "nbti", "hci", "em", "combined")]
                        + [repr(res.final_state.spread())])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + ["mapper", "seed", "tc_years", "nbti_years", "hci_years", "em_years", "combined_years", "final_spread_K"])
        w.writerows(rows)
    print(f"{len(rows)} runs written to {out / 'sweep.csv'}")


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "compare": cmd_compare, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file, or the name of a bundled one (e.g. fixture16)")
    common.add_argument("--seed", type=int, help="master seed (replaces run.seeds)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--mapper", choices=("rl", "random", "tc_greedy"), help="overrides run.mapper")
    common.add_argument("--episodes", type=int, help="training episodes (overrides run.episodes)")

    parser = argparse.ArgumentParser(prog="relmap", description="Reliability-aware task mapping simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="one evaluation episode")
    p.add_argument("--tables", help="directory holding q_bin.txt and q_core.txt from a previous train")
    sub.add_parser("train", parents=[common], help="train the rl mapper and save its tables")
    p = sub.add_parser("compare", parents=[common], help="evaluate several mappers on the same seeds")
    p.add_argument("--mappers", help="comma-separated list (overrides run.mappers)")
    p = sub.add_parser("sweep", parents=[common], help="grid over config values")
    p.add_argument("--param", action="append", help="section.key=v1,v2,... (repeatable)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _with_overrides(_load(args.config), args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"relmap: config error in {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"relmap: failed at stage {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
