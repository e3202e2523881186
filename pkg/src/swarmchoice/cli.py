"""Experiment harness: single runs, sweeps with repetitions, grid exports.

Subcommands:
  run    one seeded run, writes <name>.json (and <name>.traj with
         --record-trajectories) plus a one-line summary on stdout
  sweep  full strategy x N x R x repetition grid, parallel across runs,
         resumable; writes per-run JSON and an aggregate sweep.csv
  grids  re-export stagnation/movement grids from recorded trajectories
         for a chosen window and normalization, as TSV plus figures
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arena import ConfigError
from .config import SimConfig, load_config
from .engine import PlacementError, run as run_sim
from .metrics import MetricsParams, replay
from .strategies import STRATEGIES

OUT_ENV = "SWARMCHOICE_OUT"


@dataclass(frozen=True)
class RunSpec:
    strategy: str
    n_robots: int
    comm_range: float
    rep: int
    seed: int


@dataclass
class SweepSpec:
    strategies: list[str]
    n_values: list[int]
    ranges: list[float]
    repetitions: int
    base_seed: int

    def plan(self) -> list[RunSpec]:
        return [
            RunSpec(s, n, r, rep, sweep_seed(self.base_seed, s, n, r, rep))
            for s in self.strategies
            for n in self.n_values
            for r in self.ranges
            for rep in range(self.repetitions)
        ]


def sweep_seed(base_seed: int, strategy: str, n: int, comm_range: float, rep: int) -> int:
    """Stable per-run seed: base + hash of the grid coordinates."""
    tag = f"{strategy}|{n}|{comm_range:g}|{rep}".encode()
    h = int.from_bytes(hashlib.sha256(tag).digest()[:8], "big")
    return (base_seed + h) % (2**63)


def atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def run_name(strategy: str, n: int, comm_range: float, rep_or_seed: str) -> str:
    return f"{strategy}_N{n}_R{comm_range:g}_{rep_or_seed}"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def execute_run(
    config: SimConfig, strategy: str, seed: int, json_path: Path, traj_path: Path | None
) -> dict:
    result = run_sim(config, strategy, seed, trajectory_path=traj_path)
    doc = result.to_json_dict(config, strategy, seed, trajectory=traj_path.name if traj_path else None)
    atomic_write(json_path, dump_json(doc))
    return doc


def summary_line(doc: dict) -> str:
    return (
        f"strategy={doc['strategy']} N={doc['n_robots']} R={doc['comm_range']:g} "
        f"seed={doc['seed']} winner={doc['winner']} converged={doc['converged']} "
        f"time={doc['convergence_time']:g}s mean_ca={doc['metrics']['mean_ca_time']:.3f}s "
        f"mean_conflicts={doc['metrics']['mean_conflicts']:.3f}"
    )


def cmd_run(args) -> int:
    out = _out_dir(args)
    overrides = {
        "n_robots": args.robots,
        "comm_range": args.range,
        "timeout": args.timeout,
    }
    config = load_config(args.config, overrides)
    seed = args.seed if args.seed is not None else config.world.rng_seed
    name = args.name or run_name(args.strategy, config.n_robots, config.world.comm_range, f"seed{seed}")
    json_path = out / f"{name}.json"
    traj_path = out / f"{name}.traj" if args.record_trajectories else None
    doc = execute_run(config, args.strategy, seed, json_path, traj_path)
    print(summary_line(doc))
    return 0


def _sweep_worker(config_dict: dict, spec: RunSpec, json_path: str, traj_path: str | None) -> str:
    config = SimConfig.from_dict(config_dict)
    execute_run(config, spec.strategy, spec.seed, Path(json_path), Path(traj_path) if traj_path else None)
    return json_path


CSV_COLUMNS = [
    "strategy",
    "N",
    "R",
    "rep",
    "seed",
    "converged",
    "winner",
    "convergence_time",
    "mean_ca_time",
    "mean_conflicts",
]


def _csv_row(spec: RunSpec, doc: dict) -> list:
    return [
        spec.strategy,
        spec.n_robots,
        repr(spec.comm_range),
        spec.rep,
        spec.seed,
        doc["converged"],
        doc["winner"],
        repr(doc["convergence_time"]),
        repr(doc["metrics"]["mean_ca_time"]),
        repr(doc["metrics"]["mean_conflicts"]),
    ]


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    spec = SweepSpec(
        strategies=[s.strip() for s in args.strategies.split(",") if s.strip()],
        n_values=[int(x) for x in args.robots_list.split(",")],
        ranges=[float(x) for x in args.ranges.split(",")],
        repetitions=args.reps,
        base_seed=args.base_seed,
    )
    for s in spec.strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    if spec.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    plan = spec.plan()

    paths: dict[RunSpec, Path] = {}
    todo = []
    for rs in plan:
        name = run_name(rs.strategy, rs.n_robots, rs.comm_range, f"rep{rs.rep}")
        json_path = out / f"{name}.json"
        paths[rs] = json_path
        if args.force or not json_path.exists():
            base = load_config(args.config, {"n_robots": rs.n_robots, "comm_range": rs.comm_range})
            traj = str(out / f"{name}.traj") if args.record_trajectories else None
            todo.append((base.to_dict(), rs, str(json_path), traj))

    failures = []
    if todo:
        jobs = args.jobs or os.cpu_count() or 1
        if jobs == 1:
            for task in todo:
                try:
                    _sweep_worker(*task)
                except Exception as exc:  # noqa: BLE001 - keep the sweep going
                    failures.append((task[1], exc))
                    print(f"FAILED {task[1]}: {exc}", file=sys.stderr)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(_sweep_worker, *task): task[1] for task in todo}
                for fut, rs in futures.items():
                    try:
                        fut.result()
                    except Exception as exc:  # noqa: BLE001
                        failures.append((rs, exc))
                        print(f"FAILED {rs}: {exc}", file=sys.stderr)

    rows = []
    for rs in plan:
        path = paths[rs]
        if not path.exists():
            continue
        doc = json.loads(path.read_text())
        rows.append(_csv_row(rs, doc))
    rows.sort(key=lambda row: (row[0], int(row[1]), float(row[2]), int(row[3])))

    buf = []
    buf.append(",".join(CSV_COLUMNS))
    for row in rows:
        buf.append(",".join(str(v) for v in row))
    atomic_write(out / "sweep.csv", ("\n".join(buf) + "\n").encode())
    print(f"sweep: {len(rows)} runs in {out / 'sweep.csv'}, {len(failures)} failed")
    return 1 if failures else 0


def _grid_tsv(header: list[str], comment: str, columns: list[np.ndarray]) -> bytes:
    lines = [f"# {comment}", "\t".join(header)]
    stacked = np.column_stack(columns)
    for row in stacked:
        lines.append("\t".join(repr(float(v)) for v in row))
    return ("\n".join(lines) + "\n").encode()


def _cell_centers(shape: tuple[int, int], cell: float) -> tuple[np.ndarray, np.ndarray]:
    gx, gy = np.meshgrid(
        (np.arange(shape[0]) + 0.5) * cell, (np.arange(shape[1]) + 0.5) * cell, indexing="ij"
    )
    return gx.reshape(-1), gy.reshape(-1)


def export_grids(
    json_paths: list[Path],
    out: Path,
    window: tuple[float, float],
    normalize: float,
    figures: bool,
    stagnation_mode: str | None = None,
) -> None:
    """Windowed grid re-exports for each run plus the mean over all runs."""
    if normalize == 0:
        raise ConfigError("normalization constant must be nonzero")
    stag_list, move_list, count_list = [], [], []
    meta = None
    for jp in json_paths:
        doc = json.loads(jp.read_text())
        if not doc.get("trajectory"):
            raise ConfigError(f"{jp}: no trajectory recorded (rerun with --record-trajectories)")
        traj = jp.parent / doc["trajectory"]
        if not traj.exists():
            raise ConfigError(f"missing trajectory file {traj}")
        mcfg = doc["config"]["metrics"]
        params = MetricsParams(
            cell_size=mcfg["cell_size"],
            stagnation_threshold=mcfg["stagnation_threshold"],
            stagnation_mode=stagnation_mode or mcfg["stagnation_mode"],
        )
        width = doc["config"]["world"]["arena_width"]
        height = doc["config"]["world"]["arena_height"]
        acc = replay(traj, width, height, params, window)
        stag = acc.stagnation / normalize
        move = acc.movement_mean()
        stag_list.append(stag)
        move_list.append(move)
        count_list.append(acc.move_count)
        meta = (acc.shape, params.cell_size, width, height)
        _write_grid_files(out, jp.stem, stag, move, acc.move_count, meta, window, normalize, figures)

    if len(json_paths) > 1:
        merged_stag = np.mean(stag_list, axis=0)
        merged_move = np.mean(move_list, axis=0)
        merged_count = np.sum(count_list, axis=0)
        _write_grid_files(out, "merged", merged_stag, merged_move, merged_count, meta, window, normalize, figures)


def _write_grid_files(out, stem, stag, move, count, meta, window, normalize, figures):
    shape, cell, width, height = meta
    cx, cy = _cell_centers(shape, cell)
    comment = f"window={window[0]:g}-{window[1]:g}% normalize={normalize:g} cell={cell:g}"
    atomic_write(
        out / f"{stem}_stagnation.tsv",
        _grid_tsv(["cell_x", "cell_y", "value"], comment, [cx, cy, stag.reshape(-1)]),
    )
    atomic_write(
        out / f"{stem}_movement.tsv",
        _grid_tsv(
            ["cell_x", "cell_y", "mean_dx", "mean_dy", "samples"],
            comment,
            [cx, cy, move[..., 0].reshape(-1), move[..., 1].reshape(-1), count.reshape(-1).astype(float)],
        ),
    )
    if figures:
        from . import reports

        reports.save_stagnation_figure(stag, width, height, out / f"{stem}_stagnation.png", comment)
        reports.save_movement_figure(
            move[..., 0], move[..., 1], cell, width, height, out / f"{stem}_movement.png", comment
        )


def cmd_grids(args) -> int:
    out = _out_dir(args)
    inputs: list[Path] = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            inputs.extend(sorted(p.glob("*.json")))
        elif p.exists():
            inputs.append(p)
        else:
            raise ConfigError(f"no such input: {p}")
    if not inputs:
        raise ConfigError("no run JSON files found")
    export_grids(
        inputs,
        out,
        window=(args.window[0], args.window[1]),
        normalize=args.normalize,
        figures=not args.no_figures,
        stagnation_mode=args.stagnation_mode,
    )
    print(f"grids: exported {len(inputs)} run(s) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmchoice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one seeded run")
    p_run.add_argument("--strategy", required=True, choices=STRATEGIES)
    p_run.add_argument("--robots", type=int, default=None)
    p_run.add_argument("--range", type=float, default=None, help="communication range [m]")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--timeout", type=float, default=None, help="simulated seconds before giving up")
    p_run.add_argument("--config", default=None, help="key=value config file")
    p_run.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p_run.add_argument("--name", default=None, help="output file stem")
    p_run.add_argument("--record-trajectories", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a strategy x N x R x repetition grid")
    p_sweep.add_argument("--strategies", required=True, help="comma-separated strategy names")
    p_sweep.add_argument("--robots-list", required=True, help="comma-separated robot counts")
    p_sweep.add_argument("--ranges", required=True, help="comma-separated communication ranges [m]")
    p_sweep.add_argument("--reps", type=int, default=30)
    p_sweep.add_argument("--base-seed", type=int, default=0)
    p_sweep.add_argument("--jobs", type=int, default=None, help="parallel runs (default: all cores)")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--record-trajectories", action="store_true")
    p_sweep.add_argument("--force", action="store_true", help="rerun even if output exists")
    p_sweep.set_defaults(func=cmd_sweep)

    p_grids = sub.add_parser("grids", help="export stagnation/movement grids from tick logs")
    p_grids.add_argument("inputs", nargs="+", help="run JSON files or directories")
    p_grids.add_argument("--window", type=float, nargs=2, default=(0.0, 100.0), metavar=("START", "END"))
    p_grids.add_argument("--normalize", type=float, default=1.0)
    p_grids.add_argument("--stagnation-mode", choices=("time", "events"), default=None)
    p_grids.add_argument("--out", default=None)
    p_grids.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_grids.set_defaults(func=cmd_grids)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PlacementError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
