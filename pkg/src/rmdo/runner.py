"""Running configured experiments and turning run directories into reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, SweepConfig, parse_toml
from .core import KIND_TERMINAL, ConfigError, ContractError, GameTree
from .engine import EVENT_COLUMNS, METRIC_COLUMNS, Engine, MetricRecord, RunLog
from .evaluation import SupportReport, support_metrics
from .games import build_game

OUTPUT_ENV = "RMDO_OUTPUT_ROOT"
METRICS_SCHEMA = "rmdo-metrics/1"
NOT_REACHED = "—"


def output_root(override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def default_run_name(cfg: RunConfig) -> str:
    warm = "-ws" if cfg.warm.kind == "carry" else ""
    return f"{cfg.game.name}-{cfg.schedule.kind}{warm}-{cfg.solver}-s{cfg.seed}"


def make_engine(cfg: RunConfig, game: GameTree | None = None) -> Engine:
    game = game or build_game(cfg.game)
    return Engine(game, cfg.schedule, cfg.solver, cfg.warm, seed=cfg.seed, explore=cfg.explore,
                  target_eps=cfg.stop.target_exploitability, track_oas=cfg.log.oas)


def run(cfg: RunConfig, game: GameTree | None = None) -> tuple[np.ndarray, RunLog, Engine]:
    """Execute one configured run in memory; returns the final window average, log and engine."""
    eng = make_engine(cfg, game)
    policy, log = eng.run(cfg.stop, cfg.log)
    return policy, log, eng


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(records: list[MetricRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in METRIC_COLUMNS])
    return buf.getvalue()


def events_csv(log: RunLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for e in log.events:
        w.writerow([_fmt(getattr(e, c)) for c in EVENT_COLUMNS])
    return buf.getvalue()


def read_metrics(path: str | Path) -> list[dict]:
    """Rows of a metrics.csv as dicts of numbers (``None`` for empty cells)."""
    path = Path(path)
    if path.is_dir():
        path = path / "metrics.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(METRIC_COLUMNS):
            raise ContractError(f"{path}: unexpected metrics header {reader.fieldnames}")
        rows = []
        for row in reader:
            rows.append({k: (None if v == "" else (float(v) if k.startswith(("exploitability", "wall"))
                                                   else int(v))) for k, v in row.items()})
    return rows


def summarize(cfg: RunConfig, eng: Engine, log: RunLog) -> dict:
    tree = eng.tree
    last = log.records[-1]
    k = eng.j + 1
    x = eng.stats.sum_infosets
    s_total = tree.n_infosets
    target = cfg.stop.target_exploitability
    reached = None
    if target is not None:
        reached = any(r.exploitability_las is not None and r.exploitability_las <= target
                      for r in log.records)
    return {
        "schema": METRICS_SCHEMA,
        "game": cfg.game.name,
        "schedule": cfg.schedule.kind,
        "solver": cfg.solver,
        "warm_start": cfg.warm.kind,
        "seed": cfg.seed,
        "stop_reason": log.stop_reason,
        "iterations": eng.t,
        "windows": k,
        "sum_infosets": x,
        "total_infosets": s_total,
        "windows_bound_holds": bool(k <= x <= s_total),
        "population_size": eng.population.size,
        "nodes": asdict(eng.counter) | {"reported": eng.counter.reported},
        "final_exploitability_las": last.exploitability_las,
        "final_exploitability_oas": last.exploitability_oas,
        "target_exploitability": target,
        "target_reached": reached,
    }


def write_run(cfg: RunConfig, directory: Path, eng: Engine, policy: np.ndarray, log: RunLog) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.toml").write_text(cfg.to_toml())
    (directory / "metrics.csv").write_text(metrics_csv(log.records))
    (directory / "events.csv").write_text(events_csv(log))
    (directory / "population.txt").write_text(eng.population.to_text())
    with open(directory / "policy.npz", "wb") as fh:
        np.savez(fh, las=policy, population=eng.population.mask)
    eng.save_snapshot(directory / "snapshot.npz")
    (directory / "summary.json").write_text(json.dumps(summarize(cfg, eng, log), indent=2, sort_keys=True) + "\n")
    return directory


def execute_run(cfg: RunConfig, root: str | Path | None = None) -> tuple[Path, dict]:
    """Run ``cfg`` and persist everything under ``root / cfg.output``."""
    directory = output_root(root) / (cfg.output or default_run_name(cfg))
    policy, log, eng = run(cfg)
    write_run(cfg, directory, eng, policy, log)
    return directory, summarize(cfg, eng, log)


def resume_run(directory: str | Path, extra_stop: RunConfig | None = None) -> tuple[Path, dict]:
    """Continue a finished run from its snapshot, appending to its metrics."""
    directory = Path(directory)
    cfg = load_run_dir_config(directory)
    if extra_stop is not None:
        if extra_stop.game != cfg.game:
            raise ConfigError("the new config plays a different game than the run being resumed")
        cfg = extra_stop
    eng = make_engine(cfg)
    eng.load_snapshot(directory / "snapshot.npz")
    eng.log.records = [MetricRecord(**r) for r in read_metrics(directory)]
    policy, log = eng.run(cfg.stop, cfg.log)
    write_run(cfg, directory, eng, policy, log)
    return directory, summarize(cfg, eng, log)


def load_run_dir_config(directory: str | Path) -> RunConfig:
    path = Path(directory) / "config.toml"
    if not path.exists():
        raise ConfigError(f"{directory} is not a run directory (no config.toml)")
    text = path.read_text()
    return RunConfig.from_dict(parse_toml(text, str(path)), text, str(path))


def _sweep_job(args: tuple[dict, str]) -> tuple[str, dict]:
    doc, root = args
    cfg = RunConfig.from_dict(doc)
    directory, summary = execute_run(cfg, root)
    return str(directory), summary


def execute_sweep(sweep: SweepConfig, root: str | Path | None = None) -> list[tuple[str, dict]]:
    """Run every grid point; independent processes, one directory each."""
    root = str(output_root(root))
    jobs = [(doc, root) for _, doc in sweep.runs()]
    if sweep.workers == 1 or len(jobs) == 1:
        return [_sweep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
        return list(pool.map(_sweep_job, jobs))


# -- reports -----------------------------------------------------------------

def find_run_dirs(paths: list[str | Path]) -> list[Path]:
    """Run directories named directly or found below the given paths."""
    out = []
    for p in map(Path, paths):
        if (p / "metrics.csv").exists():
            out.append(p)
        elif p.is_dir():
            out.extend(sorted(q.parent for q in p.rglob("metrics.csv")))
        else:
            raise ContractError(f"{p} is not a run directory")
    return out


@dataclass
class SupportOutcome:
    reached: bool
    exploitability: float | None
    report: SupportReport | None


def run_support(directory: str | Path, target: float = 1e-3, threshold: float = 1e-9) -> SupportOutcome:
    """Support of the stored final window average, if the run reached ``target``."""
    directory = Path(directory)
    cfg = load_run_dir_config(directory)
    rows = read_metrics(directory)
    if not rows:
        raise ContractError(f"{directory}: empty metrics")
    e = rows[-1]["exploitability_las"]
    if e is None or e > target:
        return SupportOutcome(False, e, None)
    game = build_game(cfg.game)
    with np.load(directory / "policy.npz") as data:
        las = data["las"]
    return SupportOutcome(True, e, support_metrics(las, game, threshold))


def first_reach(rows: list[dict], target: float) -> int | None:
    for r in rows:
        e = r["exploitability_las"]
        if e is not None and e <= target:
            return r["nodes_reported"]
    return None


def group_label(cfg: RunConfig) -> str:
    warm = "-WS" if cfg.warm.kind == "carry" else ""
    if cfg.schedule.kind == "none":
        name = cfg.solver.upper()
    else:
        name = {"xodo": "XODO", "xdo": "XDO", "pdo": "PDO", "adado": "AdaDO", "spdo": "SPDO",
                "sado": "SADO"}[cfg.schedule.kind]
        if cfg.solver == "lcfr":
            name += "(LCFR)"
    return f"{cfg.game.name}/{name}{warm}"


@dataclass
class TargetCell:
    mean: float | None
    std: float | None
    reached: int
    runs: int

    def format(self, scale: float = 1e6, digits: int = 3) -> str:
        if self.mean is None:
            return NOT_REACHED
        s = f"{self.mean / scale:.{digits}f}"
        if self.std is not None:
            s += f" ({self.std / scale:.{digits}f})"
        if self.reached < self.runs:
            s += f" [{self.reached}/{self.runs}]"
        return s


def nodes_to_target(directories: list[str | Path], targets: list[float]) -> dict[str, dict[float, TargetCell]]:
    """Per run group and target: mean (sample std) of the first reported-node count reaching it."""
    groups: dict[str, list[list[dict]]] = {}
    for d in find_run_dirs(directories):
        groups.setdefault(group_label(load_run_dir_config(d)), []).append(read_metrics(d))
    table: dict[str, dict[float, TargetCell]] = {}
    for label in sorted(groups):
        runs = groups[label]
        row = {}
        for t in targets:
            hits = [n for n in (first_reach(r, t) for r in runs) if n is not None]
            mean = statistics.fmean(hits) if hits else None
            std = statistics.stdev(hits) if len(hits) > 1 else None
            row[t] = TargetCell(mean, std, len(hits), len(runs))
        table[label] = row
    return table


def format_target_table(table: dict[str, dict[float, TargetCell]], targets: list[float],
                        scale: float = 1e6) -> str:
    head = ["algorithm"] + [f"{t:g}" for t in targets]
    rows = [head] + [[label] + [cells[t].format(scale) for t in targets] for label, cells in table.items()]
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def downsample(rows: list[dict], points: int = 200) -> list[tuple[int, float]]:
    """Keep at most about ``points`` records, evenly spaced in log node count."""
    series = [(r["nodes_reported"], r["exploitability_las"]) for r in rows if r["exploitability_las"] is not None]
    if len(series) <= points:
        return series
    lo, hi = math.log(max(1, series[0][0])), math.log(max(1, series[-1][0]))
    keep, next_edge, step = [], lo, (hi - lo) / (points - 1)
    for n, e in series:
        if math.log(max(1, n)) >= next_edge - 1e-12:
            keep.append((n, e))
            next_edge += step
    if keep[-1] != series[-1]:
        keep.append(series[-1])
    return keep


def plot_runs(directories: list[str | Path], out: str | Path, points: int = 200, svg: bool = False,
              title: str | None = None) -> list[Path]:
    """Write a series CSV and axis metadata (and optionally an SVG) for the given runs."""
    dirs = find_run_dirs(directories)
    if not dirs:
        raise ContractError("no run directories given")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "nodes_reported", "exploitability_las"])
    labels, data = [], []
    for d in dirs:
        rows = read_metrics(d)
        series = downsample(rows, points)
        if not series:
            raise ContractError(f"{d}: metrics contain no exploitability records")
        label = f"{group_label(load_run_dir_config(d))}#{d.name}"
        labels.append(label)
        data.append(series)
        for n, e in series:
            w.writerow([label, n, repr(e)])
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(buf.getvalue())
    meta = {"xscale": "log", "yscale": "log", "x": "nodes_reported", "y": "exploitability_las",
            "xlabel": "visited nodes (excluding evaluation)", "ylabel": "exploitability",
            "title": title or "", "series": labels}
    meta_path = out.with_suffix(".json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    written = [csv_path, meta_path]
    if svg:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, series in zip(labels, data):
            xs, ys = zip(*series)
            ax.plot(xs, [max(y, 1e-16) for y in ys], label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(meta["xlabel"])
        ax.set_ylabel(meta["ylabel"])
        if title:
            ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        svg_path = out.with_suffix(".svg")
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(svg_path)
    return written


def enumerate_game(game: GameTree) -> dict:
    tree = game.tree
    dec = tree.infoset_num_actions
    return {
        "game": game.name,
        "infostates_p1": game.num_infostates(0),
        "infostates_p2": game.num_infostates(1),
        "histories": tree.n_nodes,
        "terminals": int((tree.kind == KIND_TERMINAL).sum()),
        "horizon": tree.horizon,
        "max_branching": int(dec.max()) if dec.size else 0,
        "slots": tree.n_slots,
    }
