"""Run and sweep configuration files (TOML) with line-level diagnostics.

A run file looks like::

    seed = 0
    output = "kuhn-pdo"

    [game]
    name = "kuhn"          # any other key is a game parameter

    [algorithm]
    solver = "cfr"         # cfr | lcfr | mccfr
    schedule = "pdo"       # none | xodo | xdo | pdo | adado | spdo | sado
    c = 100

    [warm_start]
    mode = "reset"         # reset | carry

    [stop]
    node_budget = 10_000_000
    target_exploitability = 1e-3

    [log]
    mode = "geometric"

See README.md for every key.
"""

from __future__ import annotations

import copy
import itertools
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ConfigError
from .engine import LogCadence, Schedule, StopCondition, SOLVERS
from .games import GameConfig
from .restricted import WarmStartMode

CONFIG_VERSION = 1
_NUM = (int, float)

_SCHEMA: dict[str, dict[str, tuple]] = {
    "": {"seed": (int,), "output": (str,), "version": (int,)},
    "algorithm": {"solver": (str,), "schedule": (str,), "explore": _NUM, "c": (int,), "eps0": _NUM,
                  "check_every": (int,), "target_eps": _NUM, "alpha": _NUM, "early_stop_tol": _NUM,
                  "early_stop_every": (int,)},
    "warm_start": {"mode": (str,), "eps_init": _NUM, "carry_strategy": (bool,)},
    "stop": {"node_budget": _NUM, "target_exploitability": _NUM, "max_iterations": _NUM},
    "log": {"mode": (str,), "every": (int,), "ratio": _NUM, "exploitability": (bool,), "oas": (bool,),
            "wall_time": (bool,)},
}
_INT_LIKE = {("stop", "node_budget"), ("stop", "max_iterations")}


def _line_of(text: str | None, section: str, key: str | None) -> int | None:
    """Best-effort line number of ``key`` inside ``[section]`` (or of the header)."""
    if not text:
        return None
    current = ""
    header_line = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1).replace(" ", "").replace('"', "")
            if current == section and key is None:
                return n
            if current == section:
                header_line = n
            continue
        if key is not None and current == section:
            k = line.split("=", 1)[0].strip().strip('"')
            if "=" in line and k == key:
                return n
    return header_line


def _key_in(message: str, keys) -> str | None:
    """The config key an error message is about, preferring ``section.key`` mentions."""
    keys = list(keys)
    for pattern in (r"\.{}\b", r"\b{}\b"):
        hit = next((k for k in keys if re.search(pattern.format(re.escape(k)), message)), None)
        if hit is not None:
            return hit
    return None


class _Ctx:
    def __init__(self, text: str | None, source: str) -> None:
        self.text, self.source = text, source

    def fail(self, section: str, key: str | None, msg: str) -> ConfigError:
        line = _line_of(self.text, section, key)
        where = f"{self.source}:{line}" if line else self.source
        name = ".".join(p for p in (section, key) if p)
        return ConfigError(f"{where}: {name}: {msg}" if name else f"{where}: {msg}")


def _check_types(doc: dict, ctx: _Ctx) -> None:
    for key, val in doc.items():
        if isinstance(val, dict):
            if key == "game":
                continue
            if key not in _SCHEMA:
                raise ctx.fail(key, None, f"unknown section [{key}]")
            spec = _SCHEMA[key]
            for k, v in val.items():
                if k not in spec:
                    raise ctx.fail(key, k, f"unknown key; expected one of {sorted(spec)}")
                _check_value(key, k, v, spec[k], ctx)
        else:
            spec = _SCHEMA[""]
            if key not in spec:
                raise ctx.fail("", key, f"unknown top-level key; expected one of {sorted(spec)} or a section")
            _check_value("", key, val, spec[key], ctx)


def _check_value(section: str, key: str, val: Any, types: tuple, ctx: _Ctx) -> None:
    if isinstance(val, bool) and bool not in types:
        raise ctx.fail(section, key, f"expected {types[0].__name__}, got a boolean")
    if not isinstance(val, types):
        raise ctx.fail(section, key, f"expected {types[0].__name__}, got {type(val).__name__}")
    if (section, key) in _INT_LIKE and float(val) != int(val):
        raise ctx.fail(section, key, "expected a whole number")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run."""

    game: GameConfig
    solver: str = "cfr"
    schedule: Schedule = field(default_factory=Schedule)
    explore: float = 0.6
    warm: WarmStartMode = field(default_factory=WarmStartMode)
    seed: int = 0
    stop: StopCondition = field(default_factory=lambda: StopCondition(max_iterations=1000))
    log: LogCadence = field(default_factory=LogCadence)
    output: str | None = None

    @classmethod
    def from_dict(cls, doc: dict, text: str | None = None, source: str = "<config>") -> "RunConfig":
        ctx = _Ctx(text, source)
        _check_types(doc, ctx)
        if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ctx.fail("", "version", f"unsupported config version (this build reads {CONFIG_VERSION})")
        if "game" not in doc or not isinstance(doc["game"], dict):
            raise ctx.fail("", None, "missing [game] section")
        gdoc = dict(doc["game"])
        name = gdoc.pop("name", None)
        if not isinstance(name, str):
            raise ctx.fail("game", "name" if "name" in doc["game"] else None, "a game name string is required")
        try:
            game = GameConfig(name, GameConfig(name, gdoc).resolved())
        except ConfigError as exc:
            key = _key_in(str(exc), gdoc) or "name"
            raise ctx.fail("game", key, str(exc)) from None

        alg = dict(doc.get("algorithm", {}))
        solver = alg.pop("solver", "cfr")
        explore = float(alg.pop("explore", 0.6))
        kind = alg.pop("schedule", "none")
        if solver not in SOLVERS:
            raise ctx.fail("algorithm", "solver", f"unknown solver {solver!r}; choose from {SOLVERS}")
        if not 0 < explore <= 1:
            raise ctx.fail("algorithm", "explore", "must lie in (0, 1]")
        stop_doc = dict(doc.get("stop", {}))
        for k in ("node_budget", "max_iterations"):
            if k in stop_doc:
                stop_doc[k] = int(stop_doc[k])
        parts = {}
        for section, factory, kwargs in (
            ("algorithm", Schedule, dict(kind=kind, **{k: (float(v) if k in ("eps0", "alpha", "target_eps",
                                                                              "early_stop_tol") else v)
                                                       for k, v in alg.items()})),
            ("warm_start", WarmStartMode, {("kind" if k == "mode" else k): v
                                           for k, v in doc.get("warm_start", {}).items()}),
            ("stop", StopCondition, stop_doc),
            ("log", LogCadence, dict(doc.get("log", {}))),
        ):
            try:
                parts[section] = factory(**kwargs)
            except (ConfigError, ValueError) as exc:
                key = _key_in(str(exc), doc.get(section, {}))
                raise ctx.fail(section, key, str(exc)) from None
        sched, stop, cadence = parts["algorithm"], parts["stop"], parts["log"]
        if sched.kind in ("spdo", "sado") and solver != "mccfr":
            raise ctx.fail("algorithm", "solver", f"{sched.kind} requires solver = \"mccfr\"")
        if sched.kind in ("adado", "sado") and sched.target_eps is None and stop.target_exploitability is None:
            raise ctx.fail("algorithm", "schedule",
                           f"{sched.kind} needs target_eps or [stop] target_exploitability")
        if stop.target_exploitability is not None and not cadence.exploitability:
            raise ctx.fail("log", "exploitability", "a target exploitability stop needs exploitability logging")
        seed = doc.get("seed", 0)
        if seed < 0:
            raise ctx.fail("", "seed", "must be >= 0")
        output = doc.get("output")
        if output is not None and not output.strip():
            raise ctx.fail("", "output", "must be a non-empty path")
        return cls(game=game, solver=solver, schedule=sched, explore=explore, warm=parts["warm_start"],
                   seed=seed, stop=stop, log=cadence, output=output)

    def to_dict(self) -> dict:
        """Canonical, fully explicit form (``None`` entries dropped)."""
        sched = {k: v for k, v in asdict(self.schedule).items() if v is not None and k != "kind"}
        out: dict[str, Any] = {"version": CONFIG_VERSION, "seed": self.seed}
        if self.output is not None:
            out["output"] = self.output
        out["game"] = {"name": self.game.name, **self.game.resolved()}
        out["algorithm"] = {"solver": self.solver, "schedule": self.schedule.kind, "explore": self.explore,
                            **sched}
        w = asdict(self.warm)
        out["warm_start"] = {"mode": w.pop("kind"), **w}
        out["stop"] = {k: v for k, v in asdict(self.stop).items() if v is not None}
        out["log"] = asdict(self.log)
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def parse_toml(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return RunConfig.from_dict(parse_toml(text, str(path)), text, str(path))


@dataclass(frozen=True)
class SweepConfig:
    """A base run plus axes; the cartesian product of axis values gives the runs."""

    base: dict
    axes: dict[str, list]
    name: str = "sweep"
    max_runs: int = 100
    workers: int = 1

    @classmethod
    def from_dict(cls, doc: dict, text: str | None = None, source: str = "<sweep>",
                  base_dir: Path | None = None) -> "SweepConfig":
        ctx = _Ctx(text, source)
        sw = doc.get("sweep")
        if not isinstance(sw, dict):
            raise ctx.fail("", None, "missing [sweep] section")
        extra = set(doc) - {"sweep", "base"}
        if extra:
            raise ctx.fail("", sorted(extra)[0], "unknown top-level entry; expected [sweep] and [base]")
        allowed = {"name", "max_runs", "workers", "axes", "base"}
        for k in sw:
            if k not in allowed:
                raise ctx.fail("sweep", k, f"unknown key; expected one of {sorted(allowed)}")
        if "base" in sw:
            if "base" in doc:
                raise ctx.fail("sweep", "base", "give either sweep.base or a [base] table, not both")
            bpath = (base_dir or Path(".")) / sw["base"]
            try:
                btext = bpath.read_text()
            except OSError as exc:
                raise ctx.fail("sweep", "base", f"cannot read {bpath}: {exc.strerror}") from None
            base = parse_toml(btext, str(bpath))
            RunConfig.from_dict(base, btext, str(bpath))
        elif isinstance(doc.get("base"), dict):
            base = doc["base"]
            try:
                RunConfig.from_dict(base, None, source)
            except ConfigError as exc:
                raise ConfigError(f"{exc} (in [base])") from None
        else:
            raise ctx.fail("sweep", None, "a base run is required (sweep.base path or [base] table)")
        axes = sw.get("axes", {})
        if not isinstance(axes, dict) or not axes:
            raise ctx.fail("sweep", "axes", "at least one axis is required")
        for k, v in axes.items():
            if not isinstance(v, list) or not v:
                raise ctx.fail("sweep.axes", k, "axis values must be a non-empty list")
        max_runs, workers = sw.get("max_runs", 100), sw.get("workers", 1)
        for k, v in (("max_runs", max_runs), ("workers", workers)):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ctx.fail("sweep", k, "must be a positive integer")
        total = 1
        for v in axes.values():
            total *= len(v)
        if total > max_runs:
            raise ctx.fail("sweep", "max_runs", f"{total} runs exceed the cap of {max_runs}")
        name = sw.get("name", "sweep")
        if not isinstance(name, str) or not re.fullmatch(r"[\w.-]+", name):
            raise ctx.fail("sweep", "name", "must be a simple directory name")
        out = cls(base=base, axes=dict(axes), name=name, max_runs=max_runs, workers=workers)
        for label, cfg in out.runs():
            RunConfig.from_dict(cfg, None, f"{source} [{label}]")
        return out

    def runs(self) -> list[tuple[str, dict]]:
        """(label, config dict) per grid point, in a fixed order."""
        keys = list(self.axes)
        out = []
        for combo in itertools.product(*(self.axes[k] for k in keys)):
            doc = copy.deepcopy(self.base)
            parts = []
            for k, v in zip(keys, combo):
                _set_path(doc, k)[k.rsplit(".", 1)[-1]] = v
                parts.append(f"{k.rsplit('.', 1)[-1]}-{v}")
            label = re.sub(r"[^\w.-]+", "_", "_".join(parts))
            doc["output"] = f"{self.name}/{label}"
            out.append((label, doc))
        return out


def _set_path(doc: dict, dotted: str) -> dict:
    node = doc
    for part in dotted.split(".")[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"axis {dotted!r} does not name a config key")
    return node


def load_sweep_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return SweepConfig.from_dict(parse_toml(text, str(path)), text, str(path), path.parent)

