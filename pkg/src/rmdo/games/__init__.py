"""Registry of the benchmark games, addressable by name and parameter map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..core import ConfigError, GameTree
from .blotto import SequentialBlotto
from .kuhn import KuhnPoker, kuhn, large_kuhn
from .leduc import LeducPoker, leduc, leduc10, leduc_dummy
from .oshi_zumo import OshiZumo

# name -> (factory, default parameters, parameters that are 0/1 flags)
REGISTRY: dict[str, tuple[Callable[..., GameTree], dict[str, int], frozenset[str]]] = {
    "kuhn": (kuhn, {"cards": 3}, frozenset()),
    "large_kuhn": (large_kuhn, {"stack": 40, "cards": 3}, frozenset()),
    "leduc": (leduc, {"ranks": 3, "bet1": 2, "bet2": 4, "max_raises": 2}, frozenset()),
    "leduc10": (leduc10, {"ranks": 5, "bet1": 2, "bet2": 4, "max_raises": 2}, frozenset()),
    "leduc_dummy": (leduc_dummy, {"ranks": 3, "bet1": 2, "bet2": 4, "max_raises": 2}, frozenset()),
    "blotto": (lambda **kw: SequentialBlotto(**kw), {"forces": 20, "rounds": 2, "sign": 0},
               frozenset({"sign"})),
    "oshi_zumo": (lambda **kw: OshiZumo(**kw), {"coins": 4, "size": 6, "min_bid": 1, "positional": 1},
                  frozenset({"positional"})),
}

_MINIMUMS = {"cards": 2, "stack": 2, "ranks": 2, "forces": 1}


@dataclass(frozen=True)
class GameConfig:
    name: str
    parameters: dict[str, int] = field(default_factory=dict)

    def resolved(self) -> dict[str, int]:
        if self.name not in REGISTRY:
            raise ConfigError(f"unknown game {self.name!r}; choose from {sorted(REGISTRY)}")
        _, defaults, flags = REGISTRY[self.name]
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        params = {**defaults, **self.parameters}
        for k, v in params.items():
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{self.name}.{k} must be an integer, got {v!r}")
            if k in flags:
                if v not in (0, 1):
                    raise ConfigError(f"{self.name}.{k} is a 0/1 flag, got {v}")
            elif v < _MINIMUMS.get(k, 1):
                raise ConfigError(f"{self.name}.{k} must be >= {_MINIMUMS.get(k, 1)}, got {v}")
        return params


def build_game(config: GameConfig | str, **parameters: int) -> GameTree:
    if isinstance(config, str):
        config = GameConfig(config, parameters)
    params = config.resolved()
    factory = REGISTRY[config.name][0]
    game = factory(**params)
    game.name = config.name
    return game


__all__ = [
    "GameConfig", "build_game", "REGISTRY", "KuhnPoker", "LeducPoker",
    "SequentialBlotto", "OshiZumo",
]
