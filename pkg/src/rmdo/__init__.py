"""Regret-minimizing double oracle solvers for two-player zero-sum extensive-form games."""

from .core import (ConfigError, ContractError, GameTree, HistoryRef, InfoStateKey, NodeCounter,
                   Player, StructuralError, Tree, count_visit)
from .games import GameConfig, build_game

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "GameTree", "HistoryRef", "InfoStateKey", "NodeCounter",
    "Player", "StructuralError", "Tree", "count_visit", "GameConfig", "build_game",
]
