#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Shared fixtures: catalog games written to disk for the file based entry points, the
known strategies, and seeded generators. Games and strategies are cheap to build, so
every fixture is function scoped.
"""

import pathlib

import numpy as np
import pytest

from compiled_games import numerics
from compiled_games.games import Game, chsh, magic_square
from compiled_games.strategies import (
    QuantumStrategy,
    chsh_optimal_strategy,
    magic_square_perfect_strategy,
)

CHSH_QUANTUM_VALUE = (2 + np.sqrt(2)) / 4
DATA_DIR = pathlib.Path(__file__).parent.parent / "data"


@pytest.fixture
def chsh_game() -> Game:
    return chsh()


@pytest.fixture
def magic_square_game() -> Game:
    return magic_square()


@pytest.fixture
def chsh_strategy() -> QuantumStrategy:
    return chsh_optimal_strategy()


@pytest.fixture
def magic_square_strategy() -> QuantumStrategy:
    return magic_square_perfect_strategy()


@pytest.fixture
def chsh_file(tmp_path: pathlib.Path) -> pathlib.Path:
    path = tmp_path / "chsh.json"
    chsh().to_json(path)
    return path


@pytest.fixture
def magic_square_file(tmp_path: pathlib.Path) -> pathlib.Path:
    path = tmp_path / "magic-square.json"
    magic_square().to_json(path)
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return numerics.default_rng(1234)
