#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from compiled_games import exceptions
from compiled_games.games import (
    Game,
    check_nonsignaling,
    winning_probability,
    xor_game,
)
from compiled_games.values import (
    classical_value,
    nonsignaling_value,
    seesaw_lower_bound,
    seesaw_run,
)

from .conftest import CHSH_QUANTUM_VALUE


@pytest.mark.parametrize(
    "game_fixture, expected",
    [
        ("chsh_game", 0.75),
        ("magic_square_game", 8 / 9),
    ],
)
def test_classical_value(
    game_fixture: str, expected: float, request: pytest.FixtureRequest
) -> None:
    game = request.getfixturevalue(game_fixture)
    value, strategy = classical_value(game)

    assert value == pytest.approx(expected, abs=1e-12)
    assert winning_probability(game, strategy.correlation()) == pytest.approx(value)


def test_classical_value_trivial_xor() -> None:
    value, strategy = classical_value(xor_game([[0, 0, 0], [0, 0, 0]]))
    assert value == pytest.approx(1.0)
    # Ties resolve to the smallest maps
    np.testing.assert_array_equal(strategy.pA[0].argmax(axis=1), [0, 0])


def test_classical_value_budget(chsh_game: Game) -> None:
    with pytest.raises(exceptions.BudgetExceededError):
        classical_value(chsh_game, budget=8)


@pytest.mark.parametrize("game_fixture", ["chsh_game", "magic_square_game"])
def test_nonsignaling_value(game_fixture: str, request: pytest.FixtureRequest) -> None:
    game = request.getfixturevalue(game_fixture)
    value, correlation = nonsignaling_value(game, return_correlation=True)

    assert value == pytest.approx(1.0, abs=1e-7)
    assert check_nonsignaling(correlation).is_nonsignaling(1e-7)
    assert winning_probability(game, correlation) == pytest.approx(value, abs=1e-7)


def test_nonsignaling_value_return_types(chsh_game: Game) -> None:
    value = nonsignaling_value(chsh_game)
    assert isinstance(value, float)

    result = nonsignaling_value(chsh_game, return_correlation=True)
    assert isinstance(result, tuple) and len(result) == 2
    assert result[0] == pytest.approx(value, abs=1e-7)


def test_seesaw_history_is_monotone(chsh_game: Game) -> None:
    run = seesaw_run(chsh_game, 2, iters=50, seed=3)
    assert np.all(np.diff(run.history) >= -1e-10)
    assert run.value <= CHSH_QUANTUM_VALUE + 1e-9


def test_seesaw_lower_bound_chsh(chsh_game: Game) -> None:
    value, strategy = seesaw_lower_bound(chsh_game, 2, restarts=10, seed=0)

    assert value >= 0.85345
    assert value <= CHSH_QUANTUM_VALUE + 1e-9
    assert winning_probability(chsh_game, strategy.correlation()) == pytest.approx(
        value
    )


def test_seesaw_independent_of_threads(chsh_game: Game) -> None:
    one, _ = seesaw_lower_bound(chsh_game, 2, restarts=4, iters=20, seed=9, threads=1)
    many, _ = seesaw_lower_bound(
        chsh_game, 2, restarts=4, iters=20, seed=9, threads=4
    )
    assert one == many


@pytest.mark.parametrize(
    "d, restarts",
    [
        pytest.param(1, 2, marks=pytest.mark.xfail(raises=ValueError)),
        pytest.param(2, 0, marks=pytest.mark.xfail(raises=ValueError)),
    ],
)
def test_seesaw_argument_checks(chsh_game: Game, d: int, restarts: int) -> None:
    seesaw_lower_bound(chsh_game, d, restarts=restarts)
