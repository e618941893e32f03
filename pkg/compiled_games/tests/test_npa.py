#!/usr/bin/env python
# -*- coding: utf-8 -*-

from typing import Optional, Tuple

import numpy as np
import pytest

from compiled_games import exceptions
from compiled_games.games import Game
from compiled_games.npa import (
    SdpProblem,
    canonicalize_word,
    npa_feasibility_residual,
    npa_problem,
    npa_upper_bound,
    npa_words,
    solve_sdp,
    word_label,
)
from compiled_games.strategies import QuantumStrategy, quantum_to_commuting

from .conftest import CHSH_QUANTUM_VALUE


@pytest.mark.parametrize(
    "word, expected",
    [
        ((), ()),
        ((("B", 0, 1), ("A", 1, 0)), (("A", 1, 0), ("B", 0, 1))),
        ((("A", 0, 1), ("A", 0, 1)), (("A", 0, 1),)),
        ((("A", 0, 1), ("B", 1, 0), ("A", 0, 0)), None),
        (
            (("A", 0, 1), ("A", 1, 0), ("A", 0, 1)),
            (("A", 0, 1), ("A", 1, 0), ("A", 0, 1)),
        ),
    ],
)
def test_canonicalize_word(word: Tuple, expected: Optional[Tuple]) -> None:
    assert canonicalize_word(word) == expected


def test_canonicalize_word_rejects_unknown_party() -> None:
    with pytest.raises(ValueError):
        canonicalize_word((("C", 0, 0),))


def test_word_label() -> None:
    assert word_label(()) == "1"
    assert word_label((("A", 0, 1), ("B", 1, 0))) == "E0|1 F1|0"


def test_npa_words_level_one(chsh_game: Game) -> None:
    words = npa_words(chsh_game, 1)
    assert len(words) == 9
    assert words[0] == ()


def test_npa_words_budget(magic_square_game: Game) -> None:
    with pytest.raises(exceptions.BudgetExceededError):
        npa_words(magic_square_game, 3, budget=50)


def test_solve_small_sdp() -> None:
    # maximize y subject to [[1, y], [y, 1]] >= 0
    problem = SdpProblem.from_matrices(
        c=[1.0], F0=np.eye(2), F=[np.array([[0.0, 1.0], [1.0, 0.0]])]
    )
    solution = solve_sdp(problem)
    assert solution.value == pytest.approx(1.0, abs=1e-5)


def test_npa_upper_bound_chsh(chsh_game: Game) -> None:
    value, certificate = npa_upper_bound(chsh_game, level=1)

    assert value == pytest.approx(CHSH_QUANTUM_VALUE, abs=1e-5)
    document = certificate.to_dict()
    assert document["level"] == 1
    assert len(document["words"]) == len(document["moment_matrix"])
    assert np.linalg.eigvalsh(certificate.moment_matrix).min() >= -1e-6


def test_npa_upper_bound_magic_square(magic_square_game: Game) -> None:
    value, _ = npa_upper_bound(magic_square_game, level=1)
    assert value >= 1.0 - 1e-5


@pytest.mark.parametrize("level", [1, 2])
def test_quantum_strategy_is_feasible(
    chsh_game: Game, chsh_strategy: QuantumStrategy, level: int
) -> None:
    problem = npa_problem(chsh_game, level)
    residual = npa_feasibility_residual(problem, quantum_to_commuting(chsh_strategy))
    assert residual <= 1e-9
