#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from compiled_games import exceptions, numerics
from compiled_games.games import Game, check_nonsignaling, winning_probability
from compiled_games.strategies import (
    ClassicalStrategy,
    QuantumStrategy,
    check_povm_family,
    classical_to_quantum,
    deterministic_strategy,
    povm_deviation,
    projective_povm_from_unitary,
    quantum_to_commuting,
    random_projective_family,
)
from compiled_games.test_utilities import (
    assert_correlations_close,
    random_povm_family,
    random_quantum_strategy,
)


def test_magic_square_strategy_is_perfect(
    magic_square_game: Game, magic_square_strategy: QuantumStrategy
) -> None:
    value = winning_probability(magic_square_game, magic_square_strategy.correlation())
    assert value == pytest.approx(1.0, abs=1e-12)


def test_deterministic_strategy(chsh_game: Game) -> None:
    strategy = deterministic_strategy([0, 0], [0, 0], chsh_game.shape)
    assert winning_probability(chsh_game, strategy.correlation()) == pytest.approx(0.75)


def test_classical_strategy_dict_round_trip() -> None:
    strategy = ClassicalStrategy(
        gamma=[0.5, 0.5],
        pA=[[[1, 0], [0, 1]], [[0, 1], [1, 0]]],
        qB=[[[1, 0]], [[0, 1]]],
    )
    loaded = ClassicalStrategy.from_dict(strategy.to_dict())
    assert_correlations_close(loaded.correlation(), strategy.correlation(), 0.0)


@pytest.mark.parametrize(
    "gamma, p_a",
    [
        pytest.param(
            [0.5, 0.6],
            [[[1, 0]], [[1, 0]]],
            marks=pytest.mark.xfail(raises=exceptions.InvalidStrategyError),
        ),
        pytest.param(
            [0.5, 0.5],
            [[[0.5, 0.6]], [[1, 0]]],
            marks=pytest.mark.xfail(raises=exceptions.InvalidStrategyError),
        ),
        pytest.param(
            [1.0],
            [[[1, 0]], [[1, 0]]],
            marks=pytest.mark.xfail(raises=exceptions.InvalidStrategyError),
        ),
    ],
)
def test_classical_strategy_invariants(gamma: list, p_a: list) -> None:
    ClassicalStrategy(gamma=gamma, pA=p_a, qB=[[[1.0]]] * len(gamma))


def test_classical_to_quantum(chsh_game: Game) -> None:
    strategy = ClassicalStrategy(
        gamma=[0.25, 0.75],
        pA=[[[1, 0], [0, 1]], [[0.5, 0.5], [1, 0]]],
        qB=[[[0, 1], [1, 0]], [[1, 0], [0.2, 0.8]]],
    )
    quantum = classical_to_quantum(strategy)
    assert_correlations_close(quantum.correlation(), strategy.correlation(), 1e-12)


def test_quantum_to_commuting(chsh_strategy: QuantumStrategy) -> None:
    commuting = quantum_to_commuting(chsh_strategy)

    assert commuting.d == 4
    assert commuting.commutation_residual <= 1e-12
    assert commuting.is_projective
    assert_correlations_close(
        commuting.correlation(), chsh_strategy.correlation(), 1e-12
    )


def test_random_quantum_strategy_is_nonsignaling(chsh_game: Game) -> None:
    strategy = random_quantum_strategy(chsh_game.shape, 3, 2, seed=5)
    assert check_nonsignaling(strategy.correlation()).is_nonsignaling(1e-12)


def test_quantum_strategy_dict_round_trip(chsh_strategy: QuantumStrategy) -> None:
    loaded = QuantumStrategy.from_dict(chsh_strategy.to_dict())
    np.testing.assert_allclose(loaded.psi, chsh_strategy.psi)
    np.testing.assert_allclose(loaded.M, chsh_strategy.M)


def test_quantum_strategy_rejects_bad_state(chsh_strategy: QuantumStrategy) -> None:
    with pytest.raises(exceptions.InvalidStrategyError):
        QuantumStrategy(psi=2 * chsh_strategy.psi, M=chsh_strategy.M, N=chsh_strategy.N)
    with pytest.raises(exceptions.DimensionMismatchError):
        QuantumStrategy(
            psi=np.ones(2) / np.sqrt(2), M=chsh_strategy.M, N=chsh_strategy.N
        )


def test_povm_checks(rng: np.random.Generator) -> None:
    assert povm_deviation(random_povm_family(2, 3, 2, rng)) <= 1e-10
    assert povm_deviation(random_projective_family(2, 3, 4, rng)) <= 1e-10

    broken = np.stack([np.stack([np.eye(2), np.eye(2)])])
    assert povm_deviation(broken) == pytest.approx(1.0)
    with pytest.raises(exceptions.InvalidStrategyError):
        check_povm_family(broken)
    with pytest.raises(exceptions.DimensionMismatchError):
        povm_deviation(np.eye(2))


def test_projective_povm_from_unitary(rng: np.random.Generator) -> None:
    u = numerics.random_unitary(5, rng)
    povm = projective_povm_from_unitary(u, 2, sizes=[1, 4])

    assert np.trace(povm[0]).real == pytest.approx(1.0)
    assert np.trace(povm[1]).real == pytest.approx(4.0)
    np.testing.assert_allclose(povm[1] @ povm[1], povm[1], atol=1e-12)
