#!/usr/bin/env python
# -*- coding: utf-8 -*-

import pathlib
from typing import List, Tuple

import numpy as np
import pytest

from compiled_games import exceptions
from compiled_games.sequential import (
    NCPolynomial,
    SequentialClassicalStrategy,
    SequentialQuantumStrategy,
    block_reduce,
    chsh_residual_polynomial,
    chsh_selftest_residual,
    commutant_basis,
    convert_classical,
    convert_purify,
    correlation_of,
    degree_separation_witness,
    generate_algebra,
    moments,
    strong_nonsig_residual,
)
from compiled_games.strategies import (
    PAULI_Z,
    ClassicalStrategy,
    QuantumStrategy,
    chsh_optimal_strategy,
)
from compiled_games.test_utilities import (
    assert_correlations_close,
    check_sequential_strategy,
    planted_commuting_strategy,
    run_sequential_conversion_checks,
)
from compiled_games.types import GameShape

from .conftest import DATA_DIR


@pytest.mark.parametrize("degree, expected", [(0, 0.0), (1, 0.0), (2, 0.5), (3, 0.5)])
def test_degree_separation_witness(degree: int, expected: float) -> None:
    residual, witness = strong_nonsig_residual(degree_separation_witness(), degree)

    assert residual == pytest.approx(expected, abs=1e-12)
    assert witness.degree <= degree


def test_degree_separation_witness_file() -> None:
    stored = SequentialQuantumStrategy.from_json(
        DATA_DIR / "degree_separation_witness.json"
    )
    built = degree_separation_witness()

    np.testing.assert_allclose(stored.sigma, built.sigma, atol=1e-15)
    np.testing.assert_allclose(stored.B, built.B, atol=1e-15)


def test_degree_separation_witness_is_not_purifiable() -> None:
    with pytest.raises(exceptions.NotStronglyNonsignalingError):
        convert_purify(degree_separation_witness())


def test_from_quantum(chsh_strategy: QuantumStrategy) -> None:
    s = SequentialQuantumStrategy.from_quantum(chsh_strategy)
    check_sequential_strategy(s)

    assert_correlations_close(correlation_of(s), chsh_strategy.correlation(), 1e-12)
    residual, _ = strong_nonsig_residual(s, 4)
    assert residual <= 1e-12
    assert chsh_selftest_residual(s) <= 1e-12


def test_convert_purify_round_trip(chsh_strategy: QuantumStrategy) -> None:
    s = SequentialQuantumStrategy.from_quantum(chsh_strategy)
    converted = convert_purify(s)

    assert converted.dB == s.dim
    assert_correlations_close(
        converted.correlation(), chsh_strategy.correlation(), 1e-7
    )


@pytest.mark.parametrize(
    "shape, blocks",
    [
        (GameShape(2, 2, 2, 2), [(2, 1)]),
        (GameShape(2, 2, 2, 2), [(2, 1), (2, 2)]),
        (GameShape(3, 2, 2, 3), [(3, 2)]),
        (GameShape(2, 3, 3, 2), [(2, 2), (2, 1)]),
    ],
)
def test_planted_blocks_are_recovered(
    shape: GameShape, blocks: List[Tuple[int, int]]
) -> None:
    strategy = planted_commuting_strategy(shape, blocks, seed=17)
    recovered = run_sequential_conversion_checks(strategy, blocks)
    assert sum(n * m for n, m in recovered) == strategy.d


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_random_planted_round_trips(seed: int) -> None:
    layouts = [
        [(2, 1)],
        [(3, 1)],
        [(2, 2)],
        [(3, 2)],
        [(2, 1), (3, 1)],
        [(2, 2), (3, 1)],
        [(3, 3), (2, 1)],
        [(2, 3), (3, 2)],
    ]
    blocks = layouts[seed % len(layouts)]
    strategy = planted_commuting_strategy(GameShape(3, 2, 2, 3), blocks, seed=seed)
    run_sequential_conversion_checks(strategy, blocks, seed=seed)


def test_planted_blocks_need_nontrivial_algebra() -> None:
    with pytest.raises(ValueError):
        planted_commuting_strategy(GameShape(2, 2, 2, 2), [(1, 2)])


def test_algebra_and_commutant(chsh_strategy: QuantumStrategy) -> None:
    assert generate_algebra(chsh_strategy.N).shape[1] == 4
    assert len(commutant_basis(chsh_strategy.N)) == 1

    diagonal = np.stack([np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])])
    assert generate_algebra(diagonal).shape[1] == 2
    assert len(commutant_basis(diagonal)) == 2


def test_block_reduce_qubit(chsh_strategy: QuantumStrategy) -> None:
    s = SequentialQuantumStrategy.from_quantum(chsh_strategy)
    decomposition, reduced = block_reduce(s)

    assert decomposition.block_shapes == [(2, 1)]
    assert decomposition.to_dict()["algebra_dimension"] == 4
    np.testing.assert_allclose(reduced.sigma, s.sigma, atol=1e-9)


def test_chsh_selftest_same_basis() -> None:
    # Alice always answers 0, Bob measures Z for both questions
    alice = np.stack([np.stack([np.eye(2), np.zeros((2, 2))])] * 2)
    z_basis = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    strategy = QuantumStrategy(
        psi=np.kron([1.0, 0.0], [1.0, 0.0]), M=alice, N=np.stack([z_basis] * 2)
    )

    s = SequentialQuantumStrategy.from_quantum(strategy)
    assert chsh_selftest_residual(s) == pytest.approx(4.0)


def test_chsh_selftest_shape(magic_square_strategy: QuantumStrategy) -> None:
    strategy = SequentialQuantumStrategy.from_quantum(magic_square_strategy)
    with pytest.raises(exceptions.ShapeMismatchError):
        chsh_selftest_residual(strategy)


def test_nc_polynomial() -> None:
    residual = chsh_residual_polynomial()
    assert residual.degree == 4

    b = chsh_optimal_strategy().N
    # {B_0, B_1} vanishes for the optimal observables
    np.testing.assert_allclose(residual.evaluate(b), np.zeros((2, 2)), atol=1e-12)

    z = NCPolynomial.monomial([(0, 0)]) - NCPolynomial.monomial([(0, 1)])
    np.testing.assert_allclose((z * z).evaluate(b), np.eye(2), atol=1e-12)
    assert z.adjoint().simplify() == z.simplify()
    assert NCPolynomial.constant(2.0).evaluate(b)[0, 0] == 2.0

    with pytest.raises(exceptions.DimensionMismatchError):
        NCPolynomial.monomial([(2, 0)]).evaluate(b)


def test_moments(chsh_strategy: QuantumStrategy) -> None:
    s = SequentialQuantumStrategy.from_quantum(chsh_strategy)
    values = moments(s, NCPolynomial.monomial([(0, 0)]))
    np.testing.assert_allclose(values, [0.5, 0.5], atol=1e-12)


def test_strong_nonsig_residual_checks(magic_square_strategy: QuantumStrategy) -> None:
    s = SequentialQuantumStrategy.from_quantum(magic_square_strategy)
    with pytest.raises(exceptions.BudgetExceededError):
        strong_nonsig_residual(s, 8)
    with pytest.raises(ValueError):
        strong_nonsig_residual(s, -1)


def test_sequential_strategy_json(tmp_path: pathlib.Path) -> None:
    sigma = np.zeros((1, 2, 2, 2), dtype=np.complex128)
    sigma[0, 0] = np.diag([0.5, 0.0])
    invalid = np.diag([0.0, 0.5])[None]
    z_basis = np.stack([(np.eye(2) + PAULI_Z) / 2, (np.eye(2) - PAULI_Z) / 2])
    s = SequentialQuantumStrategy(sigma=sigma, B=z_basis[None], invalid=invalid)

    assert s.invalid_mass == pytest.approx(0.5)
    assert correlation_of(s).subnormalized

    path = tmp_path / "sequential.json"
    s.to_json(path)
    loaded = SequentialQuantumStrategy.from_json(path)
    np.testing.assert_allclose(loaded.invalid, s.invalid)
    np.testing.assert_allclose(loaded.sigma, s.sigma)

    with pytest.raises(exceptions.InvalidStrategyError):
        convert_purify(s)


@pytest.mark.parametrize(
    "document",
    [
        {"dim": 2, "sigma": {"0-0": []}, "B": []},
        {"dim": 2, "B": []},
    ],
)
def test_sequential_strategy_schema(document: dict) -> None:
    with pytest.raises(exceptions.InvalidStrategyError):
        SequentialQuantumStrategy.from_dict(document)


def test_sequential_strategy_trace() -> None:
    sigma = np.zeros((1, 1, 2, 2))
    sigma[0, 0] = np.diag([0.5, 0.0])
    with pytest.raises(exceptions.InvalidStrategyError):
        SequentialQuantumStrategy(sigma=sigma, B=np.eye(2)[None, None])


def test_convert_classical() -> None:
    strategy = ClassicalStrategy(
        gamma=[0.3, 0.7],
        pA=[[[1, 0], [0.5, 0.5]], [[0, 1], [1, 0]]],
        qB=[[[1, 0], [0, 1]], [[0.2, 0.8], [1, 0]]],
    )
    sequential = SequentialClassicalStrategy.from_classical(strategy)
    assert_correlations_close(sequential.correlation(), strategy.correlation(), 1e-12)

    converted = convert_classical(sequential)
    np.testing.assert_allclose(converted.gamma, strategy.gamma)
    assert_correlations_close(converted.correlation(), strategy.correlation(), 1e-12)

    loaded = SequentialClassicalStrategy.from_dict(sequential.to_dict())
    np.testing.assert_allclose(loaded.pA_omega, sequential.pA_omega)


def test_convert_classical_signaling() -> None:
    # Omega equals Alice's question
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = 1.0
    p[1, 0, 1] = 1.0
    q = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    with pytest.raises(exceptions.NotStronglyNonsignalingError):
        convert_classical(SequentialClassicalStrategy(pA_omega=p, qB=q))
