#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from compiled_games import compiled, constants, exceptions, sequential
from compiled_games.games import Game, winning_probability
from compiled_games.npa import npa_upper_bound
from compiled_games.qhe import CliffordBackend, IdealBackend, make_backend
from compiled_games.sequential import SequentialQuantumStrategy
from compiled_games.strategies import QuantumStrategy
from compiled_games.test_utilities import random_quantum_strategy
from compiled_games.types import GameShape
from compiled_games.values import classical_value, nonsignaling_value

from .conftest import CHSH_QUANTUM_VALUE

###############################################################################


@pytest.mark.parametrize(
    "shape, expected",
    [
        ((2, 2, 2, 2), 1),
        ((3, 3, 4, 4), 2),
        ((5, 2, 2, 2), 3),
        ((2, 2, 9, 2), 4),
        ((1, 1, 1, 1), 1),
    ],
)
def test_message_bits(shape: tuple, expected: int) -> None:
    assert compiled.message_bits(GameShape(*shape)) == expected


def test_honest_chsh_exact_value(
    chsh_game: Game, chsh_strategy: QuantumStrategy
) -> None:
    prover = compiled.HonestProver(chsh_strategy)
    value, correlation, data = compiled.exact_value(
        chsh_game, prover, IdealBackend(1, seed=0), lam=8
    )
    assert value == pytest.approx(CHSH_QUANTUM_VALUE, abs=1e-9)
    assert correlation.p.shape == (2, 2, 2, 2)
    assert np.trace(data.invalid.sum(axis=0)).real == pytest.approx(0, abs=1e-12)

    # Bob's observables anticommute on every extracted state
    assert sequential.chsh_selftest_residual(data) <= 1e-8


@pytest.mark.parametrize(
    "backend", [constants.BACKEND_IDEAL, constants.BACKEND_CLIFFORD]
)
def test_honest_classical_exact_value(chsh_game: Game, backend: str) -> None:
    expected, strategy = classical_value(chsh_game)
    prover = compiled.HonestProver(strategy)
    instance = make_backend(backend, 1, seed=0)
    value, _, _ = compiled.exact_value(chsh_game, prover, instance, lam=3)
    assert value == pytest.approx(expected, abs=1e-9)
    assert value == pytest.approx(0.75, abs=1e-9)
    # Every ciphertext of the evaluation was released
    assert instance.table_size == 0


def test_honest_magic_square(
    magic_square_game: Game, magic_square_strategy: QuantumStrategy
) -> None:
    prover = compiled.HonestProver(magic_square_strategy)
    value, _, _ = compiled.exact_value(
        magic_square_game, prover, IdealBackend(2, seed=0), lam=4
    )
    assert value == pytest.approx(1.0, abs=1e-9)

    with pytest.raises(exceptions.UnsupportedCircuitError):
        compiled.exact_value(
            magic_square_game, prover, CliffordBackend(2, seed=0), lam=4
        )


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_honest_random_strategies_complete(chsh_game: Game, seed: int) -> None:
    strategy = random_quantum_strategy(chsh_game.shape, seed=seed)
    expected = winning_probability(chsh_game, strategy.correlation())
    value, _, _ = compiled.exact_value(
        chsh_game, compiled.HonestProver(strategy), IdealBackend(1, seed=seed), lam=8
    )
    assert value >= expected - 1e-9
    assert value == pytest.approx(expected, abs=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("fixture", ["chsh_game", "magic_square_game"])
def test_battery_respects_relaxation(
    request: pytest.FixtureRequest, fixture: str
) -> None:
    g = request.getfixturevalue(fixture)
    bound, _ = npa_upper_bound(g, level=1)
    ns_value = nonsignaling_value(g)

    secure = compiled.adversary_battery(g, constants.BACKEND_IDEAL, lam=4, seed=0)
    assert secure.max_value <= bound + 1e-6
    for residual in secure.residuals.values():
        assert residual <= 1e-9

    insecure = compiled.adversary_battery(
        g, constants.BACKEND_IDEAL, lam=4, insecure=True, seed=0
    )
    assert insecure.values[compiled.PROVER_KEY_STEALER] >= ns_value - 1e-6


def test_exact_value_backend_bits(
    chsh_game: Game, chsh_strategy: QuantumStrategy
) -> None:
    with pytest.raises(exceptions.DimensionMismatchError):
        compiled.exact_value(
            chsh_game,
            compiled.HonestProver(chsh_strategy),
            IdealBackend(2, seed=0),
            lam=4,
        )


def test_exact_value_needs_white_box(chsh_game: Game) -> None:
    with pytest.raises(exceptions.NotWhiteBoxError):
        compiled.exact_value(
            chsh_game, compiled.GarbageProver(), IdealBackend(1, seed=0), lam=4
        )


def test_key_stealer(chsh_game: Game) -> None:
    prover = compiled.KeyStealer(chsh_game)
    backend = IdealBackend(1, seed=0)
    value, _, data = compiled.exact_value(
        chsh_game, prover, backend, lam=4, insecure=True
    )
    assert value == pytest.approx(1.0, abs=1e-6)
    assert backend.table_size == 0
    # Bob's states depend on Alice's question
    assert sequential.strong_nonsig_residual(data, 2)[0] > 0.1

    with pytest.raises(exceptions.InsecureAccessError):
        compiled.exact_value(
            chsh_game, prover, IdealBackend(1, seed=0), lam=4, insecure=False
        )


@pytest.mark.parametrize(
    "backend", [constants.BACKEND_IDEAL, constants.BACKEND_CLIFFORD]
)
def test_ciphertext_guessing_below_quantum(chsh_game: Game, backend: str) -> None:
    value, _, _ = compiled.exact_value(
        chsh_game,
        compiled.CiphertextGuessingProver(chsh_game),
        make_backend(backend, 1, seed=0),
        lam=4,
    )
    assert 0 <= value <= 1
    if backend == constants.BACKEND_IDEAL:
        assert value == pytest.approx(0.75, abs=1e-9)


@pytest.mark.parametrize(
    "x0",
    [
        0,
        1,
        pytest.param(2, marks=pytest.mark.xfail(raises=ValueError)),
        pytest.param(-1, marks=pytest.mark.xfail(raises=ValueError)),
    ],
)
def test_replay_cheater(
    chsh_game: Game, chsh_strategy: QuantumStrategy, x0: int
) -> None:
    data = SequentialQuantumStrategy.from_quantum(chsh_strategy)
    prover = compiled.ReplayCheater(data, x0)
    value, _, extracted = compiled.exact_value(
        chsh_game, prover, IdealBackend(1, seed=0), lam=4
    )
    assert value <= 0.75 + 1e-9
    assert sequential.strong_nonsig_residual(extracted, 2)[0] == pytest.approx(
        0, abs=1e-9
    )


def test_random_sequential_cheater(chsh_game: Game) -> None:
    prover = compiled.random_sequential_cheater(chsh_game.shape, dim=2, seed=3)
    value, _, extracted = compiled.exact_value(
        chsh_game, prover, IdealBackend(1, seed=0), lam=4
    )
    assert value <= 0.75 + 1e-9
    assert sequential.strong_nonsig_residual(extracted, 2)[0] == pytest.approx(
        0, abs=1e-9
    )


###############################################################################


def test_prover_round_order(chsh_strategy: QuantumStrategy) -> None:
    backend = IdealBackend(1, seed=0)
    sk = backend.gen(4, seed=1)
    xi = backend.enc(sk, 1)
    api = compiled.ProverApi(backend, sk)

    prover = compiled.HonestProver(chsh_strategy)
    with pytest.raises(exceptions.ProtocolViolationError):
        prover.second_round(0)

    prover.first_round(xi, api, seed=2)
    with pytest.raises(exceptions.ProtocolViolationError):
        prover.first_round(xi, api, seed=2)

    assert prover.second_round(0) in (0, 1)
    with pytest.raises(exceptions.ProtocolViolationError):
        prover.second_round(1)

    clone = prover.fresh()
    clone.first_round(xi, api, seed=2)


def test_prover_api_key_access() -> None:
    backend = IdealBackend(1, seed=0)
    sk = backend.gen(4, seed=1)
    xi = backend.enc(sk, 1)

    with pytest.raises(exceptions.InsecureAccessError):
        compiled.ProverApi(backend, sk).secret_key()

    api = compiled.ProverApi(backend, sk, insecure=True)
    assert api.secret_key() == sk
    assert api.decrypt(xi) == 1


def test_verifier_session_order(chsh_game: Game) -> None:
    session = compiled.VerifierSession(chsh_game, IdealBackend(1, seed=0), lam=4)
    with pytest.raises(exceptions.ProtocolViolationError):
        session.api()
    with pytest.raises(exceptions.ProtocolViolationError):
        session.receive_alpha(None)  # type: ignore
    with pytest.raises(exceptions.ProtocolViolationError):
        session.finish(0)

    xi = session.start(seed=5)
    assert session.state is compiled.SessionState.SENT_XI
    with pytest.raises(exceptions.ProtocolViolationError):
        session.start(seed=5)
    with pytest.raises(exceptions.ProtocolViolationError):
        session.finish(0)

    y = session.receive_alpha(xi)
    assert y == session.y
    transcript = session.finish(0)
    assert session.state is compiled.SessionState.DONE
    assert transcript.a == session.x
    with pytest.raises(exceptions.ProtocolViolationError):
        session.finish(0)


def test_run_session(chsh_game: Game, chsh_strategy: QuantumStrategy) -> None:
    backend = IdealBackend(1, seed=0)
    first = compiled.run_session(
        chsh_game, compiled.HonestProver(chsh_strategy), backend, lam=4, seed=11
    )
    second = compiled.run_session(
        chsh_game, compiled.HonestProver(chsh_strategy), backend, lam=4, seed=11
    )
    assert first.to_dict() == second.to_dict()
    assert first.seed == 11
    assert set(first.to_dict()) == {
        "x",
        "y",
        "xi_hex",
        "alpha_hex",
        "a",
        "b",
        "accept",
        "seed",
    }
    assert first.accept == bool(chsh_game.V[first.x, first.y, first.a, first.b])


def test_run_session_reused_prover(
    chsh_game: Game, chsh_strategy: QuantumStrategy
) -> None:
    prover = compiled.HonestProver(chsh_strategy)
    backend = IdealBackend(1, seed=0)
    compiled.run_session(chsh_game, prover, backend, lam=4, seed=1)
    with pytest.raises(exceptions.ProtocolViolationError):
        compiled.run_session(chsh_game, prover, backend, lam=4, seed=2)


def test_garbage_prover_rejected(chsh_game: Game) -> None:
    transcript = compiled.run_session(
        chsh_game, compiled.GarbageProver(), IdealBackend(1, seed=0), lam=4, seed=3
    )
    assert transcript.a is None
    assert not transcript.accept


###############################################################################


def test_monte_carlo_value(chsh_game: Game, chsh_strategy: QuantumStrategy) -> None:
    prover = compiled.HonestProver(chsh_strategy)
    backend = IdealBackend(1, seed=0)
    single = compiled.monte_carlo_value(
        chsh_game, prover, backend, lam=4, trials=40, seed=9, threads=1
    )
    pooled = compiled.monte_carlo_value(
        chsh_game, prover, backend, lam=4, trials=40, seed=9, threads=3
    )
    assert single.trials == 40
    assert len(single.transcripts) == 40
    assert single.accepted == pooled.accepted
    assert [t.to_dict() for t in single.transcripts] == [
        t.to_dict() for t in pooled.transcripts
    ]
    assert single.value == single.accepted / 40


@pytest.mark.slow
def test_monte_carlo_close_to_exact(
    chsh_game: Game, chsh_strategy: QuantumStrategy
) -> None:
    estimate = compiled.monte_carlo_value(
        chsh_game,
        compiled.HonestProver(chsh_strategy),
        IdealBackend(1, seed=0),
        lam=4,
        trials=2000,
        seed=21,
        threads=4,
    )
    assert abs(estimate.value - CHSH_QUANTUM_VALUE) <= 4 * estimate.stderr + 1e-3


@pytest.mark.parametrize(
    "trials",
    [
        1,
        pytest.param(0, marks=pytest.mark.xfail(raises=ValueError)),
        pytest.param(-3, marks=pytest.mark.xfail(raises=ValueError)),
    ],
)
def test_monte_carlo_trials(chsh_game: Game, trials: int) -> None:
    compiled.monte_carlo_value(
        chsh_game,
        compiled.CiphertextGuessingProver(chsh_game),
        IdealBackend(1, seed=0),
        lam=4,
        trials=trials,
    )


###############################################################################


@pytest.mark.parametrize(
    "name, expected_type",
    [
        (compiled.PROVER_HONEST, compiled.HonestProver),
        (compiled.PROVER_CIPHERTEXT_GUESSING, compiled.CiphertextGuessingProver),
        (compiled.PROVER_KEY_STEALER, compiled.KeyStealer),
        (compiled.PROVER_GARBAGE, compiled.GarbageProver),
        (compiled.PROVER_REPLAY, compiled.ReplayCheater),
        pytest.param(
            "oracle", None, marks=pytest.mark.xfail(raises=ValueError)
        ),
    ],
)
def test_make_prover(chsh_game: Game, name: str, expected_type: type) -> None:
    assert isinstance(compiled.make_prover(name, chsh_game), expected_type)


def test_battery_members(chsh_game: Game) -> None:
    names = [name for name, _ in compiled.battery_members(chsh_game)]
    assert names == [
        "replay-reference-x0",
        "replay-reference-x1",
        "replay-random-0",
        "replay-random-1",
        compiled.PROVER_CIPHERTEXT_GUESSING,
    ]

    insecure = [name for name, _ in compiled.battery_members(chsh_game, insecure=True)]
    assert insecure[-1] == compiled.PROVER_KEY_STEALER


def test_adversary_battery_secure(chsh_game: Game) -> None:
    report = compiled.adversary_battery(
        chsh_game, constants.BACKEND_IDEAL, lam=4, seed=0
    )
    assert not report.skipped
    assert report.max_value <= CHSH_QUANTUM_VALUE + 1e-6
    assert report.max_value == max(report.values.values())
    for residual in report.residuals.values():
        assert residual == pytest.approx(0, abs=1e-8)
    assert set(report.to_dict()) == {"values", "residuals", "skipped", "max_value"}


def test_adversary_battery_insecure(chsh_game: Game) -> None:
    report = compiled.adversary_battery(
        chsh_game, constants.BACKEND_IDEAL, lam=4, insecure=True, seed=0
    )
    assert report.values[compiled.PROVER_KEY_STEALER] == pytest.approx(1.0, abs=1e-6)
    assert report.max_value == pytest.approx(1.0, abs=1e-6)
    assert report.residuals[compiled.PROVER_KEY_STEALER] > 0.1


def test_adversary_battery_clifford(chsh_game: Game) -> None:
    report = compiled.adversary_battery(
        chsh_game, constants.BACKEND_CLIFFORD, lam=3, seed=0
    )
    # every battery member is a Clifford circuit
    assert not report.skipped
    assert len(report.values) == 5


###############################################################################


def test_value_sequence(chsh_game: Game, chsh_strategy: QuantumStrategy) -> None:
    sequence = compiled.value_sequence(
        chsh_game,
        lambda lam: compiled.HonestProver(chsh_strategy),
        [1, 2, 4, 8],
    )
    assert sequence.lams == [1, 2, 4, 8]
    assert sequence.values == pytest.approx([CHSH_QUANTUM_VALUE] * 4, abs=1e-9)
    assert sequence.liminf == pytest.approx(sequence.limsup, abs=1e-12)
    assert sequence.to_dict()["lambdas"] == [1, 2, 4, 8]


def test_value_sequence_empty(chsh_game: Game, chsh_strategy: QuantumStrategy) -> None:
    with pytest.raises(exceptions.EmptyListError):
        compiled.value_sequence(
            chsh_game, lambda lam: compiled.HonestProver(chsh_strategy), []
        )


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_polynomial_security_residual_methods(degree: int) -> None:
    witness = sequential.degree_separation_witness()
    direct = compiled.polynomial_security_residual(
        witness, degree, compiled.METHOD_DIRECT
    )
    encoded = compiled.polynomial_security_residual(
        witness, degree, compiled.METHOD_BLOCKENC
    )
    assert encoded == pytest.approx(direct, abs=1e-9)


def test_polynomial_security_residual_method_name() -> None:
    with pytest.raises(ValueError):
        compiled.polynomial_security_residual(
            sequential.degree_separation_witness(), 1, "guess"
        )
