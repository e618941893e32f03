#!/usr/bin/env python
# -*- coding: utf-8 -*-

import hashlib
import hmac
from typing import Any, Callable, Dict

import numpy as np
import pytest

from compiled_games import constants, exceptions, numerics
from compiled_games.circuits import (
    EvalCircuit,
    Gate,
    affine_answer_circuit,
    constant_answer_circuit,
    controlled_measurement_circuit,
    simulate_branches,
)
from compiled_games.io import read_json
from compiled_games.qhe import (
    Ciphertext,
    CliffordBackend,
    IdealBackend,
    QheBackend,
    SecretKey,
    correctness_check,
    hmac_prf,
    identity_prf,
    make_backend,
    security_harness,
    wilson_interval,
)
from compiled_games.strategies import PAULI_X

from .conftest import DATA_DIR

PRF_VECTORS = read_json(DATA_DIR / "prf_vectors.json")["vectors"]


@pytest.mark.parametrize("vector", PRF_VECTORS)
def test_hmac_prf_vectors(vector: Dict[str, Any]) -> None:
    sk = SecretKey("clifford", vector["lam"], vector["key"])
    digest = int(vector["digest"], 16)

    x, z = hmac_prf(sk, vector["nonce"], 4)
    assert (x << 4) | z == digest >> (256 - 8)
    # The standard library agrees with the stored digests
    nonce = vector["nonce"].to_bytes(8, "big")
    expected = hmac.new(sk.to_bytes(), nonce, hashlib.sha256).hexdigest()
    assert expected == vector["digest"]


def test_hmac_prf_too_long() -> None:
    with pytest.raises(ValueError):
        hmac_prf(SecretKey("clifford", 8, 1), 0, 129)


@pytest.mark.parametrize("backend_name", ["ideal", "clifford"])
def test_enc_dec(backend_name: str) -> None:
    backend = make_backend(backend_name, 3, seed=0)
    sk = backend.gen(8, seed=1)
    for m in range(8):
        assert backend.dec(sk, backend.enc(sk, m)) == m


def test_make_backend_unknown() -> None:
    with pytest.raises(ValueError):
        make_backend("paillier", 2)


def test_gen_is_deterministic() -> None:
    backend = IdealBackend(1)
    assert backend.gen(16, seed=3) == backend.gen(16, seed=3)
    assert backend.gen(16, seed=3).bits < 2**16
    with pytest.raises(ValueError):
        backend.gen(0)


def test_ideal_backend_rejects_foreign_ciphertexts() -> None:
    backend = IdealBackend(2, seed=0)
    sk = backend.gen(8, seed=0)
    ct = backend.enc(sk, 1)

    with pytest.raises(exceptions.WrongKeyError):
        backend.dec(SecretKey("ideal", 8, sk.bits ^ 1), ct)
    with pytest.raises(exceptions.DecodeFailureError):
        backend.dec(sk, Ciphertext(ct.nonce + 100, ct.payload, 2, "ideal"))
    with pytest.raises(exceptions.DecodeFailureError):
        IdealBackend(2).dec(sk, ct)


def test_ciphertext_wire_format() -> None:
    ct = Ciphertext(nonce=258, payload=5, n_bits=3, backend="clifford")
    assert ct.hex() == "000000000000010205"
    assert Ciphertext.from_bytes(ct.to_bytes(), 3, "clifford") == ct

    with pytest.raises(exceptions.DecodeFailureError):
        Ciphertext.from_bytes(ct.to_bytes()[:-1], 3, "clifford")
    with pytest.raises(exceptions.DecodeFailureError):
        Ciphertext.from_bytes(bytes(8) + b"\x09", 3, "clifford")


def _measurement_circuit() -> Any:
    hadamard = [(np.eye(2) + s * PAULI_X) / 2 for s in (1, -1)]
    computational = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    return controlled_measurement_circuit(1, 1, [computational, hadamard])


@pytest.mark.parametrize(
    "backend, circuit, aux_env, env_dim",
    [
        (
            IdealBackend(2, seed=0),
            affine_answer_circuit(2, [3, 2, 1, 0]),
            np.eye(4)[0],
            1,
        ),
        (
            CliffordBackend(2, seed=0),
            affine_answer_circuit(2, [1, 0, 3, 2]),
            np.eye(4)[0],
            1,
        ),
        (
            IdealBackend(1, seed=0),
            _measurement_circuit(),
            np.kron([1.0, 0.0], np.eye(2).reshape(-1) / np.sqrt(2)),
            2,
        ),
    ],
)
def test_correctness(
    backend: QheBackend, circuit: Any, aux_env: np.ndarray, env_dim: int
) -> None:
    sk = backend.gen(8, seed=5)
    for m in range(2**backend.message_bits):
        assert correctness_check(backend, sk, m, circuit, aux_env, env_dim) <= 1e-12


def test_clifford_backend_rejects_non_clifford() -> None:
    backend = CliffordBackend(1, seed=0)
    sk = backend.gen(8, seed=0)
    assert not backend.supports(_measurement_circuit())
    with pytest.raises(exceptions.UnsupportedCircuitError):
        backend.eval_branches(
            backend.enc(sk, 0),
            _measurement_circuit(),
            np.kron([1.0, 0.0], np.eye(2).reshape(-1) / np.sqrt(2)),
            env_dim=2,
        )


@pytest.mark.parametrize(
    "gates",
    [
        (Gate("CNOT", (0, 1)),),
        (Gate("CNOT", (0, 1)), Gate("H", (1,))),
        (Gate("H", (1,)), Gate("CZ", (0, 1)), Gate("S", (1,))),
    ],
)
@pytest.mark.parametrize("m", [0, 1])
def test_clifford_residual_aux_is_decrypted(gates: tuple, m: int) -> None:
    circuit = EvalCircuit(1, 1, gates)
    backend = CliffordBackend(1, seed=0)
    aux = np.array([1.0, 0.0])

    # A key whose pad flips the message bit
    padded = []
    for bits in range(32):
        sk = SecretKey(constants.BACKEND_CLIFFORD, 8, bits)
        ct = backend.enc(sk, m)
        if backend.pad(sk, ct)[0] == 1:
            padded.append((sk, ct))
    assert padded
    sk, ct = padded[0]

    [(outcome, expected)] = simulate_branches(circuit, m, aux, keep_aux=True)
    [branch] = backend.eval_branches(ct, circuit, aux)
    assert backend.dec(sk, branch.ciphertext) == outcome == m

    residual = backend.decrypt_residual(sk, branch.ciphertext, branch.joint)
    np.testing.assert_allclose(residual, expected, atol=1e-12)
    np.testing.assert_allclose(
        branch.env, np.trace(branch.joint) * np.eye(1), atol=1e-12
    )
    if gates[0].name == "CNOT":
        # The evaluator's copy of the auxiliary wire is still padded
        assert numerics.trace_norm(branch.joint - expected) / 2 == pytest.approx(1.0)

    for bits in range(8):
        sk = SecretKey(constants.BACKEND_CLIFFORD, 8, bits)
        assert correctness_check(backend, sk, m, circuit, aux) <= 1e-12


def test_clifford_residual_aux_entangled_with_environment() -> None:
    circuit = EvalCircuit(1, 1, (Gate("CNOT", (0, 1)), Gate("H", (1,))))
    backend = CliffordBackend(1, seed=0)
    aux_env = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    for bits in range(8):
        sk = SecretKey(constants.BACKEND_CLIFFORD, 8, bits)
        for m in range(2):
            distance = correctness_check(backend, sk, m, circuit, aux_env, env_dim=2)
            assert distance <= 1e-12


def test_clifford_decrypt_residual_needs_evaluation_output() -> None:
    backend = CliffordBackend(1, seed=0)
    sk = backend.gen(8, seed=0)
    with pytest.raises(exceptions.DecodeFailureError):
        backend.decrypt_residual(sk, backend.enc(sk, 0), np.eye(2) / 2)


@pytest.mark.parametrize(
    "backend", [IdealBackend(1, seed=0), CliffordBackend(1, seed=0)]
)
def test_forget(backend: QheBackend) -> None:
    sk = backend.gen(8, seed=0)
    circuit = EvalCircuit(1, 1, (Gate("CNOT", (0, 1)),))
    ct = backend.enc(sk, 1)
    [branch] = backend.eval_branches(ct, circuit, [1.0, 0.0])
    assert backend.table_size >= 1
    assert backend.dec(sk, branch.ciphertext) == 1

    backend.forget(branch.ciphertext)
    backend.forget(ct)
    assert backend.table_size == 0
    if isinstance(backend, IdealBackend):
        with pytest.raises(exceptions.DecodeFailureError):
            backend.dec(sk, ct)


def test_eval_checks_message_wires() -> None:
    backend = IdealBackend(2, seed=0)
    sk = backend.gen(8, seed=0)
    with pytest.raises(exceptions.DimensionMismatchError):
        backend.eval(backend.enc(sk, 0), constant_answer_circuit(1, 0), [1.0, 0.0])


def test_eval_samples_a_branch() -> None:
    backend = CliffordBackend(1, seed=0)
    sk = backend.gen(8, seed=0)
    ct, env = backend.eval(
        backend.enc(sk, 1), constant_answer_circuit(1, 0), [1.0, 0.0]
    )

    assert backend.dec(sk, ct) == 0
    assert np.trace(env).real == pytest.approx(1.0)


def test_key_support() -> None:
    assert len(IdealBackend(1).key_support(64)) == 1
    assert len(CliffordBackend(1).key_support(4)) == 16
    with pytest.raises(exceptions.BudgetExceededError):
        CliffordBackend(1).key_support(9)


def _payload_bit(ct: Ciphertext, oracle: Callable[[int], Ciphertext]) -> int:
    return ct.payload & 1


@pytest.mark.parametrize(
    "backend, expected_low, expected_high",
    [
        (CliffordBackend(1, prf=identity_prf), 1.0, 1.0),
        (CliffordBackend(1), 0.0, 0.2),
        (IdealBackend(1), 0.0, 0.2),
    ],
)
def test_security_harness(
    backend: QheBackend, expected_low: float, expected_high: float
) -> None:
    estimate = security_harness(backend, 0, 1, _payload_bit, trials=400, lam=16, seed=2)

    assert expected_low <= estimate.advantage <= expected_high
    assert estimate.ci_low <= estimate.p0 - estimate.p1 <= estimate.ci_high


def test_wilson_interval() -> None:
    low, high = wilson_interval(50, 100)
    assert low < 0.5 < high
    assert wilson_interval(0, 10)[0] == pytest.approx(0.0, abs=1e-12)
    assert wilson_interval(10, 10)[1] == pytest.approx(1.0, abs=1e-12)
