#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Quantum homomorphic encryption of classical messages.

Two backends share one interface:

* ``IdealBackend`` keeps a private table from nonce to plaintext. Ciphertext payloads
  are uniformly random handles, so ciphertexts carry no information about the message.
  Evaluation looks the message up, runs the circuit on the simulator and re-encrypts
  each outcome.
* ``CliffordBackend`` pads the message with a Pauli one-time pad X^p Z^q whose bits
  come from HMAC-SHA256 of the key and the nonce. Evaluation runs Clifford circuits
  directly on the padded input; decryption propagates the pad through the circuit.
  The auxiliary wires leave evaluation under the propagated pad as well, and
  decrypt_residual removes it.

A backend instance holds mutable nonce tables and belongs to a single session.
Callers drop entries they are done with through forget.
"""

import hashlib
import hmac
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import numpy.typing as npt
from scipy.stats import norm

from . import constants, exceptions, numerics
from .circuits import (
    EvalCircuit,
    bits_to_int,
    int_to_bits,
    pauli_operator,
    propagate_pauli,
    simulate_branches,
)
from .types import CMatrix, Seed

###############################################################################

log = logging.getLogger(__name__)

###############################################################################


@dataclass(frozen=True)
class SecretKey:
    backend: str
    lam: int
    bits: int

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes((self.lam + 7) // 8, "big")


@dataclass(frozen=True)
class Ciphertext:
    """
    Wire format: nonce (8 byte big-endian counter) followed by the payload packed
    big-endian into ceil(n_bits / 8) bytes.
    """

    nonce: int
    payload: int
    n_bits: int
    backend: str

    def to_bytes(self) -> bytes:
        nonce = self.nonce.to_bytes(constants.NONCE_BYTES, "big")
        return nonce + self.payload.to_bytes((self.n_bits + 7) // 8, "big")

    def hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_bytes(cls, data: bytes, n_bits: int, backend: str) -> "Ciphertext":
        """
        Raises
        ------
        exceptions.DecodeFailureError
            The data has the wrong length or the payload does not fit n_bits.
        """
        expected = constants.NONCE_BYTES + (n_bits + 7) // 8
        if len(data) != expected:
            raise exceptions.DecodeFailureError(
                f"Ciphertexts of {n_bits} bits are {expected} bytes long "
                f"(received {len(data)})."
            )
        payload = int.from_bytes(data[constants.NONCE_BYTES :], "big")
        if payload >= 2**n_bits:
            raise exceptions.DecodeFailureError(
                f"Payload {payload} does not fit in {n_bits} bits."
            )
        return cls(
            nonce=int.from_bytes(data[: constants.NONCE_BYTES], "big"),
            payload=payload,
            n_bits=n_bits,
            backend=backend,
        )


class EvalBranch(NamedTuple):
    """
    One measurement branch of an evaluation. env is the environment with the
    auxiliary wires traced out, joint the residual state of the auxiliary wires (x)
    the environment as the evaluator holds it.
    """

    ciphertext: Ciphertext
    env: CMatrix
    joint: CMatrix

    @property
    def probability(self) -> float:
        return float(np.trace(self.env).real)


###############################################################################


def _random_bits(rng: np.random.Generator, n_bits: int) -> int:
    raw = int.from_bytes(rng.bytes((n_bits + 7) // 8), "big")
    return raw >> ((8 - n_bits % 8) % 8)


class QheBackend(ABC):
    """
    The shared interface of both backends.

    Parameters
    ----------
    message_bits: int
        The message length in bits.
    seed: Seed
        Seed of the randomness used by enc and eval.
        Default: None
    """

    name: str = ""

    def __init__(self, message_bits: int, seed: Seed = None):
        if message_bits < 1:
            raise ValueError(
                f"Messages need at least one bit (received {message_bits})."
            )
        self.message_bits = message_bits
        self._seed = seed
        self._rng = numerics.default_rng(seed)
        self._next_nonce = 0

    @abstractmethod
    def fresh(self, seed: Seed = None) -> "QheBackend":
        """A new backend of the same kind with empty tables."""

    def gen(self, lam: int, seed: Seed = None) -> SecretKey:
        """
        Generate a lam-bit secret key, deterministic given the seed.

        Raises
        ------
        ValueError
            lam is below 1.
        """
        if lam < 1:
            raise ValueError(
                f"The security parameter must be at least 1 (received {lam})."
            )
        return SecretKey(self.name, lam, _random_bits(numerics.default_rng(seed), lam))

    @abstractmethod
    def enc(self, sk: SecretKey, m: int) -> Ciphertext:
        pass

    @abstractmethod
    def dec(self, sk: SecretKey, ct: Ciphertext) -> int:
        pass

    @abstractmethod
    def eval_branches(
        self,
        ct: Ciphertext,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int = 1,
    ) -> List[EvalBranch]:
        """
        Homomorphically evaluate the circuit on the encrypted message and every
        measurement branch: one output ciphertext per outcome with the environment
        operator left behind (its trace is the branch probability).
        """

    def decrypt_residual(
        self, sk: SecretKey, ct: Ciphertext, joint: npt.ArrayLike
    ) -> CMatrix:
        """
        The residual auxiliary (x) environment state of the evaluation that produced
        ct, with any encryption of the auxiliary wires removed.
        """
        self.dec(sk, ct)
        return numerics.as_cmatrix(joint)

    @abstractmethod
    def forget(self, ct: Ciphertext) -> None:
        """Drop the table entry of a ciphertext. Later lookups of it fail."""

    @property
    @abstractmethod
    def table_size(self) -> int:
        """Number of ciphertexts the backend still holds state for."""

    def _branches(
        self,
        message: int,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int,
    ) -> List[Tuple[int, CMatrix, CMatrix]]:
        dims = (2**circuit.n_aux, env_dim)
        return [
            (outcome, numerics.partial_trace(joint, dims, numerics.SIDE_A), joint)
            for outcome, joint in simulate_branches(
                circuit, message, aux_env, env_dim, keep_aux=True
            )
        ]

    @abstractmethod
    def encryption_support(self, sk: SecretKey, m: int) -> List[Ciphertext]:
        """Every ciphertext exact evaluation averages over for message m under sk."""

    @abstractmethod
    def key_support(self, lam: int) -> List[SecretKey]:
        """Every key exact evaluation averages over."""

    def supports(self, circuit: EvalCircuit) -> bool:
        return True

    def eval(
        self,
        ct: Ciphertext,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int = 1,
        seed: Seed = None,
    ) -> Tuple[Ciphertext, CMatrix]:
        """
        Sample one branch of eval_branches. Returns the output ciphertext and the
        normalized residual environment state.
        """
        branches = self.eval_branches(ct, circuit, aux_env, env_dim)
        probabilities = np.array([branch.probability for branch in branches])
        rng = numerics.default_rng(seed) if seed is not None else self._rng
        choice = int(rng.choice(len(branches), p=probabilities / probabilities.sum()))
        branch = branches[choice]
        return branch.ciphertext, branch.env / branch.probability

    def _check_message(self, m: int) -> None:
        if not 0 <= m < 2**self.message_bits:
            raise ValueError(f"Message {m} does not fit {self.message_bits} bits.")

    def _check_circuit(self, circuit: EvalCircuit) -> None:
        if circuit.n_message != self.message_bits:
            raise exceptions.DimensionMismatchError(
                f"Circuit has {circuit.n_message} message wires, the backend "
                f"encrypts {self.message_bits} bits."
            )

    def _take_nonce(self) -> int:
        nonce = self._next_nonce
        self._next_nonce += 1
        return nonce

    def __str__(self) -> str:
        return f"<{type(self).__name__} [message_bits: {self.message_bits}]>"

    def __repr__(self) -> str:
        return str(self)


###############################################################################


class _IdealRecord(NamedTuple):
    key: int
    message: int
    payload: int


class IdealBackend(QheBackend):
    """
    The ideal functionality: payloads are random handles into a private table.
    """

    name = constants.BACKEND_IDEAL

    def __init__(self, message_bits: int, seed: Seed = None):
        super().__init__(message_bits, seed)
        self._table: Dict[int, _IdealRecord] = {}

    def fresh(self, seed: Seed = None) -> "IdealBackend":
        return IdealBackend(self.message_bits, seed)

    def _register(self, sk: SecretKey, m: int, payload: int) -> Ciphertext:
        nonce = self._take_nonce()
        self._table[nonce] = _IdealRecord(sk.bits, m, payload)
        return Ciphertext(nonce, payload, self.message_bits, self.name)

    def enc(self, sk: SecretKey, m: int) -> Ciphertext:
        self._check_message(m)
        return self._register(sk, m, _random_bits(self._rng, self.message_bits))

    def _lookup(self, ct: Ciphertext) -> _IdealRecord:
        record = self._table.get(ct.nonce)
        if ct.backend != self.name or record is None or record.payload != ct.payload:
            raise exceptions.DecodeFailureError(
                f"Ciphertext {ct.hex()} was not produced by this backend."
            )
        return record

    def dec(self, sk: SecretKey, ct: Ciphertext) -> int:
        """
        Raises
        ------
        exceptions.DecodeFailureError
            The ciphertext is not in the table.
        exceptions.WrongKeyError
            The ciphertext was produced under another key.
        """
        record = self._lookup(ct)
        if record.key != sk.bits:
            raise exceptions.WrongKeyError(
                f"Ciphertext {ct.hex()} was not encrypted under the given key."
            )
        return record.message

    def forget(self, ct: Ciphertext) -> None:
        self._table.pop(ct.nonce, None)

    @property
    def table_size(self) -> int:
        return len(self._table)

    def eval_branches(
        self,
        ct: Ciphertext,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int = 1,
    ) -> List[EvalBranch]:
        self._check_circuit(circuit)
        record = self._lookup(ct)
        key = SecretKey(self.name, 0, record.key)
        n_bits = self.message_bits
        return [
            EvalBranch(
                self._register(key, outcome, _random_bits(self._rng, n_bits)),
                env,
                joint,
            )
            for outcome, env, joint in self._branches(
                record.message, circuit, aux_env, env_dim
            )
        ]

    def encryption_support(self, sk: SecretKey, m: int) -> List[Ciphertext]:
        self._check_message(m)
        return [
            self._register(sk, m, payload) for payload in range(2**self.message_bits)
        ]

    def key_support(self, lam: int) -> List[SecretKey]:
        # Values do not depend on the key: a single representative suffices
        return [SecretKey(self.name, lam, 0)]


###############################################################################

# (key, nonce, message_bits) -> (x pad, z pad)
Prf = Callable[[SecretKey, int, int], Tuple[int, int]]


def hmac_prf(sk: SecretKey, nonce: int, message_bits: int) -> Tuple[int, int]:
    """
    The first 2 * message_bits bits of HMAC-SHA256(key bytes, 8 byte nonce), split into
    the X pad (leading bits) and the Z pad.
    """
    if 2 * message_bits > 256:
        raise ValueError(f"The pad of {message_bits} bits exceeds one SHA-256 digest.")
    digest = hmac.new(
        sk.to_bytes(), nonce.to_bytes(constants.NONCE_BYTES, "big"), hashlib.sha256
    ).digest()
    bits = int.from_bytes(digest, "big") >> (256 - 2 * message_bits)
    return bits >> message_bits, bits & (2**message_bits - 1)


def identity_prf(sk: SecretKey, nonce: int, message_bits: int) -> Tuple[int, int]:
    """A broken pad generator that never pads."""
    return 0, 0


class CliffordBackend(QheBackend):
    """
    Pauli one-time pad with keys derived per nonce. Decryption with a wrong key
    returns a garbled message rather than failing.

    Parameters
    ----------
    message_bits: int
        The message length in bits.
    seed: Seed
        Seed of the randomness used when sampling evaluation branches.
        Default: None
    prf: Prf
        The pad generator.
        Default: hmac_prf
    """

    name = constants.BACKEND_CLIFFORD

    def __init__(self, message_bits: int, seed: Seed = None, prf: Prf = hmac_prf):
        super().__init__(message_bits, seed)
        self.prf = prf
        self._derived: Dict[int, Tuple[Ciphertext, EvalCircuit]] = {}

    def fresh(self, seed: Seed = None) -> "CliffordBackend":
        return CliffordBackend(self.message_bits, seed, prf=self.prf)

    def _frame(
        self, sk: SecretKey, ct: Ciphertext
    ) -> Tuple[npt.NDArray[np.uint8], npt.NDArray[np.uint8]]:
        # The input pad pushed through the circuit that produced ct, on every wire
        parent, circuit = self._derived[ct.nonce]
        x, z = self.pad(sk, parent)
        aux = np.zeros(circuit.n_aux, dtype=np.uint8)
        return propagate_pauli(
            circuit,
            np.concatenate([int_to_bits(x, self.message_bits), aux]),
            np.concatenate([int_to_bits(z, self.message_bits), aux]),
        )

    def pad(self, sk: SecretKey, ct: Ciphertext) -> Tuple[int, int]:
        """The (x, z) pad of a ciphertext, propagated through any evaluation."""
        if ct.nonce not in self._derived:
            return self.prf(sk, ct.nonce, self.message_bits)

        x_out, z_out = self._frame(sk, ct)
        return (
            bits_to_int(x_out[: self.message_bits]),
            bits_to_int(z_out[: self.message_bits]),
        )

    def decrypt_residual(
        self, sk: SecretKey, ct: Ciphertext, joint: npt.ArrayLike
    ) -> CMatrix:
        """
        Undo the Pauli pad the evaluation left on the auxiliary wires.

        Raises
        ------
        exceptions.DecodeFailureError
            ct is not the output of an evaluation on this backend.
        """
        if ct.backend != self.name or ct.nonce not in self._derived:
            raise exceptions.DecodeFailureError(
                f"Ciphertext {ct.hex()} is not an evaluation output of this backend."
            )
        x_out, z_out = self._frame(sk, ct)
        pad = pauli_operator(x_out[self.message_bits :], z_out[self.message_bits :])
        joint = numerics.as_cmatrix(joint)
        unpad = np.kron(pad, np.eye(joint.shape[0] // pad.shape[0]))
        return unpad @ joint @ numerics.dagger(unpad)

    def forget(self, ct: Ciphertext) -> None:
        self._derived.pop(ct.nonce, None)

    @property
    def table_size(self) -> int:
        return len(self._derived)

    def enc(self, sk: SecretKey, m: int) -> Ciphertext:
        self._check_message(m)
        nonce = self._take_nonce()
        x, _ = self.prf(sk, nonce, self.message_bits)
        return Ciphertext(nonce, m ^ x, self.message_bits, self.name)

    def dec(self, sk: SecretKey, ct: Ciphertext) -> int:
        if ct.backend != self.name or ct.payload >= 2**self.message_bits:
            raise exceptions.DecodeFailureError(
                f"Ciphertext {ct.hex()} is not a {self.name} ciphertext."
            )
        x, _ = self.pad(sk, ct)
        return ct.payload ^ x

    def supports(self, circuit: EvalCircuit) -> bool:
        return circuit.is_clifford

    def eval_branches(
        self,
        ct: Ciphertext,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int = 1,
    ) -> List[EvalBranch]:
        """
        Raises
        ------
        exceptions.UnsupportedCircuitError
            The circuit holds a non Clifford gate.
        """
        self._check_circuit(circuit)
        gate = circuit.first_non_clifford()
        if gate is not None:
            raise exceptions.UnsupportedCircuitError(
                self.name, gate.name, "Only Clifford circuits can be evaluated."
            )

        branches = []
        for outcome, env, joint in self._branches(
            ct.payload, circuit, aux_env, env_dim
        ):
            out = Ciphertext(self._take_nonce(), outcome, self.message_bits, self.name)
            self._derived[out.nonce] = (ct, circuit)
            branches.append(EvalBranch(out, env, joint))

        return branches

    def encryption_support(self, sk: SecretKey, m: int) -> List[Ciphertext]:
        return [self.enc(sk, m)]

    def key_support(self, lam: int) -> List[SecretKey]:
        """
        Raises
        ------
        exceptions.BudgetExceededError
            lam exceeds constants.EXACT_KEY_ENUMERATION_MAX_BITS.
        """
        if lam > constants.EXACT_KEY_ENUMERATION_MAX_BITS:
            raise exceptions.BudgetExceededError(
                "Clifford key space (bits)",
                lam,
                constants.EXACT_KEY_ENUMERATION_MAX_BITS,
            )
        return [SecretKey(self.name, lam, bits) for bits in range(2**lam)]


def make_backend(name: str, message_bits: int, seed: Seed = None) -> QheBackend:
    if name == constants.BACKEND_IDEAL:
        return IdealBackend(message_bits, seed)
    if name == constants.BACKEND_CLIFFORD:
        return CliffordBackend(message_bits, seed)
    raise ValueError(
        f"Unknown backend '{name}'. Known backends: "
        f"{constants.BACKEND_IDEAL}, {constants.BACKEND_CLIFFORD}."
    )


###############################################################################


def correctness_check(
    backend: QheBackend,
    sk: SecretKey,
    m: int,
    circuit: EvalCircuit,
    aux_env: npt.ArrayLike,
    env_dim: int = 1,
) -> float:
    """
    Trace distance between the classical-quantum states (outcome, residual auxiliary
    (x) environment state) of a plaintext evaluation and of
    encrypt-evaluate-decrypt, with the auxiliary wires decrypted through
    decrypt_residual. Zero for an exact backend.
    """
    plain: Dict[int, CMatrix] = {}
    for outcome, joint in simulate_branches(
        circuit, m, aux_env, env_dim, keep_aux=True
    ):
        plain[outcome] = joint

    encrypted: Dict[int, CMatrix] = {}
    for branch in backend.eval_branches(backend.enc(sk, m), circuit, aux_env, env_dim):
        outcome = backend.dec(sk, branch.ciphertext)
        residual = backend.decrypt_residual(sk, branch.ciphertext, branch.joint)
        encrypted[outcome] = encrypted.get(outcome, 0) + residual

    side = 2**circuit.n_aux * env_dim
    zero = np.zeros((side, side), dtype=np.complex128)
    return 0.5 * sum(
        numerics.trace_norm(plain.get(o, zero) - encrypted.get(o, zero))
        for o in set(plain) | set(encrypted)
    )


# (challenge ciphertext, encryption oracle) -> guess bit
Distinguisher = Callable[[Ciphertext, Callable[[int], Ciphertext]], int]


class AdvantageEstimate(NamedTuple):
    advantage: float
    ci_low: float
    ci_high: float
    p0: float
    p1: float
    trials: int


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> Tuple[float, float]:
    z = float(norm.ppf(0.5 + confidence / 2))
    p = successes / trials
    denominator = 1 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denominator
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denominator
    return float(max(0.0, center - half)), float(min(1.0, center + half))


def security_harness(
    backend: QheBackend,
    m0: int,
    m1: int,
    distinguisher: Distinguisher,
    trials: int,
    lam: int,
    seed: Seed = None,
) -> AdvantageEstimate:
    """
    Estimate |Pr[1 | m0] - Pr[1 | m1]| for a distinguisher that sees the challenge
    ciphertext and may call an encryption oracle, but never the key.

    Both messages are encrypted with the same per-trial key and backend randomness.
    The interval is Newcombe's hybrid score interval for the difference of the two
    proportions, built from their Wilson intervals.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1 (received {trials}).")

    counts = [0, 0]
    for child in numerics.spawn_seeds(seed, trials):
        key_seed, enc_seed = child.spawn(2)
        for index, m in enumerate((m0, m1)):
            instance = backend.fresh(enc_seed)
            sk = instance.gen(lam, key_seed)

            def oracle(
                message: int, instance: QheBackend = instance, sk: SecretKey = sk
            ) -> Ciphertext:
                return instance.enc(sk, message)

            counts[index] += int(distinguisher(instance.enc(sk, m), oracle)) & 1

    p0, p1 = counts[0] / trials, counts[1] / trials
    l0, u0 = wilson_interval(counts[0], trials)
    l1, u1 = wilson_interval(counts[1], trials)
    difference = p0 - p1
    low = difference - np.sqrt((p0 - l0) ** 2 + (u1 - p1) ** 2)
    high = difference + np.sqrt((u0 - p0) ** 2 + (p1 - l1) ** 2)
    log.info(f"Distinguishing advantage over {trials} trials: {abs(difference)}")
    return AdvantageEstimate(
        advantage=abs(difference),
        ci_low=float(low),
        ci_high=float(high),
        p0=p0,
        p1=p1,
        trials=trials,
    )
