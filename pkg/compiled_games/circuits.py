#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Qubit circuits evaluated under encryption.

Wires 0 .. n_message - 1 hold the message, the remaining n_aux wires hold the
evaluator's auxiliary register. Wire 0 is the most significant bit of a basis index.
An auxiliary register may be entangled with an environment the circuit never touches;
measuring the message wires leaves the environment in one subnormalized state per
outcome.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from . import exceptions, numerics
from .types import CMatrix

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

GATE_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    "S": np.diag([1, 1j]).astype(np.complex128),
    "SDG": np.diag([1, -1j]).astype(np.complex128),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(np.complex128),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
    ),
}

CLIFFORD_GATES = frozenset(GATE_MATRICES)
UNITARY_GATE = "U"

###############################################################################


@dataclass(frozen=True, eq=False)
class Gate:
    """
    A named gate on the listed wires. The generic gate "U" carries its own unitary,
    indexed with the first listed wire as most significant bit.
    """

    name: str
    wires: Tuple[int, ...]
    matrix: Optional[CMatrix] = None

    def __post_init__(self) -> None:
        wires = tuple(int(w) for w in self.wires)
        if len(set(wires)) != len(wires):
            raise exceptions.DimensionMismatchError(
                f"Gate {self.name} repeats a wire {wires}."
            )
        if self.name == UNITARY_GATE:
            if self.matrix is None:
                raise ValueError("Gates named 'U' need a matrix.")
            matrix = numerics.as_cmatrix(self.matrix)
            if matrix.shape != (2 ** len(wires), 2 ** len(wires)):
                raise exceptions.DimensionMismatchError(
                    f"Matrix of shape {matrix.shape} does not act on "
                    f"{len(wires)} wires."
                )
            if not numerics.is_unitary(matrix):
                raise ValueError("Gate matrix is not unitary.")
            object.__setattr__(self, "matrix", matrix)
        elif self.name in GATE_MATRICES:
            expected = int(np.log2(GATE_MATRICES[self.name].shape[0]))
            if len(wires) != expected:
                raise exceptions.DimensionMismatchError(
                    f"Gate {self.name} acts on {expected} wires (received {wires})."
                )
            object.__setattr__(self, "matrix", GATE_MATRICES[self.name])
        else:
            raise ValueError(f"Unknown gate '{self.name}'.")

        object.__setattr__(self, "wires", wires)

    @property
    def is_clifford(self) -> bool:
        return self.name in CLIFFORD_GATES


@dataclass(frozen=True)
class EvalCircuit:
    """
    A circuit over n_message + n_aux wires. The message wires are measured in the
    computational basis at the end and form the circuit's classical output.
    """

    n_message: int
    n_aux: int
    gates: Tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.n_message < 1 or self.n_aux < 0:
            raise exceptions.DimensionMismatchError(
                f"Circuits need at least one message wire "
                f"(received {self.n_message} message, {self.n_aux} auxiliary)."
            )
        gates = tuple(self.gates)
        for gate in gates:
            if any(w < 0 or w >= self.n_wires for w in gate.wires):
                raise exceptions.DimensionMismatchError(
                    f"Gate {gate.name} on wires {gate.wires} is outside "
                    f"the {self.n_wires} declared wires."
                )
        object.__setattr__(self, "gates", gates)

    @property
    def n_wires(self) -> int:
        return self.n_message + self.n_aux

    @property
    def is_clifford(self) -> bool:
        return all(gate.is_clifford for gate in self.gates)

    def first_non_clifford(self) -> Optional[Gate]:
        for gate in self.gates:
            if not gate.is_clifford:
                return gate
        return None


###############################################################################


def int_to_bits(value: int, n_bits: int) -> npt.NDArray[np.uint8]:
    """Bits of value, most significant first."""
    return np.array(
        [(value >> (n_bits - 1 - i)) & 1 for i in range(n_bits)], dtype=np.uint8
    )


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def _apply_gate(state: CMatrix, gate: Gate) -> CMatrix:
    k = len(gate.wires)
    assert gate.matrix is not None
    tensor = gate.matrix.reshape((2,) * (2 * k))
    out = np.tensordot(tensor, state, axes=(list(range(k, 2 * k)), list(gate.wires)))
    return np.moveaxis(out, list(range(k)), list(gate.wires))


def apply_circuit(
    circuit: EvalCircuit, state: npt.ArrayLike, env_dim: int = 1
) -> CMatrix:
    """
    Apply the circuit to a vector on the circuit wires (x) an untouched environment
    of dimension env_dim.
    """
    vector = np.asarray(state, dtype=np.complex128).reshape(-1)
    if vector.size != 2**circuit.n_wires * env_dim:
        raise exceptions.DimensionMismatchError(
            f"Vector of dimension {vector.size} does not match {circuit.n_wires} wires "
            f"and an environment of dimension {env_dim}."
        )
    tensor = vector.reshape((2,) * circuit.n_wires + (env_dim,))
    for gate in circuit.gates:
        tensor = _apply_gate(tensor, gate)

    return tensor.reshape(-1)


def simulate_branches(
    circuit: EvalCircuit,
    message: int,
    aux_env: npt.ArrayLike,
    env_dim: int = 1,
    keep_aux: bool = False,
) -> List[Tuple[int, CMatrix]]:
    """
    Run the circuit on |message> (x) aux_env and measure the message wires.

    Parameters
    ----------
    circuit: EvalCircuit
        The circuit.
    message: int
        The computational basis input of the message wires.
    aux_env: npt.ArrayLike
        A unit vector on the auxiliary wires (x) the environment.
    env_dim: int
        The environment dimension.
        Default: 1
    keep_aux: bool
        Return the residual state of the auxiliary wires (x) the environment instead
        of tracing the auxiliary wires out.
        Default: False

    Returns
    -------
    branches: List[Tuple[int, CMatrix]]
        (outcome, residual operator) for every outcome of nonzero probability. The
        trace of each operator is the outcome's probability.
    """
    if not 0 <= message < 2**circuit.n_message:
        raise ValueError(f"Message {message} does not fit {circuit.n_message} wires.")
    aux_env = np.asarray(aux_env, dtype=np.complex128).reshape(-1)
    n_aux_states = 2**circuit.n_aux
    if aux_env.size != n_aux_states * env_dim:
        raise exceptions.DimensionMismatchError(
            f"Auxiliary vector of dimension {aux_env.size} does not match "
            f"{circuit.n_aux} auxiliary wires and an environment of dimension "
            f"{env_dim}."
        )

    state = np.zeros((2**circuit.n_message, aux_env.size), dtype=np.complex128)
    state[message] = aux_env
    out = apply_circuit(circuit, state, env_dim=env_dim).reshape(
        2**circuit.n_message, n_aux_states, env_dim
    )

    branches: List[Tuple[int, CMatrix]] = []
    for outcome in range(out.shape[0]):
        phi = out[outcome]
        if np.vdot(phi, phi).real <= 1e-15:
            continue
        if keep_aux:
            residual = np.outer(phi.reshape(-1), phi.reshape(-1).conj())
        else:
            residual = phi.T @ phi.conj()
        branches.append((outcome, residual))

    return branches


def pauli_operator(x: npt.ArrayLike, z: npt.ArrayLike) -> CMatrix:
    """X^x Z^z on len(x) wires, wire 0 most significant."""
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    z = np.asarray(z, dtype=np.uint8).reshape(-1)
    if x.size != z.size:
        raise exceptions.DimensionMismatchError(
            f"Pauli keys of length {x.size} and {z.size} differ."
        )
    operator = np.eye(1, dtype=np.complex128)
    for xi, zi in zip(x, z):
        factor = np.linalg.matrix_power(GATE_MATRICES["X"], int(xi)) @ (
            np.linalg.matrix_power(GATE_MATRICES["Z"], int(zi))
        )
        operator = np.kron(operator, factor)
    return operator


###############################################################################


def propagate_pauli(
    circuit: EvalCircuit,
    x: npt.ArrayLike,
    z: npt.ArrayLike,
) -> Tuple[npt.NDArray[np.uint8], npt.NDArray[np.uint8]]:
    """
    Conjugate the Pauli X^x Z^z through a Clifford circuit, returning (x', z') with
    C X^x Z^z = X^x' Z^z' C up to a global phase. The update is linear over GF(2).

    Raises
    ------
    exceptions.UnsupportedCircuitError
        The circuit holds a gate outside the Clifford set.
    """
    x = np.asarray(x, dtype=np.uint8).copy()
    z = np.asarray(z, dtype=np.uint8).copy()
    if x.size != circuit.n_wires or z.size != circuit.n_wires:
        raise exceptions.DimensionMismatchError(
            f"Pauli keys of length {x.size} / {z.size} do not match "
            f"{circuit.n_wires} wires."
        )

    for gate in circuit.gates:
        w = gate.wires
        if gate.name in ("I", "X", "Y", "Z"):
            continue
        elif gate.name == "H":
            x[w[0]], z[w[0]] = z[w[0]], x[w[0]]
        elif gate.name in ("S", "SDG"):
            z[w[0]] ^= x[w[0]]
        elif gate.name == "CNOT":
            control, target = w
            x[target] ^= x[control]
            z[control] ^= z[target]
        elif gate.name == "CZ":
            first, second = w
            z[first] ^= x[second]
            z[second] ^= x[first]
        elif gate.name == "SWAP":
            first, second = w
            x[first], x[second] = x[second], x[first]
            z[first], z[second] = z[second], z[first]
        else:
            raise exceptions.UnsupportedCircuitError("clifford", gate.name)

    return x, z


###############################################################################


def affine_answer_circuit(
    n_message: int,
    answers: Sequence[int],
) -> Optional[EvalCircuit]:
    """
    A Clifford circuit replacing message x by answers[x], provided the answer is an
    affine function of the bits of x over GF(2). Returns None otherwise.

    The message is first swapped into a scratch register (CNOT M -> E, CNOT E -> M),
    then every answer bit is a parity of scratch bits plus a constant.
    """
    offset = int(answers[0])
    columns = []
    for j in range(n_message):
        question = 1 << (n_message - 1 - j)
        column = int(answers[question]) ^ offset if question < len(answers) else 0
        columns.append(column)
    for question, answer in enumerate(answers):
        predicted = offset
        for j in range(n_message):
            if (question >> (n_message - 1 - j)) & 1:
                predicted ^= columns[j]
        if predicted != int(answer):
            return None

    gates: List[Gate] = _swap_into_scratch(n_message)
    for i in range(n_message):
        for j in range(n_message):
            if (columns[j] >> (n_message - 1 - i)) & 1:
                gates.append(Gate("CNOT", (n_message + j, i)))
        if (offset >> (n_message - 1 - i)) & 1:
            gates.append(Gate("X", (i,)))

    return EvalCircuit(n_message=n_message, n_aux=n_message, gates=tuple(gates))


def constant_answer_circuit(n_message: int, answer: int) -> EvalCircuit:
    """The Clifford circuit that outputs answer whatever the message."""
    circuit = affine_answer_circuit(n_message, [answer] * 2**n_message)
    assert circuit is not None
    return circuit


def _swap_into_scratch(n_message: int) -> List[Gate]:
    gates = [Gate("CNOT", (i, n_message + i)) for i in range(n_message)]
    gates += [Gate("CNOT", (n_message + i, i)) for i in range(n_message)]
    return gates


def controlled_measurement_circuit(
    n_message: int,
    n_system: int,
    kraus: Sequence[Sequence[CMatrix]],
) -> EvalCircuit:
    """
    A circuit measuring a system register with an instrument selected by the message.

    The message is swapped into a scratch register E, then a unitary controlled on E
    writes outcome a into the message wires and applies the Kraus operator
    kraus[e][a] to the system. Messages e without an entry leave everything untouched.

    Wires are message (n_message), scratch (n_message), system (n_system).
    """
    n_outcomes = 2**n_message
    d_system = 2**n_system
    block = n_outcomes * d_system
    blocks = []
    for e in range(n_outcomes):
        if e >= len(kraus):
            blocks.append(np.eye(block, dtype=np.complex128))
            continue
        isometry = np.zeros((block, d_system), dtype=np.complex128)
        for a, k in enumerate(kraus[e]):
            isometry[a * d_system : (a + 1) * d_system] = k
        # Columns past the first d_system act on inputs with a nonzero message register
        blocks.append(numerics.complete_to_unitary(isometry))

    dim = n_outcomes * block
    controlled = np.zeros((dim, dim), dtype=np.complex128)
    for e, u in enumerate(blocks):
        controlled[e * block : (e + 1) * block, e * block : (e + 1) * block] = u

    scratch = tuple(range(n_message, 2 * n_message))
    message = tuple(range(n_message))
    system = tuple(range(2 * n_message, 2 * n_message + n_system))
    gates = _swap_into_scratch(n_message) + [
        Gate(UNITARY_GATE, scratch + message + system, controlled)
    ]
    return EvalCircuit(
        n_message=n_message, n_aux=n_message + n_system, gates=tuple(gates)
    )


def register_answer_circuit(n_message: int, n_register: int) -> EvalCircuit:
    """
    A Clifford circuit that discards the message and copies a prepared answer register
    into the message wires.

    Wires are message (n_message), scratch (n_message), answer (n_message) and a
    further n_register wires the circuit leaves alone, so the auxiliary input may
    entangle the answer with anything the evaluator keeps.
    """
    answer = range(2 * n_message, 3 * n_message)
    gates = _swap_into_scratch(n_message) + [
        Gate("CNOT", (r, i)) for i, r in enumerate(answer)
    ]
    return EvalCircuit(
        n_message=n_message, n_aux=2 * n_message + n_register, gates=tuple(gates)
    )
