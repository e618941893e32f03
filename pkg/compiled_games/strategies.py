#!/usr/bin/env python
# -*- coding: utf-8 -*-

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import numpy.typing as npt

from . import constants, exceptions, numerics
from .games import MAGIC_SQUARE_COLUMN_TRIPLES, MAGIC_SQUARE_ROW_TRIPLES, Correlation
from .schemas import (
    ClassicalStrategyModel,
    QuantumStrategyModel,
    family_from_json,
    family_to_json,
    vector_from_json,
    vector_to_json,
)
from .types import CMatrix, GameShape, RealArray

###############################################################################

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

###############################################################################


def povm_deviation(family: npt.ArrayLike) -> float:
    """
    Largest violation of the POVM invariants over a family of shape
    (settings, outcomes, d, d): negative eigenvalues, non Hermitian entries and the
    distance of each setting's sum from the identity.
    """
    arr = np.asarray(family, dtype=np.complex128)
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise exceptions.DimensionMismatchError(
            f"POVM families have shape (settings, outcomes, d, d) "
            f"(received {arr.shape})."
        )

    d = arr.shape[2]
    worst = 0.0
    for setting in arr:
        worst = max(worst, float(np.max(np.abs(setting.sum(axis=0) - np.eye(d)))))
        for element in setting:
            worst = max(worst, numerics.hermitian_deviation(element))
            worst = max(worst, -numerics.min_eigenvalue(element, tol=np.inf))

    return worst


def check_povm_family(
    family: npt.ArrayLike,
    tol: float = constants.PSD_TOL,
    what: str = "POVM family",
) -> CMatrix:
    """
    Raises
    ------
    exceptions.InvalidStrategyError
        The family violates the POVM invariants by more than tol.
    """
    arr = np.asarray(family, dtype=np.complex128)
    deviation = povm_deviation(arr)
    if deviation > tol:
        raise exceptions.InvalidStrategyError(
            f"{what} violates the POVM invariants by {deviation:.3e} (tol {tol:.1e})."
        )

    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


###############################################################################


@dataclass(frozen=True, eq=False)
class ClassicalStrategy:
    """
    Shared randomness gamma over Omega with local response functions
    pA[omega, x, a] and qB[omega, y, b].
    """

    gamma: RealArray
    pA: RealArray
    qB: RealArray

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=np.float64)
        p_a = np.asarray(self.pA, dtype=np.float64)
        q_b = np.asarray(self.qB, dtype=np.float64)
        if gamma.ndim != 1 or p_a.ndim != 3 or q_b.ndim != 3:
            raise exceptions.InvalidStrategyError(
                "Classical strategies need gamma[omega], pA[omega][x][a] and "
                "qB[omega][y][b]."
            )
        if p_a.shape[0] != gamma.size or q_b.shape[0] != gamma.size:
            raise exceptions.InvalidStrategyError(
                f"Response tables {p_a.shape} / {q_b.shape} do not match "
                f"{gamma.size} shared random values."
            )
        tol = constants.PROBABILITY_SUM_TOL
        if np.any(gamma < -tol) or abs(gamma.sum() - 1) > tol:
            raise exceptions.InvalidStrategyError("gamma is not a distribution.")
        for name, table in (("pA", p_a), ("qB", q_b)):
            if np.any(table < -tol) or np.any(np.abs(table.sum(axis=2) - 1) > tol):
                raise exceptions.InvalidStrategyError(
                    f"{name} rows are not probability vectors."
                )

        object.__setattr__(self, "gamma", _freeze(gamma))
        object.__setattr__(self, "pA", _freeze(p_a))
        object.__setattr__(self, "qB", _freeze(q_b))

    @property
    def shape(self) -> GameShape:
        return GameShape(
            self.pA.shape[1], self.qB.shape[1], self.pA.shape[2], self.qB.shape[2]
        )

    def correlation(self) -> Correlation:
        return Correlation(
            np.einsum("w,wxa,wyb->xyab", self.gamma, self.pA, self.qB)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma.tolist(),
            "pA": self.pA.tolist(),
            "qB": self.qB.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Any) -> "ClassicalStrategy":
        model = ClassicalStrategyModel.model_validate(data)
        return cls(gamma=model.gamma, pA=model.pA, qB=model.qB)


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """
    A tensor product strategy: a unit vector psi in C^dA (x) C^dB and POVM families
    M[x, a] on C^dA and N[y, b] on C^dB.
    """

    psi: CMatrix
    M: CMatrix
    N: CMatrix

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.complex128).reshape(-1)
        m = check_povm_family(self.M, what="Alice's POVM family")
        n = check_povm_family(self.N, what="Bob's POVM family")
        if psi.size != m.shape[2] * n.shape[2]:
            raise exceptions.DimensionMismatchError(
                f"State of dimension {psi.size} does not live on "
                f"C^{m.shape[2]} (x) C^{n.shape[2]}."
            )
        norm = float(np.linalg.norm(psi))
        if abs(norm - 1) > constants.NORMALIZATION_TOL:
            raise exceptions.InvalidStrategyError(f"State has norm {norm!r}, not 1.")

        object.__setattr__(self, "psi", _freeze(psi))
        object.__setattr__(self, "M", _freeze(m))
        object.__setattr__(self, "N", _freeze(n))

    @property
    def dA(self) -> int:
        return int(self.M.shape[2])

    @property
    def dB(self) -> int:
        return int(self.N.shape[2])

    @property
    def shape(self) -> GameShape:
        return GameShape(
            self.M.shape[0], self.N.shape[0], self.M.shape[1], self.N.shape[1]
        )

    @property
    def psi_matrix(self) -> CMatrix:
        """psi reshaped to the dA x dB coefficient matrix."""
        return self.psi.reshape(self.dA, self.dB)

    def correlation(self) -> Correlation:
        # <psi| M (x) N |psi> = tr(Psi^* M Psi N^T)
        psi = self.psi_matrix
        p = np.einsum("ij,xaik,kl,ybjl->xyab", psi.conj(), self.M, psi, self.N)
        return Correlation(np.clip(p.real, 0.0, None))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dA": self.dA,
            "dB": self.dB,
            "psi": vector_to_json(self.psi),
            "M": family_to_json(self.M),
            "N": family_to_json(self.N),
        }

    @classmethod
    def from_dict(cls, data: Any) -> "QuantumStrategy":
        model = QuantumStrategyModel.model_validate(data)
        strategy = cls(
            psi=vector_from_json(model.psi),
            M=family_from_json(model.M),
            N=family_from_json(model.N),
        )
        if (strategy.dA, strategy.dB) != (model.dA, model.dB):
            raise exceptions.DimensionMismatchError(
                f"Declared dims ({model.dA}, {model.dB}) do not match the POVMs "
                f"({strategy.dA}, {strategy.dB})."
            )
        return strategy


@dataclass(frozen=True, eq=False)
class CommutingStrategy:
    """
    A commuting operator strategy on a single space C^d. Alice's and Bob's POVM
    elements act on the same space and commute up to commutation_residual, which is
    measured at construction.
    """

    psi: CMatrix
    M: CMatrix
    N: CMatrix
    commutation_residual: float = 0.0

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.complex128).reshape(-1)
        m = check_povm_family(self.M, what="Alice's POVM family")
        n = check_povm_family(self.N, what="Bob's POVM family")
        if not (psi.size == m.shape[2] == n.shape[2]):
            raise exceptions.DimensionMismatchError(
                f"State dimension {psi.size} and POVM dimensions "
                f"{m.shape[2]} / {n.shape[2]} disagree."
            )
        norm = float(np.linalg.norm(psi))
        if abs(norm - 1) > constants.NORMALIZATION_TOL:
            raise exceptions.InvalidStrategyError(f"State has norm {norm!r}, not 1.")

        object.__setattr__(self, "psi", _freeze(psi))
        object.__setattr__(self, "M", _freeze(m))
        object.__setattr__(self, "N", _freeze(n))
        object.__setattr__(self, "commutation_residual", commutation_residual(m, n))

    @property
    def d(self) -> int:
        return int(self.psi.size)

    @property
    def shape(self) -> GameShape:
        return GameShape(
            self.M.shape[0], self.N.shape[0], self.M.shape[1], self.N.shape[1]
        )

    @property
    def is_projective(self) -> bool:
        products = np.einsum("xaij,xbjk->xabik", self.M, self.M)
        expected = np.einsum("ab,xaik->xabik", np.eye(self.M.shape[1]), self.M)
        bob = np.einsum("yaij,ybjk->yabik", self.N, self.N)
        bob_expected = np.einsum("ab,yaik->yabik", np.eye(self.N.shape[1]), self.N)
        tol = constants.PSD_TOL
        return bool(
            np.max(np.abs(products - expected)) <= tol
            and np.max(np.abs(bob - bob_expected)) <= tol
        )

    def correlation(self) -> Correlation:
        p = np.einsum("i,xaij,ybjk,k->xyab", self.psi.conj(), self.M, self.N, self.psi)
        return Correlation(np.clip(p.real, 0.0, None))


def commutation_residual(M: npt.ArrayLike, N: npt.ArrayLike) -> float:
    """max over x, a, y, b of the operator norm of [M_xa, N_yb]."""
    m = np.asarray(M, dtype=np.complex128)
    n = np.asarray(N, dtype=np.complex128)
    worst = 0.0
    for m_xa in m.reshape(-1, *m.shape[2:]):
        for n_yb in n.reshape(-1, *n.shape[2:]):
            worst = max(worst, numerics.operator_norm(m_xa @ n_yb - n_yb @ m_xa))

    return worst


###############################################################################


def deterministic_strategy(
    alice: npt.ArrayLike,
    bob: npt.ArrayLike,
    shape: GameShape,
) -> ClassicalStrategy:
    """
    The deterministic strategy answering alice[x] and bob[y].
    """
    n_a, n_b, k_a, k_b = shape
    p_a = np.zeros((1, n_a, k_a))
    q_b = np.zeros((1, n_b, k_b))
    p_a[0, np.arange(n_a), np.asarray(alice, dtype=np.int64)] = 1.0
    q_b[0, np.arange(n_b), np.asarray(bob, dtype=np.int64)] = 1.0
    return ClassicalStrategy(gamma=np.ones(1), pA=p_a, qB=q_b)


def classical_to_quantum(strategy: ClassicalStrategy) -> QuantumStrategy:
    """
    Diagonal embedding: psi = sum_w sqrt(gamma_w) |w>|w> with diagonal POVMs
    M_xa = sum_w pA[w, x, a] |w><w| and N_yb likewise.
    """
    n_omega = strategy.gamma.size
    psi = np.zeros((n_omega, n_omega), dtype=np.complex128)
    psi[np.arange(n_omega), np.arange(n_omega)] = np.sqrt(strategy.gamma)
    m = np.einsum("wxa,wv->xawv", strategy.pA, np.eye(n_omega))
    n = np.einsum("wyb,wv->ybwv", strategy.qB, np.eye(n_omega))
    return QuantumStrategy(psi=psi.reshape(-1), M=m, N=n)


def quantum_to_commuting(strategy: QuantumStrategy) -> CommutingStrategy:
    """Embed a tensor strategy as M (x) 1 and 1 (x) N on the joint space."""
    eye_a = np.eye(strategy.dA)
    eye_b = np.eye(strategy.dB)
    m = np.einsum("xaij,kl->xaikjl", strategy.M, eye_b).reshape(
        *strategy.M.shape[:2], strategy.dA * strategy.dB, strategy.dA * strategy.dB
    )
    n = np.einsum("ij,ybkl->ybikjl", eye_a, strategy.N).reshape(
        *strategy.N.shape[:2], strategy.dA * strategy.dB, strategy.dA * strategy.dB
    )
    return CommutingStrategy(psi=strategy.psi, M=m, N=n)


def maximally_entangled_state(d: int) -> CMatrix:
    return np.eye(d, dtype=np.complex128).reshape(-1) / np.sqrt(d)


def _observable_projectors(observable: CMatrix) -> CMatrix:
    eye = np.eye(observable.shape[0])
    return np.stack([(eye + observable) / 2, (eye - observable) / 2])


def chsh_optimal_strategy() -> QuantumStrategy:
    """
    The Tsirelson strategy on a maximally entangled pair of qubits: Alice measures Z
    and X, Bob measures (Z + X)/sqrt(2) and (Z - X)/sqrt(2).
    """
    m = np.stack([_observable_projectors(PAULI_Z), _observable_projectors(PAULI_X)])
    n = np.stack(
        [
            _observable_projectors((PAULI_Z + PAULI_X) / np.sqrt(2)),
            _observable_projectors((PAULI_Z - PAULI_X) / np.sqrt(2)),
        ]
    )
    return QuantumStrategy(psi=maximally_entangled_state(2), M=m, N=n)


# Mermin square of two qubit observables. Rows multiply to +1, columns to -1.
MERMIN_SQUARE = (
    (
        numerics.kron(PAULI_X, PAULI_I),
        numerics.kron(PAULI_I, PAULI_X),
        numerics.kron(PAULI_X, PAULI_X),
    ),
    (
        numerics.kron(PAULI_I, PAULI_Z),
        numerics.kron(PAULI_Z, PAULI_I),
        numerics.kron(PAULI_Z, PAULI_Z),
    ),
    (
        -numerics.kron(PAULI_X, PAULI_Z),
        -numerics.kron(PAULI_Z, PAULI_X),
        numerics.kron(PAULI_Y, PAULI_Y),
    ),
)


def _triple_projector(observables: Any, triple: Any) -> CMatrix:
    projector = np.eye(4, dtype=np.complex128)
    for observable, bit in zip(observables, triple):
        projector = projector @ (np.eye(4) + (-1) ** bit * observable) / 2
    return projector


def magic_square_perfect_strategy() -> QuantumStrategy:
    """
    The perfect magic square strategy on two maximally entangled pairs. Bit 0 stands
    for eigenvalue +1. Bob measures the transposed observables.
    """
    m = np.zeros((3, 4, 4, 4), dtype=np.complex128)
    n = np.zeros((3, 4, 4, 4), dtype=np.complex128)
    for x in range(3):
        row = MERMIN_SQUARE[x]
        for a, triple in enumerate(MAGIC_SQUARE_ROW_TRIPLES):
            m[x, a] = _triple_projector(row, triple)
    for y in range(3):
        column = [MERMIN_SQUARE[r][y].T for r in range(3)]
        for b, triple in enumerate(MAGIC_SQUARE_COLUMN_TRIPLES):
            n[y, b] = _triple_projector(column, triple)

    return QuantumStrategy(psi=maximally_entangled_state(4), M=m, N=n)


def projective_povm_from_unitary(
    u: CMatrix,
    k: int,
    sizes: Optional[npt.ArrayLike] = None,
) -> CMatrix:
    """
    Split the columns of u into k consecutive groups and return the k projectors onto
    their spans. Groups are as equal as possible unless sizes is given.
    """
    d = u.shape[0]
    if sizes is None:
        sizes = [len(chunk) for chunk in np.array_split(np.arange(d), k)]
    bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    povm = np.zeros((k, d, d), dtype=np.complex128)
    for a in range(k):
        columns = u[:, bounds[a] : bounds[a + 1]]
        povm[a] = columns @ numerics.dagger(columns)

    return povm


def random_projective_family(
    n_settings: int,
    k: int,
    d: int,
    rng: np.random.Generator,
) -> CMatrix:
    """Projective measurements in Haar random bases, one per setting."""
    return np.stack(
        [
            projective_povm_from_unitary(numerics.random_unitary(d, rng), k)
            for _ in range(n_settings)
        ]
    )
