#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Block encodings: a unitary U on m ancilla qubits and n system qubits with
t * (<0|^m (x) 1) U (|0>^m (x) 1) = M. Ancilla qubits come first, so the encoded block
is the top-left 2^n x 2^n corner of U.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import numpy.typing as npt

from . import constants, exceptions, numerics
from .sequential import NCPolynomial, evaluate_word
from .types import CMatrix, Seed

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

CONTRACTION_TOL = 1e-9

###############################################################################


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """
    Parameters
    ----------
    U: CMatrix
        A unitary of side 2 ** (m + n).
    m: int
        Number of ancilla qubits.
    n: int
        Number of system qubits.
    t: float
        Scale factor: the encoded operator is t times the top-left block.
        Default: 1.0
    dim: Optional[int]
        Side of the encoded operator when it was zero padded to 2 ** n.
        Default: None (2 ** n)
    """

    U: CMatrix
    m: int
    n: int
    t: float = 1.0
    dim: Optional[int] = None

    def __post_init__(self) -> None:
        u = numerics.as_cmatrix(self.U)
        side = 2 ** (self.m + self.n)
        if u.shape != (side, side):
            raise exceptions.DimensionMismatchError(
                f"Unitary of shape {u.shape} does not act on {self.m} ancilla and "
                f"{self.n} system qubits."
            )
        if not numerics.is_unitary(u, tol=1e-8):
            raise ValueError("Block encoding matrix is not unitary.")
        if self.t <= 0:
            raise ValueError(f"Scale factor must be positive (received {self.t}).")
        dim = 2**self.n if self.dim is None else int(self.dim)
        if not 1 <= dim <= 2**self.n:
            raise exceptions.DimensionMismatchError(
                f"Operator side {dim} does not fit {self.n} system qubits."
            )

        object.__setattr__(self, "U", u)
        object.__setattr__(self, "dim", dim)

    @property
    def block(self) -> CMatrix:
        return self.U[: 2**self.n, : 2**self.n]

    def extract(self) -> CMatrix:
        """The encoded operator t * block, cropped to its logical side."""
        return self.t * self.block[: self.dim, : self.dim]


def _pad_operator(op: CMatrix, side: int) -> CMatrix:
    padded = np.zeros((side, side), dtype=np.complex128)
    padded[: op.shape[0], : op.shape[1]] = op
    return padded


def encode_contraction(M: npt.ArrayLike, pad: bool = True) -> BlockEncoding:
    """
    One ancilla encoding of a contraction through the unitary dilation
    [[M, sqrt(1 - M M^*)], [sqrt(1 - M^* M), -M^*]].

    Parameters
    ----------
    M: npt.ArrayLike
        A square operator of norm at most one.
    pad: bool
        Zero pad sides that are not a power of two.
        Default: True

    Raises
    ------
    exceptions.NormExceededError
        The operator norm exceeds 1 + 1e-9.
    exceptions.NotPowerOfTwoError
        The side is not a power of two and pad is False.
    """
    op = numerics.as_cmatrix(M)
    if op.shape[0] != op.shape[1]:
        raise exceptions.DimensionMismatchError(
            f"Expected a square operator, got {op.shape}."
        )
    dim = op.shape[0]
    if not numerics.is_power_of_two(dim):
        if not pad:
            raise exceptions.NotPowerOfTwoError(
                f"Operator side {dim} is not a power of two."
            )
        op = _pad_operator(op, 2 ** numerics.num_qubits(dim))

    norm = numerics.operator_norm(op)
    if norm > 1 + CONTRACTION_TOL:
        raise exceptions.NormExceededError(f"Operator norm {norm!r} exceeds 1.")
    if norm > 1:
        op = op / norm

    eye = np.eye(op.shape[0])
    adjoint = numerics.dagger(op)
    top_right = numerics.mat_sqrt_psd(eye - op @ adjoint, tol=CONTRACTION_TOL)
    bottom_left = numerics.mat_sqrt_psd(eye - adjoint @ op, tol=CONTRACTION_TOL)
    u = np.block([[op, top_right], [bottom_left, -adjoint]])
    return BlockEncoding(U=u, m=1, n=numerics.num_qubits(op.shape[0]), t=1.0, dim=dim)


def identity_encoding(n: int, dim: Optional[int] = None) -> BlockEncoding:
    return BlockEncoding(U=np.eye(2**n, dtype=np.complex128), m=0, n=n, t=1.0, dim=dim)


def _check_compatible(encodings: Sequence[BlockEncoding]) -> None:
    systems = {(e.n, e.dim) for e in encodings}
    if len(systems) != 1:
        raise exceptions.DimensionMismatchError(
            f"Block encodings act on different systems {sorted(systems)}."
        )


def product(e1: BlockEncoding, e2: BlockEncoding) -> BlockEncoding:
    """
    Encoding of extract(e1) @ extract(e2) on m1 + m2 ancillas with scale t1 * t2.
    """
    _check_compatible([e1, e2])
    n = e1.n
    # U1 acts on (ancilla1, system); move the idle ancilla2 factor before the system
    u1 = numerics.permute_subsystems(
        np.kron(e1.U, np.eye(2**e2.m)), (2**e1.m, 2**n, 2**e2.m), (0, 2, 1)
    )
    u2 = np.kron(np.eye(2**e1.m), e2.U)
    return BlockEncoding(U=u1 @ u2, m=e1.m + e2.m, n=n, t=e1.t * e2.t, dim=e1.dim)


def _pad_ancillas(e: BlockEncoding, m: int) -> CMatrix:
    return np.kron(np.eye(2 ** (m - e.m)), e.U)


def linear_combination(
    encodings: Sequence[BlockEncoding],
    coefficients: Sequence[complex],
) -> BlockEncoding:
    """
    Encoding of sum_i c_i extract(e_i) by the prepare-select-unprepare construction.
    The scale factor is sum_i |c_i| t_i and the index register sits in front of the
    (padded) ancillas.

    Raises
    ------
    exceptions.EmptyListError
        No encodings were given.
    exceptions.DimensionMismatchError
        The encodings act on different systems or the coefficient count differs.
    """
    if len(encodings) == 0:
        raise exceptions.EmptyListError(
            "A linear combination needs at least one encoding."
        )
    if len(coefficients) != len(encodings):
        raise exceptions.DimensionMismatchError(
            f"{len(coefficients)} coefficients for {len(encodings)} encodings."
        )
    _check_compatible(encodings)

    c = np.asarray(coefficients, dtype=np.complex128)
    scales = np.asarray([e.t for e in encodings], dtype=np.float64)
    total = float(np.sum(np.abs(c) * scales))
    if total <= 0:
        raise ValueError("Coefficients of a linear combination must not all vanish.")

    k = len(encodings)
    index_qubits = numerics.num_qubits(k)
    n_index = 2**index_qubits
    m = max(e.m for e in encodings)
    n = encodings[0].n
    side = 2 ** (m + n)

    amplitudes = np.zeros(n_index, dtype=np.complex128)
    amplitudes[:k] = np.sqrt(np.abs(c) * scales / total)
    prepare = numerics.complete_to_unitary(amplitudes[:, None])

    phases = np.ones(k, dtype=np.complex128)
    nonzero = np.abs(c) > 0
    phases[nonzero] = c[nonzero] / np.abs(c[nonzero])
    select = np.stack(
        [phases[i] * _pad_ancillas(e, m) for i, e in enumerate(encodings)]
        + [np.eye(side, dtype=np.complex128)] * (n_index - k)
    )
    u = np.einsum(
        "ik,kab,kj->iajb", numerics.dagger(prepare), select, prepare, optimize=True
    ).reshape(n_index * side, n_index * side)

    return BlockEncoding(U=u, m=index_qubits + m, n=n, t=total, dim=encodings[0].dim)


def adjoint(e: BlockEncoding) -> BlockEncoding:
    return BlockEncoding(U=numerics.dagger(e.U), m=e.m, n=e.n, t=e.t, dim=e.dim)


def real_part(e: BlockEncoding) -> BlockEncoding:
    """Encoding of (M + M^*) / 2."""
    return linear_combination([e, adjoint(e)], [0.5, 0.5])


def imag_part(e: BlockEncoding) -> BlockEncoding:
    """Encoding of (M - M^*) / 2i."""
    return linear_combination([e, adjoint(e)], [-0.5j, 0.5j])


###############################################################################


def encode_word(B: npt.ArrayLike, word: Sequence) -> BlockEncoding:
    """Product of the contraction encodings of the letters of a word."""
    family = np.asarray(B, dtype=np.complex128)
    dim = family.shape[-1]
    if len(word) == 0:
        return identity_encoding(numerics.num_qubits(dim), dim=dim)

    encodings = [encode_contraction(family[y, b]) for y, b in word]
    result = encodings[0]
    for e in encodings[1:]:
        result = product(result, e)
    return result


def encode_polynomial(B: npt.ArrayLike, P: NCPolynomial) -> BlockEncoding:
    """
    Encode a polynomial in POVM elements as a linear combination of products of
    contraction encodings. The scale factor is the sum of the absolute coefficients.
    """
    family = np.asarray(B, dtype=np.complex128)
    poly = P.simplify()
    poly.check_letters(family.shape[0], family.shape[1])
    if len(poly.terms) == 0:
        raise exceptions.EmptyListError("Cannot encode the zero polynomial.")

    encodings = [encode_word(family, word) for _, word in poly.terms]
    if len(encodings) == 1 and poly.terms[0][0] == 1:
        return encodings[0]
    return linear_combination(encodings, [c for c, _ in poly.terms])


def block_expectation(e: BlockEncoding, rho: npt.ArrayLike) -> complex:
    """tr(rho M) computed from the unitary: t * tr((|0><0| (x) rho) U)."""
    state = numerics.as_cmatrix(rho)
    if state.shape != (e.dim, e.dim):
        raise exceptions.DimensionMismatchError(
            f"State of shape {state.shape} does not match an encoding of side {e.dim}."
        )
    padded = _pad_operator(state, 2**e.n)
    return complex(e.t * np.trace(padded @ e.block))


def distinguishing_advantage(
    e: BlockEncoding,
    sigma: npt.ArrayLike,
    sigma_other: npt.ArrayLike,
) -> float:
    """|tr((sigma - sigma_other) M)| for the encoded operator M."""
    return abs(block_expectation(e, sigma) - block_expectation(e, sigma_other))


###############################################################################


def verify(
    dim: int = 2,
    samples: int = 10,
    seed: Seed = constants.DEFAULT_SEED,
) -> Dict[str, float]:
    """
    Check the encoding identities on random contractions of side dim and report the
    worst deviation of each construction from direct matrix arithmetic.
    """
    rng = numerics.default_rng(seed)
    errors: Dict[str, List[float]] = {
        "contraction": [],
        "product": [],
        "linear_combination": [],
        "real_part": [],
        "imag_part": [],
        "unitarity": [],
    }
    for _ in range(samples):
        ops = []
        for _ in range(2):
            g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            ops.append(0.9 * g / numerics.operator_norm(g))
        e1, e2 = (encode_contraction(op) for op in ops)
        coefficients = rng.standard_normal(2) + 1j * rng.standard_normal(2)

        combined = linear_combination([e1, e2], coefficients)
        expected_combination = coefficients[0] * ops[0] + coefficients[1] * ops[1]
        errors["contraction"].append(float(np.max(np.abs(e1.extract() - ops[0]))))
        errors["product"].append(
            float(np.max(np.abs(product(e1, e2).extract() - ops[0] @ ops[1])))
        )
        errors["linear_combination"].append(
            float(np.max(np.abs(combined.extract() - expected_combination)))
        )
        errors["real_part"].append(
            float(
                np.max(
                    np.abs(
                        real_part(e1).extract() - (ops[0] + numerics.dagger(ops[0])) / 2
                    )
                )
            )
        )
        errors["imag_part"].append(
            float(
                np.max(
                    np.abs(
                        imag_part(e1).extract()
                        - (ops[0] - numerics.dagger(ops[0])) / 2j
                    )
                )
            )
        )
        identity = np.eye(combined.U.shape[0])
        errors["unitarity"].append(
            float(np.max(np.abs(numerics.dagger(combined.U) @ combined.U - identity)))
        )

    report = {name: max(values) for name, values in errors.items()}
    log.info(f"Block encoding identities on side {dim}: {report}")
    return report


def direct_polynomial(B: npt.ArrayLike, P: NCPolynomial) -> CMatrix:
    """The polynomial evaluated by plain matrix products."""
    family = np.asarray(B, dtype=np.complex128)
    return sum(
        (c * evaluate_word(family, word) for c, word in P.simplify().terms),
        np.zeros(family.shape[2:], dtype=np.complex128),
    )
