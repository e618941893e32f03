#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Sequential strategies: Alice answers first, leaving Bob's system in a subnormalized
state sigma[x, a]; Bob then measures B[y, b].

The module checks strong non-signaling (every polynomial in Bob's operators has the
same expectation on every averaged state sigma_x) and turns strongly non-signaling
strategies back into nonlocal ones.
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError
from scipy.linalg import null_space, orth

from . import constants, exceptions, numerics
from .games import Correlation
from .io import read_json, write_json
from .quantum import purify, uhlmann_unitary
from .schemas import (
    SequentialClassicalStrategyModel,
    SequentialStrategyModel,
    family_from_json,
    family_to_json,
    matrix_from_json,
    matrix_to_json,
)
from .strategies import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ClassicalStrategy,
    CommutingStrategy,
    QuantumStrategy,
    check_povm_family,
)
from .types import BobWord, CMatrix, GameShape, PathLike, RealArray, Seed

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

MAX_MONOMIALS = 10**6

###############################################################################


@dataclass(frozen=True, eq=False)
class SequentialQuantumStrategy:
    """
    Post-measurement operators sigma[x, a] on C^dim and Bob's POVM family B[y, b].

    Parameters
    ----------
    sigma: npt.ArrayLike
        Subnormalized operators of shape (nA, kA, dim, dim).
    B: npt.ArrayLike
        Bob's POVM family of shape (nB, kB, dim, dim).
    invalid: Optional[npt.ArrayLike]
        Operators of shape (nA, dim, dim) left behind by answers the verifier
        rejects. Together with sigma they have unit trace for every x.
        Default: None (no rejected answers)

    Raises
    ------
    exceptions.InvalidStrategyError
        An operator is not PSD, the traces do not sum to one or B is not a POVM family.
    exceptions.DimensionMismatchError
        The operator dimensions disagree.
    """

    sigma: CMatrix
    B: CMatrix
    invalid: Optional[CMatrix] = None

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=np.complex128)
        b = check_povm_family(self.B, what="Bob's POVM family")
        if sigma.ndim != 4 or sigma.shape[2:] != b.shape[2:]:
            raise exceptions.DimensionMismatchError(
                f"sigma of shape {sigma.shape} does not match Bob's operators "
                f"of shape {b.shape[2:]}."
            )
        invalid = (
            np.zeros((sigma.shape[0],) + sigma.shape[2:], dtype=np.complex128)
            if self.invalid is None
            else np.asarray(self.invalid, dtype=np.complex128)
        )
        if invalid.shape != (sigma.shape[0],) + sigma.shape[2:]:
            raise exceptions.DimensionMismatchError(
                f"Rejected answer operators of shape {invalid.shape} do not match "
                "sigma."
            )

        tol = constants.PSD_TOL
        for operator in list(sigma.reshape(-1, *sigma.shape[2:])) + list(invalid):
            if numerics.hermitian_deviation(operator) > tol:
                raise exceptions.InvalidStrategyError(
                    "A post-measurement operator is not Hermitian."
                )
            if numerics.min_eigenvalue(operator, tol=np.inf) < -tol:
                raise exceptions.InvalidStrategyError(
                    "A post-measurement operator is not PSD."
                )
        traces = np.einsum("xaii->x", sigma).real + np.einsum("xii->x", invalid).real
        if np.any(np.abs(traces - 1) > constants.NORMALIZATION_TOL):
            raise exceptions.InvalidStrategyError(
                f"Post-measurement operators do not sum to unit trace "
                f"(traces {traces})."
            )

        for name, value in (("sigma", sigma), ("B", b), ("invalid", invalid)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return int(self.B.shape[2])

    @property
    def shape(self) -> GameShape:
        return GameShape(
            self.sigma.shape[0], self.B.shape[0], self.sigma.shape[1], self.B.shape[1]
        )

    @property
    def sigma_x(self) -> CMatrix:
        """The state after the first round, including rejected answers."""
        return self.sigma.sum(axis=1) + self.invalid

    @property
    def invalid_mass(self) -> float:
        return float(np.max(np.einsum("xii->x", self.invalid).real))

    def to_dict(self) -> Dict[str, Any]:
        n_a, _, k_a, _ = self.shape
        document: Dict[str, Any] = {
            "dim": self.dim,
            "sigma": {
                f"{x},{a}": matrix_to_json(self.sigma[x, a])
                for x in range(n_a)
                for a in range(k_a)
            },
            "B": family_to_json(self.B),
        }
        if self.invalid_mass > 0:
            document["invalid"] = {
                str(x): matrix_to_json(m) for x, m in enumerate(self.invalid)
            }
        return document

    @classmethod
    def from_dict(cls, data: Any) -> "SequentialQuantumStrategy":
        """
        Raises
        ------
        exceptions.InvalidStrategyError
            The document does not follow the sequential strategy schema.
        """
        try:
            model = SequentialStrategyModel.model_validate(data)
        except ValidationError as e:
            raise exceptions.InvalidStrategyError(str(e)) from e

        keys = [tuple(int(p) for p in key.split(",")) for key in model.sigma]
        n_a = max(x for x, _ in keys) + 1
        k_a = max(a for _, a in keys) + 1
        sigma = np.zeros((n_a, k_a, model.dim, model.dim), dtype=np.complex128)
        for (x, a), key in zip(keys, model.sigma):
            sigma[x, a] = matrix_from_json(model.sigma[key])
        invalid = None
        if model.invalid is not None:
            invalid = np.zeros((n_a, model.dim, model.dim), dtype=np.complex128)
            for key, matrix in model.invalid.items():
                invalid[int(key)] = matrix_from_json(matrix)

        strategy = cls(sigma=sigma, B=family_from_json(model.B), invalid=invalid)
        if strategy.dim != model.dim:
            raise exceptions.DimensionMismatchError(
                f"Declared dim {model.dim} does not match the operators "
                f"({strategy.dim})."
            )
        return strategy

    @classmethod
    def from_json(cls, uri: PathLike) -> "SequentialQuantumStrategy":
        return cls.from_dict(read_json(uri))

    def to_json(self, uri: PathLike) -> None:
        write_json(uri, self.to_dict())

    @classmethod
    def from_quantum(cls, strategy: QuantumStrategy) -> "SequentialQuantumStrategy":
        """sigma[x, a] = tr_A((M[x, a] (x) 1) psi psi^*)."""
        psi = strategy.psi_matrix
        # tr_A[(M (x) 1) psi psi^*] = (Psi^* M Psi)^T
        sigma = np.einsum("ij,xaik,kl->xajl", psi.conj(), strategy.M, psi).transpose(
            0, 1, 3, 2
        )
        return cls(sigma=sigma, B=strategy.N)

    @classmethod
    def from_commuting(cls, strategy: CommutingStrategy) -> "SequentialQuantumStrategy":
        """sigma[x, a] = sqrt(M[x, a]) psi psi^* sqrt(M[x, a])."""
        rho = np.outer(strategy.psi, strategy.psi.conj())
        sigma = np.zeros(strategy.M.shape, dtype=np.complex128)
        for x, a in np.ndindex(*strategy.M.shape[:2]):
            root = numerics.mat_sqrt_psd(strategy.M[x, a])
            sigma[x, a] = root @ rho @ root
        return cls(sigma=sigma, B=strategy.N)


@dataclass(frozen=True, eq=False)
class SequentialClassicalStrategy:
    """
    Alice answers a and passes omega with probability pA_omega[x, a, omega]; Bob
    answers with qB[omega, y, b].
    """

    pA_omega: RealArray
    qB: RealArray

    def __post_init__(self) -> None:
        p = np.asarray(self.pA_omega, dtype=np.float64)
        q = np.asarray(self.qB, dtype=np.float64)
        if p.ndim != 3 or q.ndim != 3 or p.shape[2] != q.shape[0]:
            raise exceptions.InvalidStrategyError(
                f"Expected pA_omega[x][a][omega] and qB[omega][y][b] "
                f"(received {p.shape} and {q.shape})."
            )
        tol = constants.PROBABILITY_SUM_TOL
        if np.any(p < -tol) or np.any(np.abs(p.sum(axis=(1, 2)) - 1) > tol):
            raise exceptions.InvalidStrategyError("pA_omega[x] is not a distribution.")
        if np.any(q < -tol) or np.any(np.abs(q.sum(axis=2) - 1) > tol):
            raise exceptions.InvalidStrategyError("qB rows are not distributions.")

        object.__setattr__(self, "pA_omega", p)
        object.__setattr__(self, "qB", q)

    @property
    def omega_marginals(self) -> RealArray:
        """p(omega | x), shape (nA, |Omega|)."""
        return self.pA_omega.sum(axis=1)

    def correlation(self) -> Correlation:
        return Correlation(np.einsum("xaw,wyb->xyab", self.pA_omega, self.qB))

    @classmethod
    def from_classical(
        cls, strategy: ClassicalStrategy
    ) -> "SequentialClassicalStrategy":
        return cls(
            pA_omega=np.einsum("w,wxa->xaw", strategy.gamma, strategy.pA),
            qB=strategy.qB,
        )

    @classmethod
    def from_dict(cls, data: Any) -> "SequentialClassicalStrategy":
        model = SequentialClassicalStrategyModel.model_validate(data)
        return cls(pA_omega=model.pA_omega, qB=model.qB)

    def to_dict(self) -> Dict[str, Any]:
        return {"pA_omega": self.pA_omega.tolist(), "qB": self.qB.tolist()}


###############################################################################


@dataclass(frozen=True)
class NCPolynomial:
    """
    A polynomial in Bob's noncommuting POVM elements: a sum of coefficient * word with
    words over letters (y, b).
    """

    terms: Tuple[Tuple[complex, BobWord], ...] = field(default_factory=tuple)

    @classmethod
    def monomial(
        cls, word: Sequence[Tuple[int, int]], coefficient: complex = 1.0
    ) -> "NCPolynomial":
        return cls(((complex(coefficient), tuple((int(y), int(b)) for y, b in word)),))

    @classmethod
    def constant(cls, value: complex = 1.0) -> "NCPolynomial":
        return cls(((complex(value), ()),))

    @property
    def degree(self) -> int:
        return max((len(word) for _, word in self.terms), default=0)

    @property
    def l1_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def simplify(self) -> "NCPolynomial":
        combined: Dict[BobWord, complex] = {}
        for coefficient, word in self.terms:
            combined[word] = combined.get(word, 0) + coefficient
        return NCPolynomial(
            tuple((c, w) for w, c in sorted(combined.items()) if abs(c) > 0)
        )

    def adjoint(self) -> "NCPolynomial":
        return NCPolynomial(
            tuple((complex(np.conj(c)), tuple(reversed(w))) for c, w in self.terms)
        )

    def __add__(self, other: "NCPolynomial") -> "NCPolynomial":
        return NCPolynomial(self.terms + other.terms).simplify()

    def __sub__(self, other: "NCPolynomial") -> "NCPolynomial":
        return self + other.scale(-1)

    def __mul__(self, other: "NCPolynomial") -> "NCPolynomial":
        return NCPolynomial(
            tuple((c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms)
        ).simplify()

    def scale(self, factor: complex) -> "NCPolynomial":
        return NCPolynomial(tuple((c * factor, w) for c, w in self.terms))

    def check_letters(self, n_settings: int, n_outcomes: int) -> None:
        for _, word in self.terms:
            for y, b in word:
                if not (0 <= y < n_settings and 0 <= b < n_outcomes):
                    raise exceptions.DimensionMismatchError(
                        f"Letter ({y}, {b}) is outside a {n_settings} x "
                        f"{n_outcomes} family."
                    )

    def evaluate(self, B: npt.ArrayLike) -> CMatrix:
        family = np.asarray(B, dtype=np.complex128)
        self.check_letters(family.shape[0], family.shape[1])
        result = np.zeros(family.shape[2:], dtype=np.complex128)
        for coefficient, word in self.terms:
            result = result + coefficient * evaluate_word(family, word)
        return result

    def label(self) -> str:
        return " + ".join(f"({c:g})*{word_label(w)}" for c, w in self.terms) or "0"


def word_label(word: BobWord) -> str:
    if len(word) == 0:
        return "1"
    return " ".join(f"B{y}|{b}" for y, b in word)


def evaluate_word(B: CMatrix, word: BobWord) -> CMatrix:
    op = np.eye(B.shape[2], dtype=np.complex128)
    for y, b in word:
        op = op @ B[y, b]
    return op


def chsh_residual_polynomial() -> NCPolynomial:
    """{B_0, B_1}^2 with B_y = B[y, 0] - B[y, 1]."""
    b0 = NCPolynomial.monomial([(0, 0)]) - NCPolynomial.monomial([(0, 1)])
    b1 = NCPolynomial.monomial([(1, 0)]) - NCPolynomial.monomial([(1, 1)])
    anticommutator = b0 * b1 + b1 * b0
    return anticommutator * anticommutator


###############################################################################


def correlation_of(s: SequentialQuantumStrategy) -> Correlation:
    """
    p(a, b | x, y) = tr(sigma[x, a] B[y, b]). The result is subnormalized when the
    strategy holds rejected answers.
    """
    p = np.einsum("xaij,ybji->xyab", s.sigma, s.B).real
    return Correlation(
        np.clip(p, 0.0, None),
        subnormalized=s.invalid_mass > constants.NORMALIZATION_TOL,
    )


def moments(s: SequentialQuantumStrategy, poly: NCPolynomial) -> CMatrix:
    """tr(sigma_x P) for every x."""
    return np.einsum("xij,ji->x", s.sigma_x, poly.evaluate(s.B))


def strong_nonsig_residual(
    s: SequentialQuantumStrategy,
    degree: int,
) -> Tuple[float, NCPolynomial]:
    """
    The largest |tr(sigma_x W) - tr(sigma_x' W)| over Alice's questions x, x' and all
    words W in Bob's POVM elements of length at most degree.

    Returns
    -------
    residual: float
        The largest difference.
    witness: NCPolynomial
        A monomial attaining it (the empty word when everything agrees).

    Raises
    ------
    exceptions.BudgetExceededError
        More than MAX_MONOMIALS words would be enumerated.
    """
    if degree < 0:
        raise ValueError(f"Degree must be nonnegative (received {degree}).")
    letters = [(y, b) for y in range(s.B.shape[0]) for b in range(s.B.shape[1])]
    n_words = sum(len(letters) ** k for k in range(degree + 1))
    if n_words > MAX_MONOMIALS:
        raise exceptions.BudgetExceededError(
            "Monomial enumeration", n_words, MAX_MONOMIALS
        )

    states = s.sigma_x
    best = (0.0, ())  # type: Tuple[float, BobWord]

    def visit(word: BobWord, op: CMatrix) -> None:
        nonlocal best
        values = np.einsum("xij,ji->x", states, op)
        spread = float(np.max(np.abs(values[:, None] - values[None, :])))
        if spread > best[0]:
            best = (spread, word)
        if len(word) < degree:
            for letter in letters:
                visit(word + (letter,), op @ s.B[letter])

    visit((), np.eye(s.dim, dtype=np.complex128))
    log.debug(f"Strong non-signaling residual at degree {degree}: {best[0]:.3e}")
    return best[0], NCPolynomial.monomial(best[1])


###############################################################################


def convert_classical(
    s: SequentialClassicalStrategy,
    tol: float = constants.NORMALIZATION_TOL,
) -> ClassicalStrategy:
    """
    Turn a sequential classical strategy whose omega marginal does not depend on x
    into a classical strategy with shared randomness gamma(omega) = p(omega | x).

    Raises
    ------
    exceptions.NotStronglyNonsignalingError
        The omega marginals differ across x by more than tol.
    """
    marginals = s.omega_marginals
    deviation = float(np.max(marginals.max(axis=0) - marginals.min(axis=0)))
    if deviation > tol:
        raise exceptions.NotStronglyNonsignalingError(deviation, tol)

    gamma = np.clip(marginals.mean(axis=0), 0.0, None)
    gamma = gamma / gamma.sum()
    n_a, k_a, n_omega = s.pA_omega.shape
    p_a = np.full((n_omega, n_a, k_a), 1.0 / k_a)
    for x in range(n_a):
        support = marginals[x] > 0
        p_a[support, x, :] = (s.pA_omega[x][:, support] / marginals[x][support]).T
    p_a = np.clip(p_a, 0.0, None)
    p_a = p_a / p_a.sum(axis=2, keepdims=True)

    return ClassicalStrategy(gamma=gamma, pA=p_a, qB=s.qB)


def convert_purify(
    s: SequentialQuantumStrategy,
    tol: float = constants.UHLMANN_TOL,
) -> QuantumStrategy:
    """
    Build a tensor product strategy from a strategy whose averaged states agree.

    Every sigma_x is purified as sum_a |a> (x) |psi_xa> with an answer register
    C^kA (x) C^dim on Alice's side and Bob keeping C^dim. The shared state is the
    purification of sigma_0 and Alice measures U_x^* (|a><a| (x) 1) U_x where the
    Uhlmann unitary U_x maps it onto the purification of sigma_x.

    Raises
    ------
    exceptions.NotStronglyNonsignalingError
        Some sigma_x differs from sigma_0 by more than tol in trace norm.
    exceptions.InvalidStrategyError
        More than tol of the probability is carried by rejected answers.
    """
    if s.invalid_mass > tol:
        raise exceptions.InvalidStrategyError(
            f"{s.invalid_mass:.3e} of the probability belongs to rejected answers."
        )
    states = s.sigma_x
    deviation = max(numerics.trace_norm(state - states[0]) for state in states)
    if deviation > tol:
        raise exceptions.NotStronglyNonsignalingError(deviation, tol)

    n_a, _, k_a, _ = s.shape
    d = s.dim
    # Alice first: phi_x[(a, j), s] = Psi_xa[s, j]
    purifications = []
    for x in range(n_a):
        blocks = [purify(s.sigma[x, a]).as_matrix((d, d)).T for a in range(k_a)]
        purifications.append(np.concatenate(blocks, axis=0))

    source = purifications[0].reshape(-1)
    norm = np.linalg.norm(source)
    m = np.zeros((n_a, k_a, k_a * d, k_a * d), dtype=np.complex128)
    for x in range(n_a):
        u = uhlmann_unitary(purifications[x], source, (k_a * d, d), tol=tol)
        for a in range(k_a):
            projector = np.zeros((k_a * d, k_a * d), dtype=np.complex128)
            projector[a * d : (a + 1) * d, a * d : (a + 1) * d] = np.eye(d)
            m[x, a] = numerics.dagger(u) @ projector @ u
        m[x] = (m[x] + np.conj(np.swapaxes(m[x], -1, -2))) / 2

    log.info(
        f"Purified a sequential strategy of dimension {d} into dims ({k_a * d}, {d})"
    )
    return QuantumStrategy(psi=source / norm, M=m, N=s.B)


###############################################################################


@dataclass(frozen=True)
class AlgebraBlock:
    """
    One block M_n (x) 1_m of the algebra generated by Bob's operators. The isometry
    maps C^n (x) C^m (row-major) into C^dim.
    """

    n: int
    m: int
    isometry: CMatrix


@dataclass(frozen=True)
class AlgebraBlockDecomposition:
    blocks: Tuple[AlgebraBlock, ...]
    residual: float
    algebra_dimension: int

    @property
    def unitary(self) -> CMatrix:
        return np.concatenate([block.isometry for block in self.blocks], axis=1)

    @property
    def block_shapes(self) -> List[Tuple[int, int]]:
        return [(block.n, block.m) for block in self.blocks]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "blocks": [{"n": block.n, "m": block.m} for block in self.blocks],
            "residual": self.residual,
            "algebra_dimension": self.algebra_dimension,
        }


def generate_algebra(B: npt.ArrayLike, tol: float = constants.BLOCK_TOL) -> CMatrix:
    """
    An orthonormal basis (columns of vectorized matrices) of the unital algebra
    generated by the operators in B, by repeated multiplication until the span stops
    growing.

    Raises
    ------
    exceptions.NoConvergenceError
        The span still grows after constants.ALGEBRA_MAX_ROUNDS rounds.
    """
    family = np.asarray(B, dtype=np.complex128)
    d = family.shape[-1]
    generators = family.reshape(-1, d, d)
    basis = orth(
        np.stack([np.eye(d).reshape(-1)] + [g.reshape(-1) for g in generators], axis=1),
        rcond=tol,
    )
    for round_ in range(constants.ALGEBRA_MAX_ROUNDS):
        elements = basis.T.reshape(-1, d, d)
        products = [(e @ g).reshape(-1) for e in elements for g in generators]
        candidates = np.concatenate([basis, np.stack(products, axis=1)], axis=1)
        grown = orth(candidates, rcond=tol)
        if grown.shape[1] == basis.shape[1]:
            log.debug(
                f"Algebra of dimension {basis.shape[1]} closed after {round_} rounds"
            )
            return basis
        basis = grown

    raise exceptions.NoConvergenceError(
        f"Algebra closure did not stabilize after "
        f"{constants.ALGEBRA_MAX_ROUNDS} rounds."
    )


def commutant_basis(B: npt.ArrayLike, tol: float = constants.BLOCK_TOL) -> CMatrix:
    """Matrices X with [X, B[y, b]] = 0 for all y, b, as a (c, d, d) array."""
    family = np.asarray(B, dtype=np.complex128)
    d = family.shape[-1]
    eye = np.eye(d)
    # Row-major vec: vec(B X) = (B (x) 1) vec(X), vec(X B) = (1 (x) B^T) vec(X)
    system = np.concatenate(
        [np.kron(b, eye) - np.kron(eye, b.T) for b in family.reshape(-1, d, d)], axis=0
    )
    basis = null_space(system, rcond=tol)
    return basis.T.reshape(-1, d, d)


def _group_eigenvalues(eigenvalues: RealArray, gap: float) -> List[List[int]]:
    groups: List[List[int]] = [[0]]
    for i in range(1, eigenvalues.size):
        if abs(eigenvalues[i - 1] - eigenvalues[i]) <= gap:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _find_blocks(
    commutant: CMatrix,
    rng: np.random.Generator,
    tol: float,
) -> Optional[List[AlgebraBlock]]:
    d = commutant.shape[-1]
    n_commutant = len(commutant)
    coefficients = rng.standard_normal(n_commutant) + 1j * rng.standard_normal(
        n_commutant
    )
    element = np.einsum("k,kij->ij", coefficients, commutant)
    hermitian = (element + numerics.dagger(element)) / 2
    hermitian = hermitian / max(numerics.operator_norm(hermitian), 1e-300)
    eigenvalues, eigenvectors = numerics.hermitian_eig(hermitian, tol=np.inf)
    groups = _group_eigenvalues(eigenvalues, np.sqrt(tol))
    clusters = [eigenvectors[:, group] for group in groups]

    mixer_coefficients = rng.standard_normal(n_commutant) + 1j * rng.standard_normal(
        n_commutant
    )
    mixer = np.einsum("k,kij->ij", mixer_coefficients, commutant)

    # Union-find over clusters linked by the mixer
    parent = list(range(len(clusters)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in product(range(len(clusters)), repeat=2):
        if i < j and numerics.operator_norm(
            numerics.dagger(clusters[j]) @ mixer @ clusters[i]
        ) > np.sqrt(tol):
            parent[find(j)] = find(i)

    grouped: Dict[int, List[int]] = {}
    for i in range(len(clusters)):
        grouped.setdefault(find(i), []).append(i)

    blocks = []
    for members in grouped.values():
        first = clusters[members[0]]
        n = first.shape[1]
        if any(clusters[j].shape[1] != n for j in members):
            return None
        aligned = [first]
        for j in members[1:]:
            q = clusters[j]
            bridge = numerics.polar_unitary(numerics.dagger(q) @ mixer @ first)
            aligned.append(q @ bridge)
        m = len(members)
        # Column (k, j) in row-major order of C^n (x) C^m
        isometry = np.stack(aligned, axis=2).reshape(d, n * m)
        blocks.append(AlgebraBlock(n=n, m=m, isometry=isometry))

    return sorted(blocks, key=lambda block: (block.n, block.m))


def _leakage(blocks: Sequence[AlgebraBlock], B: CMatrix) -> float:
    """
    How far the operators are from the block form sum_i V_i (X_i (x) 1_m) V_i^*.
    """
    unitary = np.concatenate([block.isometry for block in blocks], axis=1)
    identity = np.eye(unitary.shape[1])
    worst = float(np.max(np.abs(numerics.dagger(unitary) @ unitary - identity)))
    for op in B.reshape(-1, *B.shape[2:]):
        rotated = numerics.dagger(unitary) @ op @ unitary
        offset = 0
        reconstructed = np.zeros_like(rotated)
        for block in blocks:
            size = block.n * block.m
            part = rotated[offset : offset + size, offset : offset + size]
            reduced = (
                numerics.partial_trace(part, (block.n, block.m), numerics.SIDE_B)
                / block.m
            )
            reconstructed[offset : offset + size, offset : offset + size] = np.kron(
                reduced, np.eye(block.m)
            )
            offset += size
        worst = max(worst, float(np.max(np.abs(rotated - reconstructed))))
    return worst


def block_reduce(
    s: SequentialQuantumStrategy,
    tol: float = constants.BLOCK_TOL,
    seed: Seed = constants.DEFAULT_SEED,
) -> Tuple[AlgebraBlockDecomposition, SequentialQuantumStrategy]:
    """
    Decompose the algebra generated by Bob's operators as a direct sum of blocks
    M_n (x) 1_m and replace every sigma[x, a] by
    sum_i V_i (tr_m(V_i^* sigma V_i) (x) 1_m / m) V_i^*.

    The replacement has the same expectation as sigma on every element of the algebra.

    Raises
    ------
    exceptions.NoConvergenceError
        No consistent block structure was found in constants.BLOCK_DETECTION_ATTEMPTS
        attempts, or the algebra closure did not stabilize.
    """
    rng = numerics.default_rng(seed)
    algebra_dimension = generate_algebra(s.B, tol=tol).shape[1]
    commutant = commutant_basis(s.B, tol=tol)

    for attempt in range(constants.BLOCK_DETECTION_ATTEMPTS):
        blocks = _find_blocks(commutant, rng, tol)
        if blocks is None:
            log.debug(f"Block detection attempt {attempt}: inconsistent cluster sizes")
            continue
        if sum(block.n * block.m for block in blocks) != s.dim:
            log.debug(
                f"Block detection attempt {attempt}: blocks do not cover the space"
            )
            continue
        if sum(block.n**2 for block in blocks) != algebra_dimension:
            log.debug(
                f"Block detection attempt {attempt}: dimensions do not match the "
                "algebra"
            )
            continue
        residual = _leakage(blocks, s.B)
        if residual > tol:
            log.debug(f"Block detection attempt {attempt}: leakage {residual:.3e}")
            continue

        decomposition = AlgebraBlockDecomposition(
            blocks=tuple(blocks), residual=residual, algebra_dimension=algebra_dimension
        )
        log.info(f"Algebra decomposes into blocks {decomposition.block_shapes}")
        return decomposition, _reduce_states(s, decomposition)

    raise exceptions.NoConvergenceError(
        f"No block structure found in {constants.BLOCK_DETECTION_ATTEMPTS} attempts."
    )


def _reduce_states(
    s: SequentialQuantumStrategy,
    decomposition: AlgebraBlockDecomposition,
) -> SequentialQuantumStrategy:
    def reduce(op: CMatrix) -> CMatrix:
        out = np.zeros_like(op)
        for block in decomposition.blocks:
            v = block.isometry
            reduced = numerics.partial_trace(
                numerics.dagger(v) @ op @ v, (block.n, block.m), numerics.SIDE_B
            )
            mixed = np.kron(reduced, np.eye(block.m) / block.m)
            out = out + v @ mixed @ numerics.dagger(v)
        return (out + numerics.dagger(out)) / 2

    sigma = np.stack([np.stack([reduce(op) for op in row]) for row in s.sigma])
    invalid = np.stack([reduce(op) for op in s.invalid])
    return SequentialQuantumStrategy(sigma=sigma, B=s.B, invalid=invalid)


###############################################################################


def chsh_selftest_residual(s: SequentialQuantumStrategy) -> float:
    """
    max over x, a of tr(sigma[x, a] {B_0, B_1}^2) with B_y = B[y, 0] - B[y, 1].
    Zero exactly when Bob's observables anticommute on the support of every sigma.

    Raises
    ------
    exceptions.ShapeMismatchError
        Bob does not have exactly two binary measurements.
    """
    if s.B.shape[:2] != (2, 2):
        raise exceptions.ShapeMismatchError(
            f"The CHSH residual needs two binary Bob measurements "
            f"(received {s.B.shape[0]} settings with {s.B.shape[1]} outcomes)."
        )
    residual_operator = chsh_residual_polynomial().evaluate(s.B)
    values = np.einsum("xaij,ji->xa", s.sigma, residual_operator).real
    return float(values.max())


def degree_separation_witness() -> SequentialQuantumStrategy:
    """
    A qubit strategy whose averaged states agree on every single POVM element but not
    on products of two: sigma_0 = (1 + Y)/2 and sigma_1 = (1 - Y)/2 with Bob measuring
    Z and X. Both states have zero Z and X expectations, while tr(sigma_x ZX) = +-i.
    """
    eye = np.eye(2, dtype=np.complex128)
    sigma = np.zeros((2, 2, 2, 2), dtype=np.complex128)
    sigma[0, 0] = (eye + PAULI_Y) / 2
    sigma[1, 0] = (eye - PAULI_Y) / 2
    b = np.stack(
        [
            np.stack([(eye + PAULI_Z) / 2, (eye - PAULI_Z) / 2]),
            np.stack([(eye + PAULI_X) / 2, (eye - PAULI_X) / 2]),
        ]
    )
    return SequentialQuantumStrategy(sigma=sigma, B=b)


def as_sequential(
    strategy: Union[SequentialQuantumStrategy, QuantumStrategy, CommutingStrategy],
) -> SequentialQuantumStrategy:
    if isinstance(strategy, SequentialQuantumStrategy):
        return strategy
    if isinstance(strategy, QuantumStrategy):
        return SequentialQuantumStrategy.from_quantum(strategy)
    return SequentialQuantumStrategy.from_commuting(strategy)
