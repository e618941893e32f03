#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Finite dimensional states, measurements and instruments.

Density operators may be subnormalized (trace below one); the post-measurement states
of a sequential strategy are of that kind.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from . import constants, exceptions, numerics
from .types import CMatrix, RealArray, Seed

###############################################################################

log = logging.getLogger(__name__)

###############################################################################


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    A vector state. Unit norm unless normalized is False, in which case the squared
    norm may be anything in [0, 1] (purifications of subnormalized operators).
    """

    amplitudes: CMatrix
    normalized: bool = True

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size == 0:
            raise exceptions.DimensionMismatchError(
                "States need at least one amplitude."
            )
        norm = float(np.linalg.norm(amplitudes))
        if self.normalized and abs(norm - 1) > constants.NORMALIZATION_TOL:
            raise exceptions.InvalidStrategyError(f"State has norm {norm!r}, not 1.")
        if norm > 1 + constants.NORMALIZATION_TOL:
            raise exceptions.InvalidStrategyError(f"State has norm {norm!r} above 1.")

        object.__setattr__(self, "amplitudes", _freeze(amplitudes))

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))

    def as_matrix(self, dims: Tuple[int, int]) -> CMatrix:
        """The dA x dB coefficient matrix of a bipartite vector."""
        if dims[0] * dims[1] != self.dim:
            raise exceptions.DimensionMismatchError(
                f"State of dimension {self.dim} does not live on dims {dims}."
            )
        return self.amplitudes.reshape(dims)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    A positive semidefinite operator of trace at most one.

    Raises
    ------
    exceptions.NotHermitianError
        The matrix deviates from its adjoint by more than constants.HERMITIAN_TOL.
    exceptions.NotPsdError
        An eigenvalue is below -constants.PSD_TOL.
    ValueError
        The trace lies outside [0, 1 + constants.NORMALIZATION_TOL].
    """

    matrix: CMatrix

    def __post_init__(self) -> None:
        matrix = numerics.as_cmatrix(self.matrix)
        eigenvalues, _ = numerics.hermitian_eig(matrix)
        if eigenvalues[-1] < -constants.PSD_TOL:
            raise exceptions.NotPsdError(float(eigenvalues[-1]), constants.PSD_TOL)
        trace = float(np.trace(matrix).real)
        if trace > 1 + constants.NORMALIZATION_TOL:
            raise ValueError(f"Density operator has trace {trace!r} above 1.")

        hermitian = (matrix + numerics.dagger(matrix)) / 2
        object.__setattr__(self, "matrix", _freeze(hermitian))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def normalized(self) -> bool:
        return abs(self.trace - 1) <= constants.NORMALIZATION_TOL


@dataclass(frozen=True, eq=False)
class Povm:
    """
    A positive operator valued measure with elements of shape (k, d, d).
    """

    elements: CMatrix

    def __post_init__(self) -> None:
        elements = np.asarray(self.elements, dtype=np.complex128)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise exceptions.DimensionMismatchError(
                f"POVM elements have shape (k, d, d) (received {elements.shape})."
            )
        deviation = float(
            np.max(np.abs(elements.sum(axis=0) - np.eye(elements.shape[1])))
        )
        for element in elements:
            deviation = max(deviation, numerics.hermitian_deviation(element))
            deviation = max(deviation, -numerics.min_eigenvalue(element, tol=np.inf))
        if deviation > constants.PSD_TOL:
            raise exceptions.InvalidStrategyError(
                f"POVM violates its invariants by {deviation:.3e}."
            )

        object.__setattr__(self, "elements", _freeze(elements))

    @property
    def outcomes(self) -> int:
        return int(self.elements.shape[0])

    @property
    def dim(self) -> int:
        return int(self.elements.shape[1])

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls(np.stack([np.diag(row) for row in np.eye(dim, dtype=np.complex128)]))


@dataclass(frozen=True, eq=False)
class Instrument:
    """
    A quantum instrument: a list of Kraus operators per outcome such that
    sum over outcomes and Kraus operators of K^* K is the identity.
    """

    branches: Mapping[int, Sequence[CMatrix]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.branches) == 0:
            raise exceptions.EmptyListError("Instruments need at least one outcome.")
        branches: Dict[int, List[CMatrix]] = {
            int(outcome): [numerics.as_cmatrix(k) for k in kraus]
            for outcome, kraus in self.branches.items()
        }
        all_kraus = [k for kraus in branches.values() for k in kraus]
        d = all_kraus[0].shape[1]
        if any(k.shape[1] != d for k in all_kraus):
            raise exceptions.DimensionMismatchError(
                "Kraus operators of one instrument must share their input dimension."
            )
        total = sum(numerics.dagger(k) @ k for k in all_kraus)
        deviation = float(np.max(np.abs(total - np.eye(d))))
        if deviation > constants.NORMALIZATION_TOL:
            raise exceptions.InvalidStrategyError(
                f"Instrument is not trace preserving (deviation {deviation:.3e})."
            )

        object.__setattr__(self, "branches", branches)

    @property
    def dim(self) -> int:
        first = next(iter(self.branches.values()))[0]
        return int(first.shape[1])

    @classmethod
    def from_povm(cls, povm: Povm) -> "Instrument":
        """The Lueders instrument with the single Kraus operator sqrt(M_a)."""
        return cls(
            {
                a: [numerics.mat_sqrt_psd(element)]
                for a, element in enumerate(povm.elements)
            }
        )


###############################################################################


def _as_density(rho: Union[DensityOperator, npt.ArrayLike]) -> DensityOperator:
    if isinstance(rho, DensityOperator):
        return rho
    return DensityOperator(rho)


def outcome_distribution(
    rho: Union[DensityOperator, npt.ArrayLike],
    m: Povm,
) -> RealArray:
    """
    Born rule probabilities tr(M_a rho) / tr(rho).

    Raises
    ------
    exceptions.DimensionMismatchError
        The POVM does not act on the state's space.
    ValueError
        The state has zero trace.
    """
    rho = _as_density(rho)
    if rho.dim != m.dim:
        raise exceptions.DimensionMismatchError(
            f"POVM on dimension {m.dim} cannot measure a state of dimension {rho.dim}."
        )
    if rho.trace <= 0:
        raise ValueError("Cannot measure a state of zero trace.")

    probabilities = np.einsum("aij,ji->a", m.elements, rho.matrix).real / rho.trace
    probabilities = np.clip(probabilities, 0.0, None)
    return probabilities / probabilities.sum()


def measure(
    rho: Union[DensityOperator, npt.ArrayLike],
    m: Povm,
    seed: Seed = None,
) -> int:
    """Sample one outcome from outcome_distribution(rho, m)."""
    probabilities = outcome_distribution(rho, m)
    rng = numerics.default_rng(seed)
    return int(rng.choice(probabilities.size, p=probabilities))


def apply_instrument(
    rho: Union[DensityOperator, npt.ArrayLike],
    inst: Instrument,
) -> Dict[int, DensityOperator]:
    """
    The subnormalized post-measurement operator sum_k K rho K^* of every outcome.
    The traces of the outputs sum to tr(rho).
    """
    rho = _as_density(rho)
    if rho.dim != inst.dim:
        raise exceptions.DimensionMismatchError(
            f"Instrument on dimension {inst.dim} cannot act on dimension {rho.dim}."
        )

    outputs: Dict[int, DensityOperator] = {}
    for outcome, kraus in inst.branches.items():
        out = sum(k @ rho.matrix @ numerics.dagger(k) for k in kraus)
        outputs[outcome] = DensityOperator(out)

    return outputs


def trace_distance(
    rho1: Union[DensityOperator, npt.ArrayLike],
    rho2: Union[DensityOperator, npt.ArrayLike],
) -> float:
    """Half the trace norm of the difference."""
    a = rho1.matrix if isinstance(rho1, DensityOperator) else np.asarray(rho1)
    b = rho2.matrix if isinstance(rho2, DensityOperator) else np.asarray(rho2)
    if a.shape != b.shape:
        raise exceptions.DimensionMismatchError(
            f"Cannot compare operators of shape {a.shape} and {b.shape}."
        )
    return 0.5 * numerics.trace_norm(a - b)


###############################################################################


def _canonical_phase(v: CMatrix) -> CMatrix:
    """Rotate v so that its first component of non negligible size is real positive."""
    for component in v:
        if abs(component) > np.sqrt(constants.RANK_TOL):
            return v * (abs(component) / component)
    return v


def _eigenspace_basis(block: CMatrix) -> CMatrix:
    """
    An orthonormal basis of the span of block's columns that depends only on the
    span: Gram-Schmidt over the columns of its projector, in index order.
    """
    projector = block @ numerics.dagger(block)
    basis: List[CMatrix] = []
    for j in range(projector.shape[1]):
        v = projector[:, j].copy()
        for b in basis:
            v -= b * np.vdot(b, v)
        norm = np.linalg.norm(v)
        if norm > np.sqrt(constants.RANK_TOL):
            basis.append(v / norm)
        if len(basis) == block.shape[1]:
            break
    return np.stack(basis, axis=1)


def _canonical_eigenvectors(eigenvalues: RealArray, eigenvectors: CMatrix) -> CMatrix:
    # Eigenvalues arrive in descending order; runs within DEGENERACY_TOL share a basis
    columns = eigenvectors.copy()
    start = 0
    while start < len(eigenvalues):
        stop = start + 1
        while (
            stop < len(eigenvalues)
            and eigenvalues[start] - eigenvalues[stop] <= constants.DEGENERACY_TOL
        ):
            stop += 1
        if stop - start > 1:
            columns[:, start:stop] = _eigenspace_basis(columns[:, start:stop])
        start = stop
    return columns


def purify(sigma: Union[DensityOperator, npt.ArrayLike]) -> StateVector:
    """
    Purify sigma = sum_i l_i |v_i><v_i| to sum_i sqrt(l_i) |v_i> (x) |i> on dim ** 2.

    Eigenvectors are sorted by descending eigenvalue. Inside a degenerate eigenspace
    the basis is the Gram-Schmidt orthonormalization of the eigenprojector's columns,
    so it does not depend on the eigensolver. Each vector is then rotated so that its
    first significant component is real positive. Tracing out the second factor of the
    output recovers sigma; its squared norm is tr(sigma).

    Raises
    ------
    exceptions.NotPsdError
        sigma has an eigenvalue below -constants.PSD_TOL.
    """
    matrix = sigma.matrix if isinstance(sigma, DensityOperator) else np.asarray(sigma)
    eigenvalues, eigenvectors = numerics.hermitian_eig(matrix)
    if eigenvalues[-1] < -constants.PSD_TOL:
        raise exceptions.NotPsdError(float(eigenvalues[-1]), constants.PSD_TOL)

    eigenvectors = _canonical_eigenvectors(eigenvalues, eigenvectors)
    columns = np.stack(
        [_canonical_phase(eigenvectors[:, i]) for i in range(eigenvectors.shape[1])],
        axis=1,
    )
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return StateVector((columns * roots).reshape(-1), normalized=False)


def uhlmann_unitary(
    psi1: Union[StateVector, npt.ArrayLike],
    psi2: Union[StateVector, npt.ArrayLike],
    dims: Tuple[int, int],
    tol: float = constants.UHLMANN_TOL,
) -> CMatrix:
    """
    A unitary U on the first factor with (U (x) 1)|psi2> = |psi1>.

    Parameters
    ----------
    psi1: Union[StateVector, npt.ArrayLike]
        The target vector on C^dA (x) C^dB.
    psi2: Union[StateVector, npt.ArrayLike]
        The source vector on C^dA (x) C^dB.
    dims: Tuple[int, int]
        The factor dimensions (dA, dB).
    tol: float
        Allowed entrywise difference between the operators both vectors induce on
        the second factor.
        Default: constants.UHLMANN_TOL

    Returns
    -------
    U: CMatrix
        A dA x dA unitary. On the orthocomplement of the supports it maps the source
        complement onto the target complement as close to the identity as possible.

    Raises
    ------
    exceptions.ReducedStatesDifferError
        The vectors do not purify the same operator on the second factor.
    """
    a = np.asarray(getattr(psi1, "amplitudes", psi1), dtype=np.complex128).reshape(-1)
    b = np.asarray(getattr(psi2, "amplitudes", psi2), dtype=np.complex128).reshape(-1)
    d_a, d_b = dims
    if a.size != d_a * d_b or b.size != d_a * d_b:
        raise exceptions.DimensionMismatchError(
            f"Vectors of dimension {a.size} / {b.size} do not live on dims {dims}."
        )
    target = a.reshape(d_a, d_b)
    source = b.reshape(d_a, d_b)

    deviation = float(
        np.max(
            np.abs(numerics.dagger(target) @ target - numerics.dagger(source) @ source)
        )
    )
    if deviation > tol:
        raise exceptions.ReducedStatesDifferError(deviation, tol)

    x, s, y = numerics.svd(target @ numerics.dagger(source))
    rank = int(np.sum(s > constants.UHLMANN_RANK_TOL))
    u = x[:, :rank] @ numerics.dagger(y[:, :rank])
    if rank < d_a:
        q_x = x[:, rank:]
        q_y = y[:, rank:]
        bridge = numerics.polar_unitary(numerics.dagger(q_x) @ q_y)
        u = u + q_x @ bridge @ numerics.dagger(q_y)

    residual = float(np.linalg.norm(u @ source - target))
    log.debug(f"Uhlmann unitary of rank {rank}/{d_a}, residual {residual:.3e}")
    return u
