#!/usr/bin/env python
# -*- coding: utf-8 -*-

from functools import reduce
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.linalg import null_space

from . import constants, exceptions
from .types import CMatrix, RealArray, Seed

###############################################################################

SIDE_A = "A"
SIDE_B = "B"

###############################################################################


def as_cmatrix(a: npt.ArrayLike) -> CMatrix:
    """
    Convert anything array-like into a two dimensional complex128 array, checking that
    every entry is finite.

    Raises
    ------
    ValueError
        The input is not two dimensional or holds NaN / Inf entries.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(
            f"Expected a matrix but received an array of shape {arr.shape}."
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("Matrix holds non-finite entries.")

    return arr


def _require_square(a: CMatrix) -> None:
    if a.shape[0] != a.shape[1]:
        raise exceptions.DimensionMismatchError(
            f"Expected a square matrix but received shape {a.shape}."
        )


def dagger(a: npt.ArrayLike) -> CMatrix:
    """Conjugate transpose."""
    return np.conj(np.asarray(a, dtype=np.complex128)).T


def hermitian_deviation(a: CMatrix) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - dagger(a))))


def hermitian_eig(
    a: npt.ArrayLike,
    tol: float = constants.HERMITIAN_TOL,
) -> Tuple[RealArray, CMatrix]:
    """
    Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    a: npt.ArrayLike
        The square matrix to decompose.
    tol: float
        Maximum allowed entrywise deviation between a and its adjoint.
        Default: constants.HERMITIAN_TOL

    Returns
    -------
    eigenvalues: RealArray
        The eigenvalues in descending order.
    eigenvectors: CMatrix
        Orthonormal eigenvectors stored as columns, in the same order as the
        eigenvalues.

    Raises
    ------
    exceptions.DimensionMismatchError
        The matrix is not square.
    exceptions.NotHermitianError
        The matrix deviates from its adjoint by more than tol.
    exceptions.NoConvergenceError
        LAPACK failed to converge.
    """
    arr = as_cmatrix(a)
    _require_square(arr)
    deviation = hermitian_deviation(arr)
    if deviation > tol:
        raise exceptions.NotHermitianError(deviation, tol)

    # Symmetrize so that the solver sees an exactly Hermitian input
    arr = (arr + dagger(arr)) / 2
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(arr)
    except np.linalg.LinAlgError as e:
        raise exceptions.NoConvergenceError(f"Hermitian eigensolver failed: {e}") from e

    return eigenvalues[::-1].copy(), eigenvectors[:, ::-1].copy()


def svd(a: npt.ArrayLike) -> Tuple[CMatrix, RealArray, CMatrix]:
    """
    Full singular value decomposition such that a = U @ diag(s) @ V^*.

    Returns
    -------
    U: CMatrix
        Left singular vectors (unitary, rows x rows).
    s: RealArray
        Singular values in descending order.
    V: CMatrix
        Right singular vectors (unitary, cols x cols). Note this is V and not V^*.

    Raises
    ------
    exceptions.NoConvergenceError
        LAPACK failed to converge.
    """
    arr = as_cmatrix(a)
    try:
        u, s, vh = np.linalg.svd(arr, full_matrices=True)
    except np.linalg.LinAlgError as e:
        raise exceptions.NoConvergenceError(f"SVD failed to converge: {e}") from e

    return u, s, dagger(vh)


def kron(*operators: npt.ArrayLike) -> CMatrix:
    """
    Kronecker product of one or more operators, left factor first.
    """
    if len(operators) == 0:
        raise exceptions.EmptyListError("kron requires at least one operator.")

    return reduce(
        lambda left, right: np.kron(left, right),
        [np.asarray(op, dtype=np.complex128) for op in operators],
    )


def partial_trace(a: npt.ArrayLike, dims: Tuple[int, int], side: str) -> CMatrix:
    """
    Trace out one factor of a bipartite operator.

    Parameters
    ----------
    a: npt.ArrayLike
        An operator on C^dA (x) C^dB.
    dims: Tuple[int, int]
        The factor dimensions (dA, dB).
    side: str
        Which factor to trace out, "A" or "B". Tracing out "B" of X (x) Y gives
        tr(Y) X.

    Raises
    ------
    exceptions.DimensionMismatchError
        The operator does not act on a space of dimension dA * dB.
    ValueError
        The side is neither "A" nor "B".
    """
    arr = as_cmatrix(a)
    d_a, d_b = dims
    if arr.shape != (d_a * d_b, d_a * d_b):
        raise exceptions.DimensionMismatchError(
            f"Operator of shape {arr.shape} does not act on dims {dims}."
        )

    tensor = arr.reshape(d_a, d_b, d_a, d_b)
    if side == SIDE_B:
        return np.einsum("ijkj->ik", tensor)
    if side == SIDE_A:
        return np.einsum("ijil->jl", tensor)

    raise ValueError(
        f"Side must be one of '{SIDE_A}' or '{SIDE_B}' (received: {side})."
    )


def min_eigenvalue(a: npt.ArrayLike, tol: float = constants.HERMITIAN_TOL) -> float:
    eigenvalues, _ = hermitian_eig(a, tol=tol)
    if eigenvalues.size == 0:
        return 0.0
    return float(eigenvalues[-1])


def is_psd(a: npt.ArrayLike, tol: float = constants.PSD_TOL) -> bool:
    """
    True iff the matrix is Hermitian within tol and its minimum eigenvalue is at least
    -tol.
    """
    arr = as_cmatrix(a)
    _require_square(arr)
    if hermitian_deviation(arr) > tol:
        return False

    return min_eigenvalue(arr, tol=tol) >= -tol


def mat_sqrt_psd(a: npt.ArrayLike, tol: float = constants.PSD_TOL) -> CMatrix:
    """
    Principal square root of a positive semidefinite matrix. Eigenvalues in [-tol, 0)
    are clipped to zero.

    Raises
    ------
    exceptions.NotPsdError
        An eigenvalue is below -tol.
    """
    eigenvalues, eigenvectors = hermitian_eig(a, tol=tol)
    if eigenvalues.size > 0 and eigenvalues[-1] < -tol:
        raise exceptions.NotPsdError(float(eigenvalues[-1]), tol)

    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * roots) @ dagger(eigenvectors)


def project_psd(a: npt.ArrayLike) -> CMatrix:
    """Clip all negative eigenvalues of a Hermitian matrix to zero."""
    eigenvalues, eigenvectors = hermitian_eig(a, tol=np.inf)
    return (eigenvectors * np.clip(eigenvalues, 0.0, None)) @ dagger(eigenvectors)


def operator_norm(a: npt.ArrayLike) -> float:
    arr = np.asarray(a, dtype=np.complex128)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, ord=2))


def trace_norm(a: npt.ArrayLike) -> float:
    arr = np.asarray(a, dtype=np.complex128)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, ord="nuc"))


def polar_unitary(a: npt.ArrayLike) -> CMatrix:
    """
    The unitary factor W of the polar decomposition a = W |a|, computed as U V^* from
    the singular value decomposition. For singular a the factor is one valid choice.
    """
    u, _, v = svd(a)
    arr = np.asarray(a)
    rows, cols = arr.shape
    k = min(rows, cols)
    return u[:, :k] @ dagger(v[:, :k])


def is_unitary(u: npt.ArrayLike, tol: float = constants.NORMALIZATION_TOL) -> bool:
    arr = as_cmatrix(u)
    if arr.shape[0] != arr.shape[1]:
        return False
    return bool(np.max(np.abs(dagger(arr) @ arr - np.eye(arr.shape[0]))) <= tol)


def random_unitary(dim: int, rng: np.random.Generator) -> CMatrix:
    """
    A Haar distributed unitary from the QR decomposition of a complex Gaussian matrix
    with the phases of R's diagonal absorbed into Q.
    """
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_density(
    dim: int,
    rng: np.random.Generator,
    rank: Optional[int] = None,
) -> CMatrix:
    """A random density operator of the requested rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> CMatrix:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + dagger(g)) / 2


def permute_subsystems(
    op: npt.ArrayLike,
    dims: Sequence[int],
    perm: Sequence[int],
) -> CMatrix:
    """
    Reorder the tensor factors of an operator. Factor perm[k] of the input becomes
    factor k of the output.

    Raises
    ------
    exceptions.DimensionMismatchError
        The operator does not act on the product of dims, or perm is not a
        permutation of the factors.
    """
    arr = as_cmatrix(op)
    total = int(np.prod(dims))
    if arr.shape != (total, total):
        raise exceptions.DimensionMismatchError(
            f"Operator of shape {arr.shape} does not act on dims {tuple(dims)}."
        )
    if sorted(perm) != list(range(len(dims))):
        raise exceptions.DimensionMismatchError(
            f"{tuple(perm)} is not a permutation of {len(dims)} factors."
        )

    n = len(dims)
    tensor = arr.reshape(tuple(dims) + tuple(dims))
    axes = list(perm) + [n + p for p in perm]
    return tensor.transpose(axes).reshape(total, total)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def num_qubits(n: int) -> int:
    """Number of qubits needed to hold n basis states (0 for n == 1)."""
    return max(int(n - 1).bit_length(), 0)


def default_rng(seed: Seed = None) -> np.random.Generator:
    """
    A Generator over the counter-based Philox bit generator. Passing an existing
    Generator returns it unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed

    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: Seed, n: int) -> List[np.random.SeedSequence]:
    """
    Split one seed into n independent child seeds. Child k only depends on (seed, k).
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(n)
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63))

    return np.random.SeedSequence(seed).spawn(n)


def complete_to_unitary(isometry: npt.ArrayLike) -> CMatrix:
    """
    Extend the orthonormal columns of an isometry to a square unitary by appending an
    orthonormal basis of their complement.
    """
    v = as_cmatrix(isometry)
    complement = null_space(dagger(v))
    return np.concatenate([v, complement], axis=1)
