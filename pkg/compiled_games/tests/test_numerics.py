#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from compiled_games import exceptions, numerics


@pytest.mark.parametrize(
    "side, expected_factor",
    [
        ("B", "left"),
        ("A", "right"),
        pytest.param("C", None, marks=pytest.mark.xfail(raises=ValueError)),
    ],
)
def test_partial_trace(
    side: str, expected_factor: str, rng: np.random.Generator
) -> None:
    left = numerics.random_hermitian(2, rng)
    right = numerics.random_hermitian(3, rng)
    reduced = numerics.partial_trace(np.kron(left, right), (2, 3), side)

    if expected_factor == "left":
        np.testing.assert_allclose(reduced, np.trace(right) * left, atol=1e-12)
    else:
        np.testing.assert_allclose(reduced, np.trace(left) * right, atol=1e-12)


def test_partial_trace_wrong_dims() -> None:
    with pytest.raises(exceptions.DimensionMismatchError):
        numerics.partial_trace(np.eye(6), (2, 2), "A")


def test_hermitian_eig_descending(rng: np.random.Generator) -> None:
    a = numerics.random_hermitian(5, rng)
    eigenvalues, eigenvectors = numerics.hermitian_eig(a)

    assert np.all(np.diff(eigenvalues) <= 0)
    np.testing.assert_allclose(
        eigenvectors @ np.diag(eigenvalues) @ numerics.dagger(eigenvectors),
        a,
        atol=1e-10,
    )


@pytest.mark.parametrize(
    "matrix",
    [
        np.diag([1.0, 2.0]),
        pytest.param(
            np.array([[0.0, 1.0], [0.0, 0.0]]),
            marks=pytest.mark.xfail(raises=exceptions.NotHermitianError),
        ),
        pytest.param(
            np.ones((2, 3)),
            marks=pytest.mark.xfail(raises=exceptions.DimensionMismatchError),
        ),
        pytest.param(
            np.array([[np.nan, 0.0], [0.0, 1.0]]),
            marks=pytest.mark.xfail(raises=ValueError),
        ),
    ],
)
def test_hermitian_eig_input_checks(matrix: np.ndarray) -> None:
    numerics.hermitian_eig(matrix)


def test_svd_reconstructs(rng: np.random.Generator) -> None:
    a = rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6))
    u, s, v = numerics.svd(a)

    assert np.all(np.diff(s) <= 0)
    assert np.linalg.norm(a) == pytest.approx(np.sqrt(np.sum(s**2)), abs=1e-10)
    np.testing.assert_allclose(
        u @ np.diag(s) @ numerics.dagger(v[:, :4]), a, atol=1e-10
    )
    np.testing.assert_allclose(numerics.dagger(v) @ v, np.eye(6), atol=1e-10)


@pytest.mark.parametrize(
    "matrix, expected",
    [(np.zeros((3, 3)), 0.0), (np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)],
)
def test_svd_values(matrix: np.ndarray, expected: float) -> None:
    _, s, _ = numerics.svd(matrix)
    np.testing.assert_allclose(s, expected, atol=1e-12)


def test_mat_sqrt_psd(rng: np.random.Generator) -> None:
    rho = numerics.random_density(4, rng, rank=2)
    root = numerics.mat_sqrt_psd(rho)

    np.testing.assert_allclose(root @ root, rho, atol=1e-10)
    assert numerics.is_psd(root)


def test_mat_sqrt_psd_rejects_negative() -> None:
    with pytest.raises(exceptions.NotPsdError):
        numerics.mat_sqrt_psd(np.diag([1.0, -1.0]))


def test_project_psd_clips() -> None:
    projected = numerics.project_psd(np.diag([2.0, -1.0]))
    np.testing.assert_allclose(projected, np.diag([2.0, 0.0]), atol=1e-12)


def test_norms() -> None:
    a = np.diag([3.0, -4.0])
    assert numerics.operator_norm(a) == pytest.approx(4.0)
    assert numerics.trace_norm(a) == pytest.approx(7.0)
    assert numerics.operator_norm(np.zeros((0, 0))) == 0.0


def test_polar_unitary(rng: np.random.Generator) -> None:
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    w = numerics.polar_unitary(a)

    assert numerics.is_unitary(w)
    # a = W |a| with |a| positive
    assert numerics.is_psd(numerics.dagger(w) @ a, tol=1e-9)


def test_random_unitary(rng: np.random.Generator) -> None:
    assert numerics.is_unitary(numerics.random_unitary(6, rng))
    assert not numerics.is_unitary(np.ones((2, 3)))


def test_permute_subsystems(rng: np.random.Generator) -> None:
    a = numerics.random_hermitian(2, rng)
    b = numerics.random_hermitian(3, rng)
    swapped = numerics.permute_subsystems(np.kron(a, b), (2, 3), (1, 0))
    np.testing.assert_allclose(swapped, np.kron(b, a), atol=1e-12)

    c = numerics.random_hermitian(2, rng)
    cycled = numerics.permute_subsystems(
        numerics.kron(a, b, c), (2, 3, 2), (0, 2, 1)
    )
    np.testing.assert_allclose(cycled, numerics.kron(a, c, b), atol=1e-12)


@pytest.mark.parametrize(
    "dims, perm",
    [
        ((2, 2), (0, 0)),
        ((2, 3), (1, 0, 2)),
    ],
)
def test_permute_subsystems_bad_perm(dims: tuple, perm: tuple) -> None:
    with pytest.raises(exceptions.DimensionMismatchError):
        numerics.permute_subsystems(np.eye(int(np.prod(dims))), dims, perm)


@pytest.mark.parametrize(
    "n, expected",
    [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (64, 6)],
)
def test_num_qubits(n: int, expected: int) -> None:
    assert numerics.num_qubits(n) == expected


@pytest.mark.parametrize(
    "n, expected",
    [(1, True), (2, True), (6, False), (0, False), (1024, True)],
)
def test_is_power_of_two(n: int, expected: bool) -> None:
    assert numerics.is_power_of_two(n) is expected


def test_complete_to_unitary(rng: np.random.Generator) -> None:
    u = numerics.random_unitary(4, rng)
    isometry = u[:, :2]
    completed = numerics.complete_to_unitary(isometry)

    assert completed.shape == (4, 4)
    assert numerics.is_unitary(completed)
    np.testing.assert_allclose(completed[:, :2], isometry)


def test_default_rng_passthrough() -> None:
    generator = numerics.default_rng(7)
    assert numerics.default_rng(generator) is generator
    assert isinstance(generator.bit_generator, np.random.Philox)


def test_spawn_seeds_deterministic() -> None:
    first = [s.generate_state(2) for s in numerics.spawn_seeds(11, 3)]
    second = [s.generate_state(2) for s in numerics.spawn_seeds(11, 3)]

    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(first[0], first[1])
