#!/usr/bin/env python
# -*- coding: utf-8 -*-

from typing import Optional, Tuple


class DimensionMismatchError(Exception):
    """
    A general exception that can be thrown when operands have incompatible shapes.
    Should be provided with a message for the user to be given more context.
    """


class ShapeMismatchError(Exception):
    """
    Raised when a strategy does not have the question / answer shape an operation
    requires (for example the CHSH residual needs two binary Bob measurements).
    """


class NotHermitianError(Exception):
    """
    Raised when a matrix that must be Hermitian deviates from its adjoint by more
    than the requested tolerance.
    """

    def __init__(self, deviation: float, tol: float):
        super().__init__()
        self.deviation = deviation
        self.tol = tol

    def __str__(self) -> str:
        return (
            f"Matrix is not Hermitian: max |A - A*| entry is {self.deviation:.3e} "
            f"(tolerance {self.tol:.3e})."
        )


class NotPsdError(Exception):
    """
    Raised when a matrix that must be positive semidefinite has an eigenvalue below
    the negative tolerance.
    """

    def __init__(self, min_eigenvalue: float, tol: float):
        super().__init__()
        self.min_eigenvalue = min_eigenvalue
        self.tol = tol

    def __str__(self) -> str:
        return (
            f"Matrix is not positive semidefinite: minimum eigenvalue is "
            f"{self.min_eigenvalue:.3e} (tolerance {self.tol:.3e})."
        )


class NoConvergenceError(Exception):
    """
    An iterative numerical routine exhausted its iteration budget.
    """


class UnknownGameError(Exception):
    """
    The requested game is not part of the built-in catalog.
    """

    def __init__(self, name: str, known: Tuple[str, ...]):
        super().__init__()
        self.name = name
        self.known = known

    def __str__(self) -> str:
        return f"Unknown game '{self.name}'. Known games: {', '.join(self.known)}."


class InvalidGameError(Exception):
    """
    A game description violates the game invariants (probability distribution over
    questions, binary predicate, consistent sizes).
    """


class InvalidStrategyError(Exception):
    """
    A strategy description violates its invariants (POVM completeness, unit state,
    normalized post-measurement operators).
    """


class BudgetExceededError(Exception):
    """
    An exact enumeration or relaxation would exceed its documented size budget.
    """

    def __init__(self, what: str, size: int, budget: int):
        super().__init__()
        self.what = what
        self.size = size
        self.budget = budget

    def __str__(self) -> str:
        return (
            f"{self.what} has size {self.size} which exceeds the budget "
            f"{self.budget}."
        )


class SolverFailureError(Exception):
    """
    An LP / SDP solver reported an infeasible, unbounded or inaccurate solution.
    """


class ReducedStatesDifferError(Exception):
    """
    Two vectors handed to the Uhlmann construction do not purify the same operator.
    """

    def __init__(self, deviation: float, tol: float):
        super().__init__()
        self.deviation = deviation
        self.tol = tol

    def __str__(self) -> str:
        return (
            f"The reduced operators differ by {self.deviation:.3e} "
            f"(tolerance {self.tol:.3e}); the vectors are not purifications of the "
            f"same operator."
        )


class WrongKeyError(Exception):
    """
    A ciphertext was decrypted with a key that did not produce it.
    """


class DecodeFailureError(Exception):
    """
    A bitstring could not be interpreted as a ciphertext of the backend.
    """


class UnsupportedCircuitError(Exception):
    """
    The homomorphic evaluation backend cannot evaluate the requested circuit.
    """

    def __init__(self, backend: str, gate: str, msg_extra: Optional[str] = None):
        super().__init__()
        self.backend = backend
        self.gate = gate
        self.msg_extra = msg_extra

    def __str__(self) -> str:
        msg = f"The {self.backend} backend does not support the gate '{self.gate}'."

        if self.msg_extra is not None:
            msg = f"{msg} {self.msg_extra}"

        return msg


class InsecureAccessError(Exception):
    """
    A prover asked for the verifier's secret key while the session is secure.
    """


class ProtocolViolationError(Exception):
    """
    The verifier or a prover was driven out of the protocol's message order.
    """


class NotWhiteBoxError(Exception):
    """
    Exact evaluation was requested for a prover that does not expose its
    instrument and second-round measurements.
    """


class NotStronglyNonsignalingError(Exception):
    """
    A sequential strategy's averaged first-round states differ across Alice's
    questions by more than the tolerance allowed for a conversion.
    """

    def __init__(self, deviation: float, tol: float):
        super().__init__()
        self.deviation = deviation
        self.tol = tol

    def __str__(self) -> str:
        return (
            f"Strategy is not strongly non-signaling: deviation {self.deviation:.3e} "
            f"exceeds tolerance {self.tol:.3e}."
        )


class NormExceededError(Exception):
    """
    An operator handed to a block encoding is not a contraction.
    """


class NotPowerOfTwoError(Exception):
    """
    An operator's side length is not a power of two where qubit bookkeeping requires
    one.
    """


class EmptyListError(Exception):
    """
    A linear combination or sequence was requested over an empty list.
    """
