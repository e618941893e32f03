#!/usr/bin/env python
# -*- coding: utf-8 -*-

import logging
from dataclasses import dataclass
from itertools import product
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import xarray as xr
from pydantic import ValidationError

from . import constants, exceptions
from .dimensions import (
    CORRELATION_DIMENSION_ORDER,
    CORRELATION_DIMENSION_ORDER_LIST,
    DimensionNames,
    Dimensions,
)
from .io import read_json, write_json
from .schemas import GameModel
from .types import GameShape, NonsignalingReport, PathLike, RealArray

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

# Magic square answers index the parity-valid triples of a row (even parity) or a
# column (odd parity).
MAGIC_SQUARE_ROW_TRIPLES: Tuple[Tuple[int, int, int], ...] = (
    (0, 0, 0),
    (0, 1, 1),
    (1, 0, 1),
    (1, 1, 0),
)
MAGIC_SQUARE_COLUMN_TRIPLES: Tuple[Tuple[int, int, int], ...] = (
    (0, 0, 1),
    (0, 1, 0),
    (1, 0, 0),
    (1, 1, 1),
)

CATALOG_NAMES = (
    constants.GAME_CHSH,
    constants.GAME_MAGIC_SQUARE,
    constants.GAME_XOR,
)

###############################################################################


@dataclass(frozen=True, eq=False)
class Game:
    """
    A two player nonlocal game.

    Parameters
    ----------
    name: str
        A human readable name.
    mu: npt.ArrayLike
        The question distribution, shape (nA, nB).
    V: npt.ArrayLike
        The binary winning predicate V[x, y, a, b], shape (nA, nB, kA, kB).

    Raises
    ------
    exceptions.InvalidGameError
        mu is not a probability distribution (tolerance 1e-12) or V is not binary or
        the two shapes disagree.
    """

    name: str
    mu: RealArray
    V: npt.NDArray[np.int8]

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        rule = np.asarray(self.V)
        if mu.ndim != 2:
            raise exceptions.InvalidGameError(
                f"mu must be two dimensional (received shape {mu.shape})."
            )
        if rule.ndim != 4 or rule.shape[:2] != mu.shape:
            raise exceptions.InvalidGameError(
                f"V of shape {rule.shape} does not match mu of shape {mu.shape}."
            )
        if not np.all(np.isfinite(mu)):
            raise exceptions.InvalidGameError(f"mu holds non-finite entries: {mu}")
        if np.any(mu < 0):
            raise exceptions.InvalidGameError(
                f"mu holds negative entries (min {mu.min()})."
            )
        if abs(float(mu.sum()) - 1.0) > 1e-12:
            raise exceptions.InvalidGameError(f"mu sums to {mu.sum()!r}, not 1.")
        if not np.all((rule == 0) | (rule == 1)):
            raise exceptions.InvalidGameError("V entries must be 0 or 1.")

        mu.setflags(write=False)
        rule = rule.astype(np.int8)
        rule.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "V", rule)

    @property
    def nA(self) -> int:
        return int(self.V.shape[0])

    @property
    def nB(self) -> int:
        return int(self.V.shape[1])

    @property
    def kA(self) -> int:
        return int(self.V.shape[2])

    @property
    def kB(self) -> int:
        return int(self.V.shape[3])

    @property
    def shape(self) -> GameShape:
        return GameShape(self.nA, self.nB, self.kA, self.kB)

    @property
    def dims(self) -> Dimensions:
        return Dimensions(CORRELATION_DIMENSION_ORDER, tuple(self.shape))

    @property
    def weights(self) -> RealArray:
        """mu(x, y) * V(a, b | x, y) as a float tensor of shape (nA, nB, kA, kB)."""
        return self.mu[:, :, None, None] * self.V

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "nA": self.nA,
            "nB": self.nB,
            "kA": self.kA,
            "kB": self.kB,
            "mu": self.mu.tolist(),
            "V": self.V.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Any) -> "Game":
        """
        Parse a Game JSON document.

        Raises
        ------
        exceptions.InvalidGameError
            Keys are missing, mu has negative entries or sums outside
            [1 - 1e-9, 1 + 1e-9], or shapes disagree.
        """
        try:
            model = GameModel.model_validate(data)
        except ValidationError as e:
            raise exceptions.InvalidGameError(f"Invalid game document: {e}") from e

        # Renormalize within the parser tolerance so the stricter invariant holds
        mu = np.asarray(model.mu, dtype=np.float64)
        mu = mu / mu.sum()
        return cls(name=model.name, mu=mu, V=np.asarray(model.V, dtype=np.int8))

    @classmethod
    def from_json(cls, uri: PathLike) -> "Game":
        return cls.from_dict(read_json(uri))

    def to_json(self, uri: PathLike) -> None:
        write_json(uri, self.to_dict())

    def __str__(self) -> str:
        return f"<Game {self.name} [{self.dims}]>"

    def __repr__(self) -> str:
        return str(self)


@dataclass(frozen=True, eq=False)
class Correlation:
    """
    A correlation tensor p[x, y, a, b] = p(a, b | x, y).

    When subnormalized is True each conditional distribution may sum to less than
    one; the missing mass is the probability of a rejected (undecodable or out of
    range) answer.
    """

    p: RealArray
    subnormalized: bool = False

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 4:
            raise ValueError(
                f"Correlations are four dimensional (received shape {p.shape})."
            )
        if np.any(p < -constants.NEGATIVE_ENTRY_TOL):
            raise ValueError(f"Correlation has a negative entry ({p.min():.3e}).")

        sums = p.sum(axis=(2, 3))
        if self.subnormalized:
            if np.any(sums > 1 + constants.PROBABILITY_SUM_TOL):
                raise ValueError(
                    f"Subnormalized correlation sums to more than 1 ({sums.max()!r})."
                )
        elif np.any(np.abs(sums - 1) > constants.PROBABILITY_SUM_TOL):
            worst = float(np.max(np.abs(sums - 1)))
            raise ValueError(
                f"Correlation is not normalized (max deviation {worst:.3e})."
            )

        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def shape(self) -> GameShape:
        return GameShape(*self.p.shape)

    @property
    def dims(self) -> Dimensions:
        return Dimensions(CORRELATION_DIMENSION_ORDER, self.p.shape)

    def to_xarray(self) -> xr.DataArray:
        return xr.DataArray(self.p, dims=CORRELATION_DIMENSION_ORDER_LIST)

    def to_dict(self) -> Dict[str, Any]:
        return {"p": self.p.tolist(), "subnormalized": self.subnormalized}


###############################################################################


def _as_array(p: Union[Correlation, npt.ArrayLike]) -> RealArray:
    if isinstance(p, Correlation):
        return p.p
    return np.asarray(p, dtype=np.float64)


def winning_probability(g: Game, p: Union[Correlation, npt.ArrayLike]) -> float:
    """
    Sum over x, y, a, b of mu(x, y) V(a, b | x, y) p(a, b | x, y).

    Raises
    ------
    exceptions.DimensionMismatchError
        The correlation shape is not (nA, nB, kA, kB).
    """
    arr = _as_array(p)
    if arr.shape != tuple(g.shape):
        raise exceptions.DimensionMismatchError(
            f"Correlation of shape {arr.shape} does not match game {g.dims}."
        )

    return float(np.sum(g.weights * arr))


def check_nonsignaling(
    p: Union[Correlation, npt.ArrayLike],
    tol: float = constants.PROBABILITY_SUM_TOL,
) -> NonsignalingReport:
    """
    Measure how far a correlation is from the non-signaling set.

    Parameters
    ----------
    p: Union[Correlation, npt.ArrayLike]
        The correlation.
    tol: float
        Violations above tol are logged.
        Default: constants.PROBABILITY_SUM_TOL

    Returns
    -------
    report: NonsignalingReport
        bob_to_alice_max_violation is the largest change of Alice's marginal
        p(a | x, y) across y. alice_to_bob_max_violation is the largest change of
        Bob's marginal p(b | x, y) across x.
    """
    if isinstance(p, Correlation):
        data = p.to_xarray()
    else:
        data = xr.DataArray(
            np.asarray(p, dtype=np.float64), dims=CORRELATION_DIMENSION_ORDER_LIST
        )

    alice_marginal = data.sum(DimensionNames.BobAnswer)
    bob_marginal = data.sum(DimensionNames.AliceAnswer)
    bob_to_alice = alice_marginal.max(DimensionNames.BobQuestion) - alice_marginal.min(
        DimensionNames.BobQuestion
    )
    alice_to_bob = bob_marginal.max(DimensionNames.AliceQuestion) - bob_marginal.min(
        DimensionNames.AliceQuestion
    )

    report = NonsignalingReport(
        bob_to_alice_max_violation=float(bob_to_alice.max()),
        alice_to_bob_max_violation=float(alice_to_bob.max()),
    )
    if not report.is_nonsignaling(tol):
        log.debug(f"Correlation signals beyond {tol:.1e}: {report}")

    return report


###############################################################################


def chsh() -> Game:
    """CHSH: uniform binary questions, win iff a XOR b == x AND y."""
    rule = np.zeros((2, 2, 2, 2), dtype=np.int8)
    for x, y, a, b in product(range(2), repeat=4):
        rule[x, y, a, b] = int((a ^ b) == (x & y))

    return Game(name=constants.GAME_CHSH, mu=np.full((2, 2), 0.25), V=rule)


def magic_square() -> Game:
    """
    The Mermin-Peres magic square game. Alice receives a row and answers with an index
    into MAGIC_SQUARE_ROW_TRIPLES, Bob receives a column and answers with an index into
    MAGIC_SQUARE_COLUMN_TRIPLES. They win iff they agree on the shared cell.
    """
    rule = np.zeros((3, 3, 4, 4), dtype=np.int8)
    for x, y in product(range(3), repeat=2):
        for a, row in enumerate(MAGIC_SQUARE_ROW_TRIPLES):
            for b, column in enumerate(MAGIC_SQUARE_COLUMN_TRIPLES):
                rule[x, y, a, b] = int(row[y] == column[x])

    return Game(name=constants.GAME_MAGIC_SQUARE, mu=np.full((3, 3), 1 / 9), V=rule)


def xor_game(
    table: Sequence[Sequence[int]],
    mu: Optional[npt.ArrayLike] = None,
    name: str = constants.GAME_XOR,
) -> Game:
    """
    The binary XOR game that is won iff a XOR b == table[x][y].

    Parameters
    ----------
    table: Sequence[Sequence[int]]
        An nA x nB table of parity bits.
    mu: Optional[npt.ArrayLike]
        The question distribution. Default: None (uniform)
    name: str
        Default: "xor"
    """
    parity = np.asarray(table, dtype=np.int64)
    if parity.ndim != 2 or parity.size == 0:
        raise exceptions.InvalidGameError(
            f"XOR tables must be non-empty and two dimensional "
            f"(received {parity.shape})."
        )
    if not np.all((parity == 0) | (parity == 1)):
        raise exceptions.InvalidGameError("XOR table entries must be 0 or 1.")

    n_a, n_b = parity.shape
    rule = np.zeros((n_a, n_b, 2, 2), dtype=np.int8)
    for x, y, a, b in product(range(n_a), range(n_b), range(2), range(2)):
        rule[x, y, a, b] = int((a ^ b) == parity[x, y])

    distribution = (
        np.full((n_a, n_b), 1 / (n_a * n_b))
        if mu is None
        else np.asarray(mu, dtype=np.float64)
    )
    return Game(name=name, mu=distribution, V=rule)


def catalog(name: str, table: Optional[Sequence[Sequence[int]]] = None) -> Game:
    """
    Look up a built-in game.

    Parameters
    ----------
    name: str
        One of "chsh", "magic-square" or "xor".
    table: Optional[Sequence[Sequence[int]]]
        The parity table, required for (and only used by) "xor".

    Raises
    ------
    exceptions.UnknownGameError
        The name is not in the catalog.
    exceptions.InvalidGameError
        "xor" was requested without a table.
    """
    if name == constants.GAME_CHSH:
        return chsh()
    if name == constants.GAME_MAGIC_SQUARE:
        return magic_square()
    if name == constants.GAME_XOR:
        if table is None:
            raise exceptions.InvalidGameError("The xor game requires a parity table.")
        return xor_game(table)

    raise exceptions.UnknownGameError(name, CATALOG_NAMES)


def pr_box() -> Correlation:
    """The PR box: p(a, b | x, y) = 1/2 iff a XOR b == x AND y."""
    p = np.zeros((2, 2, 2, 2))
    for x, y, a, b in product(range(2), repeat=4):
        if (a ^ b) == (x & y):
            p[x, y, a, b] = 0.5

    return Correlation(p)


def uniform_correlation(shape: GameShape) -> Correlation:
    n_a, n_b, k_a, k_b = shape
    return Correlation(np.full((n_a, n_b, k_a, k_b), 1 / (k_a * k_b)))
