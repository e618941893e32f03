#!/usr/bin/env python
# -*- coding: utf-8 -*-

from typing import Any, Dict, List, Optional

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import constants
from .types import CMatrix

###############################################################################

# A complex matrix on the wire: rows of [re, im] pairs
ComplexMatrixJson = List[List[List[float]]]
ComplexVectorJson = List[List[float]]

###############################################################################


def matrix_to_json(m: npt.ArrayLike) -> ComplexMatrixJson:
    arr = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


def matrix_from_json(data: ComplexMatrixJson) -> CMatrix:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(
            f"Complex matrices must be nested arrays of [re, im] pairs "
            f"(received an array of shape {arr.shape})."
        )
    return arr[..., 0] + 1j * arr[..., 1]


def vector_to_json(v: npt.ArrayLike) -> ComplexVectorJson:
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in arr]


def vector_from_json(data: ComplexVectorJson) -> CMatrix:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(
            f"Complex vectors must be arrays of [re, im] pairs "
            f"(received an array of shape {arr.shape})."
        )
    return arr[:, 0] + 1j * arr[:, 1]


def family_to_json(family: npt.ArrayLike) -> List[List[ComplexMatrixJson]]:
    arr = np.asarray(family)
    return [[matrix_to_json(element) for element in setting] for setting in arr]


def family_from_json(data: List[List[ComplexMatrixJson]]) -> CMatrix:
    if len(data) == 0 or any(len(setting) == 0 for setting in data):
        raise ValueError("POVM families need at least one setting and one outcome.")
    n_outcomes = {len(setting) for setting in data}
    if len(n_outcomes) != 1:
        raise ValueError(
            f"Every setting of a POVM family must have the same number of outcomes "
            f"(received {sorted(n_outcomes)})."
        )
    return np.stack(
        [
            np.stack([matrix_from_json(element) for element in setting])
            for setting in data
        ]
    )


###############################################################################


class GameModel(BaseModel):
    """
    Game JSON: {"name", "nA", "nB", "kA", "kB", "mu", "V"} with mu an nA x nB nested
    array and V an nA x nB x kA x kB nested array of 0 / 1 entries.
    """

    name: str
    nA: int = Field(ge=1)
    nB: int = Field(ge=1)
    kA: int = Field(ge=1)
    kB: int = Field(ge=1)
    mu: List[List[float]]
    V: List[List[List[List[int]]]]

    @model_validator(mode="after")
    def _check_game(self) -> "GameModel":
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.shape != (self.nA, self.nB):
            raise ValueError(
                f"mu has shape {mu.shape}, expected ({self.nA}, {self.nB})."
            )
        if not np.all(np.isfinite(mu)):
            raise ValueError(f"mu holds non-finite entries: {self.mu}")
        if np.any(mu < 0):
            raise ValueError(f"mu holds negative entries (min {mu.min()}).")
        total = float(mu.sum())
        if abs(total - 1.0) > constants.GAME_MU_SUM_TOL:
            raise ValueError(f"mu sums to {total!r}, not 1.")

        shape = (self.nA, self.nB, self.kA, self.kB)
        try:
            rule = np.asarray(self.V, dtype=np.int64)
        except ValueError as e:
            raise ValueError(f"V is not a rectangular nested array: {e}") from e
        if rule.shape != shape:
            raise ValueError(f"V has shape {rule.shape}, expected {shape}.")
        if not np.all((rule == 0) | (rule == 1)):
            raise ValueError("V entries must be 0 or 1.")

        return self


class ClassicalStrategyModel(BaseModel):
    gamma: List[float]
    pA: List[List[List[float]]]
    qB: List[List[List[float]]]


class QuantumStrategyModel(BaseModel):
    dA: int = Field(ge=1)
    dB: int = Field(ge=1)
    psi: ComplexVectorJson
    M: List[List[ComplexMatrixJson]]
    N: List[List[ComplexMatrixJson]]


class SequentialStrategyModel(BaseModel):
    """
    Sequential strategy JSON: {"dim", "sigma": {"x,a": matrix}, "B": [[matrix]]}.
    The optional "invalid" entry maps "x" to the operator of rejected answers.
    """

    dim: int = Field(ge=1)
    sigma: Dict[str, ComplexMatrixJson]
    B: List[List[ComplexMatrixJson]]
    invalid: Optional[Dict[str, ComplexMatrixJson]] = None

    @model_validator(mode="after")
    def _check_keys(self) -> "SequentialStrategyModel":
        for key in self.sigma:
            parts = key.split(",")
            if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
                raise ValueError(f"sigma keys must look like 'x,a' (received '{key}').")
        return self


class SequentialClassicalStrategyModel(BaseModel):
    pA_omega: List[List[List[float]]]
    qB: List[List[List[float]]]


class NpaCertificateModel(BaseModel):
    game: str
    level: int = Field(ge=1)
    value: float
    words: List[str]
    moment_matrix: List[List[float]]
    status: str


###############################################################################


class RunConfig(BaseModel):
    """
    Validated command line configuration. Every numeric parameter is range checked;
    stochastic commands refuse to run without a seed.
    """

    model_config = ConfigDict(populate_by_name=True)

    command: str
    path: Optional[str] = None
    kind: Optional[str] = None
    prover: Optional[str] = None
    backend: str = constants.BACKEND_IDEAL
    method: Optional[str] = None
    npa_level: int = Field(default=1, ge=1, le=4)
    dim: int = Field(default=2, ge=2, le=64)
    restarts: int = Field(default=constants.DEFAULT_RESTARTS, ge=1, le=10_000)
    iters: int = Field(default=constants.DEFAULT_SEESAW_ITERS, ge=1, le=100_000)
    trials: Optional[int] = Field(default=None, ge=1, le=10_000_000)
    exact: bool = False
    lam: int = Field(default=8, ge=1, le=256, alias="lambda")
    degree: int = Field(default=1, ge=0, le=8)
    tol: float = Field(default=constants.SDP_TOL, gt=0, le=1)
    seed: Optional[int] = Field(default=None, ge=0)
    threads: int = Field(default=constants.DEFAULT_THREADS, ge=1, le=256)
    insecure: bool = False
    random_cheaters: int = Field(default=2, ge=0, le=64)
    samples: int = Field(default=10, ge=1, le=10_000)
    output: Optional[str] = None
    transcripts: Optional[str] = None

    @model_validator(mode="after")
    def _check_seed(self) -> "RunConfig":
        if self.is_stochastic and self.seed is None:
            raise ValueError(f"'{self.command}' is stochastic and requires --seed.")
        if self.backend not in (constants.BACKEND_IDEAL, constants.BACKEND_CLIFFORD):
            raise ValueError(f"Unknown backend '{self.backend}'.")
        return self

    @property
    def is_stochastic(self) -> bool:
        if self.command == "value":
            return self.kind == "q"
        if self.command == "seq convert":
            return self.method == constants.CONVERT_BLOCKREDUCE
        return self.command in ("compile run", "compile battery", "blockenc verify")

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, mode="json")
