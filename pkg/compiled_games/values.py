#!/usr/bin/env python
# -*- coding: utf-8 -*-

import logging
from typing import List, Literal, NamedTuple, Optional, Tuple, Union, overload

import cvxpy as cp
import dask
import numpy as np
from scipy.optimize import linprog

from . import constants, exceptions, numerics
from .games import Correlation, Game, winning_probability
from .strategies import (
    ClassicalStrategy,
    QuantumStrategy,
    deterministic_strategy,
    random_projective_family,
)
from .types import CMatrix, RealArray, Seed

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

# Alice maps are enumerated in blocks of this many to bound memory
_CLASSICAL_BLOCK = 2**15


def classical_value(
    g: Game,
    budget: int = constants.CLASSICAL_ENUMERATION_BUDGET,
) -> Tuple[float, ClassicalStrategy]:
    """
    Exact classical value by enumerating Alice's deterministic maps and playing Bob's
    best response to each.

    Parameters
    ----------
    g: Game
        The game.
    budget: int
        Maximum allowed kA^nA * kB^nB.
        Default: constants.CLASSICAL_ENUMERATION_BUDGET

    Returns
    -------
    value: float
        The classical value.
    strategy: ClassicalStrategy
        A deterministic strategy achieving it. Ties resolve to the lexicographically
        smallest Alice map (x = 0 most significant) and the smallest Bob answer.

    Raises
    ------
    exceptions.BudgetExceededError
        The strategy space exceeds the budget.
    """
    n_a, n_b, k_a, k_b = g.shape
    size = k_a**n_a * k_b**n_b
    if size > budget:
        raise exceptions.BudgetExceededError(
            "Deterministic strategy enumeration", size, budget
        )

    weights = g.weights
    n_maps = k_a**n_a
    place = k_a ** np.arange(n_a - 1, -1, -1)
    best_value = -np.inf
    best_index = 0
    for start in range(0, n_maps, _CLASSICAL_BLOCK):
        indices = np.arange(start, min(start + _CLASSICAL_BLOCK, n_maps))
        maps = (indices[:, None] // place[None, :]) % k_a

        # scores[f, y, b] = sum_x mu(x, y) V(f(x), b | x, y)
        scores = np.zeros((indices.size, n_b, k_b))
        for x in range(n_a):
            scores += np.transpose(weights[x][:, maps[:, x], :], (1, 0, 2))
        values = scores.max(axis=2).sum(axis=1)

        candidate = int(np.argmax(values))
        if values[candidate] > best_value + 1e-15:
            best_value = float(values[candidate])
            best_index = int(indices[candidate])

    alice = (best_index // place) % k_a
    scores = np.zeros((n_b, k_b))
    for x in range(n_a):
        scores += weights[x][:, alice[x], :]
    bob = np.argmax(scores, axis=1)

    strategy = deterministic_strategy(alice, bob, g.shape)
    value = winning_probability(g, strategy.correlation())
    log.info(f"Classical value of {g.name}: {value}")
    return value, strategy


###############################################################################


def nonsignaling_constraints(g: Game) -> Tuple[RealArray, RealArray, RealArray]:
    """
    The linear program over p = vec(p[x, y, a, b]) (row major) whose feasible set is
    the non-signaling polytope.

    Returns
    -------
    c: RealArray
        Objective coefficients, mu * V flattened.
    A_eq: RealArray
        Normalization and both marginal equality constraints.
    b_eq: RealArray
        Right hand side.
    """
    n_a, n_b, k_a, k_b = g.shape
    index = np.arange(n_a * n_b * k_a * k_b).reshape(n_a, n_b, k_a, k_b)
    n_vars = index.size
    rows: List[RealArray] = []
    rhs: List[float] = []

    def row_for(
        entries: np.ndarray, sign: float = 1.0, base: Optional[RealArray] = None
    ) -> RealArray:
        row = np.zeros(n_vars) if base is None else base
        row[entries.reshape(-1)] += sign
        return row

    for x in range(n_a):
        for y in range(n_b):
            rows.append(row_for(index[x, y]))
            rhs.append(1.0)

    # Alice's marginal does not depend on y
    for x in range(n_a):
        for y in range(1, n_b):
            for a in range(k_a):
                row = row_for(index[x, y, a, :])
                rows.append(row_for(index[x, 0, a, :], -1.0, row))
                rhs.append(0.0)

    # Bob's marginal does not depend on x
    for y in range(n_b):
        for x in range(1, n_a):
            for b in range(k_b):
                row = row_for(index[x, y, :, b])
                rows.append(row_for(index[0, y, :, b], -1.0, row))
                rhs.append(0.0)

    return g.weights.reshape(-1), np.asarray(rows), np.asarray(rhs)


@overload
def nonsignaling_value(
    g: Game,
    tol: float = ...,
    return_correlation: Literal[False] = ...,
) -> float:
    ...


@overload
def nonsignaling_value(
    g: Game,
    tol: float = ...,
    *,
    return_correlation: Literal[True],
) -> Tuple[float, Correlation]:
    ...


def nonsignaling_value(
    g: Game,
    tol: float = constants.LP_TOL,
    return_correlation: bool = False,
) -> Union[float, Tuple[float, Correlation]]:
    """
    Non-signaling value from the HiGHS linear program.

    Parameters
    ----------
    g: Game
        The game.
    tol: float
        Primal / dual feasibility tolerance handed to HiGHS.
        Default: constants.LP_TOL
    return_correlation: bool
        Also return an optimal correlation.
        Default: False

    Returns
    -------
    value: Union[float, Tuple[float, Correlation]]
        The value, or the value and an optimal correlation when return_correlation
        is set.

    Raises
    ------
    exceptions.SolverFailureError
        HiGHS did not report an optimal solution.
    """
    c, a_eq, b_eq = nonsignaling_constraints(g)
    feasibility = max(tol, 1e-10)
    result = linprog(
        -c,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": feasibility,
            "dual_feasibility_tolerance": feasibility,
        },
    )
    if result.status != 0:
        raise exceptions.SolverFailureError(
            f"Non-signaling LP for {g.name} failed: {result.message}"
        )

    value = float(-result.fun)
    log.info(f"Non-signaling value of {g.name}: {value}")
    if return_correlation:
        p = np.clip(result.x, 0.0, None).reshape(tuple(g.shape))
        p = p / p.sum(axis=(2, 3), keepdims=True)
        return value, Correlation(p)

    return value


###############################################################################


class SeesawRun(NamedTuple):
    value: float
    strategy: QuantumStrategy
    history: List[float]


def _objective(weights: RealArray, psi: CMatrix, m: CMatrix, n: CMatrix) -> float:
    p = np.einsum("ij,xaik,kl,ybjl->xyab", psi.conj(), m, psi, n).real
    return float(np.sum(weights * p))


def _state_step(weights: RealArray, m: CMatrix, n: CMatrix) -> CMatrix:
    d_a = m.shape[2]
    d_b = n.shape[2]
    game_operator = np.einsum("xyab,xaij,ybkl->ikjl", weights, m, n).reshape(
        d_a * d_b, d_a * d_b
    )
    _, vectors = numerics.hermitian_eig(game_operator, tol=np.inf)
    return vectors[:, 0].reshape(d_a, d_b)


def _best_povm(operators: CMatrix) -> CMatrix:
    """
    maximize sum_a Re tr(P_a R_a) over POVMs {P_a}. Two outcomes have a closed form;
    otherwise a small SDP with a greedy fallback.
    """
    k, d, _ = operators.shape
    if k == 1:
        return np.eye(d, dtype=np.complex128)[None]
    if k == 2:
        eigenvalues, vectors = numerics.hermitian_eig(
            operators[0] - operators[1], tol=np.inf
        )
        keep = vectors[:, eigenvalues >= 0]
        first = keep @ numerics.dagger(keep)
        return np.stack([first, np.eye(d) - first])

    try:
        elements = [cp.Variable((d, d), hermitian=True) for _ in range(k)]
        objective = cp.Maximize(
            cp.real(sum(cp.trace(elements[a] @ operators[a]) for a in range(k)))
        )
        constraints = [element >> 0 for element in elements]
        constraints.append(sum(elements) == np.eye(d))
        problem = cp.Problem(objective, constraints)
        problem.solve(solver=cp.CLARABEL)
        if problem.status == cp.OPTIMAL:
            povm = np.stack([numerics.project_psd(e.value) for e in elements])
            # Restore completeness after clipping
            correction = np.eye(d) - povm.sum(axis=0)
            povm[-1] = numerics.project_psd(povm[-1] + correction)
            return povm
        log.debug(f"POVM step SDP ended with status {problem.status}, using fallback")
    except cp.error.SolverError as e:
        log.debug(f"POVM step SDP failed ({e}), using fallback")

    _, vectors = numerics.hermitian_eig(operators.sum(axis=0), tol=np.inf)
    povm = np.zeros((k, d, d), dtype=np.complex128)
    for column in vectors.T:
        scores = np.einsum("i,aij,j->a", column.conj(), operators, column).real
        povm[int(np.argmax(scores))] += np.outer(column, column.conj())
    return povm


def _alice_step(weights: RealArray, psi: CMatrix, n: CMatrix) -> CMatrix:
    # R_xa = sum_yb w tr_B[(1 (x) N_yb) psi psi^*] = Psi (sum_yb w N_yb)^T Psi^*
    bob_operator = np.einsum("xyab,ybjl->xajl", weights, n)
    reduced = np.einsum("ij,xalj,kl->xaik", psi, bob_operator, psi.conj())
    return np.stack([_best_povm(r) for r in reduced])


def _bob_step(weights: RealArray, psi: CMatrix, m: CMatrix) -> CMatrix:
    # S_yb = sum_xa w tr_A[(M_xa (x) 1) psi psi^*] = (Psi^* (sum_xa w M_xa) Psi)^T
    alice_operator = np.einsum("xyab,xaik->ybik", weights, m)
    reduced = np.einsum("ij,ybik,kl->yblj", psi.conj(), alice_operator, psi)
    return np.stack([_best_povm(s) for s in reduced])


def seesaw_run(
    g: Game,
    d: int,
    iters: int = constants.DEFAULT_SEESAW_ITERS,
    seed: Seed = None,
    convergence: float = constants.DEFAULT_SEESAW_CONVERGENCE,
) -> SeesawRun:
    """
    One see-saw run from a random projective start: state, Alice and Bob updates in
    turn. An update is only accepted when the objective does not decrease, so the
    returned history is nondecreasing.
    """
    rng = numerics.default_rng(seed)
    weights = g.weights
    m = random_projective_family(g.nA, g.kA, d, rng)
    n = random_projective_family(g.nB, g.kB, d, rng)
    psi = _state_step(weights, m, n)
    value = _objective(weights, psi, m, n)
    history = [value]

    for iteration in range(iters):
        start = value
        for step in ("state", "alice", "bob"):
            if step == "state":
                candidate = (_state_step(weights, m, n), m, n)
            elif step == "alice":
                candidate = (psi, _alice_step(weights, psi, n), n)
            else:
                candidate = (psi, m, _bob_step(weights, psi, m))

            candidate_value = _objective(weights, *candidate)
            if candidate_value >= value - constants.SEESAW_MONOTONE_SLACK:
                psi, m, n = candidate
                value = max(value, candidate_value)
            history.append(value)

        log.debug(f"See-saw iteration {iteration}: {value}")
        if value - start <= convergence:
            break

    strategy = QuantumStrategy(psi=psi.reshape(-1), M=m, N=n)
    return SeesawRun(
        value=winning_probability(g, strategy.correlation()),
        strategy=strategy,
        history=history,
    )


def seesaw_lower_bound(
    g: Game,
    d: int,
    restarts: int = constants.DEFAULT_RESTARTS,
    iters: int = constants.DEFAULT_SEESAW_ITERS,
    seed: Seed = constants.DEFAULT_SEED,
    threads: int = constants.DEFAULT_THREADS,
) -> Tuple[float, QuantumStrategy]:
    """
    Lower bound on the quantum value from the best of several see-saw runs.

    Parameters
    ----------
    g: Game
        The game.
    d: int
        Local dimension of both players (at least 2).
    restarts: int
        Number of independent runs. Run k is seeded by child k of seed, so results do
        not depend on threads.
    iters: int
        Maximum rounds of updates per run.
    seed: Seed
        Root seed.
    threads: int
        Worker threads for the dask threaded scheduler.

    Returns
    -------
    value: float
        The winning probability of the returned strategy.
    strategy: QuantumStrategy
        The best strategy found (earliest run on ties).
    """
    if d < 2:
        raise ValueError(f"See-saw dimension must be at least 2 (received {d}).")
    if restarts < 1:
        raise ValueError(f"At least one restart is required (received {restarts}).")

    seeds = numerics.spawn_seeds(seed, restarts)
    runs = [dask.delayed(seesaw_run)(g, d, iters, child) for child in seeds]
    results = dask.compute(*runs, scheduler="threads", num_workers=threads)

    best = max(range(restarts), key=lambda k: (results[k].value, -k))
    for k, run in enumerate(results):
        log.debug(f"See-saw restart {k}: {run.value}")
    log.info(f"See-saw lower bound for {g.name} (d={d}): {results[best].value}")
    return results[best].value, results[best].strategy
