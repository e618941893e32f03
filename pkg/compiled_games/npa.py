#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Moment matrix relaxation of the commuting operator value.

Measurements are modelled as projective: Alice's generators E[x, a] and Bob's
generators F[y, b] are projectors that sum to the identity per setting, with distinct
outcomes of one setting orthogonal and every E commuting with every F. A word is a
tuple of generators ("A", x, a) / ("B", y, b). The moment matrix is real symmetric,
indexed by canonical words up to the requested length, with one variable for each
class {w, w^*}.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Set, Tuple

import cvxpy as cp
import numpy as np
import numpy.typing as npt
from scipy import sparse

from . import constants, exceptions, numerics
from .games import Game
from .strategies import CommutingStrategy
from .types import RealArray, Word

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

ALICE = "A"
BOB = "B"
IDENTITY_WORD: Word = ()

# Primal residuals above SDP_FEASIBILITY_FACTOR * tol are reported as solver failures
SDP_FEASIBILITY_FACTOR = 100.0

###############################################################################


def canonicalize_word(w: Sequence[Tuple[str, int, int]]) -> Optional[Word]:
    """
    Normal form of a word over projective measurement generators.

    Alice's letters are moved in front of Bob's (keeping the order within each party),
    then adjacent equal letters collapse (E^2 = E) and adjacent letters of one setting
    with different outcomes make the whole word zero.

    Returns
    -------
    word: Optional[Word]
        The canonical word, or None when the word is zero.
    """
    alice = [tuple(g) for g in w if g[0] == ALICE]
    bob = [tuple(g) for g in w if g[0] == BOB]
    if len(alice) + len(bob) != len(w):
        raise ValueError(f"Generators must belong to '{ALICE}' or '{BOB}' ({w}).")

    canonical: List[Tuple[str, int, int]] = []
    for part in (alice, bob):
        stack: List[Tuple[str, int, int]] = []
        for letter in part:
            if stack and stack[-1][1] == letter[1]:
                if stack[-1][2] == letter[2]:
                    continue
                return None
            stack.append(letter)  # type: ignore[arg-type]
        canonical.extend(stack)

    return tuple(canonical)


def adjoint_word(w: Word) -> Word:
    return tuple(reversed(w))


def word_label(w: Word) -> str:
    if len(w) == 0:
        return "1"
    return " ".join(
        f"{'E' if party == ALICE else 'F'}{setting}|{outcome}"
        for party, setting, outcome in w
    )


def _variable_key(w: Word) -> Word:
    adjoint = canonicalize_word(adjoint_word(w))
    assert adjoint is not None
    return min(w, adjoint)


###############################################################################


@dataclass(frozen=True)
class SdpProblem:
    """
    maximize c . y subject to F0 + sum_k y_k F_k >= 0 and A_eq y = b_eq.

    The F_k are stored as the columns of a sparse (side * side, m) matrix holding the
    row-major vectorization of each symmetric F_k.
    """

    c: RealArray
    F0: RealArray
    F: sparse.csr_matrix
    A_eq: Optional[sparse.csr_matrix] = None
    b_eq: Optional[RealArray] = None

    @property
    def side(self) -> int:
        return int(self.F0.shape[0])

    @property
    def n_variables(self) -> int:
        return int(self.c.size)

    @classmethod
    def from_matrices(
        cls,
        c: npt.ArrayLike,
        F0: npt.ArrayLike,
        F: Sequence[npt.ArrayLike],
        A_eq: Optional[npt.ArrayLike] = None,
        b_eq: Optional[npt.ArrayLike] = None,
    ) -> "SdpProblem":
        f0 = np.asarray(F0, dtype=np.float64)
        columns = sparse.csr_matrix(
            np.stack([np.asarray(f, dtype=np.float64).reshape(-1) for f in F], axis=1)
        )
        return cls(
            c=np.asarray(c, dtype=np.float64),
            F0=f0,
            F=columns,
            A_eq=None if A_eq is None else sparse.csr_matrix(np.asarray(A_eq, float)),
            b_eq=None if b_eq is None else np.asarray(b_eq, dtype=np.float64),
        )

    def affine_matrix(self, y: npt.ArrayLike) -> RealArray:
        return self.F0 + (self.F @ np.asarray(y, dtype=np.float64)).reshape(
            self.side, self.side
        )

    def feasibility_residual(self, y: npt.ArrayLike) -> float:
        """Largest equality violation or negative eigenvalue of F0 + sum y_k F_k."""
        y = np.asarray(y, dtype=np.float64)
        residual = max(0.0, -numerics.min_eigenvalue(self.affine_matrix(y), tol=np.inf))
        if self.A_eq is not None and self.b_eq is not None and self.b_eq.size > 0:
            residual = max(residual, float(np.max(np.abs(self.A_eq @ y - self.b_eq))))
        return residual


class SdpSolution(NamedTuple):
    value: float
    y: RealArray
    primal: RealArray
    dual: RealArray
    status: str
    residual: float


def _solve_with(problem: cp.Problem, solver: str, tol: float) -> None:
    if solver == cp.CLARABEL:
        problem.solve(
            solver=cp.CLARABEL,
            tol_gap_abs=tol,
            tol_gap_rel=tol,
            tol_feas=tol,
            max_iter=constants.SDP_MAX_ITERS,
        )
    else:
        problem.solve(
            solver=cp.SCS,
            eps_abs=tol,
            eps_rel=tol,
            max_iters=100 * constants.SDP_MAX_ITERS,
        )


def solve_sdp(problem: SdpProblem, tol: float = constants.SDP_TOL) -> SdpSolution:
    """
    Solve a dense SDP with cvxpy (Clarabel, falling back to SCS when Clarabel is not
    available).

    Parameters
    ----------
    problem: SdpProblem
        The problem.
    tol: float
        Gap and feasibility tolerance handed to the solver.
        Default: constants.SDP_TOL

    Returns
    -------
    solution: SdpSolution
        Optimum, optimal y, primal matrix F0 + sum y_k F_k, dual matrix of the PSD
        constraint, solver status and primal feasibility residual.

    Raises
    ------
    exceptions.BudgetExceededError
        The matrix side exceeds constants.SDP_MAX_SIDE.
    exceptions.SolverFailureError
        The solver reported anything but an optimal solution, or the recovered point
        violates feasibility by more than SDP_FEASIBILITY_FACTOR * tol.
    """
    n = problem.side
    if n > constants.SDP_MAX_SIDE:
        raise exceptions.BudgetExceededError(
            "SDP matrix side", n, constants.SDP_MAX_SIDE
        )

    # Only the upper triangle of the symmetric matrix variable is identified
    upper_rows, upper_cols = np.triu_indices(n)
    row_major = upper_rows * n + upper_cols
    column_major = upper_rows + upper_cols * n
    selection = sparse.csr_matrix(
        (np.ones(row_major.size), (np.arange(row_major.size), column_major)),
        shape=(row_major.size, n * n),
    )
    coefficients = problem.F[row_major, :]
    offset = problem.F0.reshape(-1)[row_major]

    y = cp.Variable(problem.n_variables)
    x = cp.Variable((n, n), symmetric=True)
    psd = x >> 0
    constraints = [
        psd,
        selection @ cp.reshape(x, (n * n,), order="F") == coefficients @ y + offset,
    ]
    if problem.A_eq is not None and problem.b_eq is not None and problem.b_eq.size > 0:
        constraints.append(problem.A_eq @ y == problem.b_eq)
    cvx_problem = cp.Problem(cp.Maximize(problem.c @ y), constraints)

    solvers = [s for s in (cp.CLARABEL, cp.SCS) if s in cp.installed_solvers()]
    if len(solvers) == 0:
        raise exceptions.SolverFailureError("Neither Clarabel nor SCS is installed.")

    status = "not solved"
    for solver in solvers:
        try:
            _solve_with(cvx_problem, solver, tol)
        except cp.error.SolverError as e:
            log.debug(f"{solver} failed: {e}")
            continue
        status = str(cvx_problem.status)
        if status == cp.OPTIMAL:
            break
        log.debug(f"{solver} finished with status {status}")

    if status != cp.OPTIMAL or y.value is None:
        raise exceptions.SolverFailureError(
            f"SDP solver finished with status '{status}'."
        )

    y_value = np.asarray(y.value, dtype=np.float64)
    residual = problem.feasibility_residual(y_value)
    if residual > SDP_FEASIBILITY_FACTOR * tol:
        raise exceptions.SolverFailureError(
            f"SDP solution violates feasibility by {residual:.3e} (tol {tol:.1e})."
        )

    value = float(problem.c @ y_value)
    log.info(f"SDP of side {n} with {problem.n_variables} variables solved: {value}")
    return SdpSolution(
        value=value,
        y=y_value,
        primal=problem.affine_matrix(y_value),
        dual=np.asarray(psd.dual_value, dtype=np.float64),
        status=status,
        residual=residual,
    )


###############################################################################


@dataclass
class NpaProblem:
    """
    The moment matrix relaxation of a game at a given level.

    Attributes
    ----------
    level: int
        Maximum word length indexing the moment matrix.
    words: List[Word]
        Canonical words; the identity word is at index 0.
    variables: List[Word]
        One representative word per variable.
    moment_index: RealArray
        Integer matrix of variable ids per moment matrix entry, -1 for zero entries.
    objective: RealArray
        Coefficients of the winning probability over the variables.
    """

    game: Game
    level: int
    words: List[Word]
    variables: List[Word]
    moment_index: npt.NDArray[np.int64]
    objective: RealArray
    equalities: List[Dict[int, float]] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)

    @property
    def side(self) -> int:
        return len(self.words)

    def to_sdp(self) -> SdpProblem:
        n = self.side
        m = len(self.variables)
        rows, cols = np.nonzero(self.moment_index >= 0)
        f = sparse.csr_matrix(
            (np.ones(rows.size), (rows * n + cols, self.moment_index[rows, cols])),
            shape=(n * n, m),
        )
        eq_rows, eq_cols, eq_vals = [], [], []
        for r, equality in enumerate(self.equalities):
            for variable, coefficient in equality.items():
                eq_rows.append(r)
                eq_cols.append(variable)
                eq_vals.append(coefficient)
        a_eq = sparse.csr_matrix(
            (eq_vals, (eq_rows, eq_cols)), shape=(len(self.equalities), m)
        )
        return SdpProblem(
            c=self.objective,
            F0=np.zeros((n, n)),
            F=f,
            A_eq=a_eq,
            b_eq=np.asarray(self.rhs, dtype=np.float64),
        )

    def moment_matrix(self, y: npt.ArrayLike) -> RealArray:
        values = np.concatenate([np.asarray(y, dtype=np.float64), [0.0]])
        return values[self.moment_index]


def _generators(g: Game) -> List[Tuple[str, int, int]]:
    alice = [(ALICE, x, a) for x in range(g.nA) for a in range(g.kA)]
    bob = [(BOB, y, b) for y in range(g.nB) for b in range(g.kB)]
    return alice + bob


def npa_words(g: Game, level: int, budget: int = constants.SDP_MAX_SIDE) -> List[Word]:
    """
    Canonical nonzero words of length at most level, shortest first.

    Raises
    ------
    exceptions.BudgetExceededError
        More than budget words are needed.
    """
    if level < 1:
        raise ValueError(f"Relaxation level must be at least 1 (received {level}).")

    generators = _generators(g)
    words: List[Word] = [IDENTITY_WORD]
    seen: Set[Word] = {IDENTITY_WORD}
    frontier: List[Word] = [IDENTITY_WORD]
    for _ in range(level):
        next_frontier: List[Word] = []
        for prefix in frontier:
            for generator in generators:
                word = canonicalize_word(prefix + (generator,))
                if word is None or word in seen:
                    continue
                seen.add(word)
                words.append(word)
                next_frontier.append(word)
                if len(words) > budget:
                    raise exceptions.BudgetExceededError(
                        f"Level {level} moment matrix", len(words), budget
                    )
        frontier = next_frontier

    return sorted(words, key=lambda w: (len(w), w))


def npa_problem(g: Game, level: int = 1) -> NpaProblem:
    """Build the level-`level` moment matrix relaxation of g."""
    words = npa_words(g, level)
    variable_ids: Dict[Word, int] = {}
    variables: List[Word] = []

    def variable_of(w: Optional[Word]) -> int:
        if w is None:
            return -1
        key = _variable_key(w)
        if key not in variable_ids:
            variable_ids[key] = len(variables)
            variables.append(key)
        return variable_ids[key]

    n = len(words)
    moment_index = np.full((n, n), -1, dtype=np.int64)
    for i, left in enumerate(words):
        for j in range(i, n):
            variable = variable_of(canonicalize_word(adjoint_word(left) + words[j]))
            moment_index[i, j] = variable
            moment_index[j, i] = variable

    equalities: List[Dict[int, float]] = [{variable_of(IDENTITY_WORD): 1.0}]
    rhs: List[float] = [1.0]
    seen: Set[Tuple[Tuple[int, float], ...]] = set()
    settings = [(ALICE, x, g.kA) for x in range(g.nA)] + [
        (BOB, y, g.kB) for y in range(g.nB)
    ]
    # sum_a <w_i^* u E_xa> = <w_i^* u> for every row word and every shorter column word
    for left in words:
        for right in words:
            if len(right) >= level:
                continue
            base = adjoint_word(left) + right
            for party, setting, outcomes in settings:
                equality: Dict[int, float] = {}
                for outcome in range(outcomes):
                    word = canonicalize_word(base + ((party, setting, outcome),))
                    variable = variable_of(word)
                    if variable >= 0:
                        equality[variable] = equality.get(variable, 0.0) + 1.0
                variable = variable_of(canonicalize_word(base))
                if variable >= 0:
                    equality[variable] = equality.get(variable, 0.0) - 1.0
                equality = {k: v for k, v in equality.items() if v != 0.0}
                signature = tuple(sorted(equality.items()))
                if len(equality) == 0 or signature in seen:
                    continue
                seen.add(signature)
                equalities.append(equality)
                rhs.append(0.0)

    weights = g.weights
    objective_terms: Dict[int, float] = {}
    for x, y, a, b in zip(*np.nonzero(weights)):
        word = canonicalize_word(((ALICE, int(x), int(a)), (BOB, int(y), int(b))))
        variable = variable_of(word)
        objective_terms[variable] = objective_terms.get(variable, 0.0) + float(
            weights[x, y, a, b]
        )
    objective = np.zeros(len(variables))
    for variable, coefficient in objective_terms.items():
        objective[variable] = coefficient

    log.debug(
        f"Level {level} relaxation of {g.name}: side {n}, {len(variables)} variables, "
        f"{len(equalities)} equalities"
    )
    return NpaProblem(
        game=g,
        level=level,
        words=words,
        variables=variables,
        moment_index=moment_index,
        objective=objective,
        equalities=equalities,
        rhs=rhs,
    )


###############################################################################


@dataclass(frozen=True)
class NpaCertificate:
    problem: NpaProblem
    moment_matrix: RealArray
    y: RealArray
    value: float
    status: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "game": self.problem.game.name,
            "level": self.problem.level,
            "value": self.value,
            "words": [word_label(w) for w in self.problem.words],
            "moment_matrix": self.moment_matrix.tolist(),
            "status": self.status,
        }


def npa_upper_bound(
    g: Game,
    level: int = 1,
    tol: float = constants.SDP_TOL,
) -> Tuple[float, NpaCertificate]:
    """
    Upper bound on the commuting operator value from the level-`level` relaxation.

    Raises
    ------
    exceptions.BudgetExceededError
        The moment matrix side exceeds constants.SDP_MAX_SIDE.
    exceptions.SolverFailureError
        The SDP solver failed.
    """
    problem = npa_problem(g, level)
    solution = solve_sdp(problem.to_sdp(), tol=tol)
    log.info(f"Level {level} upper bound for {g.name}: {solution.value}")
    return solution.value, NpaCertificate(
        problem=problem,
        moment_matrix=solution.primal,
        y=solution.y,
        value=solution.value,
        status=solution.status,
    )


###############################################################################


def word_operator(w: Word, strategy: CommutingStrategy) -> npt.NDArray[np.complex128]:
    op = np.eye(strategy.d, dtype=np.complex128)
    for party, setting, outcome in w:
        family = strategy.M if party == ALICE else strategy.N
        op = op @ family[setting, outcome]
    return op


def variables_of(problem: NpaProblem, strategy: CommutingStrategy) -> RealArray:
    """Re <psi| w |psi> for every variable of the relaxation."""
    psi = strategy.psi
    return np.asarray(
        [
            float(np.real(psi.conj() @ word_operator(w, strategy) @ psi))
            for w in problem.variables
        ]
    )


def moment_matrix_of(problem: NpaProblem, strategy: CommutingStrategy) -> RealArray:
    """
    The real moment matrix Re <psi| w_i^* w_j |psi> evaluated directly on a projective
    commuting strategy, without going through the word identifications.
    """
    operators = [word_operator(w, strategy) for w in problem.words]
    vectors = np.stack([op @ strategy.psi for op in operators])
    return np.real(vectors.conj() @ vectors.T)


def npa_feasibility_residual(problem: NpaProblem, strategy: CommutingStrategy) -> float:
    """
    How far a commuting strategy's moments are from feasibility: the largest of the
    identification error between direct and variable based moment matrices, the
    equality violations and the most negative eigenvalue.
    """
    y = variables_of(problem, strategy)
    direct = moment_matrix_of(problem, strategy)
    identification = float(np.max(np.abs(direct - problem.moment_matrix(y))))
    return max(identification, problem.to_sdp().feasibility_residual(y))
