#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
The compiled protocol: a single prover plays both rounds of a nonlocal game, with
Alice's question encrypted under quantum homomorphic encryption and Bob's question
sent in the clear.

1. The verifier draws (x, y) from mu, generates a key and sends xi = Enc(x).
2. The prover answers with a ciphertext alpha.
3. The verifier sends y.
4. The prover answers b.
5. The verifier decrypts a = Dec(alpha) and accepts iff a and b are valid answers
   and V(a, b | x, y) = 1. A failed decryption is a rejection.

Provers are modeled structurally: they may only call the simulator and the backend
through a ProverApi, which withholds the secret key unless the session is insecure.
White-box provers also expose their first-round circuit and second-round POVMs so
that values and post-measurement states can be computed exactly.

Every prover here is uniform: one description serves every security parameter.
Non-uniform families, which could hard-code advice per key length, are not modeled.
"""

import copy
import logging
from abc import ABC, abstractmethod
from enum import Enum
from itertools import product
from typing import (
    Any,
    Callable,
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import dask
import numpy as np
import numpy.typing as npt

from . import blockenc, constants, exceptions, numerics
from .circuits import (
    EvalCircuit,
    affine_answer_circuit,
    constant_answer_circuit,
    controlled_measurement_circuit,
    register_answer_circuit,
)
from .games import Correlation, Game, winning_probability
from .qhe import Ciphertext, QheBackend, SecretKey, make_backend
from .quantum import Povm, measure, purify
from .sequential import (
    MAX_MONOMIALS,
    SequentialQuantumStrategy,
    correlation_of,
    strong_nonsig_residual,
)
from .strategies import (
    ClassicalStrategy,
    QuantumStrategy,
    chsh_optimal_strategy,
    classical_to_quantum,
    magic_square_perfect_strategy,
    random_projective_family,
)
from .types import CMatrix, GameShape, Seed
from .values import nonsignaling_value, seesaw_lower_bound

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

METHOD_DIRECT = "direct"
METHOD_BLOCKENC = "blockenc"

PROVER_HONEST = "honest"
PROVER_CIPHERTEXT_GUESSING = "ciphertext-guessing"
PROVER_KEY_STEALER = "key-stealer"
PROVER_GARBAGE = "garbage"
PROVER_REPLAY = "replay"
PROVER_NAMES = (
    PROVER_HONEST,
    PROVER_CIPHERTEXT_GUESSING,
    PROVER_KEY_STEALER,
    PROVER_GARBAGE,
    PROVER_REPLAY,
)

###############################################################################


def message_bits(shape: GameShape) -> int:
    """Bits needed to carry one of Alice's questions or answers (at least one)."""
    return max(int(shape.nA - 1).bit_length(), int(shape.kA - 1).bit_length(), 1)


class ProverApi:
    """
    Everything a prover may touch during the first round: homomorphic evaluation and,
    only in insecure sessions, the verifier's key.
    """

    def __init__(self, backend: QheBackend, sk: SecretKey, insecure: bool = False):
        self._backend = backend
        self._sk = sk
        self.insecure = insecure

    @property
    def message_bits(self) -> int:
        return self._backend.message_bits

    @property
    def backend_name(self) -> str:
        return self._backend.name

    def eval(
        self,
        ct: Ciphertext,
        circuit: EvalCircuit,
        aux_env: npt.ArrayLike,
        env_dim: int = 1,
        seed: Seed = None,
    ) -> Tuple[Ciphertext, CMatrix]:
        return self._backend.eval(ct, circuit, aux_env, env_dim, seed=seed)

    def secret_key(self) -> SecretKey:
        """
        Raises
        ------
        exceptions.InsecureAccessError
            The session is secure.
        """
        if not self.insecure:
            raise exceptions.InsecureAccessError(
                "The secret key is only available in insecure sessions."
            )
        return self._sk

    def decrypt(self, ct: Ciphertext) -> int:
        return self._backend.dec(self.secret_key(), ct)


###############################################################################


class ProverStrategy(ABC):
    """
    A prover for the compiled game. The rounds must be played in order, once each;
    fresh() returns a copy ready for a new session.
    """

    def __init__(self) -> None:
        self._round = 0
        self._rng = numerics.default_rng(None)

    def first_round(
        self, xi: Ciphertext, api: ProverApi, seed: Seed = None
    ) -> Ciphertext:
        """
        Raises
        ------
        exceptions.ProtocolViolationError
            The prover already answered a first round.
        """
        if self._round != 0:
            raise exceptions.ProtocolViolationError(
                f"{type(self).__name__} already played its first round."
            )
        self._rng = numerics.default_rng(seed)
        alpha = self._first_round(xi, api)
        self._round = 1
        return alpha

    def second_round(self, y: int) -> int:
        """
        Raises
        ------
        exceptions.ProtocolViolationError
            The first round has not been played or the second was already played.
        """
        if self._round != 1:
            raise exceptions.ProtocolViolationError(
                f"{type(self).__name__} cannot play a second round from round "
                f"{self._round}."
            )
        b = self._second_round(y)
        self._round = 2
        return b

    def reset(self) -> None:
        self._round = 0

    def fresh(self) -> "ProverStrategy":
        clone = copy.copy(self)
        clone.reset()
        return clone

    @abstractmethod
    def _first_round(self, xi: Ciphertext, api: ProverApi) -> Ciphertext:
        pass

    @abstractmethod
    def _second_round(self, y: int) -> int:
        pass

    def __str__(self) -> str:
        return f"<{type(self).__name__}>"

    def __repr__(self) -> str:
        return str(self)


class WhiteBoxProver(ProverStrategy):
    """
    A prover whose first round is one homomorphically evaluated circuit and whose
    second round measures the register the circuit left behind with bob_povms()[y].
    """

    _env: Optional[CMatrix] = None

    @property
    @abstractmethod
    def env_dim(self) -> int:
        """Dimension of the register kept between the rounds."""

    @abstractmethod
    def first_round_circuit(
        self,
        xi: Ciphertext,
        api: ProverApi,
    ) -> Tuple[EvalCircuit, CMatrix]:
        """
        The circuit to evaluate on xi and the auxiliary input on its auxiliary wires
        (x) the kept register.
        """

    @abstractmethod
    def bob_povms(self) -> CMatrix:
        """POVMs of shape (nB, kB, env_dim, env_dim)."""

    def reset(self) -> None:
        super().reset()
        self._env = None

    def _first_round(self, xi: Ciphertext, api: ProverApi) -> Ciphertext:
        circuit, aux_env = self.first_round_circuit(xi, api)
        alpha, env = api.eval(xi, circuit, aux_env, self.env_dim, seed=self._rng)
        self._env = env
        return alpha

    def _second_round(self, y: int) -> int:
        assert self._env is not None
        return measure(self._env, Povm(self.bob_povms()[y]), seed=self._rng)


###############################################################################


def _basis_vector(index: int, dim: int) -> CMatrix:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def _pad_square(op: CMatrix, side: int) -> CMatrix:
    padded = np.zeros((side, side), dtype=np.complex128)
    padded[: op.shape[0], : op.shape[1]] = op
    return padded


def _deterministic_answers(
    strategy: ClassicalStrategy,
) -> Optional[Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]]:
    support = np.flatnonzero(strategy.gamma > constants.PROBABILITY_SUM_TOL)
    if support.size != 1:
        return None
    p_a = strategy.pA[support[0]]
    q_b = strategy.qB[support[0]]
    if not (np.allclose(p_a.max(axis=1), 1.0) and np.allclose(q_b.max(axis=1), 1.0)):
        return None
    return np.argmax(p_a, axis=1), np.argmax(q_b, axis=1)


class HonestProver(WhiteBoxProver):
    """
    Plays a nonlocal strategy inside the compiled game: Alice's measurement runs under
    encryption on her half of the state and Bob measures his half in the clear.

    Deterministic classical strategies whose answer is an affine function of the
    question bits become Clifford circuits. Everything else is a measurement
    controlled on the encrypted question and needs the ideal backend.

    Parameters
    ----------
    strategy: Union[QuantumStrategy, ClassicalStrategy]
        The strategy to play.
    """

    def __init__(self, strategy: Union[QuantumStrategy, ClassicalStrategy]):
        super().__init__()
        self.strategy = strategy
        self.shape = strategy.shape
        self.n_bits = message_bits(self.shape)

        circuit = None
        if isinstance(strategy, ClassicalStrategy):
            answers = _deterministic_answers(strategy)
            if answers is not None:
                alice, bob = answers
                circuit = affine_answer_circuit(self.n_bits, [int(a) for a in alice])
            if circuit is not None:
                self._circuit = circuit
                self._aux_env = _basis_vector(0, 2**circuit.n_aux)
                self._env_dim = 1
                b = np.zeros((self.shape.nB, self.shape.kB, 1, 1), dtype=np.complex128)
                b[np.arange(self.shape.nB), bob] = 1.0
                self._bob = b
                log.debug("Honest prover plays a Clifford circuit")
                return
            strategy = classical_to_quantum(strategy)

        self._build_measurement(strategy)

    def _build_measurement(self, strategy: QuantumStrategy) -> None:
        n_system = numerics.num_qubits(strategy.dA)
        side = 2**n_system
        padding = np.eye(side, dtype=np.complex128) - _pad_square(
            np.eye(strategy.dA, dtype=np.complex128), side
        )
        kraus = []
        for x in range(self.shape.nA):
            ops = [
                _pad_square(numerics.mat_sqrt_psd(element), side)
                for element in strategy.M[x]
            ]
            ops[0] = ops[0] + padding
            kraus.append(ops)

        psi = np.zeros((side, strategy.dB), dtype=np.complex128)
        psi[: strategy.dA] = strategy.psi_matrix
        self._circuit = controlled_measurement_circuit(self.n_bits, n_system, kraus)
        self._aux_env = np.kron(_basis_vector(0, 2**self.n_bits), psi.reshape(-1))
        self._env_dim = strategy.dB
        self._bob = np.asarray(strategy.N)

    @property
    def env_dim(self) -> int:
        return self._env_dim

    def first_round_circuit(
        self,
        xi: Ciphertext,
        api: ProverApi,
    ) -> Tuple[EvalCircuit, CMatrix]:
        return self._circuit, self._aux_env

    def bob_povms(self) -> CMatrix:
        return self._bob


def _answer_register_state(
    n_bits: int,
    branches: Sequence[Tuple[int, CMatrix]],
    register_dim: int,
    env_dim: int,
) -> CMatrix:
    """
    sum over branches of |0>_scratch |a>_answer (x) v_a, where each v_a lives on the
    register (x) the kept environment.
    """
    state = np.zeros((2**n_bits, 2**n_bits, register_dim, env_dim), dtype=np.complex128)
    for a, vector in branches:
        state[0, a] += vector.reshape(register_dim, env_dim)
    return state.reshape(-1)


class ReplayCheater(WhiteBoxProver):
    """
    Ignores the encrypted question and replays the post-measurement states of
    question x0: it answers a with probability tr(sigma[x0, a]) and keeps
    sigma[x0, a] / tr(sigma[x0, a]) for Bob's measurement.

    Parameters
    ----------
    data: SequentialQuantumStrategy
        The states and Bob measurements to replay.
    x0: int
        The question whose states are replayed.
        Default: 0
    """

    def __init__(self, data: SequentialQuantumStrategy, x0: int = 0):
        super().__init__()
        if not 0 <= x0 < data.shape.nA:
            raise ValueError(f"Question {x0} is outside 0..{data.shape.nA - 1}.")
        self.data = data
        self.x0 = x0
        self.n_bits = message_bits(data.shape)

        states = list(data.sigma[x0])
        rejected = data.invalid[x0]
        if np.trace(rejected).real > constants.NORMALIZATION_TOL:
            if data.shape.kA < 2**self.n_bits:
                states.append(rejected)
            else:
                total = sum(np.trace(s).real for s in states)
                states = [s / total for s in states]

        d = data.dim
        register_qubits = numerics.num_qubits(d)
        register_dim = 2**register_qubits
        branches = []
        for a, sigma in enumerate(states):
            # purify() puts the system first; the kept register is the system
            root = np.zeros((register_dim, d), dtype=np.complex128)
            root[:d] = purify(sigma).as_matrix((d, d)).T
            branches.append((a, root))

        self._circuit = register_answer_circuit(self.n_bits, register_qubits)
        self._aux_env = _answer_register_state(self.n_bits, branches, register_dim, d)

    @property
    def env_dim(self) -> int:
        return self.data.dim

    def first_round_circuit(
        self,
        xi: Ciphertext,
        api: ProverApi,
    ) -> Tuple[EvalCircuit, CMatrix]:
        return self._circuit, self._aux_env

    def bob_povms(self) -> CMatrix:
        return self.data.B


def random_sequential_cheater(
    shape: GameShape,
    dim: int = 2,
    seed: Seed = None,
) -> ReplayCheater:
    """
    A replay cheater for random data: a random mixed state measured by random
    projective measurements on Alice's side, random projective measurements for Bob.
    """
    rng = numerics.default_rng(seed)
    rho = numerics.random_density(dim, rng)
    alice = random_projective_family(shape.nA, shape.kA, dim, rng)
    sigma = np.zeros(alice.shape, dtype=np.complex128)
    for x, a in np.ndindex(*alice.shape[:2]):
        sigma[x, a] = alice[x, a] @ rho @ alice[x, a]
    data = SequentialQuantumStrategy(
        sigma=sigma, B=random_projective_family(shape.nB, shape.kB, dim, rng)
    )
    return ReplayCheater(data, x0=int(rng.integers(shape.nA)))


class CiphertextGuessingProver(WhiteBoxProver):
    """
    Reads the question off the ciphertext payload as if it were the plaintext
    (payload mod nA) and plays the best deterministic answers for that guess.
    """

    def __init__(self, game: Game):
        super().__init__()
        self.game = game
        self.n_bits = message_bits(game.shape)
        rule = game.V.astype(np.float64)
        # Score of answer a on question x when Bob answers every y as well as possible
        scores = np.einsum("xy,xya->xa", game.mu, rule.max(axis=3))
        self.alice_answers = np.argmax(scores, axis=1)
        self.bob_answers = np.argmax(
            rule[np.arange(game.nA), :, self.alice_answers, :], axis=2
        )

    @property
    def env_dim(self) -> int:
        return self.game.nA

    def guess(self, xi: Ciphertext) -> int:
        return xi.payload % self.game.nA

    def first_round_circuit(
        self,
        xi: Ciphertext,
        api: ProverApi,
    ) -> Tuple[EvalCircuit, CMatrix]:
        guess = self.guess(xi)
        circuit = constant_answer_circuit(self.n_bits, int(self.alice_answers[guess]))
        aux_env = np.kron(
            _basis_vector(0, 2**circuit.n_aux), _basis_vector(guess, self.game.nA)
        )
        return circuit, aux_env

    def bob_povms(self) -> CMatrix:
        n_a, n_b, _, k_b = self.game.shape
        b = np.zeros((n_b, k_b, n_a, n_a), dtype=np.complex128)
        for guess, y in np.ndindex(n_a, n_b):
            b[y, self.bob_answers[guess, y], guess, guess] = 1.0
        return b


class KeyStealer(WhiteBoxProver):
    """
    Decrypts the question with the verifier's key and samples answers from an optimal
    non-signaling correlation: a from p(a | x), then b from p(b | a, x, y). Only
    possible in insecure sessions.
    """

    def __init__(self, game: Game, correlation: Optional[Correlation] = None):
        super().__init__()
        self.game = game
        self.n_bits = message_bits(game.shape)
        if correlation is None:
            _, correlation = nonsignaling_value(game, return_correlation=True)
        p = correlation.p
        self.alice_marginal = p[:, 0].sum(axis=2)
        support = (self.alice_marginal > 0)[:, None, :, None]
        marginal = np.where(support, self.alice_marginal[:, None, :, None], 1.0)
        conditional = np.clip(np.where(support, p / marginal, 1.0), 0.0, None)
        self.bob_conditional = conditional / conditional.sum(axis=3, keepdims=True)

    @property
    def env_dim(self) -> int:
        return self.game.nA * self.game.kA

    def first_round_circuit(
        self,
        xi: Ciphertext,
        api: ProverApi,
    ) -> Tuple[EvalCircuit, CMatrix]:
        x = api.decrypt(xi) % self.game.nA
        k_a, dim = self.game.kA, self.env_dim
        branches = [
            (a, np.sqrt(self.alice_marginal[x, a]) * _basis_vector(x * k_a + a, dim))
            for a in range(k_a)
            if self.alice_marginal[x, a] > 0
        ]
        circuit = register_answer_circuit(self.n_bits, 0)
        return circuit, _answer_register_state(self.n_bits, branches, 1, self.env_dim)

    def bob_povms(self) -> CMatrix:
        n_a, n_b, k_a, k_b = self.game.shape
        b = np.zeros((n_b, k_b, self.env_dim, self.env_dim), dtype=np.complex128)
        for x, y, a in np.ndindex(n_a, n_b, k_a):
            index = x * k_a + a
            b[y, :, index, index] = self.bob_conditional[x, y, a]
        return b


class GarbageProver(ProverStrategy):
    """
    Answers with a random ciphertext the verifier never issued and then b = 0. It has
    no operator description, so only sessions can score it.
    """

    def _first_round(self, xi: Ciphertext, api: ProverApi) -> Ciphertext:
        nonce = 2 ** (8 * constants.NONCE_BYTES) - 1 - int(self._rng.integers(0, 2**32))
        payload = int(self._rng.integers(0, 2**api.message_bits))
        return Ciphertext(nonce, payload, api.message_bits, api.backend_name)

    def _second_round(self, y: int) -> int:
        return 0


###############################################################################


def exact_value(
    g: Game,
    prover: ProverStrategy,
    backend: QheBackend,
    lam: int,
    insecure: bool = False,
) -> Tuple[float, Correlation, SequentialQuantumStrategy]:
    """
    The compiled value of a white-box prover, averaged exactly over every key and
    ciphertext the backend can produce and every measurement branch.

    Parameters
    ----------
    g: Game
        The game.
    prover: ProverStrategy
        A WhiteBoxProver.
    backend: QheBackend
        The backend, with message_bits(g.shape) bit messages.
    lam: int
        The security parameter.
    insecure: bool
        Give the prover access to the key.
        Default: False

    Returns
    -------
    value: float
        The winning probability.
    correlation: Correlation
        p(a, b | x, y) = tr(sigma[x, a] B[y, b]), subnormalized when answers can be
        rejected.
    data: SequentialQuantumStrategy
        The post-measurement states, rejected answers and Bob's POVMs.

    Raises
    ------
    exceptions.NotWhiteBoxError
        The prover does not expose its circuit and measurements.
    exceptions.UnsupportedCircuitError
        The backend cannot evaluate the prover's circuit.
    exceptions.BudgetExceededError
        The key space is too large to enumerate.
    """
    if not isinstance(prover, WhiteBoxProver):
        raise exceptions.NotWhiteBoxError(
            f"{type(prover).__name__} does not expose its measurements."
        )
    if backend.message_bits != message_bits(g.shape):
        raise exceptions.DimensionMismatchError(
            f"Backend messages have {backend.message_bits} bits, the game needs "
            f"{message_bits(g.shape)}."
        )

    d = prover.env_dim
    sigma = np.zeros((g.nA, g.kA, d, d), dtype=np.complex128)
    rejected = np.zeros((g.nA, d, d), dtype=np.complex128)
    keys = backend.key_support(lam)
    for x in range(g.nA):
        for sk in keys:
            api = ProverApi(backend, sk, insecure)
            ciphertexts = backend.encryption_support(sk, x)
            weight = 1.0 / (len(keys) * len(ciphertexts))
            for xi in ciphertexts:
                circuit, aux_env = prover.first_round_circuit(xi, api)
                for branch in backend.eval_branches(xi, circuit, aux_env, d):
                    try:
                        a: Optional[int] = backend.dec(sk, branch.ciphertext)
                    except (exceptions.DecodeFailureError, exceptions.WrongKeyError):
                        a = None
                    if a is None or a >= g.kA:
                        rejected[x] += weight * branch.env
                    else:
                        sigma[x, a] += weight * branch.env
                    backend.forget(branch.ciphertext)
                backend.forget(xi)

    sigma = (sigma + np.conj(np.swapaxes(sigma, -1, -2))) / 2
    rejected = (rejected + np.conj(np.swapaxes(rejected, -1, -2))) / 2
    data = SequentialQuantumStrategy(
        sigma=sigma, B=prover.bob_povms(), invalid=rejected
    )
    correlation = correlation_of(data)
    value = winning_probability(g, correlation)
    log.info(f"Exact compiled value of {prover} on {g.name} ({backend.name}): {value}")
    return value, correlation, data


###############################################################################


class SessionState(Enum):
    INIT = "init"
    SENT_XI = "sent-xi"
    SENT_Y = "sent-y"
    DONE = "done"


class Transcript(NamedTuple):
    x: int
    y: int
    xi: Ciphertext
    alpha: Ciphertext
    a: Optional[int]
    b: int
    accept: bool
    seed: Optional[int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x,
            "y": self.y,
            "xi_hex": self.xi.hex(),
            "alpha_hex": self.alpha.hex(),
            "b": self.b,
            "a": self.a,
            "accept": self.accept,
            "seed": self.seed,
        }


class VerifierSession:
    """
    The verifier of one compiled session. Messages must follow
    start -> receive_alpha -> finish.
    """

    def __init__(
        self, game: Game, backend: QheBackend, lam: int, insecure: bool = False
    ):
        self.game = game
        self.backend = backend
        self.lam = lam
        self.insecure = insecure
        self.state = SessionState.INIT
        self.x: Optional[int] = None
        self.y: Optional[int] = None
        self._sk: Optional[SecretKey] = None
        self._xi: Optional[Ciphertext] = None
        self._alpha: Optional[Ciphertext] = None
        self._seed: Optional[int] = None

    def _require(self, state: SessionState, action: str) -> None:
        if self.state is not state:
            raise exceptions.ProtocolViolationError(
                f"Cannot {action} in state '{self.state.value}' "
                f"(expected '{state.value}')."
            )

    def start(self, seed: Seed = None) -> Ciphertext:
        """Draw the questions and the key, then encrypt Alice's question."""
        self._require(SessionState.INIT, "start a session")
        question_seed, key_seed = numerics.spawn_seeds(seed, 2)
        rng = numerics.default_rng(question_seed)
        flat = int(rng.choice(self.game.mu.size, p=self.game.mu.reshape(-1)))
        self.x, self.y = divmod(flat, self.game.nB)
        self._sk = self.backend.gen(self.lam, key_seed)
        self._xi = self.backend.enc(self._sk, self.x)
        self._seed = seed if isinstance(seed, int) else None
        self.state = SessionState.SENT_XI
        return self._xi

    def api(self) -> ProverApi:
        if self._sk is None:
            raise exceptions.ProtocolViolationError("The session has not started.")
        return ProverApi(self.backend, self._sk, self.insecure)

    def receive_alpha(self, alpha: Ciphertext) -> int:
        """Record the first answer and reveal Bob's question."""
        self._require(SessionState.SENT_XI, "receive a first answer")
        self._alpha = alpha
        self.state = SessionState.SENT_Y
        assert self.y is not None
        return self.y

    def finish(self, b: int) -> Transcript:
        """Decrypt the first answer and decide."""
        self._require(SessionState.SENT_Y, "receive a second answer")
        assert self._sk is not None and self._alpha is not None and self._xi is not None
        assert self.x is not None and self.y is not None
        try:
            a: Optional[int] = self.backend.dec(self._sk, self._alpha)
        except (exceptions.DecodeFailureError, exceptions.WrongKeyError) as e:
            log.debug(f"First answer rejected: {e}")
            a = None

        b = int(b)
        valid = a is not None and 0 <= a < self.game.kA and 0 <= b < self.game.kB
        accept = bool(valid and self.game.V[self.x, self.y, a, b])
        self.state = SessionState.DONE
        return Transcript(
            x=self.x,
            y=self.y,
            xi=self._xi,
            alpha=self._alpha,
            a=a,
            b=b,
            accept=accept,
            seed=self._seed,
        )


def run_session(
    g: Game,
    prover: ProverStrategy,
    backend: QheBackend,
    lam: int,
    seed: int,
    insecure: bool = False,
) -> Transcript:
    """
    Play one compiled session against a fresh copy of the backend. The prover must be
    fresh.

    Raises
    ------
    exceptions.ProtocolViolationError
        The prover already played a round.
    """
    verifier_seed, backend_seed, prover_seed = numerics.spawn_seeds(seed, 3)
    session = VerifierSession(g, backend.fresh(backend_seed), lam, insecure)
    xi = session.start(verifier_seed)
    alpha = prover.first_round(xi, session.api(), seed=prover_seed)
    y = session.receive_alpha(alpha)
    transcript = session.finish(prover.second_round(y))
    return transcript._replace(seed=seed)


class MonteCarloEstimate(NamedTuple):
    value: float
    stderr: float
    accepted: int
    trials: int
    transcripts: List[Transcript]


def _run_batch(
    g: Game,
    prover: ProverStrategy,
    backend: QheBackend,
    lam: int,
    seeds: Sequence[int],
    insecure: bool,
) -> List[Transcript]:
    return [
        run_session(g, prover.fresh(), backend, lam, int(s), insecure) for s in seeds
    ]


def monte_carlo_value(
    g: Game,
    prover: ProverStrategy,
    backend: QheBackend,
    lam: int,
    trials: int,
    seed: Seed = constants.DEFAULT_SEED,
    threads: int = constants.DEFAULT_THREADS,
    insecure: bool = False,
) -> MonteCarloEstimate:
    """
    Acceptance frequency over independent sessions. Session k is seeded by the k-th
    draw from seed, so results do not depend on threads.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1 (received {trials}).")

    session_seeds = numerics.default_rng(seed).integers(0, 2**63, size=trials)
    batches = [
        dask.delayed(_run_batch)(g, prover, backend, lam, batch, insecure)
        for batch in np.array_split(session_seeds, min(threads, trials))
    ]
    results = dask.compute(*batches, scheduler="threads", num_workers=threads)
    transcripts = [t for batch in results for t in batch]

    accepted = sum(t.accept for t in transcripts)
    value = accepted / trials
    log.info(
        f"Monte Carlo value of {prover} on {g.name} over {trials} sessions: {value}"
    )
    return MonteCarloEstimate(
        value=value,
        stderr=float(np.sqrt(value * (1 - value) / trials)),
        accepted=accepted,
        trials=trials,
        transcripts=transcripts,
    )


###############################################################################


def reference_strategy(g: Game, seed: Seed = constants.DEFAULT_SEED) -> QuantumStrategy:
    """The known optimum for catalog games, a see-saw strategy otherwise."""
    if g.name == constants.GAME_CHSH and tuple(g.shape) == (2, 2, 2, 2):
        return chsh_optimal_strategy()
    if g.name == constants.GAME_MAGIC_SQUARE and tuple(g.shape) == (3, 3, 4, 4):
        return magic_square_perfect_strategy()
    _, strategy = seesaw_lower_bound(g, d=2, seed=seed)
    return strategy


def make_prover(
    name: str,
    g: Game,
    seed: Seed = constants.DEFAULT_SEED,
) -> ProverStrategy:
    if name == PROVER_HONEST:
        return HonestProver(reference_strategy(g, seed))
    if name == PROVER_CIPHERTEXT_GUESSING:
        return CiphertextGuessingProver(g)
    if name == PROVER_KEY_STEALER:
        return KeyStealer(g)
    if name == PROVER_GARBAGE:
        return GarbageProver()
    if name == PROVER_REPLAY:
        reference = SequentialQuantumStrategy.from_quantum(reference_strategy(g, seed))
        return ReplayCheater(reference)
    raise ValueError(
        f"Unknown prover '{name}'. Known provers: {', '.join(PROVER_NAMES)}."
    )


class BatteryReport(NamedTuple):
    values: Dict[str, float]
    residuals: Dict[str, float]
    skipped: Dict[str, str]
    max_value: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "values": self.values,
            "residuals": self.residuals,
            "skipped": self.skipped,
            "max_value": self.max_value,
        }


def battery_members(
    g: Game,
    insecure: bool = False,
    seed: Seed = constants.DEFAULT_SEED,
    random_cheaters: int = 2,
) -> List[Tuple[str, ProverStrategy]]:
    """
    The ciphertext-ignoring replay cheaters (for the reference strategy's states and
    for random states), the ciphertext-guessing prover and, in insecure mode only,
    the key stealer.
    """
    reference = SequentialQuantumStrategy.from_quantum(reference_strategy(g, seed))
    members: List[Tuple[str, ProverStrategy]] = [
        (f"replay-reference-x{x0}", ReplayCheater(reference, x0)) for x0 in range(g.nA)
    ]
    for i, child in enumerate(numerics.spawn_seeds(seed, random_cheaters)):
        cheater = random_sequential_cheater(g.shape, seed=child)
        members.append((f"replay-random-{i}", cheater))
    members.append((PROVER_CIPHERTEXT_GUESSING, CiphertextGuessingProver(g)))
    if insecure:
        members.append((PROVER_KEY_STEALER, KeyStealer(g)))
    return members


def adversary_battery(
    g: Game,
    backend: str,
    lam: int,
    insecure: bool = False,
    seed: Seed = constants.DEFAULT_SEED,
    random_cheaters: int = 2,
    degree: int = 3,
) -> BatteryReport:
    """
    Exact compiled values of every battery member, together with the strong
    non-signaling residual of its extracted states up to the given degree. Members the
    backend cannot evaluate are reported as skipped.
    """
    n_bits = message_bits(g.shape)
    values: Dict[str, float] = {}
    residuals: Dict[str, float] = {}
    skipped: Dict[str, str] = {}
    for name, prover in battery_members(g, insecure, seed, random_cheaters):
        try:
            value, _, data = exact_value(
                g, prover, make_backend(backend, n_bits, seed), lam, insecure
            )
        except (
            exceptions.UnsupportedCircuitError,
            exceptions.BudgetExceededError,
        ) as e:
            log.warning(f"Skipping battery member {name}: {e}")
            skipped[name] = str(e)
            continue
        values[name] = value
        residuals[name] = strong_nonsig_residual(data, degree)[0]
        log.debug(f"Battery member {name}: value {value}, residual {residuals[name]}")

    max_value = max(values.values()) if values else 0.0
    log.info(f"Adversary battery on {g.name} ({backend}): max value {max_value}")
    return BatteryReport(
        values=values, residuals=residuals, skipped=skipped, max_value=max_value
    )


###############################################################################


class ValueSequence(NamedTuple):
    lams: List[int]
    values: List[float]
    liminf: float
    limsup: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambdas": self.lams,
            "values": self.values,
            "liminf": self.liminf,
            "limsup": self.limsup,
        }


def value_sequence(
    g: Game,
    prover_family: Callable[[int], ProverStrategy],
    lams: Sequence[int],
    backend: str = constants.BACKEND_IDEAL,
    exact: bool = True,
    trials: int = 1000,
    seed: Seed = constants.DEFAULT_SEED,
    insecure: bool = False,
) -> ValueSequence:
    """
    Compiled values for a prover family over a grid of security parameters, with the
    smallest and largest value over the upper half of the grid as estimates of the
    lower and upper limits.

    Raises
    ------
    exceptions.EmptyListError
        No security parameter was given.
    """
    if len(lams) == 0:
        raise exceptions.EmptyListError("value_sequence needs at least one lambda.")

    n_bits = message_bits(g.shape)
    values = []
    for lam, child in zip(lams, numerics.spawn_seeds(seed, len(lams))):
        prover = prover_family(lam)
        instance = make_backend(backend, n_bits, child)
        if exact:
            value, _, _ = exact_value(g, prover, instance, lam, insecure)
        else:
            value = monte_carlo_value(
                g, prover, instance, lam, trials, seed=child, insecure=insecure
            ).value
        log.debug(f"Compiled value at lambda {lam}: {value}")
        values.append(value)

    tail = values[len(values) // 2 :]
    return ValueSequence(
        lams=[int(lam) for lam in lams],
        values=values,
        liminf=min(tail),
        limsup=max(tail),
    )


###############################################################################


def polynomial_security_residual(
    data: SequentialQuantumStrategy,
    degree: int,
    method: str = METHOD_DIRECT,
) -> float:
    """
    max over x, x' and words P of length at most degree in Bob's POVM elements of
    |tr(sigma_x P) - tr(sigma_x' P)|. The blockenc method reads every expectation off
    a block encoding of P instead of multiplying matrices.
    """
    if method == METHOD_DIRECT:
        return strong_nonsig_residual(data, degree)[0]
    if method != METHOD_BLOCKENC:
        raise ValueError(
            f"Unknown method '{method}'. "
            f"Known methods: {METHOD_DIRECT}, {METHOD_BLOCKENC}."
        )

    letters = list(product(range(data.B.shape[0]), range(data.B.shape[1])))
    n_words = sum(len(letters) ** k for k in range(degree + 1))
    if n_words > MAX_MONOMIALS:
        raise exceptions.BudgetExceededError(
            "Monomial enumeration", n_words, MAX_MONOMIALS
        )

    states = data.sigma_x
    worst = 0.0
    for length in range(degree + 1):
        for word in product(letters, repeat=length):
            encoding = blockenc.encode_word(data.B, word)
            for x, x_other in product(range(states.shape[0]), repeat=2):
                if x < x_other:
                    worst = max(
                        worst,
                        blockenc.distinguishing_advantage(
                            encoding, states[x], states[x_other]
                        ),
                    )
    return worst
