#!/usr/bin/env python
# -*- coding: utf-8 -*-

###############################################################################

# Numerical tolerances
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
NORMALIZATION_TOL = 1e-9
PROBABILITY_SUM_TOL = 1e-9
GAME_MU_SUM_TOL = 1e-9
NEGATIVE_ENTRY_TOL = 1e-12
UHLMANN_TOL = 1e-7
RANK_TOL = 1e-10
DEGENERACY_TOL = 1e-9

# Solvers
SDP_TOL = 1e-7
SDP_MAX_ITERS = 200
SDP_MAX_SIDE = 500
LP_TOL = 1e-9
CLASSICAL_ENUMERATION_BUDGET = 10**8
SEESAW_MONOTONE_SLACK = 1e-10

# Defaults for stochastic procedures
DEFAULT_SEED = 0
DEFAULT_RESTARTS = 10
DEFAULT_SEESAW_ITERS = 200
DEFAULT_SEESAW_CONVERGENCE = 1e-12
DEFAULT_THREADS = 1

# Algebra closure
ALGEBRA_MAX_ROUNDS = 64
BLOCK_DETECTION_ATTEMPTS = 8

# Quantum homomorphic encryption
NONCE_BYTES = 8
EXACT_KEY_ENUMERATION_MAX_BITS = 8
BACKEND_IDEAL = "ideal"
BACKEND_CLIFFORD = "clifford"

# Catalog game names
GAME_CHSH = "chsh"
GAME_MAGIC_SQUARE = "magic-square"
GAME_XOR = "xor"

# Uhlmann completion and block detection
UHLMANN_RANK_TOL = 1e-13
BLOCK_TOL = 1e-7

# Sequential to nonlocal conversion methods
CONVERT_CLASSICAL = "classical"
CONVERT_PURIFY = "purify"
CONVERT_BLOCKREDUCE = "blockreduce"
CONVERT_METHODS = (CONVERT_CLASSICAL, CONVERT_PURIFY, CONVERT_BLOCKREDUCE)
