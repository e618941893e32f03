#!/usr/bin/env python
# -*- coding: utf-8 -*-

from pathlib import Path
from typing import NamedTuple, Tuple, Union

import numpy as np
import numpy.typing as npt

###############################################################################

# IO Types
PathLike = Union[str, Path]

# Numeric Types
CMatrix = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]
Seed = Union[int, np.random.SeedSequence, np.random.Generator, None]

# Words over measurement generators: ("A", x, a) or ("B", y, b)
Generator = Tuple[str, int, int]
Word = Tuple[Generator, ...]

# Words over Bob's POVM elements only: (y, b)
BobLetter = Tuple[int, int]
BobWord = Tuple[BobLetter, ...]


# Utility Types
class GameShape(NamedTuple):
    nA: int
    nB: int
    kA: int
    kB: int


class NonsignalingReport(NamedTuple):
    bob_to_alice_max_violation: float
    alice_to_bob_max_violation: float

    def is_nonsignaling(self, tol: float) -> bool:
        return (
            self.bob_to_alice_max_violation <= tol
            and self.alice_to_bob_max_violation <= tol
        )
