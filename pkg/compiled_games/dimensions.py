#!/usr/bin/env python
# -*- coding: utf-8 -*-

from collections.abc import Sequence as seq
from typing import Collection, ItemsView, Sequence, Tuple, Union

###############################################################################


class DimensionNames:
    AliceQuestion = "x"
    BobQuestion = "y"
    AliceAnswer = "a"
    BobAnswer = "b"


# Correlation tensors are always stored p[x][y][a][b]
CORRELATION_DIMENSION_ORDER_LIST = [
    DimensionNames.AliceQuestion,
    DimensionNames.BobQuestion,
    DimensionNames.AliceAnswer,
    DimensionNames.BobAnswer,
]
CORRELATION_DIMENSION_ORDER = "".join(CORRELATION_DIMENSION_ORDER_LIST)

# Question distributions are stored mu[x][y]
QUESTION_DIMENSION_ORDER_LIST = [
    DimensionNames.AliceQuestion,
    DimensionNames.BobQuestion,
]

###############################################################################


class Dimensions:
    """
    Names paired with sizes for the axes of a correlation or question tensor.

    Parameters
    ----------
    dims: Collection[str]
        The axis names, as one string or a collection of single characters.
    shape: Tuple[int, ...]
        The axis sizes, in the same order. Every size is at least 1.

    Examples
    --------
    >>> dims = Dimensions("xyab", (3, 3, 4, 4))
    ... dims.a
    ... dims["b", "y"]
    """

    def __init__(self, dims: Collection[str], shape: Tuple[int, ...]):
        if not isinstance(dims, str):
            bad = [d for d in dims if len(d) != 1]
            if bad:
                raise ValueError(f"Axis names must be single characters, got {bad}.")
            dims = "".join(dims)
        if len(dims) != len(shape):
            raise ValueError(
                f"Got {len(dims)} axis names ('{dims}') for a shape of "
                f"{len(shape)} axes {tuple(shape)}."
            )
        if min(shape, default=1) < 1:
            raise ValueError(f"Every axis needs at least one entry, got {shape}.")

        self._order = dims
        self._shape = tuple(int(size) for size in shape)
        self._sizes = dict(zip(dims, self._shape))
        for name, size in self._sizes.items():
            setattr(self, name, size)

    @property
    def order(self) -> str:
        """The axis names in storage order."""
        return self._order

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._shape

    def items(self) -> ItemsView[str, int]:
        return self._sizes.items()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dimensions):
            return NotImplemented
        return (self._order, self._shape) == (other._order, other._shape)

    def __repr__(self) -> str:
        sizes = ", ".join(f"{name}: {size}" for name, size in self.items())
        return f"<Dimensions [{sizes}]>"

    def __getitem__(self, key: Union[str, Sequence[str]]) -> Tuple[int, ...]:
        if isinstance(key, str):
            key = (key,)
        if not isinstance(key, seq) or not all(isinstance(k, str) for k in key):
            raise TypeError(f"Expected an axis name or a sequence of them, got {key!r}")

        missing = [k for k in key if k not in self._sizes]
        if missing:
            raise IndexError(f"{', '.join(missing)} not in {self._order}")
        return tuple(self._sizes[k] for k in key)
