"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Iterable, List, Sequence

import numpy as np


def check_texts(X, name: str = "X") -> List[str]:
    """Coerce a 1-d collection of strings to a list, rejecting anything else."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of strings, not a single string")
    if isinstance(X, np.ndarray):
        if X.ndim != 1:
            raise ValueError(f"{name} must be 1-dimensional, got shape {X.shape}")
        X = X.tolist()
    out = list(X)
    for i, x in enumerate(out):
        if not isinstance(x, str):
            raise TypeError(f"{name}[{i}] is {type(x).__name__}, expected str")
    return out


def check_paired_texts(X, y, x_name: str = "X", y_name: str = "y"):
    X = check_texts(X, x_name)
    y = check_texts(y, y_name)
    if len(X) != len(y):
        raise ValueError(f"{x_name} and {y_name} have different lengths: {len(X)} != {len(y)}")
    return X, y


def check_ids(ids: Iterable[int], vocab_size: int, name: str = "ids") -> List[int]:
    out = [int(i) for i in ids]
    for i in out:
        if i < 0 or i >= vocab_size:
            raise ValueError(f"{name} contains id {i} outside [0, {vocab_size})")
    return out


def check_same_length(a: Sequence, b: Sequence, exc=ValueError, what: str = "inputs") -> None:
    if len(a) != len(b):
        raise exc(f"{what} differ in length: {len(a)} != {len(b)}")
