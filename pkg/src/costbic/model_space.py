"""Binary inclusion vectors over the candidate predictors.

A model is stored as an integer code ``m = sum_j 2**(j-1) * gamma_j`` with
1-based variable indices. The intercept is implicit and always included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_ENUMERATION_P = 20


@dataclass(frozen=True, slots=True)
class ModelIndicator:
    """Inclusion vector over ``p`` predictors, encoded as an integer."""

    p: int
    code: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"p must be non-negative, got {self.p}")
        if self.code < 0 or self.code >> self.p:
            raise ValueError(f"code {self.code} sets bits beyond p={self.p}")

    @classmethod
    def from_indices(cls, p: int, indices: Iterable[int]) -> "ModelIndicator":
        code = 0
        for j in indices:
            if not 1 <= j <= p:
                raise IndexError(f"variable index {j} outside 1..{p}")
            code |= 1 << (j - 1)
        return cls(p, code)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "ModelIndicator":
        return cls.from_indices(len(bits), [j + 1 for j, b in enumerate(bits) if b])

    @classmethod
    def null(cls, p: int) -> "ModelIndicator":
        return cls(p, 0)

    @classmethod
    def full(cls, p: int) -> "ModelIndicator":
        return cls(p, (1 << p) - 1)

    @property
    def indices(self) -> tuple[int, ...]:
        """1-based indices of the included predictors, ascending."""
        return tuple(j + 1 for j in range(self.p) if self.code >> j & 1)

    @property
    def bits(self) -> np.ndarray:
        return np.array([(self.code >> j) & 1 for j in range(self.p)], dtype=np.int8)

    @property
    def columns(self) -> list[int]:
        """Design-matrix columns of the model: intercept then included predictors."""
        return [0, *self.indices]

    @property
    def size(self) -> int:
        return self.code.bit_count()

    def __contains__(self, j: int) -> bool:
        return 1 <= j <= self.p and bool(self.code >> (j - 1) & 1)

    def notation(self, names: Sequence[str] | None = None) -> str:
        if not self.code:
            return "1"
        if names is None:
            names = [f"X{j}" for j in range(1, self.p + 1)]
        return "+".join(names[j - 1] for j in self.indices)

    def __str__(self) -> str:
        return self.notation()


def dimension(gamma: ModelIndicator) -> int:
    """Number of coefficients, intercept included."""
    return 1 + gamma.size


def total_cost(gamma: ModelIndicator, costs) -> float:
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (gamma.p,):
        raise ValueError(f"expected {gamma.p} costs, got shape {costs.shape}")
    return float(sum(costs[j - 1] for j in gamma.indices))


def flip(gamma: ModelIndicator, j: int) -> ModelIndicator:
    if not 1 <= j <= gamma.p:
        raise IndexError(f"variable index {j} outside 1..{gamma.p}")
    return ModelIndicator(gamma.p, gamma.code ^ (1 << (j - 1)))


def enumerate_all(p: int) -> Iterator[ModelIndicator]:
    """Yield all ``2**p`` models in encoding order."""
    if p > MAX_ENUMERATION_P:
        raise ValueError(f"refusing to enumerate 2**{p} models (limit p <= {MAX_ENUMERATION_P})")
    for code in range(1 << p):
        yield ModelIndicator(p, code)


def parse_notation(text: str, names: Sequence[str]) -> ModelIndicator:
    """Parse ``"X1+X3+age"`` style notation against variable names.

    Tokens match a variable name first, then the ``X<j>`` index form. The
    empty string, ``"1"`` and ``"X0"`` denote the intercept-only model.
    """
    p = len(names)
    lookup = {name: j for j, name in enumerate(names, start=1)}
    indices = []
    for raw in text.split("+"):
        token = raw.strip()
        if token in ("", "1", "X0"):
            continue
        if token in lookup:
            indices.append(lookup[token])
            continue
        if token[:1] in ("X", "x") and token[1:].isdigit():
            j = int(token[1:])
            if 1 <= j <= p:
                indices.append(j)
                continue
        raise ValueError(f"unknown variable {token!r} in model {text!r}")
    return ModelIndicator.from_indices(p, indices)
