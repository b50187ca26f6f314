"""Brute-force dense state-vector engine.

Reference implementation used as an independent oracle for the sparse
engine on tiny register spaces (total dimension capped at 2^12). It keeps
the full amplitude vector and applies operators by tensor reshaping, with
no code shared with the sparse paths.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .registers import (
    Distribution,
    EngineError,
    RegisterLabel,
    RegisterSpace,
    _require_unitary,
)

DENSE_DIMENSION_CAP = 4096

__all__ = ["DenseState", "DENSE_DIMENSION_CAP"]


class DenseState:
    """Full state vector over a register space, row-major register order."""

    def __init__(self, space: RegisterSpace, vector: np.ndarray):
        if space.total_dimension > DENSE_DIMENSION_CAP:
            raise EngineError(
                f"total dimension {space.total_dimension} exceeds dense cap {DENSE_DIMENSION_CAP}"
            )
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        if vec.shape != (space.total_dimension,):
            raise EngineError("vector length does not match the register space")
        self.space = space
        self.vector = vec

    @classmethod
    def from_basis(cls, space: RegisterSpace, values: Mapping[RegisterLabel, int]) -> "DenseState":
        key = space.assignment(values)
        index = 0
        for v, d in zip(key, space.dims):
            index = index * d + v
        vec = np.zeros(space.total_dimension, dtype=complex)
        vec[index] = 1.0
        return cls(space, vec)

    def _as_tensor(self) -> np.ndarray:
        return self.vector.reshape(self.space.dims)

    def apply(self, targets: Sequence[RegisterLabel], matrix: np.ndarray) -> "DenseState":
        pos = self.space.positions(targets)
        dims = [self.space.dims[p] for p in pos]
        block = math.prod(dims)
        m = _require_unitary(matrix, block)

        tensor = self._as_tensor()
        moved = np.moveaxis(tensor, pos, range(len(pos)))
        shape = moved.shape
        flat = moved.reshape(block, -1)
        flat = m @ flat
        moved = flat.reshape(shape)
        tensor = np.moveaxis(moved, range(len(pos)), pos)
        return DenseState(self.space, tensor.reshape(-1))

    def apply_controlled(
        self,
        controls: Sequence[tuple[RegisterLabel, int]],
        targets: Sequence[RegisterLabel],
        matrix: np.ndarray,
    ) -> "DenseState":
        # Build the blocked operator over (controls..., targets...) and reuse
        # the plain path: identity everywhere except the selected control cell.
        ctrl_labels = [lab for lab, _ in controls]
        combined = list(ctrl_labels) + list(targets)
        pos = self.space.positions(combined)
        ctrl_dims = [self.space.dims[p] for p in pos[: len(ctrl_labels)]]
        tgt_dims = [self.space.dims[p] for p in pos[len(ctrl_labels):]]
        ctrl_block = math.prod(ctrl_dims)
        tgt_block = math.prod(tgt_dims)
        m = _require_unitary(matrix, tgt_block)

        sel = 0
        for (_, v), d in zip(controls, ctrl_dims):
            if not 0 <= v < d:
                raise EngineError(f"control value {v} out of range (dim {d})")
            sel = sel * d + v
        big = np.eye(ctrl_block * tgt_block, dtype=complex)
        lo = sel * tgt_block
        big[lo : lo + tgt_block, lo : lo + tgt_block] = m
        return self.apply(combined, big)

    def marginal(self, labels: Sequence[RegisterLabel]) -> Distribution:
        pos = self.space.positions(labels)
        probs = np.abs(self._as_tensor()) ** 2
        other = tuple(i for i in range(len(self.space)) if i not in pos)
        reduced = probs.sum(axis=other) if other else probs
        # reduced axes follow ascending register position; reorder to label order
        order = [sorted(pos).index(p) for p in pos]
        reduced = np.transpose(reduced, order)
        support = {}
        for idx in np.ndindex(reduced.shape):
            p = float(reduced[idx])
            if p > 0.0:
                support[idx] = p
        return Distribution(support)

    def amplitude(self, values: Mapping[RegisterLabel, int]) -> complex:
        key = self.space.assignment(values)
        index = 0
        for v, d in zip(key, self.space.dims):
            index = index * d + v
        return complex(self.vector[index])

    def amplitude_of_key(self, key: tuple[int, ...]) -> complex:
        index = 0
        for v, d in zip(key, self.space.dims):
            index = index * d + v
        return complex(self.vector[index])

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.vector) ** 2))
