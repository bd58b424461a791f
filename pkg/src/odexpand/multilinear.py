"""Sparse symmetric-free multilinear maps on C^n.

A degree-m term of the nonlinearity is an m-linear map given by a sparse
entry table: ``value * x1[j1] * ... * xm[jm]`` accumulated into output row
``i``.  No symmetry is assumed; the expansion engine sums over ordered
argument tuples, so asymmetric maps are handled as written.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MultiLinearMap"]


@dataclass(frozen=True)
class MultiLinearMap:
    """m-linear map C^dim x ... x C^dim -> C^dim with sparse entries.

    entries: tuple of (out_index, in_indices, value) with len(in_indices)
    equal to arity.  Duplicate (out, in) slots are allowed in the input and
    merged on construction.
    """

    arity: int
    dim: int
    entries: tuple[tuple[int, tuple[int, ...], complex], ...] = field(default=())

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        merged: dict[tuple[int, tuple[int, ...]], complex] = {}
        for out, ins, val in self.entries:
            ins = tuple(int(j) for j in ins)
            out = int(out)
            if not 0 <= out < self.dim:
                raise ValueError(f"entry output index {out} out of range")
            if len(ins) != self.arity:
                raise ValueError("entry input tuple length != arity")
            if any(not 0 <= j < self.dim for j in ins):
                raise ValueError(f"entry input indices {ins} out of range")
            key = (out, ins)
            merged[key] = merged.get(key, 0j) + complex(val)
        canon = tuple(
            (out, ins, merged[(out, ins)]) for out, ins in sorted(merged)
            if merged[(out, ins)] != 0
        )
        object.__setattr__(self, "entries", canon)

    def __call__(self, *args: np.ndarray) -> np.ndarray:
        """Apply to ``arity`` vectors of length dim."""
        if len(args) != self.arity:
            raise ValueError(f"expected {self.arity} arguments, got {len(args)}")
        out = np.zeros(self.dim, dtype=complex)
        for i, ins, val in self.entries:
            prod = val
            for slot, j in enumerate(ins):
                prod = prod * args[slot][j]
            out[i] += prod
        return out

    def is_real(self, tol: float = 0.0) -> bool:
        """True when every entry value has |imag| <= tol."""
        return all(abs(v.imag) <= tol for _, _, v in self.entries)

    @classmethod
    def scalar_power(cls, arity: int) -> "MultiLinearMap":
        """The 1-d map (x1, ..., xm) -> x1*...*xm, i.e. G(y) = y**m."""
        return cls(arity=arity, dim=1, entries=((0, (0,) * arity, 1.0),))
