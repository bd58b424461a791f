"""Finite sums of polynomial-times-exponential terms on C^n.

An ``ExpPolySum`` stores g(t) = sum_nu p_nu(t) * exp(nu*t) with complex
exponents nu and vector polynomial coefficients p_nu.  The representation is
kept canonical: exponents are snapped to a fixed grid and merged, negligible
polynomial rows are dropped, and no term has an all-zero polynomial.  Under
that discipline two sums agree as functions iff their term maps agree, which
is what the engine's symbolic identity checks rely on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .multilinear import MultiLinearMap

__all__ = [
    "ExpPolySum",
    "snap_scalar",
    "snap_float",
    "canonicalize_exp",
    "eval_exp",
    "derivative_exp",
    "mul_apply_exp",
    "trim_small_exp",
    "coeff_distance_exp",
]

# Exponent keys live on this grid; equality of snapped keys is exact.
EXPONENT_GRID = 1e-12
# Polynomial rows below TRIM_REL * (largest row norm in the term) are dropped.
TRIM_REL = 1e-13


def snap_float(x: float) -> float:
    """Snap a real number onto the exponent grid (normalizing -0.0)."""
    v = round(float(x) / EXPONENT_GRID) * EXPONENT_GRID
    return 0.0 if v == 0.0 else v


def snap_scalar(z: complex) -> complex:
    """Snap a complex number onto the exponent grid (normalizing -0.0)."""
    return complex(snap_float(z.real), snap_float(z.imag))


def _sort_key(nu: complex) -> tuple[float, float]:
    return (nu.real, nu.imag)


def _trim_poly(coeffs: np.ndarray) -> np.ndarray | None:
    """Drop negligible rows; None when the whole polynomial is negligible."""
    norms = np.sqrt((abs(coeffs) ** 2).sum(axis=1))
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        return None
    keep = norms >= TRIM_REL * top
    coeffs = coeffs.copy()
    coeffs[~keep] = 0.0
    nz = np.nonzero(keep)[0]
    return coeffs[: nz[-1] + 1]


@dataclass(frozen=True)
class ExpPolySum:
    """Canonical sum of p_nu(t)*exp(nu*t) terms; treat instances as immutable."""

    dim: int
    terms: dict[complex, np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(cls, dim: int, raw: Iterable[tuple[complex, np.ndarray]]) -> "ExpPolySum":
        """Canonicalize an iterable of (exponent, coeff-rows) pairs."""
        acc: dict[complex, np.ndarray] = {}
        for nu, coeffs in raw:
            key = snap_scalar(complex(nu))
            arr = np.atleast_2d(np.asarray(coeffs, dtype=complex))
            if arr.shape[1] != dim:
                raise ValueError(f"coefficient width {arr.shape[1]} != dim {dim}")
            if key in acc:
                old = acc[key]
                d = max(old.shape[0], arr.shape[0])
                merged = np.zeros((d, dim), dtype=complex)
                merged[: old.shape[0]] += old
                merged[: arr.shape[0]] += arr
                acc[key] = merged
            else:
                acc[key] = arr.astype(complex, copy=True)
        out: dict[complex, np.ndarray] = {}
        for key in sorted(acc, key=_sort_key):
            trimmed = _trim_poly(acc[key])
            if trimmed is not None:
                out[key] = trimmed
        return cls(dim=dim, terms=out)

    @classmethod
    def zero(cls, dim: int) -> "ExpPolySum":
        return cls(dim=dim, terms={})

    @classmethod
    def single(cls, dim: int, nu: complex, coeffs) -> "ExpPolySum":
        return cls.build(dim, [(nu, coeffs)])

    # -- queries ---------------------------------------------------------

    def items(self) -> list[tuple[complex, np.ndarray]]:
        """Terms in deterministic (Re, Im) order."""
        return [(nu, self.terms[nu]) for nu in sorted(self.terms, key=_sort_key)]

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Largest polynomial degree over all terms (-1 for the zero sum)."""
        return max((c.shape[0] - 1 for c in self.terms.values()), default=-1)

    def term_count(self) -> int:
        return len(self.terms)

    def sup_norm(self) -> float:
        """Largest coefficient row norm over all terms."""
        best = 0.0
        for c in self.terms.values():
            best = max(best, float(np.sqrt((abs(c) ** 2).sum(axis=1)).max()))
        return best

    def exponents(self) -> list[complex]:
        return [nu for nu, _ in self.items()]

    def in_class(self, mu: float, tol: float = 1e-9) -> bool:
        """All exponents have real part mu (the fixed-decay-rate class)."""
        scale = max(1.0, abs(mu))
        return all(abs(nu.real - mu) <= tol * scale for nu in self.terms)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "ExpPolySum") -> "ExpPolySum":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return ExpPolySum.build(self.dim, list(self.terms.items()) + list(other.terms.items()))

    def __sub__(self, other: "ExpPolySum") -> "ExpPolySum":
        return self + other.scale(-1.0)

    def scale(self, a: complex) -> "ExpPolySum":
        return ExpPolySum.build(self.dim, [(nu, a * c) for nu, c in self.terms.items()])

    def apply_matrix(self, A: np.ndarray) -> "ExpPolySum":
        """Left-multiply every coefficient row by A (rows are vectors)."""
        A = np.asarray(A, dtype=complex)
        return ExpPolySum.build(self.dim, [(nu, c @ A.T) for nu, c in self.terms.items()])

    def shift_exponents(self, mu: complex) -> "ExpPolySum":
        """Multiply by exp(mu*t), i.e. add mu to every exponent."""
        return ExpPolySum.build(self.dim, [(nu + mu, c) for nu, c in self.terms.items()])

    def conjugate(self) -> "ExpPolySum":
        return ExpPolySum.build(
            self.dim, [(nu.conjugate(), c.conjugate()) for nu, c in self.terms.items()]
        )

    def derivative(self) -> "ExpPolySum":
        """d/dt: each term p*exp(nu t) maps to (p' + nu*p)*exp(nu t)."""
        raw = []
        for nu, c in self.terms.items():
            d = c.shape[0]
            out = nu * c.astype(complex, copy=True)
            for j in range(d - 1):
                out[j] += (j + 1) * c[j + 1]
            raw.append((nu, out))
        return ExpPolySum.build(self.dim, raw)

    def eval(self, t: float) -> np.ndarray:
        """Pointwise value in C^dim."""
        out = np.zeros(self.dim, dtype=complex)
        for nu, c in self.terms.items():
            p = np.zeros(self.dim, dtype=complex)
            for row in c[::-1]:
                p = p * t + row
            out += p * np.exp(nu * t)
        return out

    # -- serialization ---------------------------------------------------

    def to_records(self) -> list[dict]:
        recs = []
        for nu, c in self.items():
            recs.append(
                {
                    "exponent": [nu.real, nu.imag],
                    "coeffs": [[[z.real, z.imag] for z in row] for row in c],
                }
            )
        return recs

    @classmethod
    def from_records(cls, dim: int, recs: Sequence[dict]) -> "ExpPolySum":
        raw = []
        for rec in recs:
            nu = complex(rec["exponent"][0], rec["exponent"][1])
            rows = np.array(
                [[complex(p[0], p[1]) for p in row] for row in rec["coeffs"]], dtype=complex
            )
            raw.append((nu, rows))
        return cls.build(dim, raw)


def canonicalize_exp(dim: int, raw: Iterable[tuple[complex, np.ndarray]]) -> ExpPolySum:
    """Canonical form of a raw term list (merge, snap, trim, sort)."""
    return ExpPolySum.build(dim, raw)


def eval_exp(s: ExpPolySum, t: float) -> np.ndarray:
    return s.eval(t)


def derivative_exp(s: ExpPolySum) -> ExpPolySum:
    return s.derivative()


def mul_apply_exp(G: MultiLinearMap, args: Sequence[ExpPolySum]) -> ExpPolySum:
    """Push m ExpPolySums through an m-linear map.

    Exponents add across the chosen terms; polynomial parts combine by
    m-dimensional coefficient convolution through G.
    """
    if len(args) != G.arity:
        raise ValueError(f"map arity {G.arity} != argument count {len(args)}")
    for a in args:
        if a.dim != G.dim:
            raise ValueError("dimension mismatch between map and arguments")
    raw: list[tuple[complex, np.ndarray]] = []
    for combo in itertools.product(*(a.items() for a in args)):
        nu = sum(nu_l for nu_l, _ in combo)
        polys = [c for _, c in combo]
        degs = [c.shape[0] - 1 for c in polys]
        out = np.zeros((sum(degs) + 1, G.dim), dtype=complex)
        for idx in itertools.product(*(range(d + 1) for d in degs)):
            vecs = [polys[slot][j] for slot, j in enumerate(idx)]
            out[sum(idx)] += G(*vecs)
        raw.append((nu, out))
    return ExpPolySum.build(G.dim, raw)


def trim_small_exp(s: ExpPolySum, scale: float, rel: float = TRIM_REL) -> ExpPolySum:
    """Copy of s with coefficient rows below rel*scale zeroed out.

    Canonicalization alone trims rows only against the largest row of
    their own term, so it cannot tell a term made entirely of rounding
    dust from a genuine small term.  Residual checks (symbolic defects)
    have an external scale to measure against and use this instead.
    """
    bound = rel * scale
    raw = []
    for nu, rows in s.items():
        kept = rows.copy()
        norms = np.sqrt((abs(kept) ** 2).sum(axis=1))
        kept[norms < bound] = 0.0
        if np.any(kept):
            raw.append((nu, kept))
    return ExpPolySum.build(s.dim, raw)


def coeff_distance_exp(a: ExpPolySum, b: ExpPolySum) -> float:
    """Max entrywise coefficient deviation between two canonical sums."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    keys = set(a.terms) | set(b.terms)
    worst = 0.0
    for nu in keys:
        ca = a.terms.get(nu)
        cb = b.terms.get(nu)
        da = ca.shape[0] if ca is not None else 0
        db = cb.shape[0] if cb is not None else 0
        d = max(da, db)
        pa = np.zeros((d, a.dim), dtype=complex)
        pb = np.zeros((d, a.dim), dtype=complex)
        if ca is not None:
            pa[:da] = ca
        if cb is not None:
            pb[:db] = cb
        if d:
            worst = max(worst, float(abs(pa - pb).max()))
    return worst
