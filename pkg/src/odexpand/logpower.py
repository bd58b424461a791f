"""Finite sums of complex powers of the ladder components.

A ``LogPowerSum`` of depth k stores

    p(t) = sum_alpha  exp(t)^a(-1) * t^a(0) * (log t)^a(1) * ... * L_k(t)^a(k) * xi_alpha

with complex exponent vectors alpha = (a(-1), ..., a(k)) and coefficient
vectors xi in C^n.  Complex powers are taken through the principal branch,
x^a = exp(a*log x), which is why evaluation requires every ladder component
to be strictly positive.

Three linear operators drive the power/log recursions:

    weight_op(j, p)     multiply each term by its exponent a(j)
    descent_op(p)       sum_j z_0^-1 ... z_j^-1 * weight_op(j, p); together
                        with weight_op(-1) it represents d/dt on composites
    shifted_inverse(A, p)  apply (A + a(-1) I)^-1 to each coefficient
"""

from __future__ import annotations

import cmath
import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .expsum import snap_scalar
from .ladder import exp_zero, ladder_eval
from .multilinear import MultiLinearMap

__all__ = [
    "LogPowerSum",
    "exponent_in_class",
    "weight_op",
    "descent_op",
    "time_derivative",
    "shifted_inverse",
    "ShiftedInverseCache",
    "mul_apply_logpower",
    "eval_logpower",
    "embed_depth",
    "trim_small_logpower",
    "coeff_distance_logpower",
]

TRIM_REL = 1e-13


def _snap_alpha(alpha: Sequence[complex]) -> tuple[complex, ...]:
    return tuple(snap_scalar(complex(a)) for a in alpha)


def _alpha_sort_key(alpha: tuple[complex, ...]):
    return tuple((a.real, a.imag) for a in alpha)


def exponent_in_class(alpha: Sequence[complex], m: int, mu: float, tol: float = 1e-9) -> bool:
    """Exponent-vector class test: a(j) imaginary for j < m, Re a(m) = mu."""
    alpha = tuple(alpha)
    k = len(alpha) - 2
    if not -1 <= m <= k:
        raise ValueError(f"class index m={m} incompatible with depth {k}")
    for j in range(-1, m):
        if abs(alpha[j + 1].real) > tol:
            return False
    return abs(alpha[m + 1].real - mu) <= tol * max(1.0, abs(mu))


@dataclass(frozen=True)
class LogPowerSum:
    """Canonical ladder-power sum; treat instances as immutable."""

    dim: int
    depth: int
    terms: dict[tuple[complex, ...], np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(
        cls, dim: int, depth: int, raw: Iterable[tuple[Sequence[complex], np.ndarray]]
    ) -> "LogPowerSum":
        if depth < -1:
            raise ValueError("depth must be >= -1")
        acc: dict[tuple[complex, ...], np.ndarray] = {}
        for alpha, xi in raw:
            key = _snap_alpha(alpha)
            if len(key) != depth + 2:
                raise ValueError(
                    f"exponent vector length {len(key)} != depth+2 = {depth + 2}"
                )
            vec = np.asarray(xi, dtype=complex).reshape(-1)
            if vec.shape[0] != dim:
                raise ValueError(f"coefficient length {vec.shape[0]} != dim {dim}")
            if key in acc:
                acc[key] = acc[key] + vec
            else:
                acc[key] = vec.copy()
        norms = {k: float(np.linalg.norm(v)) for k, v in acc.items()}
        top = max(norms.values(), default=0.0)
        out = {
            k: acc[k]
            for k in sorted(acc, key=_alpha_sort_key)
            if norms[k] > 0.0 and norms[k] >= TRIM_REL * top
        }
        return cls(dim=dim, depth=depth, terms=out)

    @classmethod
    def zero(cls, dim: int, depth: int) -> "LogPowerSum":
        return cls.build(dim, depth, [])

    @classmethod
    def single(cls, dim: int, depth: int, alpha: Sequence[complex], xi) -> "LogPowerSum":
        return cls.build(dim, depth, [(alpha, xi)])

    # -- queries ---------------------------------------------------------

    def items(self) -> list[tuple[tuple[complex, ...], np.ndarray]]:
        return [(a, self.terms[a]) for a in sorted(self.terms, key=_alpha_sort_key)]

    def is_zero(self) -> bool:
        return not self.terms

    def term_count(self) -> int:
        return len(self.terms)

    def sup_norm(self) -> float:
        return max((float(np.linalg.norm(v)) for v in self.terms.values()), default=0.0)

    def in_class(self, m: int, mu: float, tol: float = 1e-9) -> bool:
        """Every exponent vector sits in the (m, mu) class."""
        return all(exponent_in_class(a, m, mu, tol) for a in self.terms)

    def exponent(self, alpha: Sequence[complex], j: int) -> complex:
        return tuple(alpha)[j + 1]

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "LogPowerSum") -> "LogPowerSum":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if other.depth != self.depth:
            raise ValueError("depth mismatch; embed first")
        return LogPowerSum.build(
            self.dim, self.depth, list(self.terms.items()) + list(other.terms.items())
        )

    def __sub__(self, other: "LogPowerSum") -> "LogPowerSum":
        return self + other.scale(-1.0)

    def scale(self, a: complex) -> "LogPowerSum":
        return LogPowerSum.build(
            self.dim, self.depth, [(k, a * v) for k, v in self.terms.items()]
        )

    def apply_matrix(self, A: np.ndarray) -> "LogPowerSum":
        A = np.asarray(A, dtype=complex)
        return LogPowerSum.build(
            self.dim, self.depth, [(k, A @ v) for k, v in self.terms.items()]
        )

    def conjugate(self) -> "LogPowerSum":
        return LogPowerSum.build(
            self.dim,
            self.depth,
            [(tuple(a.conjugate() for a in k), v.conjugate()) for k, v in self.terms.items()],
        )

    def embed(self, depth: int) -> "LogPowerSum":
        """Zero-pad exponent vectors up to a larger depth."""
        if depth < self.depth:
            raise ValueError("cannot reduce depth by embedding")
        if depth == self.depth:
            return self
        pad = (0j,) * (depth - self.depth)
        return LogPowerSum.build(
            self.dim, depth, [(k + pad, v) for k, v in self.terms.items()]
        )

    def eval(self, t: float) -> np.ndarray:
        """Pointwise value; requires t above the depth+1 ladder threshold.

        The guard keeps every component comfortably inside the positive
        range so principal-branch powers are safe; exp(t) itself is never
        materialized (the a(-1) power contributes a(-1)*t to the log).
        """
        t = float(t)
        gate = exp_zero(self.depth + 1)
        if not t > gate:
            raise ValueError(
                f"t = {t!r} below the depth-{self.depth} evaluation threshold {gate!r}"
            )
        point = ladder_eval(self.depth, t) if self.depth >= 0 else None
        out = np.zeros(self.dim, dtype=complex)
        for alpha, xi in self.terms.items():
            w = alpha[0] * t
            for j in range(0, self.depth + 1):
                w = w + alpha[j + 1] * point.log_component(j)
            out = out + cmath.exp(w) * xi
        return out

    # -- serialization ---------------------------------------------------

    def to_records(self) -> list[dict]:
        recs = []
        for alpha, xi in self.items():
            recs.append(
                {
                    "alpha": [[a.real, a.imag] for a in alpha],
                    "xi": [[z.real, z.imag] for z in xi],
                }
            )
        return recs

    @classmethod
    def from_records(cls, dim: int, depth: int, recs: Sequence[dict]) -> "LogPowerSum":
        raw = []
        for rec in recs:
            alpha = [complex(p[0], p[1]) for p in rec["alpha"]]
            xi = np.array([complex(p[0], p[1]) for p in rec["xi"]], dtype=complex)
            raw.append((alpha, xi))
        return cls.build(dim, depth, raw)


def weight_op(j: int, p: LogPowerSum) -> LogPowerSum:
    """Multiply each term by its exponent a(j); kills terms with a(j) = 0."""
    if not -1 <= j <= p.depth:
        raise ValueError(f"component index {j} outside depth {p.depth}")
    return LogPowerSum.build(
        p.dim, p.depth, [(a, a[j + 1] * v) for a, v in p.terms.items()]
    )


def descent_op(p: LogPowerSum) -> LogPowerSum:
    """sum_{j=0}^{depth} z_0^-1 ... z_j^-1 * weight_op(j, p).

    Sends the decay class (m, mu) with m = 0 into (0, mu - 1).
    """
    if p.depth < 0:
        raise ValueError("descent needs at least the power scale (depth >= 0)")
    raw: list[tuple[tuple[complex, ...], np.ndarray]] = []
    for alpha, xi in p.terms.items():
        for j in range(0, p.depth + 1):
            aj = alpha[j + 1]
            if aj == 0:
                continue
            shifted = list(alpha)
            for i in range(0, j + 1):
                shifted[i + 1] = shifted[i + 1] - 1
            raw.append((tuple(shifted), aj * xi))
    return LogPowerSum.build(p.dim, p.depth, raw)


class ShiftedInverseCache:
    """LU factors of A + i*omega*I memoized per distinct imaginary shift.

    Thread-safe; a single cache is shared across one expansion run so
    repeated shifts cost one factorization each.
    """

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=complex)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        self._n = n
        self._cache: dict[complex, tuple] = {}
        self._lock = threading.Lock()

    def _factor(self, shift: complex):
        with self._lock:
            hit = self._cache.get(shift)
            if hit is not None:
                return hit
            B = self.A + shift * np.eye(self._n)
            sv = np.linalg.svd(B, compute_uv=False)
            if sv[-1] <= 1e-12 * max(sv[0], 1.0):
                raise ValueError(
                    f"A + ({shift})I is numerically singular; "
                    "the dissipativity assumption excludes this"
                )
            lu = scipy.linalg.lu_factor(B)
            self._cache[shift] = lu
            return lu

    def solve(self, alpha_m1: complex, xi: np.ndarray) -> np.ndarray:
        if abs(alpha_m1.real) > 1e-12:
            raise ValueError(
                f"exponent a(-1) = {alpha_m1} is not purely imaginary"
            )
        return scipy.linalg.lu_solve(self._factor(snap_scalar(alpha_m1)), xi)


def shifted_inverse(
    A: np.ndarray, p: LogPowerSum, cache: ShiftedInverseCache | None = None
) -> LogPowerSum:
    """Apply (A + a(-1) I)^-1 termwise; inverts A + weight_op(-1)."""
    if cache is None:
        cache = ShiftedInverseCache(A)
    if cache.A.shape[0] != p.dim:
        raise ValueError("matrix/operand dimension mismatch")
    return LogPowerSum.build(
        p.dim, p.depth, [(a, cache.solve(a[0], v)) for a, v in p.terms.items()]
    )


def embed_depth(p: LogPowerSum, depth: int) -> LogPowerSum:
    return p.embed(depth)


def time_derivative(p: LogPowerSum) -> LogPowerSum:
    """Symbolic d/dt of t -> p(ladder(t)): weight_op(-1, p) + descent_op(p)."""
    return weight_op(-1, p) + descent_op(p)


def eval_logpower(p: LogPowerSum, t: float) -> np.ndarray:
    return p.eval(t)


def mul_apply_logpower(G: MultiLinearMap, args: Sequence[LogPowerSum]) -> LogPowerSum:
    """Push m LogPowerSums through an m-linear map (exponent vectors add)."""
    if len(args) != G.arity:
        raise ValueError(f"map arity {G.arity} != argument count {len(args)}")
    for a in args:
        if a.dim != G.dim:
            raise ValueError("dimension mismatch between map and arguments")
    depth = max(a.depth for a in args)
    args = [a.embed(depth) for a in args]
    raw: list[tuple[tuple[complex, ...], np.ndarray]] = []
    for combo in itertools.product(*(a.items() for a in args)):
        alpha = tuple(sum(parts) for parts in zip(*(c[0] for c in combo)))
        xi = G(*(c[1] for c in combo))
        raw.append((alpha, xi))
    return LogPowerSum.build(G.dim, depth, raw)


def trim_small_logpower(p: LogPowerSum, scale: float, rel: float = TRIM_REL) -> LogPowerSum:
    """Copy of p without terms whose coefficient norm is below rel*scale.

    Canonicalization trims against the sum's own largest term, which says
    nothing when the whole sum is rounding dust; residual checks supply
    the scale of the data that produced the residual.
    """
    bound = rel * scale
    raw = [(a, v) for a, v in p.items() if float(np.linalg.norm(v)) >= bound]
    return LogPowerSum.build(p.dim, p.depth, raw)


def coeff_distance_logpower(a: LogPowerSum, b: LogPowerSum) -> float:
    """Max coefficient deviation between two canonical sums (same depth)."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    depth = max(a.depth, b.depth)
    a = a.embed(depth)
    b = b.embed(depth)
    worst = 0.0
    for key in set(a.terms) | set(b.terms):
        va = a.terms.get(key)
        vb = b.terms.get(key)
        if va is None:
            va = np.zeros(a.dim, dtype=complex)
        if vb is None:
            vb = np.zeros(b.dim, dtype=complex)
        worst = max(worst, float(abs(va - vb).max()))
    return worst
