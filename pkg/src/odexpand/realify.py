"""Real forms of conjugation-symmetric expansions.

A complex sum whose term map is closed under conjugation (exponents
conjugated, coefficients conjugated) is real-valued; these converters
rewrite such sums over a real basis.

For exponential sums the basis is t^m cos(w t) Z and t^m sin(w t) Z.  For
ladder-power sums an imaginary exponent on component j folds into a
cosine/sine of the next ladder component:

    L_j^(i w) xi + L_j^(-i w) conj(xi)
        = 2 cos(w L_{j+1}) Re(xi) - 2 sin(w L_{j+1}) Im(xi)

so the real form may need depth k+1; it stays at depth k exactly when no
term oscillates in the deepest component.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .expsum import ExpPolySum, snap_float, snap_scalar
from .ladder import exp_zero, ladder_eval
from .logpower import LogPowerSum
from .multilinear import MultiLinearMap

__all__ = [
    "TrigPolySum",
    "TrigLadderSum",
    "asymmetry_witness",
    "complexify_map",
    "check_conjugation_symmetry",
    "to_trig_poly",
    "to_trig_ladder",
    "from_trig_ladder",
    "imag_residue",
]

TRIM_REL = 1e-13
COS, SIN = "cos", "sin"


def complexify_map(G: MultiLinearMap) -> MultiLinearMap:
    """Extend a real multilinear map to complex arguments.

    On the coordinate basis the extension keeps the same sparse entry table;
    the input must be real entrywise.
    """
    if not G.is_real(tol=0.0):
        raise ValueError("complexify_map needs a real-entried map")
    return MultiLinearMap(arity=G.arity, dim=G.dim, entries=G.entries)


def asymmetry_witness(p, tol: float = 1e-12):
    """First term breaking conjugation symmetry, or None if symmetric.

    Works for both ExpPolySum (exponent -> conjugate exponent) and
    LogPowerSum (componentwise conjugate exponent vector).  The witness is
    the offending term's exponent key.
    """
    if not isinstance(p, (ExpPolySum, LogPowerSum)):
        raise TypeError(f"unsupported operand type {type(p).__name__}")
    scale = max(p.sup_norm(), 1.0)
    if isinstance(p, ExpPolySum):
        for nu, c in p.items():
            key = snap_scalar(nu.conjugate())
            partner = p.terms.get(key)
            if partner is None or partner.shape != c.shape:
                return nu
            if float(abs(partner - c.conjugate()).max()) > tol * scale:
                return nu
        return None
    if isinstance(p, LogPowerSum):
        for alpha, xi in p.items():
            key = tuple(snap_scalar(a.conjugate()) for a in alpha)
            partner = p.terms.get(key)
            if partner is None:
                return alpha
            if float(abs(partner - xi.conjugate()).max()) > tol * scale:
                return alpha
    return None


def check_conjugation_symmetry(p, tol: float = 1e-12) -> bool:
    """True when the term map is closed under conjugation (within tol)."""
    return asymmetry_witness(p, tol) is None


# ---------------------------------------------------------------------------
# real exponential-trig polynomials


@dataclass(frozen=True)
class TrigPolySum:
    """Real sums of t^m cos(w t) Z and t^m sin(w t) Z (w >= 0, sin needs w > 0)."""

    dim: int
    terms: dict[tuple[int, float, str], np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(
        cls, dim: int, raw: Iterable[tuple[int, float, str, np.ndarray]]
    ) -> "TrigPolySum":
        acc: dict[tuple[int, float, str], np.ndarray] = {}
        for power, omega, phase, vec in raw:
            if phase not in (COS, SIN):
                raise ValueError(f"phase must be cos or sin, got {phase!r}")
            if power < 0:
                raise ValueError("polynomial powers must be >= 0")
            v = np.asarray(vec, dtype=float).reshape(-1)
            if v.shape[0] != dim:
                raise ValueError("coefficient length mismatch")
            w = snap_float(omega)
            if w < 0.0:
                w = -w
                if phase == SIN:
                    v = -v
            if w == 0.0 and phase == SIN:
                continue
            key = (int(power), w, phase)
            acc[key] = acc.get(key, np.zeros(dim)) + v
        norms = {k: float(np.linalg.norm(v)) for k, v in acc.items()}
        top = max(norms.values(), default=0.0)
        out = {
            k: acc[k]
            for k in sorted(acc)
            if norms[k] > 0.0 and norms[k] >= TRIM_REL * top
        }
        return cls(dim=dim, terms=out)

    def items(self):
        return [(k, self.terms[k]) for k in sorted(self.terms)]

    def is_zero(self) -> bool:
        return not self.terms

    def eval(self, t: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for (power, omega, phase), vec in self.terms.items():
            osc = math.cos(omega * t) if phase == COS else math.sin(omega * t)
            out = out + (t**power) * osc * vec
        return out

    def to_records(self) -> list[dict]:
        return [
            {"power": p, "omega": w, "phase": ph, "vector": list(map(float, v))}
            for (p, w, ph), v in self.items()
        ]

    @classmethod
    def from_records(cls, dim: int, recs: Sequence[dict]) -> "TrigPolySum":
        return cls.build(
            dim,
            [(r["power"], r["omega"], r["phase"], np.asarray(r["vector"])) for r in recs],
        )


def to_trig_poly(s: ExpPolySum, tol: float = 1e-12) -> TrigPolySum:
    """Rewrite a conjugation-symmetric sum with imaginary exponents over the
    real trig basis.  Exponent real parts must vanish (factor decay out
    first with shift_exponents)."""
    scale = max(s.sup_norm(), 1.0)
    for nu in s.terms:
        if abs(nu.real) > 1e-9:
            raise ValueError(f"exponent {nu} has a nonzero real part")
    if not check_conjugation_symmetry(s, tol):
        raise ValueError("sum is not conjugation-symmetric; no real form exists")
    raw: list[tuple[int, float, str, np.ndarray]] = []
    for nu, c in s.items():
        omega = nu.imag
        if omega < 0.0:
            continue  # covered by the conjugate partner
        dup = 1.0 if omega == 0.0 else 2.0
        for power in range(c.shape[0]):
            x = c[power].real
            y = c[power].imag
            raw.append((power, omega, COS, dup * x))
            if omega > 0.0:
                raw.append((power, omega, SIN, -dup * y))
            elif float(abs(y).max()) > tol * scale:
                raise ValueError("zero-frequency term has an imaginary coefficient")
    return TrigPolySum.build(s.dim, raw)


# ---------------------------------------------------------------------------
# real ladder-power sums with trig factors


def _snap_alpha_real(alpha: Sequence[float]) -> tuple[float, ...]:
    return tuple(snap_float(a) for a in alpha)


def _canon_factors(factors, vec):
    """Normalize factor frequencies to be positive; sin soaks up the sign."""
    out = []
    for j, omega, phase in factors:
        if phase not in (COS, SIN):
            raise ValueError(f"phase must be cos or sin, got {phase!r}")
        if j < 0:
            raise ValueError("trig factor index must be >= 0")
        w = snap_float(omega)
        if w < 0.0:
            w = -w
            if phase == SIN:
                vec = -vec
        if w == 0.0:
            if phase == SIN:
                return None, None  # sin(0) kills the term
            continue  # cos(0) is 1
        out.append((int(j), w, phase))
    out.sort()
    seen = [j for j, _, _ in out]
    if len(seen) != len(set(seen)):
        raise ValueError("at most one trig factor per ladder component")
    return tuple(out), vec


@dataclass(frozen=True)
class TrigLadderSum:
    """Real sums of (ladder powers) * (product of cos/sin of ladder components).

    Term key: (real exponent vector over components -1..depth, factor tuple
    of (component index j >= 0, frequency w > 0, cos|sin)).
    """

    dim: int
    depth: int
    terms: dict[tuple, np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(cls, dim: int, depth: int, raw) -> "TrigLadderSum":
        if depth < -1:
            raise ValueError("depth must be >= -1")
        acc: dict[tuple, np.ndarray] = {}
        for alpha, factors, vec in raw:
            a = _snap_alpha_real(alpha)
            if len(a) != depth + 2:
                raise ValueError(
                    f"exponent vector length {len(a)} != depth+2 = {depth + 2}"
                )
            v = np.asarray(vec, dtype=float).reshape(-1)
            if v.shape[0] != dim:
                raise ValueError("coefficient length mismatch")
            fac, v = _canon_factors(factors, v)
            if fac is None:
                continue
            if any(j > depth for j, _, _ in fac):
                raise ValueError("trig factor index exceeds depth")
            key = (a, fac)
            acc[key] = acc.get(key, np.zeros(dim)) + v
        norms = {k: float(np.linalg.norm(v)) for k, v in acc.items()}
        top = max(norms.values(), default=0.0)
        out = {
            k: acc[k]
            for k in sorted(acc)
            if norms[k] > 0.0 and norms[k] >= TRIM_REL * top
        }
        return cls(dim=dim, depth=depth, terms=out)

    def items(self):
        return [(k, self.terms[k]) for k in sorted(self.terms)]

    def is_zero(self) -> bool:
        return not self.terms

    def sup_norm(self) -> float:
        return max((float(np.linalg.norm(v)) for v in self.terms.values()), default=0.0)

    def eval(self, t: float) -> np.ndarray:
        t = float(t)
        gate = exp_zero(self.depth + 1)
        if not t > gate:
            raise ValueError(
                f"t = {t!r} below the depth-{self.depth} evaluation threshold {gate!r}"
            )
        point = ladder_eval(self.depth, t) if self.depth >= 0 else None
        out = np.zeros(self.dim)
        for (alpha, factors), vec in self.terms.items():
            w = alpha[0] * t
            for j in range(0, self.depth + 1):
                w += alpha[j + 1] * point.log_component(j)
            val = math.exp(w)
            for j, omega, phase in factors:
                x = omega * point.component(j)
                val *= math.cos(x) if phase == COS else math.sin(x)
            out = out + val * vec
        return out

    def to_records(self) -> list[dict]:
        recs = []
        for (alpha, factors), vec in self.items():
            recs.append(
                {
                    "alpha": list(map(float, alpha)),
                    "factors": [
                        {"index": j, "omega": w, "phase": ph} for j, w, ph in factors
                    ],
                    "vector": list(map(float, vec)),
                }
            )
        return recs

    @classmethod
    def from_records(cls, dim: int, depth: int, recs: Sequence[dict]) -> "TrigLadderSum":
        raw = []
        for r in recs:
            factors = [(f["index"], f["omega"], f["phase"]) for f in r["factors"]]
            raw.append((r["alpha"], factors, np.asarray(r["vector"], dtype=float)))
        return cls.build(dim, depth, raw)


def to_trig_ladder(p: LogPowerSum, tol: float = 1e-12) -> TrigLadderSum:
    """Real form of a conjugation-symmetric ladder-power sum.

    Output depth is p.depth + 1 when some term oscillates in the deepest
    component (its imaginary exponent becomes a trig factor one level
    down), else exactly p.depth.
    """
    if not check_conjugation_symmetry(p, tol):
        raise ValueError("sum is not conjugation-symmetric; no real form exists")
    deepest = p.depth + 1  # tuple index of the deepest component
    needs_lift = any(a[deepest].imag != 0.0 for a in p.terms)
    out_depth = p.depth + 1 if needs_lift else p.depth
    raw = []
    scale = max(p.sup_norm(), 1.0)
    for alpha, xi in p.items():
        # canonical representative: skip terms whose conjugate partner sorts
        # first, so each pair is emitted once
        key_sort = tuple((a.real, a.imag) for a in alpha)
        conj_sort = tuple((a.real, -a.imag) for a in alpha)
        if conj_sort < key_sort:
            continue
        self_conjugate = conj_sort == key_sort
        a_real = [a.real for a in alpha] + [0.0] * (out_depth - p.depth)
        osc = [(i, alpha[i].imag) for i in range(len(alpha)) if alpha[i].imag != 0.0]
        if self_conjugate:
            if float(abs(xi.imag).max()) > tol * scale:
                raise ValueError("self-conjugate term has an imaginary coefficient")
            raw.append((a_real, (), xi.real.copy()))
            continue
        x, y = xi.real, xi.imag
        for picks in itertools.product((COS, SIN), repeat=len(osc)):
            sins = sum(1 for ph in picks if ph == SIN)
            quarter = sins % 4
            if quarter == 0:
                vec = 2.0 * x
            elif quarter == 1:
                vec = -2.0 * y
            elif quarter == 2:
                vec = -2.0 * x
            else:
                vec = 2.0 * y
            factors = []
            for (i, b), ph in zip(osc, picks):
                # imaginary exponent on tuple index i (component i-1) becomes
                # a trig factor on component i
                factors.append((i, b, ph))
            raw.append((a_real, factors, vec))
    return TrigLadderSum.build(p.dim, out_depth, raw)


def from_trig_ladder(q: TrigLadderSum) -> LogPowerSum:
    """Rewrite trig factors as conjugate pairs of imaginary ladder powers.

    cos(w L_j) = (z_{j-1}^{iw} + z_{j-1}^{-iw})/2 and likewise for sin; the
    result is conjugation-symmetric at the same depth.
    """
    raw: list[tuple[list[complex], np.ndarray]] = []
    for (alpha, factors), vec in q.terms.items():
        base = [complex(a) for a in alpha]
        choices = []
        for j, omega, phase in factors:
            if phase == COS:
                choices.append(((1j * omega, 0.5 + 0j), (-1j * omega, 0.5 + 0j)))
            else:
                choices.append(((1j * omega, -0.5j), (-1j * omega, 0.5j)))
        for combo in itertools.product(*choices):
            a = list(base)
            coeff = 1.0 + 0j
            for (j, _, _), (shift, weight) in zip(factors, combo):
                a[j] += shift  # tuple index j = component j-1
                coeff *= weight
            raw.append((a, coeff * vec.astype(complex)))
    return LogPowerSum.build(q.dim, q.depth, raw)


def imag_residue(p, ts: Sequence[float]) -> float:
    """Largest |imaginary part| of p over a sample grid (realness check)."""
    worst = 0.0
    for t in ts:
        worst = max(worst, float(abs(p.eval(t).imag).max()))
    return worst
