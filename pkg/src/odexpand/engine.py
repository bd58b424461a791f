"""Expansion engine.

Given y' = -A y + G(y) + f(t) with a dissipative A and forcing built from
finitely many decay rates, the engine realizes the semigroup of reachable
rates (the exponent ladder), matches each rate against products of earlier
terms, and solves one linear problem per rate:

    exponential mode: terms are ExpPolySums, solved through the resolvent;
    power mode:       terms are LogPowerSums on the plain power scale, with
                      a descent correction fed back one rate up;
    log mode:         terms are LogPowerSums on an iterated-log scale, where
                      the descent terms decay faster than every ladder rate
                      and drop out entirely.

Construction is strictly order by order: extending a truncation never
revisits earlier terms.
"""

from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .expsum import ExpPolySum, mul_apply_exp, snap_scalar, trim_small_exp
from .logpower import (
    LogPowerSum,
    ShiftedInverseCache,
    descent_op,
    mul_apply_logpower,
    shifted_inverse,
    trim_small_logpower,
    weight_op,
)
from .multilinear import MultiLinearMap
from .resolvent import (
    RESIDUAL_REL,
    ZERO_FREE_CONSTANTS,
    homogeneous_modes,
    resolvent_solve_exp,
)

__all__ = [
    "ExponentLadder",
    "build_ladder",
    "ProblemSpec",
    "Expansion",
    "ExpansionOrder",
    "ValidationError",
    "expand",
    "extend",
    "symbolic_defect",
    "with_kernel_fit",
    "eval_partial_sum",
]

# Two realized rates are identified when |a - b| < MATCH_REL * max(1, |a|).
MATCH_REL = 1e-10

MODES = ("exponential", "power", "log")


class ValidationError(ValueError):
    """Raised when a problem description violates a structural assumption."""


def _match_tol(mu: float) -> float:
    return MATCH_REL * max(1.0, abs(mu))


class ExponentLadder:
    """Lazily enumerated closure of positive base rates.

    With ``additive`` the closure contains all finite sums of base elements;
    ``unit_increment`` additionally closes under +1.  Values are produced in
    increasing order and deduplicated under a relative tolerance.
    """

    def __init__(self, base, additive: bool = True, unit_increment: bool = False):
        vals = sorted(float(b) for b in base)
        if not vals:
            raise ValidationError("ladder base must be nonempty")
        if vals[0] <= 0.0:
            raise ValidationError("ladder base rates must be positive")
        dedup: list[float] = []
        for v in vals:
            if not dedup or v - dedup[-1] >= _match_tol(v):
                dedup.append(v)
        self.base = tuple(dedup)
        self.additive = bool(additive)
        self.unit_increment = bool(unit_increment)
        self._realized: list[float] = []
        self._heap: list[float] = list(self.base)
        heapq.heapify(self._heap)

    def _neighbors(self, x: float):
        if self.additive:
            for b in self.base:
                yield x + b
        if self.unit_increment:
            yield x + 1.0

    def _grow(self) -> bool:
        """Realize the next rate; False when the heap is exhausted."""
        while self._heap:
            x = heapq.heappop(self._heap)
            if self._realized and x - self._realized[-1] < _match_tol(x):
                continue
            self._realized.append(x)
            for y in self._neighbors(x):
                heapq.heappush(self._heap, y)
            return True
        return False

    def take(self, count: int) -> tuple[float, ...]:
        """The first ``count`` realized rates in increasing order."""
        if count < 0:
            raise ValueError("count must be >= 0")
        while len(self._realized) < count:
            if not self._grow():
                raise RuntimeError("ladder exhausted below requested count")
        return tuple(self._realized[:count])

    def realize_upto(self, cutoff: float) -> tuple[float, ...]:
        """All realized rates <= cutoff (inclusive up to the match tolerance)."""
        bound = cutoff + _match_tol(cutoff)
        while True:
            if self._heap and self._heap[0] <= bound:
                self._grow()
            elif not self._heap and (not self._realized or self._realized[-1] <= bound):
                if not self._grow():
                    break
            else:
                break
        return tuple(v for v in self._realized if v <= bound)

    def index_of(self, mu: float) -> int | None:
        """Position of mu among realized rates, or None."""
        self.realize_upto(mu)
        for i, v in enumerate(self._realized):
            if abs(v - mu) < _match_tol(mu):
                return i
        return None

    def decompose(self, mu: float, max_arity: int) -> tuple[tuple[float, ...], ...]:
        """Multisets (non-decreasing tuples) of realized rates summing to mu.

        Sizes range over [2, max_arity]; parts are realized rates < mu.
        """
        return _decompose_values(self.realize_upto(mu), mu, max_arity)


def build_ladder(
    base,
    additive: bool = True,
    unit_increment: bool = False,
    cutoff: float | None = None,
) -> ExponentLadder:
    """Construct a rate ladder; with a cutoff, realize it eagerly up front."""
    ladder = ExponentLadder(base, additive=additive, unit_increment=unit_increment)
    if cutoff is not None:
        ladder.realize_upto(cutoff)
    return ladder


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """Problem description: y' = -matrix*y + sum_m maps_m(y,..,y) + forcing(t).

    forcing maps decay rates to symbolic terms: ExpPolySums whose exponents
    all have real part -mu (exponential mode), or LogPowerSums in the
    (scale_index, -mu) class (power mode: scale_index 0; log mode: >= 1).
    """

    matrix: np.ndarray
    maps: tuple[MultiLinearMap, ...]
    forcing: tuple[tuple[float, object], ...]
    mode: str
    scale_index: int = 0
    order: int = 4
    ladder_base: tuple[float, ...] | None = None
    resonance_policy: str = ZERO_FREE_CONSTANTS

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(
            self, "forcing", tuple((float(mu), term) for mu, term in self.forcing)
        )
        if self.ladder_base is not None:
            object.__setattr__(
                self, "ladder_base", tuple(float(b) for b in self.ladder_base)
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    def slowest_rate(self) -> float:
        return float(min(self.eigenvalues().real))

    def validate(self) -> None:
        A = self.matrix
        n = A.shape[0]
        if A.ndim != 2 or A.shape != (n, n):
            raise ValidationError("matrix must be square")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        eigs = self.eigenvalues()
        if min(eigs.real) <= 1e-10:
            raise ValidationError(
                "dissipativity violated: every eigenvalue of the linear part "
                f"needs positive real part, got real parts {sorted(eigs.real)}"
            )
        for G in self.maps:
            if G.dim != n:
                raise ValidationError("nonlinearity dimension mismatch")
            if G.arity < 2:
                raise ValidationError("nonlinearity terms must have arity >= 2")
        if self.order < 1:
            raise ValidationError("truncation order must be >= 1")
        if self.mode == "power" and self.scale_index != 0:
            raise ValidationError("power mode fixes scale_index = 0")
        if self.mode == "log" and self.scale_index < 1:
            raise ValidationError("log mode needs scale_index >= 1")
        mus = [mu for mu, _ in self.forcing]
        if not mus:
            raise ValidationError("at least one forcing term is required")
        if min(mus) <= 0:
            raise ValidationError("forcing decay rates must be positive")
        for i, a in enumerate(mus):
            for b in mus[i + 1 :]:
                if abs(a - b) < _match_tol(a):
                    raise ValidationError(f"duplicate forcing rate {a}")
        for mu, term in self.forcing:
            if self.mode == "exponential":
                if not isinstance(term, ExpPolySum):
                    raise ValidationError("exponential mode takes ExpPolySum forcing")
                if term.dim != n:
                    raise ValidationError("forcing dimension mismatch")
                if not term.is_zero() and not term.in_class(-mu):
                    raise ValidationError(
                        f"forcing at rate {mu} has exponents off the -{mu} line"
                    )
            else:
                if not isinstance(term, LogPowerSum):
                    raise ValidationError("power/log modes take LogPowerSum forcing")
                if term.dim != n:
                    raise ValidationError("forcing dimension mismatch")
                if not term.is_zero() and not term.in_class(self.scale_index, -mu):
                    raise ValidationError(
                        f"forcing at rate {mu} is outside the "
                        f"({self.scale_index}, -{mu}) class"
                    )
        if self.mode == "exponential":
            base = self._ladder_base_or_default()
            for lam in eigs:
                re = float(lam.real)
                if not any(abs(re - b) <= 1e-9 * max(1.0, re) for b in base):
                    raise ValidationError(
                        "exponential ladder base must contain every eigenvalue "
                        f"real part; {re} is missing (ladder closure assumption)"
                    )
        if self.resonance_policy != ZERO_FREE_CONSTANTS:
            raise ValidationError(
                f"unsupported resonance policy {self.resonance_policy!r}"
            )

    def _ladder_base_or_default(self) -> tuple[float, ...]:
        if self.ladder_base is not None:
            return self.ladder_base
        mus = [mu for mu, _ in self.forcing]
        if self.mode == "exponential":
            res = {float(lam.real) for lam in self.eigenvalues()}
            merged = sorted(res | set(mus))
        else:
            merged = sorted(set(mus))
        dedup: list[float] = []
        for v in merged:
            if not dedup or v - dedup[-1] >= _match_tol(v):
                dedup.append(v)
        return tuple(dedup)

    def make_ladder(self) -> ExponentLadder:
        return ExponentLadder(
            self._ladder_base_or_default(),
            additive=True,
            unit_increment=(self.mode == "power"),
        )


@dataclass(frozen=True)
class ExpansionOrder:
    """One constructed term: the rate, the symbolic term, and (exponential
    mode only) the resonant kernel modes whose constants are data-dependent."""

    mu: float
    term: object
    kernel: tuple[ExpPolySum, ...] = ()
    kernel_coeffs: np.ndarray | None = None


@dataclass(frozen=True)
class Expansion:
    mode: str
    orders: tuple[ExpansionOrder, ...]
    spec: ProblemSpec = field(repr=False)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(o.mu for o in self.orders)

    def order_count(self) -> int:
        return len(self.orders)

    def term(self, k: int):
        """1-based access to the k-th term."""
        return self.orders[k - 1].term


def _forcing_at(spec: ProblemSpec, mu: float):
    for fmu, term in spec.forcing:
        if abs(fmu - mu) < _match_tol(mu):
            return term
    return None


def _zero_term(spec: ProblemSpec, depth: int):
    if spec.mode == "exponential":
        return ExpPolySum.zero(spec.dim)
    return LogPowerSum.zero(spec.dim, depth)


def _ordered_tuples(parts: tuple[float, ...]):
    """Distinct orderings of a multiset, lexicographically."""
    return sorted(set(itertools.permutations(parts)))


def _interaction_sum(spec: ProblemSpec, mus, terms, k: int, mul_apply):
    """Sum of all nonlinear interactions that land on rate mus[k]."""
    mu_k = mus[k]
    arities = sorted({G.arity for G in spec.maps})
    contributions = []
    if arities:
        max_arity = max(arities)
        decomps = _decompose_values(mus[:k], mu_k, max_arity)
        for parts in decomps:
            m = len(parts)
            maps_m = [G for G in spec.maps if G.arity == m]
            if not maps_m:
                continue
            for ordered in _ordered_tuples(parts):
                args = [terms[_value_index(mus[:k], v)] for v in ordered]
                if any(a.is_zero() for a in args):
                    continue
                for G in maps_m:
                    contributions.append(mul_apply(G, args))
    return contributions


def _value_index(values, v: float) -> int:
    for i, x in enumerate(values):
        if abs(x - v) < _match_tol(v):
            return i
    raise RuntimeError(f"rate {v} not among realized prefix")


def _decompose_values(values, mu: float, max_arity: int):
    """Multisets from an explicit realized prefix (engine-internal)."""
    if max_arity < 2:
        return ()
    tol = _match_tol(mu)
    vals = [v for v in values if v <= mu + tol]
    out: list[tuple[float, ...]] = []

    def rec(start: int, remaining: float, parts: list[float]):
        if len(parts) >= 2 and abs(remaining) <= tol:
            out.append(tuple(parts))
            return
        if len(parts) == max_arity or remaining <= tol:
            return
        for i in range(start, len(vals)):
            v = vals[i]
            if v > remaining + tol:
                break
            parts.append(v)
            rec(i, remaining - v, parts)
            parts.pop()

    rec(0, mu, [])
    return tuple(out)


def _chi_source(mus, k: int) -> int | None:
    """Index lambda < k with mu_lambda + 1 = mu_k, if any (power mode)."""
    hits = [
        i for i in range(k) if abs(mus[i] + 1.0 - mus[k]) < _match_tol(mus[k])
    ]
    if len(hits) > 1:
        raise RuntimeError("ladder monotonicity violated: ambiguous descent source")
    return hits[0] if hits else None


def _sum_logpower(parts: list[LogPowerSum], dim: int, depth: int) -> LogPowerSum:
    depth = max([depth] + [p.depth for p in parts])
    total = LogPowerSum.zero(dim, depth)
    for p in parts:
        total = total + p.embed(depth)
    return total


def _arity_cap_warning(spec: ProblemSpec, mus) -> None:
    """Warn once when the supplied nonlinearity degrees cap the interactions.

    The safe per-order arity bound is the smallest integer >= 2 mu_k / mu_1;
    if the highest supplied degree falls short of it anywhere, degrees
    beyond the supplied list are being assumed absent.
    """
    if not spec.maps:
        return
    max_arity = max(G.arity for G in spec.maps)
    mu1 = mus[0]
    binding = [mu for mu in mus if math.ceil(2.0 * mu / mu1 - 1e-12) > max_arity]
    if binding:
        need = math.ceil(2.0 * binding[0] / mu1 - 1e-12)
        warnings.warn(
            f"the remainder analysis at rate {binding[0]:g} assumes "
            f"nonlinearity degrees up to {need}; degrees above {max_arity} "
            "are taken to be absent from the system",
            RuntimeWarning,
            stacklevel=3,
        )


def _expand_core(spec: ProblemSpec, upto: int, reuse: tuple[ExpansionOrder, ...]):
    ladder = spec.make_ladder()
    mus = ladder.take(upto)
    _arity_cap_warning(spec, mus)
    for i, o in enumerate(reuse):
        if abs(o.mu - mus[i]) >= _match_tol(mus[i]):
            raise RuntimeError("reused orders disagree with the ladder prefix")
    orders = list(reuse)
    n = spec.dim
    A = spec.matrix

    if spec.mode == "exponential":
        terms = [o.term for o in orders]
        for k in range(len(orders), upto):
            mu_k = mus[k]
            pieces = _interaction_sum(spec, mus, terms, k, mul_apply_exp)
            f_k = _forcing_at(spec, mu_k)
            rhs = ExpPolySum.zero(n)
            for c in pieces:
                rhs = rhs + c
            if f_k is not None:
                rhs = rhs + f_k
            if rhs.is_zero():
                y_k, modes = ExpPolySum.zero(n), []
            else:
                y_k, modes = resolvent_solve_exp(A, rhs, spec.resonance_policy)
            modes = _augment_modes(spec, mu_k, modes)
            if not y_k.is_zero() and not y_k.in_class(-mu_k):
                raise RuntimeError(f"constructed term escaped the -{mu_k} class")
            orders.append(
                ExpansionOrder(mu=mu_k, term=y_k, kernel=tuple(modes))
            )
            terms.append(y_k)
        return Expansion(mode=spec.mode, orders=tuple(orders), spec=spec)

    cache = ShiftedInverseCache(A)
    terms = [o.term for o in orders]
    cur_depth = max([0] + [t.depth for t in terms])
    for k in range(len(orders), upto):
        mu_k = mus[k]
        pieces = _interaction_sum(spec, mus, terms, k, mul_apply_logpower)
        p_k = _forcing_at(spec, mu_k)
        if p_k is not None:
            cur_depth = max(cur_depth, p_k.depth)
            pieces = pieces + [p_k]
        if spec.mode == "power":
            lam = _chi_source(mus, k)
            if lam is not None and not terms[lam].is_zero():
                pieces = pieces + [descent_op(terms[lam]).scale(-1.0)]
        rhs = _sum_logpower(pieces, n, cur_depth)
        q_k = shifted_inverse(A, rhs, cache) if not rhs.is_zero() else rhs
        if not q_k.is_zero() and not q_k.in_class(spec.scale_index, -mu_k):
            raise RuntimeError(
                f"constructed term escaped the ({spec.scale_index}, -{mu_k}) class"
            )
        orders.append(ExpansionOrder(mu=mu_k, term=q_k))
        terms.append(q_k)
        cur_depth = max(cur_depth, q_k.depth)
    return Expansion(mode=spec.mode, orders=tuple(orders), spec=spec)


def _augment_modes(spec: ProblemSpec, mu_k: float, modes: list[ExpPolySum]):
    """Add unforced homogeneous modes whose decay rate lands on this order."""
    seen = {snap_scalar(m.exponents()[0]) for m in modes if not m.is_zero()}
    eigs = spec.eigenvalues()
    reps: list[complex] = []
    for lam in eigs:
        if abs(lam.real - mu_k) > 1e-9 * max(1.0, mu_k):
            continue
        if any(abs(lam - r) < 1e-8 for r in reps):
            continue
        reps.append(complex(lam))
    out = list(modes)
    for lam in sorted(reps, key=lambda z: (z.real, z.imag)):
        nu = snap_scalar(-lam)
        if nu in seen:
            continue
        out.extend(homogeneous_modes(spec.matrix, nu))
    return out


def expand(spec: ProblemSpec, order: int | None = None) -> Expansion:
    """Construct the expansion up to the given truncation (spec.order if None)."""
    spec.validate()
    upto = spec.order if order is None else int(order)
    if upto < 1:
        raise ValidationError("truncation order must be >= 1")
    return _expand_core(spec, upto, ())


def extend(expansion: Expansion, order: int) -> Expansion:
    """Extend a truncation; existing orders are reused untouched."""
    if order <= expansion.order_count():
        return expansion
    return _expand_core(expansion.spec, order, expansion.orders)


def symbolic_defect(expansion: Expansion, k: int):
    """Defect of the k-th constructed term (1-based).

    Exponential mode: y_k' + A y_k - rhs_k; power/log modes:
    (A + weight_op(-1)) q_k - rhs_k.  Zero (canonically) by construction;
    rounding dust below the solver's residual guarantee is trimmed against
    the scale of the data so the zero element really is zero.
    """
    spec = expansion.spec
    mus = list(expansion.rates)
    terms = [o.term for o in expansion.orders]
    i = k - 1
    if not 0 <= i < len(terms):
        raise IndexError("order out of range")
    n = spec.dim
    if spec.mode == "exponential":
        pieces = _interaction_sum(spec, mus, terms, i, mul_apply_exp)
        rhs = ExpPolySum.zero(n)
        for c in pieces:
            rhs = rhs + c
        f_k = _forcing_at(spec, mus[i])
        if f_k is not None:
            rhs = rhs + f_k
        y = terms[i]
        raw = y.derivative() + y.apply_matrix(spec.matrix) - rhs
        scale = max(y.sup_norm(), rhs.sup_norm())
        return raw if scale == 0.0 else trim_small_exp(raw, scale, RESIDUAL_REL)
    pieces = _interaction_sum(spec, mus, terms, i, mul_apply_logpower)
    p_k = _forcing_at(spec, mus[i])
    if p_k is not None:
        pieces = pieces + [p_k]
    if spec.mode == "power":
        lam = _chi_source(mus, i)
        if lam is not None and not terms[lam].is_zero():
            pieces = pieces + [descent_op(terms[lam]).scale(-1.0)]
    q = terms[i]
    rhs = _sum_logpower(pieces, n, q.depth)
    lhs = q.apply_matrix(spec.matrix) + weight_op(-1, q)
    raw = lhs.embed(rhs.depth) - rhs
    scale = max(q.sup_norm(), rhs.sup_norm())
    return raw if scale == 0.0 else trim_small_logpower(raw, scale, RESIDUAL_REL)


def with_kernel_fit(expansion: Expansion, k: int, coeffs) -> Expansion:
    """Fold fitted kernel constants into the k-th term (1-based)."""
    i = k - 1
    o = expansion.orders[i]
    coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
    if len(coeffs) != len(o.kernel):
        raise ValueError("coefficient count != kernel size")
    term = o.term
    for c, mode in zip(coeffs, o.kernel):
        term = term + mode.scale(c)
    new_order = replace(o, term=term, kernel_coeffs=coeffs)
    orders = expansion.orders[:i] + (new_order,) + expansion.orders[i + 1 :]
    return replace(expansion, orders=orders)


def eval_partial_sum(expansion: Expansion, upto: int, t: float) -> np.ndarray:
    """Value of the first ``upto`` terms at time t."""
    n = expansion.spec.dim
    out = np.zeros(n, dtype=complex)
    for o in expansion.orders[:upto]:
        if not o.term.is_zero():
            out = out + o.term.eval(t)
    return out
