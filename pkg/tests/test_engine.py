"""Exponent ladders, problem validation, and the recursive term construction."""

import itertools
import math

import numpy as np
import pytest

from odexpand import (
    ExpPolySum,
    LogPowerSum,
    MultiLinearMap,
    ProblemSpec,
    ValidationError,
    build_ladder,
    eval_partial_sum,
    expand,
    extend,
    symbolic_defect,
    with_kernel_fit,
)
from odexpand.expsum import coeff_distance_exp
from odexpand.logpower import coeff_distance_logpower

SQ = MultiLinearMap.scalar_power(2)


def exp_forcing(rate: float, rows) -> tuple[float, ExpPolySum]:
    return (rate, ExpPolySum.build(1, [(-rate, rows)]))


def riccati_spec(order: int = 2) -> ProblemSpec:
    # y' = -y + y^2 + 1/t
    f = LogPowerSum.build(1, 0, [((0.0, -1.0), [1.0])])
    return ProblemSpec(
        matrix=np.array([[1.0]]), maps=(SQ,), forcing=((1.0, f),),
        mode="power", order=order,
    )


# ---------------------------------------------------------------------------
# ladders


def test_unit_base_realizes_integers():
    lad = build_ladder((1.0,))
    assert lad.take(6) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)


def test_base_order_does_not_matter():
    lad = build_ladder((2.0, 1.0))
    assert lad.take(1) == (1.0,)
    assert lad.take(4) == (1.0, 2.0, 3.0, 4.0)


def brute_force_closure(base, cutoff, unit=False):
    vals = set()
    frontier = {0.0}
    # all sums of base elements (plus optional +1 steps) up to the cutoff
    for _ in range(40):
        new = set()
        for v in frontier:
            for b in set(base) | ({1.0} if unit and v > 0 else set()):
                w = v + b
                if w <= cutoff + 1e-9 and not any(abs(w - u) < 1e-9 for u in vals | new):
                    new.add(w)
        if not new:
            break
        vals |= new
        frontier = new
    return tuple(sorted(vals))


def test_two_generator_ladder_matches_bruteforce():
    base = (1.0, math.sqrt(2.0))
    lad = build_ladder(base, cutoff=4.0)
    got = lad.realize_upto(4.0)
    expected = brute_force_closure(base, 4.0)
    assert len(got) == len(expected)
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_unit_increment_closure():
    lad = build_ladder((0.5,), unit_increment=True)
    got = lad.realize_upto(3.0)
    expected = brute_force_closure((0.5,), 3.0, unit=True)
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    assert 1.5 in got


def test_realized_rates_strictly_increase():
    lad = build_ladder((0.7, 1.3))
    vals = lad.take(25)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_ladder_base_validation():
    with pytest.raises(ValidationError, match="ladder base must be nonempty"):
        build_ladder(())
    with pytest.raises(ValidationError, match="ladder base rates must be positive"):
        build_ladder((1.0, -0.5))


def test_index_of_realized_rates():
    lad = build_ladder((1.0,))
    lad.take(5)
    assert lad.index_of(3.0) == 2
    assert lad.index_of(2.5) is None


def test_decompose_worked_cases():
    lad = build_ladder((1.0,))
    assert lad.decompose(2.0, 4) == ((1.0, 1.0),)
    assert lad.decompose(4.0, 4) == (
        (1.0, 1.0, 1.0, 1.0),
        (1.0, 1.0, 2.0),
        (1.0, 3.0),
        (2.0, 2.0),
    )
    assert lad.decompose(4.0, 2) == ((1.0, 3.0), (2.0, 2.0))
    assert lad.decompose(1.0, 4) == ()


def test_decompose_matches_bruteforce_enumeration():
    lad = build_ladder((0.5, 0.8))
    mu = 2.1
    got = set(lad.decompose(mu, 3))
    smaller = [v for v in lad.realize_upto(mu) if v < mu - 1e-9]
    expected = set()
    for m in (2, 3):
        for combo in itertools.combinations_with_replacement(smaller, m):
            if abs(sum(combo) - mu) < 1e-9:
                expected.add(combo)
    assert got == expected


# ---------------------------------------------------------------------------
# problem validation


def test_validation_messages():
    f_ok = exp_forcing(1.0, [[1.0]])
    base = dict(matrix=np.array([[2.0]]), maps=(), forcing=(f_ok,), mode="exponential")

    with pytest.raises(ValidationError, match="matrix must be square"):
        ProblemSpec(**{**base, "matrix": np.array([[1.0, 0.0]])}).validate()
    with pytest.raises(ValidationError, match="mode must be one of"):
        ProblemSpec(**{**base, "mode": "weird"}).validate()
    with pytest.raises(ValidationError, match="dissipativity violated"):
        ProblemSpec(**{**base, "matrix": np.array([[-1.0]])}).validate()
    with pytest.raises(ValidationError, match="arity >= 2"):
        ProblemSpec(**{**base, "maps": (MultiLinearMap(1, 1, ((0, (0,), 1.0),)),)}).validate()
    with pytest.raises(ValidationError, match="nonlinearity dimension mismatch"):
        ProblemSpec(**{**base, "maps": (MultiLinearMap(2, 2, ((0, (0, 0), 1.0),)),)}).validate()
    with pytest.raises(ValidationError, match="truncation order must be >= 1"):
        ProblemSpec(**base, order=0).validate()
    with pytest.raises(ValidationError, match="at least one forcing term"):
        ProblemSpec(**{**base, "forcing": ()}).validate()
    with pytest.raises(ValidationError, match="forcing decay rates must be positive"):
        ProblemSpec(**{**base, "forcing": (exp_forcing(-1.0, [[1.0]]),)}).validate()
    with pytest.raises(ValidationError, match="duplicate forcing rate"):
        ProblemSpec(**{**base, "forcing": (f_ok, exp_forcing(1.0 + 1e-14, [[2.0]]))}).validate()
    with pytest.raises(ValidationError, match="unsupported resonance policy"):
        ProblemSpec(**base, resonance_policy="free").validate()


def test_validation_forcing_shape_and_class():
    lp = LogPowerSum.build(1, 0, [((0.0, -1.0), [1.0])])
    with pytest.raises(ValidationError, match="exponential mode takes ExpPolySum forcing"):
        ProblemSpec(np.array([[2.0]]), (), ((1.0, lp),), "exponential").validate()
    with pytest.raises(ValidationError, match="power/log modes take LogPowerSum forcing"):
        ProblemSpec(np.array([[2.0]]), (), (exp_forcing(1.0, [[1.0]]),), "power").validate()
    with pytest.raises(ValidationError, match="off the -2.0 line"):
        bad = (2.0, ExpPolySum.build(1, [(-1.0, [[1.0]])]))
        ProblemSpec(np.array([[3.0]]), (), (bad,), "exponential").validate()
    with pytest.raises(ValidationError, match=r"outside the \(0, -1\.0\) class"):
        bad = (1.0, LogPowerSum.build(1, 0, [((0.5, -1.0), [1.0])]))
        ProblemSpec(np.array([[2.0]]), (), (bad,), "power").validate()
    with pytest.raises(ValidationError, match="forcing dimension mismatch"):
        bad = (1.0, ExpPolySum.build(2, [(-1.0, [[1.0, 0.0]])]))
        ProblemSpec(np.array([[2.0]]), (), (bad,), "exponential").validate()


def test_validation_scale_index_modes():
    lp1 = LogPowerSum.build(1, 1, [((0.0, 0.0, -1.0), [1.0])])
    with pytest.raises(ValidationError, match="power mode fixes scale_index = 0"):
        ProblemSpec(np.array([[1.0]]), (), ((1.0, lp1),), "power", scale_index=1).validate()
    with pytest.raises(ValidationError, match="log mode needs scale_index >= 1"):
        ProblemSpec(np.array([[1.0]]), (), ((1.0, lp1),), "log", scale_index=0).validate()


def test_validation_deeper_class_violation():
    # declared scale ln ln t but a raw ln t power sneaks in
    lp = LogPowerSum.build(1, 2, [((0.0, 0.0, -0.3, -1.0), [1.0])])
    with pytest.raises(ValidationError, match=r"outside the \(2, -1\.0\) class"):
        ProblemSpec(np.array([[1.0]]), (), ((1.0, lp),), "log", scale_index=2).validate()


def test_exponential_base_must_cover_spectrum():
    with pytest.raises(ValidationError, match="ladder closure assumption"):
        ProblemSpec(
            np.array([[2.0]]), (), (exp_forcing(1.0, [[1.0]]),), "exponential",
            ladder_base=(1.0,),
        ).validate()


# ---------------------------------------------------------------------------
# exponential mode expansion


def test_quadratic_resonant_cascade():
    spec = ProblemSpec(np.array([[2.0]]), (SQ,), (exp_forcing(1.0, [[1.0]]),),
                       "exponential", order=3, ladder_base=(1.0, 2.0))
    with pytest.warns(RuntimeWarning, match="degrees above 2 are taken to be absent"):
        exp_ = expand(spec)
    assert exp_.rates == (1.0, 2.0, 3.0)

    y1 = ExpPolySum.build(1, [(-1.0, [[1.0]])])
    assert coeff_distance_exp(exp_.term(1), y1) < 1e-14

    y2 = ExpPolySum.build(1, [(-2.0, [[0.0], [1.0]])])
    assert coeff_distance_exp(exp_.term(2), y2) < 1e-14
    kernel = exp_.orders[1].kernel
    assert len(kernel) == 1
    assert coeff_distance_exp(kernel[0], ExpPolySum.build(1, [(-2.0, [[1.0]])])) < 1e-14

    for k in (1, 2, 3):
        assert symbolic_defect(exp_, k).is_zero()
        assert exp_.term(k).in_class(-exp_.rates[k - 1])


def test_zero_forcing_gives_zero_terms():
    zero = (2.0, ExpPolySum.zero(1))
    spec = ProblemSpec(np.array([[2.0]]), (SQ,), (zero,), "exponential", order=3)
    with pytest.warns(RuntimeWarning):
        exp_ = expand(spec)
    assert all(exp_.term(k).is_zero() for k in range(1, exp_.order_count() + 1))


def test_forcing_below_leading_eigenrate():
    spec = ProblemSpec(np.array([[1.0]]), (), (exp_forcing(2.0, [[1.0]]),),
                       "exponential", order=2)
    exp_ = expand(spec)
    assert exp_.rates[:2] == (1.0, 2.0)
    assert exp_.term(1).is_zero()
    expected = ExpPolySum.build(1, [(-2.0, [[-1.0]])])
    assert coeff_distance_exp(exp_.term(2), expected) < 1e-14
    # the hidden eigenmode still owns free constants at its own rate
    assert len(exp_.orders[0].kernel) == 1


def test_defect_detects_tampered_terms():
    spec = ProblemSpec(np.array([[2.0]]), (SQ,), (exp_forcing(1.0, [[1.0]]),),
                       "exponential", order=2, ladder_base=(1.0, 2.0))
    with pytest.warns(RuntimeWarning):
        exp_ = expand(spec)
    tampered = exp_.orders[0].term + ExpPolySum.build(1, [(-1.0, [[1e-3]])])
    orders = (
        type(exp_.orders[0])(mu=1.0, term=tampered),
        exp_.orders[1],
    )
    bad = type(exp_)(mode=exp_.mode, orders=orders, spec=exp_.spec)
    # the extra delta*exp(-t) feeds (A - 1) delta = delta into the defect
    d = symbolic_defect(bad, 1)
    assert not d.is_zero()
    assert d.sup_norm() == pytest.approx(1e-3, rel=1e-9)


def test_defect_index_out_of_range():
    exp_ = expand(riccati_spec(order=2))
    with pytest.raises(IndexError, match="order out of range"):
        symbolic_defect(exp_, 3)


def test_extend_reuses_existing_orders_bitwise():
    spec = riccati_spec(order=2)
    first = expand(spec)
    longer = extend(first, 4)
    assert longer.order_count() == 4
    for k in (1, 2):
        assert longer.orders[k - 1].term.to_records() == first.orders[k - 1].term.to_records()
    assert extend(longer, 3) is longer


def test_with_kernel_fit_attaches_coefficients():
    spec = ProblemSpec(np.array([[2.0]]), (SQ,), (exp_forcing(1.0, [[1.0]]),),
                       "exponential", order=2, ladder_base=(1.0, 2.0))
    with pytest.warns(RuntimeWarning):
        exp_ = expand(spec)
    fitted = with_kernel_fit(exp_, 2, [0.25])
    np.testing.assert_allclose(fitted.orders[1].kernel_coeffs, [0.25])

    t = 3.0
    base_val = eval_partial_sum(exp_, 2, t)
    fit_val = eval_partial_sum(fitted, 2, t)
    np.testing.assert_allclose(fit_val - base_val, [0.25 * math.exp(-2 * t)], rtol=1e-12)

    with pytest.raises(ValueError, match="coefficient count != kernel size"):
        with_kernel_fit(exp_, 2, [0.25, 0.5])


# ---------------------------------------------------------------------------
# power mode expansion


def test_riccati_leading_coefficients():
    exp_ = expand(riccati_spec(order=2))
    q1 = LogPowerSum.build(1, 0, [((0.0, -1.0), [1.0])])
    q2 = LogPowerSum.build(1, 0, [((0.0, -2.0), [2.0])])
    assert coeff_distance_logpower(exp_.term(1), q1) < 1e-13
    assert coeff_distance_logpower(exp_.term(2), q2) < 1e-13
    for k in (1, 2):
        assert symbolic_defect(exp_, k).is_zero()
        assert exp_.term(k).in_class(0, -exp_.rates[k - 1])


def test_power_mode_without_nonlinearity_descends_inverse_powers():
    A = np.diag([2.0, 5.0])
    xi = np.array([1.0, 1.0])
    f = LogPowerSum.build(2, 0, [((0.0, -1.0), xi)])
    exp_ = expand(ProblemSpec(A, (), ((1.0, f),), "power", order=2))
    np.testing.assert_allclose(exp_.term(1).items()[0][1], np.linalg.solve(A, xi), rtol=1e-13)
    np.testing.assert_allclose(
        exp_.term(2).items()[0][1], np.linalg.solve(A @ A, xi), rtol=1e-13
    )


def test_power_mode_oscillatory_forcing_shifts_the_inverse():
    A = np.diag([2.0, 5.0])
    xi = np.array([1.0, 1.0])
    f = LogPowerSum.build(2, 0, [((2.0j, -1.0), xi)])
    exp_ = expand(ProblemSpec(A, (), ((1.0, f),), "power", order=1))
    expected = np.linalg.solve(A + 2j * np.eye(2), xi.astype(complex))
    np.testing.assert_allclose(exp_.term(1).items()[0][1], expected, rtol=1e-13)


def test_power_ladder_gets_unit_increments():
    f = LogPowerSum.build(1, 0, [((0.0, -1.5), [1.0])])
    exp_ = expand(ProblemSpec(np.array([[1.0]]), (), ((1.5, f),), "power", order=3))
    assert exp_.rates == (1.5, 2.5, 3.0)


def test_superset_base_reproduces_shared_orders():
    spec = riccati_spec(order=3)
    base = expand(spec)
    widened = ProblemSpec(
        spec.matrix, spec.maps,
        spec.forcing + ((2.5, LogPowerSum.zero(1, 0)),),
        "power", order=5,
    )
    wide = expand(widened)
    assert wide.rates == (1.0, 2.0, 2.5, 3.0, 3.5)
    by_rate = {o.mu: o.term for o in wide.orders}
    for o in base.orders:
        assert by_rate[o.mu].to_records() == o.term.to_records()
    assert by_rate[2.5].is_zero()
    assert by_rate[3.5].is_zero()


# ---------------------------------------------------------------------------
# log mode expansion


def test_log_mode_linear_problem():
    f = LogPowerSum.build(1, 1, [((0.0, 0.0, -1.0), [1.0])])
    spec = ProblemSpec(np.array([[3.0]]), (), ((1.0, f),), "log", scale_index=1, order=3)
    exp_ = expand(spec)
    q1 = LogPowerSum.build(1, 1, [((0.0, 0.0, -1.0), [1.0 / 3.0])])
    assert coeff_distance_logpower(exp_.term(1), q1) < 1e-14
    assert exp_.term(2).is_zero()
    assert exp_.term(3).is_zero()


def test_log_mode_quadratic_cascade():
    f = LogPowerSum.build(1, 1, [((0.0, 0.0, -1.0), [1.0])])
    spec = ProblemSpec(np.array([[1.0]]), (SQ,), ((1.0, f),), "log", scale_index=1, order=2)
    with pytest.warns(RuntimeWarning):
        exp_ = expand(spec)
    q1 = LogPowerSum.build(1, 1, [((0.0, 0.0, -1.0), [1.0])])
    q2 = LogPowerSum.build(1, 1, [((0.0, 0.0, -2.0), [1.0])])
    assert coeff_distance_logpower(exp_.term(1), q1) < 1e-14
    assert coeff_distance_logpower(exp_.term(2), q2) < 1e-14
    for k in (1, 2):
        assert symbolic_defect(exp_, k).is_zero()


def test_partial_sums_accumulate_terms():
    exp_ = expand(riccati_spec(order=2))
    t = 50.0
    np.testing.assert_allclose(eval_partial_sum(exp_, 0, t), [0.0])
    np.testing.assert_allclose(eval_partial_sum(exp_, 1, t), exp_.term(1).eval(t))
    np.testing.assert_allclose(
        eval_partial_sum(exp_, 2, t), exp_.term(1).eval(t) + exp_.term(2).eval(t)
    )
