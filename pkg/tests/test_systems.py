import math

import numpy as np
import pytest

from slowtail import LogReal, RngStream
from slowtail.distributions import ConfigurationError, deterministic, discrete_finite, pareto_log, weibull_log
from slowtail.systems import (backward_compose, envelope_check, make_affine, make_affine_positive, make_arch1,
                              make_arch1_params, make_custom, standard_t_grid)

L = LogReal.from_float


def test_affine_examples(rng):
    d = make_affine(deterministic(0.5, 1, 0)).draw(rng)
    assert d(3.0).to_float() == pytest.approx(2.5)
    assert d.lip == pytest.approx(0.5)
    p = make_affine(pareto_log(2, 4))
    for _ in range(20):
        m = p.draw(rng)
        assert m(0.0) == m.b
        assert m.a.to_float() <= m.lip * (1 + 1e-12)
    m = make_affine(discrete_finite([[math.exp(-2), math.exp(-2), 0]], [1.0])).draw(rng)
    assert m(1.0).to_float() == pytest.approx(2 * math.exp(-2))


def test_affine_positive(rng):
    m = make_affine_positive(deterministic(0.5, 1, 0)).draw(rng)
    assert m(-5.0).to_float() == pytest.approx(1.0)
    assert m(5.0).to_float() == pytest.approx(3.5)


def test_arch1_examples(rng):
    assert make_arch1_params(0, 0, 4).draw(rng)(123.0).to_float() == pytest.approx(2.0)
    assert make_arch1_params(0.25, 0, 0).draw(rng)(8.0).to_float() == pytest.approx(2.0)
    m = make_arch1_params(0.2, 0.09, 1).draw(rng)
    assert m.lip <= 0.5 + 1e-12
    with pytest.raises(ConfigurationError):
        make_arch1_params(-0.1, 0, 1)


def _direct_arch(a1, a2, d, t):
    return abs(a1 * t + math.sqrt(d + a2 * max(t, 0.0) ** 2))


def test_arch1_envelope_against_direct_formula():
    sys = make_arch1_params(0.2, 0.09, 1)
    rep = envelope_check(sys, list(np.linspace(-10, 10, 21)), 10_000, RngStream(3))
    assert rep.passed and not rep.violations
    # skipped points are the negative half-line, outside the map's range
    assert all(t < 0 for t in rep.skipped_points)
    m = sys.draw(RngStream(3))
    for t in np.linspace(0, 10, 11):
        val = _direct_arch(0.2, 0.09, 1, t)
        assert m(t).to_float() == pytest.approx(val, rel=1e-13)
        assert (0.2 + 0.3) * t - 1 <= val <= (0.2 + 0.3) * t + 1


@pytest.mark.parametrize("system", [
    make_affine(pareto_log(2, 4)), make_affine_positive(pareto_log(2, 4)), make_affine(weibull_log(0.5, 1, 4)),
    make_affine(discrete_finite([[0.5, -1, 0.5], [0.9, 2, 0]], [0.5, 0.5])),
])
def test_envelope_property(system):
    rep = envelope_check(system, standard_t_grid(), 10_000, RngStream(11))
    assert rep.passed, rep.violations[:3]
    assert len(standard_t_grid()) == 41


def test_affine_lower_slack_zero():
    rep = envelope_check(make_affine(pareto_log(2, 4)), standard_t_grid(), 100, RngStream(1))
    assert rep.worst_lower_slack == pytest.approx(0.0, abs=1e-12)


def test_adversarial_custom():
    law = deterministic(0.5, 1, 1)

    def apply(t, a, b, d):
        return a * t + b + d + d

    sys = make_custom(law, apply)
    rep = envelope_check(sys, [-1.0, 0.0, 1.0], 10, RngStream(1))
    assert not rep.passed
    assert {v.inequality for v in rep.violations} == {"upper"}
    assert any(v.t == 0.0 for v in rep.violations)


def test_backward_compose(rng):
    assert backward_compose([], 7.0).to_float() == 7.0
    sys = make_affine(deterministic(0.5, 1, 0))
    draws = [sys.draw(rng) for _ in range(2)]
    assert backward_compose(draws, 0.0).to_float() == pytest.approx(1.5)
    for n in (1, 5, 30):
        ds = [sys.draw(rng) for _ in range(n)]
        assert backward_compose(ds, 0.0).to_float() == pytest.approx(2 * (1 - 2.0 ** -n), rel=1e-13)


def test_compose_overflow(rng):
    huge = LogReal.exp(1e308)

    def apply(t, a, b, d):
        return t * huge

    sys = make_custom(deterministic(0.5, 1, 0), apply, lip=lambda a, b, d: math.inf)
    assert backward_compose([sys.draw(rng)], 1.0).log_mag == 1e308
    with pytest.raises(OverflowError) as exc:
        backward_compose([sys.draw(rng) for _ in range(5)], 1.0)
    assert exc.value.depth == 1


def test_composition_sandwich_and_lipschitz():
    r = RngStream(21)
    for system in [make_affine(discrete_finite([[0.5, -1, 0.5], [0.9, 2, 0]], [0.5, 0.5])),
                   make_affine(pareto_log(2, 4)), make_arch1_params(0.2, 0.09, 1)]:
        for _ in range(50):
            draws = [system.draw(r) for _ in range(6)]
            for t in [0.0, 0.5, 3.0, 40.0]:
                mid = backward_compose(draws, t)
                lo = backward_compose([d.lower() for d in draws], t)
                hi = backward_compose([d.upper() for d in draws], t)
                assert lo <= mid * (1 + 1e-12) if mid.sign > 0 else lo <= mid
                assert mid.to_float() <= hi.to_float() * (1 + 1e-12)
            t1, t2 = 0.3, 2.7
            gap = abs(backward_compose(draws, t1).to_float() - backward_compose(draws, t2).to_float())
            assert gap <= math.prod(d.lip for d in draws) * (t2 - t1) * (1 + 1e-9) + 1e-300


def test_contraction_check():
    mean, upper = make_affine(pareto_log(2, 4)).contraction_check(RngStream(1), 100_000)
    assert mean == pytest.approx(-2.0, abs=0.1) and upper < 0
    mean, upper = make_arch1_params(0.2, 0.09, 1).contraction_check(RngStream(1), 1000)
    assert mean == pytest.approx(math.log(0.5)) and upper < 0
