import math

import mpmath
import numpy as np
import pytest

from slowtail.asymptotics import (NonIntegrableTail, Regime, RegimeKind, RegimeMismatch, Source,
                                  integrated_tail, prediction_rows, tail_integral, theory_sup_walk,
                                  theory_tail_finite, theory_tail_stationary)
from slowtail.distributions import Coupling, deterministic, discrete_finite, pareto_log, weibull_log
from slowtail.engine import enumerate_finite
from slowtail.systems import make_affine

PARETO = pareto_log(2, 4)


def test_pareto_closed_form_and_saturation():
    fi = integrated_tail(PARETO)
    assert fi.source is Source.CLOSED_FORM
    assert float(fi(96)) == pytest.approx(0.01, rel=1e-15)
    assert fi.saturation_x == pytest.approx(-3.0, abs=1e-8)
    assert float(fi(-10)) == 1.0
    q = integrated_tail(PARETO, force_quadrature=True)
    assert q.source is Source.QUADRATURE
    for x in [-2.0, 0.0, 46.0, 196.0, 1e4]:
        assert float(q(x)) == pytest.approx(min(1, 1 / (x + 4)), rel=1e-10)
    assert q.saturation_x == pytest.approx(-3.0, abs=1e-8)


def test_zero_tail():
    fi = integrated_tail(lambda x: np.zeros_like(np.asarray(x, dtype=float)))
    assert float(fi(0.0)) == 0.0 and float(fi(5.0)) == 0.0


def _weibull_reference(x, beta=0.5, scale=1.0, shift=4.0):
    mpmath.mp.dps = 40
    f = lambda y: mpmath.exp(-(((y + shift) / scale) ** beta))
    return float(mpmath.quad(f, [x, x + 10, x + 100, x + 1000, mpmath.inf]))


@pytest.mark.parametrize("x", [5.0, 50.0, 500.0])
def test_weibull_quadrature_vs_reference(x):
    law = weibull_log(0.5, 1, 4)
    fi = integrated_tail(law)
    assert fi.source is Source.QUADRATURE
    ref = _weibull_reference(x)
    assert float(fi(x)) == pytest.approx(min(1.0, ref), rel=1e-10)
    # independent closed form: (scale / beta) Gamma(1/beta, ((x + shift)/scale)^beta)
    assert ref == pytest.approx(2 * float(mpmath.gammainc(2, math.sqrt(x + 4))), rel=1e-12)


def test_non_integrable():
    with pytest.raises(NonIntegrableTail, match="does not converge"):
        tail_integral(lambda y: 1.0 / (np.asarray(y) + 4.0), 0.0)


def test_fi_monotone_and_continuous():
    for law in [PARETO, weibull_log(0.5, 1, 4), pareto_log(3, 2, Coupling.INDEPENDENT)]:
        fi = integrated_tail(law)
        xs = np.linspace(fi.saturation_x - 5, fi.saturation_x + 50, 60)
        v = np.asarray(fi(xs), dtype=float)
        assert np.all(np.diff(v) <= 1e-15) and np.all((0 <= v) & (v <= 1))
        s = fi.saturation_x
        assert float(fi(s + 1e-7)) == pytest.approx(1.0, abs=1e-6)


def test_stationary_predictions():
    p = theory_tail_stationary(PARETO, Regime(RegimeKind.POSITIVE_BD), 96.0)
    assert p.point == pytest.approx(0.005)
    g = theory_tail_stationary(PARETO, Regime(RegimeKind.GENERAL_BOUNDS, 0.9), 196.0)
    assert g.point is None
    assert (g.lower, g.upper) == pytest.approx((2.25e-3, 2.5e-3))
    assert theory_tail_stationary(PARETO, Regime(RegimeKind.A_DOMINATES, 0.0), 50.0).point == 0.0
    with pytest.raises(ValueError):
        theory_tail_stationary(PARETO, Regime(RegimeKind.POSITIVE_BD), -5.0)


def test_regime_mismatch():
    law = discrete_finite([[0.5, -1, 0], [0.5, 1, 0]], [0.5, 0.5])
    with pytest.raises(RegimeMismatch):
        theory_tail_stationary(law, Regime(RegimeKind.POSITIVE_BD), 1.0)
    with pytest.raises(ValueError):
        Regime(RegimeKind.A_DOMINATES)


def test_prediction_ordering():
    law = pareto_log(2, 4, Coupling.INDEPENDENT)
    for u in [10.0, 50.0, 200.0]:
        pos = theory_tail_stationary(law, Regime(RegimeKind.POSITIVE_BD), u).point
        a_dom = theory_tail_stationary(law, Regime(RegimeKind.A_DOMINATES, 0.7), u).point
        b_dom = theory_tail_stationary(law, Regime(RegimeKind.B_DOMINATES), u).point
        gen = theory_tail_stationary(law, Regime(RegimeKind.GENERAL_BOUNDS, 0.7), u)
        assert a_dom <= pos and b_dom <= pos
        assert gen.lower <= pos <= gen.upper * (1 + 1e-12)


def test_finite_horizon():
    p = theory_tail_finite(PARETO, 3, 0.0, Regime(RegimeKind.POSITIVE_BD), 60.0)
    assert p.point == pytest.approx(7.32421875e-4, rel=1e-14)
    p0 = theory_tail_finite(PARETO, 0, 1.0, Regime(RegimeKind.POSITIVE_BD), 60.0)
    assert p0.point == pytest.approx(float(PARETO.log_ab_tail(60.0)))
    g = theory_tail_finite(PARETO, 2, 0.5, Regime(RegimeKind.GENERAL_BOUNDS), 60.0, [1.0, 0.8])
    f = float(PARETO.log_ab_tail(60.0))
    assert (g.lower, g.upper) == pytest.approx((2.3 * f, 2.5 * f))
    with pytest.raises(ValueError):
        theory_tail_finite(PARETO, 2, 0.0, Regime(RegimeKind.GENERAL_BOUNDS), 60.0)


def test_finite_horizon_discrete_beyond_support():
    law = discrete_finite([[0.5, 0, 0], [0.5, 1, 0]], [0.5, 0.5])
    atoms = enumerate_finite(make_affine(law), 0.0, 2)
    u = math.log(2.0)
    exact = sum(p for v, p in atoms if v > math.exp(u))
    pred = theory_tail_finite(law, 2, 0.0, Regime(RegimeKind.B_DOMINATES), u)
    assert exact == 0.0 and pred.point == 0.0


def test_sup_walk_prediction():
    assert theory_sup_walk(PARETO, 196.0) == pytest.approx(0.0025)
    assert theory_sup_walk(deterministic(0.5, 1, 0), 1.0) == 0.0
    w = weibull_log(0.5, 1, 4)
    assert theory_sup_walk(w, 50.0) == pytest.approx(_weibull_reference(50.0) / w.mu, rel=1e-9)


def test_separation_ratio_shrinks():
    for law in [PARETO, weibull_log(0.5, 1, 4)]:
        fi = integrated_tail(law)
        r = [float(law.log_ab_tail(u)) / float(fi(u)) for u in (25.0, 200.0)]
        assert r[1] < 0.5 * r[0]
    assert float(PARETO.log_ab_tail(100.0)) / float(integrated_tail(PARETO)(100.0)) == pytest.approx(1 / 104)


def test_prediction_rows():
    rows = prediction_rows(PARETO, Regime(RegimeKind.POSITIVE_BD), [96.0])
    assert rows == [(96.0, pytest.approx(0.005), pytest.approx(0.005), pytest.approx(0.005), "PositiveBD")]
