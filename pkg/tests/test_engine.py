import math

import numpy as np
import pytest
from scipy import stats

from slowtail import LogReal, RngStream
from slowtail import engine
from slowtail.asymptotics import integrated_tail
from slowtail.distributions import deterministic, discrete_finite, indicator_counter, pareto_log, weibull_log
from slowtail.engine import (TruncationCapHit, coupling_batch, enumerate_finite, joint_batch, forward_batch, iterate_forward,
                             late_record_bias, perpetuity_batch, sample_perpetuity, sample_stationary_forward,
                             sample_sup_walk, sample_upper_perpetuity, sup_walk_batch)
from slowtail.systems import make_affine, make_arch1_params

COIN = discrete_finite([[0.5, 0, 0], [0.5, 1, 0]], [0.5, 0.5])


def test_deterministic_perpetuity(rng):
    s = sample_perpetuity(deterministic(0.5, 1, 0), rng)
    assert abs(s.value.to_float() - 2.0) <= 1e-12
    assert s.converged and s.method is engine.Method.BACKWARD_SERIES
    assert abs(s.terms_used - 50 / math.log(2)) < 5
    assert s.residual_log_bound <= s.value.log_mag - 50
    assert sample_perpetuity(deterministic(0.5, -1, 0), rng).value.to_float() == pytest.approx(-2.0, abs=1e-12)


def test_fixed_point_b_over_one_minus_a(rng):
    for a, b in [(0.1, 3.0), (0.9, -2.0), (0.99, 1.0)]:
        v = sample_perpetuity(deterministic(a, b, 0), rng).value.to_float()
        assert v == pytest.approx(b / (1 - a), rel=1e-12)


def test_upper_perpetuity(rng):
    assert sample_upper_perpetuity(deterministic(0.5, -3, 0), rng).value.to_float() == pytest.approx(2.0)
    assert sample_upper_perpetuity(deterministic(0.5, 1, 1), rng).value.to_float() == pytest.approx(4.0)


def test_sup_walk_deterministic(rng):
    assert sample_sup_walk(deterministic(0.5, 1, 0), rng)[0] == 0.0
    m, stopped, rec = sample_sup_walk(deterministic(0.5, math.exp(2), 0), rng)
    assert m == pytest.approx(2.0) and rec == 0 and stopped > 0


def test_iterate_forward(rng):
    traj = iterate_forward(make_affine(deterministic(0.5, 1, 0)), 0.0, 3, rng)
    assert [v.to_float() for v in traj] == pytest.approx([0, 1, 1.5, 1.75])
    assert iterate_forward(make_affine(deterministic(0.5, 1, 0)), 4.0, 0, rng) == [LogReal.from_float(4.0)]


def test_forward_coin_frequencies():
    n = 1_000_000
    vals = forward_batch(make_affine(COIN), 0.0, 2, RngStream(8), n).to_float()
    se = math.sqrt(0.25 * 0.75 / n)
    for atom in (0.0, 0.5, 1.0, 1.5):
        assert abs(np.mean(np.isclose(vals, atom)) - 0.25) <= 4 * se


def test_enumerate_examples():
    sys = make_affine(COIN)
    assert np.allclose(enumerate_finite(sys, 0.0, 2), [(0.0, .25), (0.5, .25), (1.0, .25), (1.5, .25)])
    assert np.allclose(enumerate_finite(sys, 3.0, 0), [(3.0, 1.0)])
    assert np.allclose(enumerate_finite(sys, 2.0, 1), [(1.0, .5), (2.0, .5)])
    atoms = enumerate_finite(sys, 0.0, 12)
    assert sum(p for _, p in atoms) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="enumeration bound"):
        enumerate_finite(sys, 0.0, 24)


def test_enumeration_matches_forward_tv():
    law = discrete_finite([[0.5, -1, 0], [0.8, 2, 0], [1.1, 0.5, 0]], [0.3, 0.5, 0.2])
    sys = make_affine(law)
    n_steps, n = 6, 1_000_000
    atoms = enumerate_finite(sys, 0.0, n_steps)
    vals = np.round(forward_batch(sys, 0.0, n_steps, RngStream(4), n).to_float(), 12)
    keys, counts = np.unique(vals, return_counts=True)
    emp = dict(zip(keys.tolist(), counts / n))
    exact = dict((round(v, 12), p) for v, p in atoms)
    support = set(emp) | set(exact)
    tv = 0.5 * sum(abs(emp.get(k, 0) - exact.get(k, 0)) for k in support)
    assert tv <= 4 * math.sqrt(3 * n_steps / n)


def test_pareto_stationary_sandwich():
    law = pareto_log(2, 4)
    n = 1_000_000
    b = perpetuity_batch(law, RngStream(2), n)
    logs = np.where(b.sign > 0, b.log_mag, -np.inf)
    assert np.isfinite(np.mean(np.maximum(logs, 0)))
    p = np.mean(logs > 46)
    ratio = p / float(integrated_tail(law)(46))
    assert 0 < ratio <= (1 / law.mu) * (1 + 4 * math.sqrt((1 - p) / (p * n)))


def test_coupling_examples(rng):
    s = sample_stationary_forward(make_affine(deterministic(0.5, 1, 0)), rng)
    assert s.value.to_float() == pytest.approx(2.0, abs=1e-12)
    assert s.method is engine.Method.FORWARD_COUPLING
    arch = coupling_batch(make_arch1_params(0.2, 0.09, 1), RngStream(1), 100_000)
    assert np.all(arch.sign >= 0) and arch.converged.all()


def test_coupling_and_series_same_law():
    law = pareto_log(2, 4)
    a = coupling_batch(make_affine(law), RngStream(31, 1), 100_000, couple_tol_log=200)
    b = perpetuity_batch(law, RngStream(31, 2), 100_000, rel_tol_log=200)
    # compare on the log scale; both are positive for B = A
    assert stats.ks_2samp(a.log_mag, b.log_mag).pvalue > 1e-3


def test_pathwise_sandwich_all_families():
    laws = [pareto_log(2, 4), weibull_log(0.5, 1, 4),
            discrete_finite([[0.5, -1, 0.5], [0.9, 2, 0.1], [1.3, -0.5, 0]], [0.4, 0.4, 0.2])]
    for law in laws:
        j = joint_batch(law, RngStream(17), 10_000, rel_tol_log=100)
        lo, mid, hi = j.to_float().T
        tol = 1e-12 * np.maximum(1, np.abs(mid))
        assert np.all(lo <= mid + tol) and np.all(mid <= hi + tol)
    for law in laws + [indicator_counter(pareto_log(2, 4))]:
        j = joint_batch(law, RngStream(17), 10_000, rel_tol_log=100)
        # e^M <= Rbar, and M >= 0 since Bbar_1 >= 1
        assert np.all(j.m >= 0) and np.all(j.m <= j.log_mag[:, 2] + 1e-12)


def test_joint_run_matches_separate_runs():
    law = pareto_log(2, 4)
    j = joint_batch(law, RngStream(9), 2000, rel_tol_log=100)
    b = perpetuity_batch(law, RngStream(9), 2000, rel_tol_log=100)
    same = j.terms_used == b.terms_used
    assert same.mean() > 0.9
    assert np.allclose(j.log_mag[same, 1], b.log_mag[same], rtol=0, atol=1e-12)


def test_worker_invariance():
    law = pareto_log(2, 4)
    n = 2 * engine.SHARD + 123
    a = perpetuity_batch(law, RngStream(5), n, workers=1)
    b = perpetuity_batch(law, RngStream(5), n, workers=4)
    assert np.array_equal(a.log_mag, b.log_mag) and np.array_equal(a.sign, b.sign)
    c = sup_walk_batch(law, RngStream(5), n, workers=3)
    d = sup_walk_batch(law, RngStream(5), n, workers=1)
    assert np.array_equal(c.m, d.m)


def test_truncation_cap():
    with pytest.raises(TruncationCapHit) as exc:
        perpetuity_batch(deterministic(0.99, 1, 0), RngStream(1), 3, n_max=10)
    assert "partial" in exc.value.diagnostics
    with pytest.raises(TruncationCapHit, match="biased low"):
        sup_walk_batch(deterministic(0.99, 1, 0), RngStream(1), 3, guard_log=60, n_max=10)
    with pytest.raises(ValueError):
        perpetuity_batch(deterministic(0.5, 1, 0), RngStream(1), 1, rel_tol_log=10)


def test_late_record_bias_reported():
    law = pareto_log(2, 4)
    b = sup_walk_batch(law, RngStream(3), 10_000, guard_log=60)
    bias = late_record_bias(b, integrated_tail(law), law.mu)
    assert 0 < bias < 0.01
