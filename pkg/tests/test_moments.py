import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fisherbound.bound import derivative_mu
from fisherbound.errors import DomainError, InsufficientDataError, InvalidSampleError
from fisherbound.models import ModelSpec, ThetaDomain, cubic_model, make_model, rician_model, saleh_model
from fisherbound.moments import (
    BLOCK_SIZE,
    MomentAccumulator,
    accumulate,
    default_step,
    estimate_triple,
    finalize,
    tree_merge,
    write_summaries_csv,
)
from fisherbound.transforms import parse_transform_spec, standard_transform_set


def _acc(rows):
    acc = MomentAccumulator(len(rows[0]))
    for r in rows:
        accumulate(acc, r)
    return acc


def test_two_point_population_variance():
    s = finalize(_acc([[0.0], [2.0]]))
    np.testing.assert_array_equal(s.mean, [1.0])
    np.testing.assert_array_equal(s.cov, [[1.0]])


def test_two_point_rank_one():
    s = finalize(_acc([[0.0, 0.0], [2.0, 4.0]]))
    np.testing.assert_array_equal(s.mean, [1.0, 2.0])
    np.testing.assert_array_equal(s.cov, [[1.0, 2.0], [2.0, 4.0]])


def test_constant_rows_zero_cov():
    s = finalize(_acc([[1.5, -2.0, 3.0]] * 50))
    np.testing.assert_array_equal(s.cov, np.zeros((3, 3)))


def test_finalize_needs_two():
    with pytest.raises(InsufficientDataError):
        finalize(_acc([[1.0]]))


def test_nonfinite_rejected():
    with pytest.raises(InvalidSampleError):
        accumulate(MomentAccumulator(2), [1.0, math.nan])
    with pytest.raises(InvalidSampleError):
        MomentAccumulator.from_batch(np.array([[1.0], [math.inf]]))


def test_batch_matches_streaming(gen):
    x = gen.standard_normal((500, 4)) * [1, 10, 0.1, 3] + 5
    a = finalize(MomentAccumulator.from_batch(x))
    b = finalize(_acc(list(x)))
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12)
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-11)


def test_merge_equals_single_pass(gen):
    x = gen.standard_normal((10_000, 3)) @ gen.standard_normal((3, 3)) + 100.0
    whole = finalize(MomentAccumulator.from_batch(x))
    merged = finalize(MomentAccumulator.from_batch(x[:3000]).merge(MomentAccumulator.from_batch(x[3000:])))
    np.testing.assert_allclose(merged.mean, whole.mean, rtol=1e-12)
    np.testing.assert_allclose(merged.cov, whole.cov, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=2, max_size=6), st.integers(0, 2**32 - 1))
def test_merge_associative_commutative(sizes, seed):
    gen = np.random.default_rng(seed)
    parts = [MomentAccumulator.from_batch(gen.standard_normal((k, 2)) + 3.0) for k in sizes]
    left = parts[0]
    for p in parts[1:]:
        left = left.merge(p)
    right = parts[-1]
    for p in reversed(parts[:-1]):
        right = p.merge(right)
    assert left.count == right.count == sum(sizes)
    np.testing.assert_allclose(left.mean, right.mean, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(left.m2, right.m2, rtol=1e-11, atol=1e-12)


def test_tree_merge_single_and_many(gen):
    x = gen.standard_normal((37, 2))
    accs = [MomentAccumulator.from_batch(x[i:i + 5]) for i in range(0, 37, 5)]
    out = finalize(tree_merge(accs))
    ref = finalize(MomentAccumulator.from_batch(x))
    np.testing.assert_allclose(out.cov, ref.cov, rtol=1e-12)


def test_summary_symmetric_psd():
    t = estimate_triple(saleh_model(), standard_transform_set(), 1.0, n=100_000, seed=3)
    cov = t.at_center.cov
    assert np.max(np.abs(cov - cov.T)) <= 1e-14 * np.max(np.abs(cov))
    assert np.linalg.eigvalsh(cov).min() >= -1e-10 * np.max(np.abs(cov))


def test_gauss_mean_moments():
    model = make_model("ref:gauss-mean", sigma2=1.0)
    t = estimate_triple(model, parse_transform_spec("z"), 0.0, n=1_000_000, seed=1)
    assert abs(t.at_center.mean[0]) < 4e-3
    assert t.at_center.cov[0, 0] == pytest.approx(1.0, rel=0.01)
    assert t.at_center.n == 1_000_000


@pytest.mark.parametrize("seed", [0, 1, 99])
def test_crn_cancels_additive_noise(seed):
    model = make_model("ref:gauss-mean")
    t = estimate_triple(model, parse_transform_spec("z"), 0.3, h=0.125, n=9000, seed=seed)
    # h is a power of two, so the difference of means is exact up to rounding of theta+-h
    assert derivative_mu(t)[0] == pytest.approx(1.0, abs=1e-12)


def test_cubic_mean_vanishes():
    t = estimate_triple(cubic_model(0.0, 1.0), parse_transform_spec("z"), 0.5, h=0.01, n=100_000, seed=2)
    se = math.sqrt(t.at_center.cov[0, 0] / t.at_center.n)
    assert abs(t.at_center.mean[0]) < 3 * se


def test_rician_abs_duplicates_z():
    t = estimate_triple(rician_model(), standard_transform_set(), 1.0, h=0.01, n=100_000, seed=1)
    c = t.at_center.cov
    assert c[0, 0] == pytest.approx(c[4, 4], rel=1e-12)


def test_triple_shares_n_and_step():
    t = estimate_triple(saleh_model(), standard_transform_set(), 2.0, n=5000, seed=1)
    assert t.at_minus.n == t.at_center.n == t.at_plus.n == 5000
    assert t.h == pytest.approx(0.02)
    assert t.at_minus.theta == pytest.approx(1.98)


def test_partition_invariance_bit_identical():
    model, tset = rician_model(), standard_transform_set()
    n = 7 * BLOCK_SIZE + 123
    ref = estimate_triple(model, tset, 0.7, n=n, seed=5, workers=1)
    for workers in (2, 3, 8):
        out = estimate_triple(model, tset, 0.7, n=n, seed=5, workers=workers)
        for a, b in ((ref.at_minus, out.at_minus), (ref.at_center, out.at_center), (ref.at_plus, out.at_plus)):
            assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)


def test_crn_variance_reduction():
    model, tset = saleh_model(), parse_transform_spec("z")
    h, n = 0.01, 20_000
    shared, independent = [], []
    for seed in range(50):
        t = estimate_triple(model, tset, 1.0, h=h, n=n, seed=seed)
        shared.append(derivative_mu(t)[0])
        lo = model.sample_block(1.0 - h, 1000 + seed, 0, n).mean()
        hi = model.sample_block(1.0 + h, 2000 + seed, 0, n).mean()
        independent.append((hi - lo) / (2 * h))
    assert np.var(shared) / np.var(independent) < 0.5


def test_default_step_rule():
    assert default_step(saleh_model(), 0.5) == 0.01
    assert default_step(saleh_model(), 3.0) == pytest.approx(0.03)
    # near the closed edge of the Rician domain the step is halved until theta - h >= 0
    assert default_step(rician_model(), 0.004) == 0.0025
    with pytest.raises(DomainError):
        default_step(rician_model(), 0.0)


def test_explicit_step_outside_domain_names_endpoint():
    with pytest.raises(DomainError, match="theta-h"):
        estimate_triple(saleh_model(), parse_transform_spec("z"), 0.005, h=0.01, n=100)
    with pytest.raises(DomainError, match="theta\\+h"):
        estimate_triple(make_model("ref:poisson"), parse_transform_spec("z"), 30.0, h=0.1, n=100)


def test_insufficient_samples():
    with pytest.raises(InsufficientDataError):
        estimate_triple(saleh_model(), parse_transform_spec("z"), 1.0, n=1)


def _spiky_model(bad_every):
    def transform(theta, u):
        z = theta + u[:, 0]
        z[(np.floor(u[:, 0] * 1e9).astype(np.int64) % bad_every) == 0] = math.nan
        return z

    return ModelSpec("spiky", transform, 1, ThetaDomain())


def test_invalid_sample_aborts_by_default():
    with pytest.raises(InvalidSampleError):
        estimate_triple(_spiky_model(1000), parse_transform_spec("z"), 0.0, h=0.1, n=50_000)


def test_skip_mode_respects_cap():
    model = _spiky_model(1000)
    with pytest.raises(InvalidSampleError, match="skip cap"):
        estimate_triple(model, parse_transform_spec("z"), 0.0, h=0.1, n=50_000, skip_invalid=True)
    rare = _spiky_model(10**9)  # u in (0, 1e-9) only: essentially never
    t = estimate_triple(rare, parse_transform_spec("z"), 0.0, h=0.1, n=50_000, skip_invalid=True)
    assert t.at_center.n <= 50_000


def test_summary_csv(tmp_path):
    t = estimate_triple(saleh_model(), parse_transform_spec("z,z2"), 1.0, n=1000, seed=1)
    path = tmp_path / "m.csv"
    write_summaries_csv([t.at_minus, t.at_center, t.at_plus], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta,n,mean_0,mean_1,cov_0_0,cov_0_1,cov_1_1"
    assert len(lines) == 4
