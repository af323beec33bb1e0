"""Tests for scenario generation, clouds, and shift calibration."""

import numpy as np
import pytest

from vess.datagen import (
    GeneratorSpec,
    ShiftFamily,
    calibrate_shift,
    derive_rng,
    paired_clouds,
    sample_cloud,
    sample_scenarios,
    shift_family,
    shifted_spec,
    w2sq_estimate,
)
from vess.errors import DegenerateDirectionError, DomainError, ValidationError


def _spec(k_n=3, loss_mean=0.3, spread=0.1, beta=10.0, occ=0.8, walk=0.05):
    return GeneratorSpec(k_n, np.full(k_n, loss_mean), spread, beta, occ, walk)


def test_determinism_and_stream_independence():
    spec = _spec()
    a = sample_scenarios(spec, 50, derive_rng(7, "train"))
    b = sample_scenarios(spec, 50, derive_rng(7, "train"))
    c = sample_scenarios(spec, 50, derive_rng(7, "test"))
    d = sample_scenarios(spec, 50, derive_rng(8, "train"))
    assert np.array_equal(a.loss, b.loss) and np.array_equal(a.capacity, b.capacity)
    assert not np.array_equal(a.loss, c.loss)
    assert not np.array_equal(a.loss, d.loss)


def test_ranges_and_clipping():
    spec = _spec(loss_mean=0.05, spread=0.5, beta=4.0, occ=0.1, walk=0.5)
    scen = sample_scenarios(spec, 2000, derive_rng(1, "clip"))
    assert np.all(scen.loss >= 0.0)
    assert np.all(scen.capacity >= 0.0)
    assert np.all(scen.capacity <= 4.0 + 1e-12)
    # The wide walk must actually hit both clip rails somewhere.
    assert np.any(scen.capacity == 0.0)
    assert np.any(scen.capacity == 4.0)


def test_cloud_moments_and_shape():
    spec = _spec(loss_mean=5.0, spread=0.0, beta=50.0, occ=0.5, walk=0.0)
    scen = sample_scenarios(spec, 500, derive_rng(2, "base"))
    cloud = sample_cloud(scen, 4, 0.05, derive_rng(2, "cloud"))
    assert cloud.loss.shape == (500, 4, 3)
    dev = (cloud.loss - scen.loss[:, None, :]).ravel()
    # Far from the clip rail the deviations are exactly N(0, sigma^2).
    assert np.std(dev) == pytest.approx(0.05, abs=0.001)
    assert np.mean(dev) == pytest.approx(0.0, abs=0.001)
    assert np.all(cloud.capacity >= 0.0)


def test_zero_sigma_cloud_is_exact_copy():
    spec = _spec()
    scen = sample_scenarios(spec, 20, derive_rng(3, "b"))
    cloud = sample_cloud(scen, 3, 0.0, derive_rng(3, "c"))
    assert np.array_equal(cloud.loss, np.broadcast_to(scen.loss[:, None, :], (20, 3, 3)))


def test_w2sq_pure_mean_shift_is_exact():
    # A mean shift of 0.3 on one step with no clipping gives squared distance
    # 0.09 on every coupled pair: zero variance, exact estimate.
    spec = _spec(k_n=1, loss_mean=5.0, spread=0.1, beta=10.0, occ=0.5, walk=0.02)
    est, stderr = w2sq_estimate(spec, shifted_spec(spec, "loss_mean", 0.3), 200, 11)
    assert est == pytest.approx(0.09, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)


def test_w2sq_scales_with_steps():
    spec = _spec(k_n=4, loss_mean=5.0)
    est, _ = w2sq_estimate(spec, shifted_spec(spec, "loss_mean", 0.1), 100, 5)
    assert est == pytest.approx(4 * 0.01, abs=1e-12)


def test_w2sq_identical_specs_is_zero():
    spec = _spec()
    est, stderr = w2sq_estimate(spec, spec, 100, 9)
    assert est == 0.0 and stderr == 0.0


def test_spread_shift_couples_through_same_noise():
    spec = _spec(k_n=2, loss_mean=5.0, spread=0.1)
    est, stderr = w2sq_estimate(spec, shifted_spec(spec, "loss_spread", 1.0), 4000, 13)
    # d_i = sum_k (0.1 z)^2, so E d = 2 * 0.01; the estimate must be close.
    assert est == pytest.approx(0.02, rel=0.1)
    assert stderr > 0.0


def test_calibrate_shift_respects_budget():
    spec = _spec(k_n=2, loss_mean=5.0)
    mu = 1e-3
    for kind in ("loss_mean", "occupancy"):
        scale, est, stderr = calibrate_shift(spec, kind, mu, 500, 21)
        assert scale > 0.0
        assert est <= mu
        fresh, _ = w2sq_estimate(spec, shifted_spec(spec, kind, scale), 500, 99)
        assert fresh <= mu + 3.0 * max(stderr, 1e-9) + 1e-6


def test_calibrate_degenerate_direction():
    # occ_init already at the rail: draining occupancy moves nothing.
    spec = _spec(occ=0.0)
    with pytest.raises(DegenerateDirectionError):
        calibrate_shift(spec, "occupancy", 1e-3, 200, 31)


def test_shift_kind_validation():
    spec = _spec()
    with pytest.raises(DomainError):
        shifted_spec(spec, "prices", 0.1)
    with pytest.raises(DomainError):
        shifted_spec(spec, "loss_mean", -0.1)
    with pytest.raises(DomainError):
        calibrate_shift(spec, "loss_mean", 0.0, 100, 1)


def test_spec_validation():
    with pytest.raises(ValidationError):
        GeneratorSpec(0, np.zeros(0), 0.1, 10.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        GeneratorSpec(2, np.zeros(3), 0.1, 10.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        GeneratorSpec(2, -np.ones(2), 0.1, 10.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        GeneratorSpec(2, np.zeros(2), -0.1, 10.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        GeneratorSpec(2, np.zeros(2), 0.1, 0.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        GeneratorSpec(2, np.zeros(2), 0.1, 10.0, 1.5, 0.1)


def test_derive_rng_path_types():
    a = derive_rng(5, "x", 3)
    b = derive_rng(5, "x", 3)
    assert a.integers(1 << 30) == b.integers(1 << 30)
    with pytest.raises(ValidationError):
        derive_rng(-1)
    with pytest.raises(ValidationError):
        derive_rng(5, 3.5)
    with pytest.raises(ValidationError):
        derive_rng(5, -2)


def test_sample_count_validation():
    spec = _spec()
    with pytest.raises(DomainError):
        sample_scenarios(spec, 0, derive_rng(1))
    scen = sample_scenarios(spec, 5, derive_rng(1))
    with pytest.raises(DomainError):
        sample_cloud(scen, 0, 0.1, derive_rng(1))
    with pytest.raises(DomainError):
        sample_cloud(scen, 2, -0.1, derive_rng(1))


# ------------------------------------------------------------ paired clouds


def test_paired_clouds_share_one_noise_draw():
    spec = GeneratorSpec(n_steps=3, loss_mean=np.array([5.0, 6.0, 7.0]), loss_spread=0.4,
                         beta_base=10.0, occ_init=0.8, walk_step=0.05)
    base = sample_scenarios(spec, 40, derive_rng(3, "base"))
    lo, hi = paired_clouds(base, 4, [0.05, 0.1], derive_rng(3, "cloud"))
    assert lo.sigma == 0.05 and hi.sigma == 0.1
    # Away from the clip floor the deviations are exactly proportional.
    dev_lo = lo.loss - base.loss[:, None, :]
    dev_hi = hi.loss - base.loss[:, None, :]
    assert np.allclose(dev_hi, 2.0 * dev_lo, atol=1e-12)
    assert np.allclose(hi.capacity - base.capacity[:, None, :],
                       2.0 * (lo.capacity - base.capacity[:, None, :]), atol=1e-12)


def test_paired_clouds_validation():
    spec = GeneratorSpec(n_steps=2, loss_mean=np.array([5.0, 6.0]), loss_spread=0.4,
                         beta_base=10.0, occ_init=0.8, walk_step=0.05)
    base = sample_scenarios(spec, 5, derive_rng(3, "base"))
    with pytest.raises(DomainError):
        paired_clouds(base, 0, [0.1], derive_rng(3, "c"))
    with pytest.raises(DomainError):
        paired_clouds(base, 2, [], derive_rng(3, "c"))
    with pytest.raises(DomainError):
        paired_clouds(base, 2, [0.1, -0.2], derive_rng(3, "c"))


# ------------------------------------------------------------- shift family


def _family_spec():
    return GeneratorSpec(n_steps=3, loss_mean=np.array([4.0, 5.0, 6.0]), loss_spread=0.6,
                         beta_base=10.0, occ_init=0.7, walk_step=0.08)


def test_shift_family_respects_budget_and_is_deterministic():
    spec = _family_spec()
    fam = shift_family(spec, 5, 1e-3, 2024)
    assert fam.n_variants == 5
    assert all(d <= fam.mu for d in fam.distances)
    assert all(d > 0 for d in fam.distances)
    fam2 = shift_family(spec, 5, 1e-3, 2024)
    for a, b in zip(fam.variants, fam2.variants):
        assert np.array_equal(a.loss_mean, b.loss_mean)
        assert a.loss_spread == b.loss_spread and a.beta_base == b.beta_base
    assert fam.distances == fam2.distances
    # A tight budget forces small parameter moves.
    for v in fam.variants:
        assert np.linalg.norm(v.loss_mean - spec.loss_mean) < 0.1


def test_shift_family_fresh_stream_membership():
    spec = _family_spec()
    fam = shift_family(spec, 4, 1e-3, 99)
    for v, variant in enumerate(fam.variants):
        est, stderr = w2sq_estimate(spec, variant, 4000, 555, "recheck", v)
        assert est <= fam.mu + 3.0 * stderr


def test_shift_family_large_budget_keeps_natural_scale():
    spec = _family_spec()
    fam = shift_family(spec, 4, 50.0, 7)
    assert all(d <= 50.0 for d in fam.distances)
    # No down-scaling: the unit-norm directions keep order-one parameter moves.
    norms = [np.linalg.norm(v.loss_mean - spec.loss_mean) for v in fam.variants]
    assert max(norms) > 0.2


def test_shift_family_degenerate_direction_raises():
    # A generator with zero spread, zero occupancy, and zero mean cannot move
    # under a direction whose mean component is negative (clipped away).
    dead = GeneratorSpec(n_steps=1, loss_mean=np.array([0.0]), loss_spread=0.0,
                         beta_base=5.0, occ_init=0.0, walk_step=0.0)
    seed = next(s for s in range(200)
                if derive_rng(s, "shift-family", 0).standard_normal(3)[0] < 0.0)
    with pytest.raises(DegenerateDirectionError):
        shift_family(dead, 1, 1e-3, seed)


def test_shift_family_validation():
    spec = _family_spec()
    with pytest.raises(DomainError):
        shift_family(spec, 0, 1e-3, 1)
    with pytest.raises(DomainError):
        shift_family(spec, 2, 0.0, 1)
    with pytest.raises(DomainError):
        shift_family(spec, 2, 1e-3, 1, slack=1.0)
    with pytest.raises(ValidationError):
        ShiftFamily(spec, (spec,), (2e-3,), 1e-3)
    with pytest.raises(ValidationError):
        ShiftFamily(spec, (spec, spec), (0.0,), 1e-3)
    with pytest.raises(ValidationError):
        ShiftFamily(spec, (), (), 1e-3)
