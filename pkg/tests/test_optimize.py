import itertools

import numpy as np
import pytest

from conftest import random_instance
from doptfact.dcrit import det_objective
from doptfact.errors import EstimabilityError, ValidationError
from doptfact.ewbayes import PriorSpec, QuadratureConfig, Uniform, expected_weights
from doptfact.model import ModelSpec, build_design_matrix, weights
from doptfact.optimize import (
    OptimizerConfig,
    exchange_int,
    exchange_real,
    lift_one,
    lift_one_modified,
    max_det_support,
    verify_minimally_supported,
    verify_optimal,
)
from doptfact.seeding import make_rng


@pytest.fixture(scope="module")
def example31_weights(x23):
    spec = ModelSpec(k=3)
    prior = PriorSpec((Uniform(-3, 3), Uniform(0, 3), Uniform(0, 3), Uniform(0, 3)))
    return expected_weights(spec, x23, prior, QuadratureConfig()).w


class TestLiftOne:
    def test_degenerate_symmetric_case_all_weights_equal(self, x23):
        # one dominant main effect with symmetric link: all weights coincide,
        # so the uniform allocation attains the optimum
        spec = ModelSpec(k=3)
        w = weights(spec, x23, np.array([0.0, 3.0, 0.0, 0.0]))
        assert np.allclose(w, w[0])
        rep = lift_one(x23, w, OptimizerConfig(seed=1, mode="lift_one"))
        uniform_val = det_objective(x23, w, np.full(8, 1 / 8))
        assert rep.objective == pytest.approx(uniform_val, rel=1e-9)

    def test_expected_weight_design_is_uniform_on_middle_rows(self, x23, example31_weights):
        rep = lift_one(x23, example31_weights, OptimizerConfig(seed=0, mode="lift_one"))
        expect = np.array([0, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 0])
        assert np.allclose(rep.allocation, expect, atol=1e-9)

    def test_equal_weights_match_uniform_objective(self, x24):
        w = np.full(16, 0.2)
        rep = lift_one(x24, w, OptimizerConfig(seed=3, mode="lift_one"))
        assert rep.objective == pytest.approx(
            det_objective(x24, w, np.full(16, 1 / 16)), rel=1e-9)

    def test_inestimable_raises(self, x23):
        w = np.zeros(8)
        w[:3] = 1.0  # fewer than d+1 positive weights
        with pytest.raises(EstimabilityError):
            lift_one(x23, w, OptimizerConfig(seed=0, mode="lift_one"))


class TestLiftOneModified:
    def test_at_least_as_good_as_plain(self):
        for seed in range(15):
            spec, X, w, p = random_instance(seed, allow_zero_w=False)
            a = lift_one(X, w, OptimizerConfig(seed=seed, mode="lift_one"))
            b = lift_one_modified(X, w, OptimizerConfig(seed=seed))
            assert b.objective >= a.objective - 1e-9 * max(a.objective, 1e-30)

    def test_minimally_supported_threshold_2x2(self, x22):
        # uniform design on rows {1,2,3} is optimal iff 1/w1+1/w2+1/w3 <= 1/w4
        for c, expect_minimal in ((0.2, True), (1 / 3, True), (0.4, False)):
            w = np.array([1.0, 1.0, 1.0, c])
            rep = lift_one_modified(x22, w, OptimizerConfig(seed=5))
            minimal = np.allclose(
                rep.allocation, [1 / 3, 1 / 3, 1 / 3, 0.0], atol=1e-9)
            assert minimal == expect_minimal, (c, rep.allocation)

    def test_fixed_point_verifies(self):
        for seed in range(30):
            spec, X, w, p = random_instance(seed, allow_zero_w=False)
            rep = lift_one_modified(X, w, OptimizerConfig(seed=seed))
            v = verify_optimal(X, w, rep.allocation, tol=1e-7)
            assert v.optimal, (seed, v.max_violation)

    def test_monotone_and_deterministic(self, x23):
        spec = ModelSpec(k=3)
        w = weights(spec, x23, np.array([0.5, 1.2, -0.8, 0.3]))
        cfg = OptimizerConfig(seed=99)
        r1 = lift_one_modified(x23, w, cfg)
        r2 = lift_one_modified(x23, w, cfg)
        assert np.array_equal(r1.allocation, r2.allocation)
        assert r1.objective == r2.objective
        assert r1.rounds_used == r2.rounds_used

    def test_scale_equivariance(self, x23):
        spec = ModelSpec(k=3)
        w = weights(spec, x23, np.array([0.5, 1.2, -0.8, 0.3]))
        c = 7.3
        r1 = lift_one_modified(x23, w, OptimizerConfig(seed=4))
        r2 = lift_one_modified(x23, c * w, OptimizerConfig(seed=4))
        assert np.allclose(r1.allocation, r2.allocation, atol=1e-9)
        assert r2.objective == pytest.approx(c**4 * r1.objective, rel=1e-10)

    def test_user_supplied_start(self, x22):
        w = np.array([0.9, 0.7, 0.5, 0.3])
        start = (0.4, 0.3, 0.2, 0.1)
        cfg = OptimizerConfig(seed=0, start="user_supplied", start_alloc=start)
        rep = lift_one_modified(x22, w, cfg)
        assert rep.converged


class TestExchangeReal:
    def test_two_point_toy_symmetric_optimum(self):
        spec = ModelSpec(k=1, effects=((), (1,)))
        X = build_design_matrix(spec)
        w = np.array([1.0, 1.0])
        cfg = OptimizerConfig(seed=0, mode="exchange_real",
                              start="user_supplied", start_alloc=(0.3, 0.7))
        rep = exchange_real(X, w, cfg)
        assert np.allclose(rep.allocation, [0.5, 0.5], atol=1e-9)

    def test_matches_lift_one_objective(self):
        for seed in range(12):
            spec, X, w, p = random_instance(seed, k_max=3, allow_zero_w=False)
            a = lift_one_modified(X, w, OptimizerConfig(seed=seed))
            b = exchange_real(X, w, OptimizerConfig(seed=seed, mode="exchange_real"))
            assert b.objective == pytest.approx(a.objective, rel=1e-8)

    def test_zero_budget_pairs_left_untouched(self, x23, example31_weights):
        # start on a design whose first and last coordinates are zero; the
        # (1, 8) pair has zero budget and must be skipped, not crash
        start = np.array([0, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 0])
        cfg = OptimizerConfig(seed=0, mode="exchange_real",
                              start="user_supplied", start_alloc=tuple(start))
        rep = exchange_real(x23, example31_weights, cfg)
        assert rep.converged
        assert rep.allocation[0] == 0.0 and rep.allocation[7] == 0.0


class TestExchangeInt:
    def test_minimal_total_one_unit_per_support_point(self, x23):
        rng = make_rng(8)
        w = rng.uniform(0.3, 1.0, 8)
        rep = exchange_int(x23, w, 4, OptimizerConfig(seed=8))
        assert rep.allocation.sum() == 4
        assert rep.support_size == 4
        assert set(np.unique(rep.allocation)) <= {0, 1}

    def test_exhaustive_small_case(self, x22):
        def exhaustive(w, total):
            best = -1.0
            for combo in itertools.combinations_with_replacement(range(4), total):
                n = np.bincount(combo, minlength=4).astype(float)
                best = max(best, det_objective(x22, w, n))
            return best

        for seed in range(10):
            rng = make_rng(seed)
            w = rng.uniform(0.1, 1.0, 4)
            for total in (3, 4, 5, 6):
                rep = exchange_int(x22, w, total, OptimizerConfig(seed=seed))
                assert rep.objective == pytest.approx(exhaustive(w, total), rel=1e-12)

    def test_odor_study_ew_allocation_objective(self, x24):
        # EW setting of the odor experiment: 40 runs; the search must match
        # or beat the reference 13-point allocation
        spec = ModelSpec(k=4)
        prior = PriorSpec((Uniform(-3, 3), Uniform(0, 3), Uniform(-3, 3),
                           Uniform(0, 3), Uniform(0, 3)))
        ew = expected_weights(spec, x24, prior, QuadratureConfig()).w
        reference = np.array([0, 3, 4, 3, 0, 4, 3, 3, 4, 3, 2, 1, 3, 3, 4, 0],
                             dtype=float)
        assert reference.sum() == 40
        rep = exchange_int(x24, ew, 40, OptimizerConfig(seed=0))
        assert rep.objective >= det_objective(x24, ew, reference) * (1 - 1e-8)

    def test_n_total_below_d_plus_one_rejected(self, x23):
        with pytest.raises(ValidationError):
            exchange_int(x23, np.ones(8), 3, OptimizerConfig(seed=0))


class TestVerifyOptimal:
    def test_optimizer_output_passes(self):
        for seed in range(10):
            spec, X, w, _ = random_instance(seed, allow_zero_w=False)
            rep = lift_one_modified(X, w, OptimizerConfig(seed=seed))
            assert rep.verification.optimal

    def test_uniform_with_asymmetric_weights_violates_at_extremes(
            self, x23, example31_weights):
        v = verify_optimal(x23, example31_weights, np.full(8, 1 / 8))
        assert not v.optimal
        assert v.tags[0] == "violated" and v.tags[7] == "violated"

    def test_oversized_coordinate_flagged(self, x22):
        w = np.ones(4)
        p = np.array([0.5, 0.3, 0.1, 0.1])  # p_1 > 1/(d+1) = 1/3
        v = verify_optimal(x22, w, p)
        assert v.tags[0] == "violated"

    def test_singular_allocation_rejected(self, x22):
        p = np.array([0.5, 0.5, 0.0, 0.0])
        with pytest.raises(EstimabilityError):
            verify_optimal(x22, np.ones(4), p)


class TestVerifyMinimallySupported:
    def test_2x2_closed_form(self, x22):
        rng = make_rng(17)
        for _ in range(300):
            w = rng.uniform(0.05, 1.0, 4)
            v = 1.0 / w
            closed = v[0] + v[1] + v[2] <= v[3]
            assert verify_minimally_supported(x22, w, [0, 1, 2]) == closed

    def test_2x3_closed_form(self, x23):
        rng = make_rng(18)
        I = [0, 3, 5, 6]
        for _ in range(300):
            w = rng.uniform(0.05, 1.0, 8)
            v = 1.0 / w
            closed = v[0] + v[3] + v[5] + v[6] <= 4 * min(v[1], v[2], v[4], v[7])
            assert verify_minimally_supported(x23, w, I) == closed

    def test_agreement_with_characterization(self, x23):
        rng = make_rng(19)
        I = [0, 3, 5, 6]
        p = np.zeros(8)
        p[I] = 0.25
        for _ in range(200):
            w = rng.uniform(0.05, 1.0, 8)
            direct = verify_minimally_supported(x23, w, I)
            via_characterization = verify_optimal(x23, w, p, tol=1e-9).optimal
            assert direct == via_characterization

    def test_singular_support_rejected(self, x23):
        with pytest.raises(EstimabilityError):
            verify_minimally_supported(x23, np.ones(8), [0, 1, 2, 3])

    def test_requires_positive_weights(self, x22):
        w = np.array([1.0, 1.0, 1.0, 0.0])
        with pytest.raises(ValidationError):
            verify_minimally_supported(x22, w, [0, 1, 2])


def test_max_det_support_2e3(x23):
    support, det2 = max_det_support(x23)
    assert det2 == pytest.approx(256.0, rel=1e-12)
    assert support in ((0, 3, 5, 6), (1, 2, 4, 7))
