import math

import numpy as np
import pytest

from cpd.detect import (
    cluster_detections,
    detect_pipeline,
    hausdorff_distance,
    naive_jump_set,
    round_offset,
    screen_group,
    screen_scalar,
)
from cpd.errors import EmptySetError, ValidationError
from cpd.signal import NoiseSpec, make_signal, sample_observation, signal_stats


class TestHausdorff:
    def test_identical_singletons(self):
        assert hausdorff_distance({3}, {3}) == 0.0

    def test_asymmetric_coverage(self):
        # d({10,20},{12}) = 2 but d({12},{10,20}) = 8
        assert hausdorff_distance({10, 20}, {12}) == 8.0

    def test_symmetry_and_identity_random(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            a = set(rng.integers(0, 100, size=rng.integers(1, 8)).tolist())
            b = set(rng.integers(0, 100, size=rng.integers(1, 8)).tolist())
            assert hausdorff_distance(a, b) == hausdorff_distance(b, a)
            assert hausdorff_distance(a, a) == 0.0

    def test_triangle_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b, c = (
                set(rng.integers(0, 60, size=rng.integers(1, 6)).tolist()) for _ in range(3)
            )
            assert hausdorff_distance(a, c) <= (
                hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12
            )

    def test_empty_rejected(self):
        with pytest.raises(EmptySetError):
            hausdorff_distance(set(), {1})
        with pytest.raises(EmptySetError):
            hausdorff_distance({1}, set())


class TestScreenScalar:
    def test_band_around_single_jump(self):
        xhat = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        res = screen_scalar(xhat, offset=2, threshold=0.5)
        assert res.detected == (4, 5, 6, 7)

    def test_constant_input_detects_nothing(self):
        res = screen_scalar(np.ones(20), offset=3, threshold=0.1)
        assert res.detected == ()

    def test_threshold_above_max_gap(self):
        xhat = np.array([0.0] * 5 + [1.0] * 5)
        assert screen_scalar(xhat, 2, 1.5).detected == ()

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        xhat = rng.standard_normal(30)
        a = screen_scalar(xhat, 4, 0.8).detected
        b = screen_scalar(xhat + 17.5, 4, 0.8).detected
        assert a == b

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(4)
        xhat = np.cumsum(rng.standard_normal(50)) * 0.3
        prev = None
        for thr in [0.1, 0.3, 0.9, 2.7]:
            cur = set(screen_scalar(xhat, 3, thr).detected)
            if prev is not None:
                assert cur <= prev
            prev = cur

    def test_offset_validation(self):
        with pytest.raises(ValidationError):
            screen_scalar(np.zeros(10), 0, 1.0)
        with pytest.raises(ValidationError):
            screen_scalar(np.zeros(10), 5, 1.0)
        with pytest.raises(ValidationError):
            screen_scalar(np.zeros(10), 2, 0.0)


class TestScreenGroup:
    def test_p1_reduces_to_scalar(self):
        rng = np.random.default_rng(5)
        xhat = rng.standard_normal(40)
        a = screen_scalar(xhat, 5, 0.6).detected
        b = screen_group(xhat[:, None], 5, 0.6).detected
        assert a == b

    def test_zero_matrix(self):
        assert screen_group(np.zeros((12, 3)), 2, 0.5).detected == ()

    def test_unit_jump_band(self):
        sig = make_signal(10, [1, 6], [(0.0, 0.0), (0.6, 0.8)])  # jump norm 1
        res = screen_group(sig.materialize(), 2, 0.5)
        assert res.detected == (4, 5, 6, 7)


class TestNaiveJumpSet:
    def test_exact_two_level(self):
        sig = make_signal(8, [1, 5], [0.0, 2.0])
        assert naive_jump_set(sig.materialize(), 1e-9) == (4,)

    def test_constant(self):
        assert naive_jump_set(np.zeros(6), 1e-9) == ()

    def test_group_rows(self):
        sig = make_signal(6, [1, 4], [(0.0, 0.0), (1.0, 1.0)])
        assert naive_jump_set(sig.materialize(), 1e-9) == (3,)

    def test_staircase_overdetects_under_noise(self):
        # observed, not asserted exactly: moderate-lam staircase solutions
        # typically carry more jumps than the truth
        from cpd.solver1d import solve_fused_lasso

        sig = make_signal(300, [1, 101, 201], [0.0, 1.5, 3.0])
        obs = sample_observation(sig, NoiseSpec(sigma=0.5, seed=100))
        sol = solve_fused_lasso(obs.y, 5.0)
        found = naive_jump_set(sol.xhat, 1e-8 * (1 + np.max(np.abs(sol.xhat))))
        assert len(found) >= 2  # sanity: it reacts; usually > K-1


class TestClusterDetections:
    def test_merges_runs(self):
        assert cluster_detections((4, 5, 6, 7, 12, 13)) == (5, 12)

    def test_empty(self):
        assert cluster_detections(()) == ()

    def test_singletons(self):
        assert cluster_detections((3, 9)) == (3, 9)


class TestExactSignalCombinatorics:
    def test_band_within_two_offsets(self):
        # for clean materialized signals with 2*offset < min segment length,
        # the screen band and the truth cover each other within 2*offset
        rng = np.random.default_rng(7)
        for _ in range(30):
            k = int(rng.integers(2, 6))
            lengths = rng.integers(3, 25, size=k)
            n = int(lengths.sum())
            cps = [1] + list(np.cumsum(lengths[:-1]) + 1)
            levels = []
            prev = 0.0
            for _ in range(k):
                step = float(rng.uniform(0.5, 2.0)) * (1 if rng.random() < 0.5 else -1)
                prev += step
                levels.append(prev)
            sig = make_signal(n, cps, levels)
            stats = signal_stats(sig)
            w = stats.min_segment_length
            delta = int(rng.integers(1, max(2, (w - 1) // 2 + 1)))
            res = screen_scalar(sig.materialize(), delta, stats.min_jump / 2)
            truth = sig.detectable_set
            assert res.detected, "every jump must produce detections"
            for cp in truth:
                assert min(abs(i - cp) for i in res.detected) <= 2 * delta
            for i in res.detected:
                assert min(abs(i - cp) for cp in truth) <= 2 * delta


class TestRoundOffset:
    def test_half_rounds_up_and_floors_at_one(self):
        assert round_offset(18.5) == 19
        assert round_offset(0.2) == 1
        assert round_offset(2.49) == 2


class TestDetectPipeline:
    def test_low_noise_scalar_run(self):
        sig = make_signal(1200, [1, 401, 801], [0.0, 2.0, 4.0])  # staircase
        stats = signal_stats(sig)
        obs = sample_observation(sig, NoiseSpec(sigma=0.1, seed=5))
        res = detect_pipeline(obs.y, 0.1, 10.0, stats)
        assert not res.is_empty
        env = 0.2 * math.sqrt(math.log(1200) + math.log(10))
        c = 2 * math.sqrt(400) / (8 * env)
        assert res.dh_to_truth <= 400 / (2 * c**2)

    def test_single_segment_rejected(self):
        sig = make_signal(50, [1], [1.0])
        with pytest.raises(ValidationError):
            detect_pipeline(sig.materialize(), 0.1, 10.0, signal_stats(sig))

    def test_low_noise_group_run(self):
        sig = make_signal(600, [1, 301], [(0.0, 0.0), (2.0, 0.0)])
        stats = signal_stats(sig)
        obs = sample_observation(sig, NoiseSpec(sigma=0.05, seed=6))
        res = detect_pipeline(obs.y, 0.05, 10.0, stats, group=True)
        assert not res.is_empty
        assert res.dh_to_truth <= res.offset_used * 2 + 1e-12

    def test_weak_group_signal_rejected(self):
        sig = make_signal(60, [1, 31], [(0.0, 0.0), (0.01, 0.0)])
        stats = signal_stats(sig)
        with pytest.raises(ValidationError, match="weak"):
            detect_pipeline(sig.materialize(), 1.0, 10.0, stats, group=True)
