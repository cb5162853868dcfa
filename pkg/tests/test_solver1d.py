import numpy as np
import pytest

from cpd.errors import ValidationError
from cpd.solver1d import (
    AnchoredProblem,
    fused_objective,
    kkt_residual,
    oracle_fused_lasso,
    solve_anchored,
    solve_fused_lasso,
)


class TestSolveFusedLasso:
    def test_lambda_zero_returns_input_exactly(self):
        y = np.array([0.3, -1.7, 2.2, 0.0, 5.5])
        sol = solve_fused_lasso(y, 0.0)
        assert np.array_equal(sol.xhat, y)
        assert sol.objective == 0.0
        assert sol.kkt_residual == 0.0

    def test_two_point_fusion(self):
        # stationarity of the fused value c: 2(c-1) + 2(c-3) = 0 -> c = 2,
        # feasible subgradient exists iff lam >= 2
        sol = solve_fused_lasso([1.0, 3.0], 2.0)
        assert sol.xhat == pytest.approx([2.0, 2.0], abs=1e-9)
        assert sol.kkt_residual <= 1e-7

    def test_symmetric_four_point(self):
        # symmetry reduces to min over a of 4(a-1)^2 + a -> a = 7/8
        sol = solve_fused_lasso([1.0, 1.0, -1.0, -1.0], 0.5)
        assert sol.xhat == pytest.approx([0.875, 0.875, -0.875, -0.875], abs=1e-9)
        assert sol.jump_set == (2,)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            solve_fused_lasso([1.0, np.nan], 1.0)
        with pytest.raises(ValidationError):
            solve_fused_lasso([1.0, 2.0], -0.5)
        with pytest.raises(ValidationError):
            solve_fused_lasso([], 1.0)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(11)
        for k in range(40):
            n = int(rng.integers(1, 13))
            y = rng.uniform(-2, 2, n)
            lam = [0.1, 0.5, 1.0, 5.0][k % 4]
            sol = solve_fused_lasso(y, lam)
            ora = oracle_fused_lasso(y, lam, tol=1e-14)
            assert np.max(np.abs(sol.xhat - ora)) <= 1e-6
            assert sol.kkt_residual <= 1e-7

    def test_shift_equivariance(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(30)
        base = solve_fused_lasso(y, 1.3).xhat
        shifted = solve_fused_lasso(y + 4.25, 1.3).xhat
        assert shifted == pytest.approx(base + 4.25, abs=1e-9)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(25)
        alpha = 3.5
        base = solve_fused_lasso(y, 0.8).xhat
        scaled = solve_fused_lasso(alpha * y, alpha * 0.8).xhat
        assert scaled == pytest.approx(alpha * base, abs=1e-8)

    def test_total_variation_monotone_in_lambda(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal(60)
        tvs = [
            float(np.sum(np.abs(np.diff(solve_fused_lasso(y, lam).xhat))))
            for lam in [0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0]
        ]
        assert all(a >= b - 1e-10 for a, b in zip(tvs, tvs[1:]))

    def test_constant_saturation_verified_by_kkt(self):
        rng = np.random.default_rng(8)
        y = rng.standard_normal(40)
        lam_star = 2.0 * float(np.max(np.abs(np.cumsum(y - y.mean()))))
        const = np.full(40, y.mean())
        # the constant candidate is certified optimal at lam_star ...
        assert kkt_residual(y, lam_star, const) <= 1e-9
        # ... and the solver lands on it
        sol = solve_fused_lasso(y, lam_star + 1.0)
        assert sol.xhat == pytest.approx(const, abs=1e-9)
        assert sol.jump_set == ()

    def test_objective_beats_random_perturbations(self):
        rng = np.random.default_rng(9)
        y = rng.standard_normal(20)
        sol = solve_fused_lasso(y, 0.7)
        assert sol.objective <= fused_objective(y, y, 0.7) + 1e-12  # y is feasible
        for _ in range(100):
            z = sol.xhat + rng.uniform(-0.1, 0.1, 20)
            assert sol.objective <= fused_objective(y, z, 0.7) + 1e-12


class TestSolveAnchored:
    def test_zero_everything(self):
        prob = AnchoredProblem(y=np.zeros(5), a=0.0, b=0.0, lam=3.0)
        sol = solve_anchored(prob)
        assert sol.xhat == pytest.approx(np.zeros(5), abs=1e-12)

    def test_lambda_zero_ignores_anchors(self):
        y = np.array([1.0, -2.0, 0.5])
        sol = solve_anchored(AnchoredProblem(y=y, a=100.0, b=-100.0, lam=0.0))
        assert np.array_equal(sol.xhat, y)

    def test_single_point_soft_threshold(self):
        # minimize (x-4)^2 + |x| + |x| -> 2(x-4) + 2 = 0 -> x = 3
        sol = solve_anchored(AnchoredProblem(y=np.array([4.0]), a=0.0, b=0.0, lam=1.0))
        assert sol.xhat == pytest.approx([3.0], abs=1e-9)
        assert sol.kkt_residual <= 1e-9

    def test_one_sided_anchor(self):
        # only the right anchor: minimize (x-4)^2 + 2|x - 1| -> x = 3
        sol = solve_anchored(AnchoredProblem(y=np.array([4.0]), a=None, b=1.0, lam=2.0))
        assert sol.xhat == pytest.approx([3.0], abs=1e-9)

    def test_anchored_tends_to_y_for_small_lambda(self):
        rng = np.random.default_rng(12)
        y = rng.standard_normal(15)
        mean = float(y.mean())
        prev = np.inf
        for lam in [1.0, 0.1, 0.01, 1e-4, 1e-7]:
            sol = solve_anchored(AnchoredProblem(y=y, a=mean, b=mean, lam=lam))
            err = float(np.max(np.abs(sol.xhat - y)))
            assert err <= prev + 1e-12
            prev = err
        assert prev <= 1e-6

    def test_matches_bruteforce_objective(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            y = rng.uniform(-2, 2, n)
            prob = AnchoredProblem(y=y, a=float(rng.uniform(-2, 2)), b=float(rng.uniform(-2, 2)), lam=float(rng.uniform(0.05, 2)))
            sol = solve_anchored(prob)
            assert sol.kkt_residual <= 1e-8
            for _ in range(50):
                z = sol.xhat + rng.uniform(-0.2, 0.2, n)
                zobj = fused_objective(y, z, prob.lam) + prob.lam * (
                    abs(z[0] - prob.a) + abs(z[-1] - prob.b)
                )
                assert sol.objective <= zobj + 1e-12


class TestKktResidual:
    def test_zero_at_unregularized_optimum(self):
        y = np.array([1.0, 2.0, -1.0])
        assert kkt_residual(y, 0.0, y) == 0.0

    def test_shifted_candidate_has_gradient_residual(self):
        y = np.array([0.5, 1.5, -0.5, 2.0])
        assert kkt_residual(y, 0.0, y + 1.0) == pytest.approx(2.0, abs=1e-9)

    def test_solver_outputs_certified(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            y = rng.standard_normal(int(rng.integers(2, 40)))
            lam = float(rng.uniform(0, 3))
            sol = solve_fused_lasso(y, lam)
            assert kkt_residual(y, lam, sol.xhat) <= 1e-7

    def test_detects_suboptimal_candidates(self):
        y = np.array([1.0, 3.0])
        # candidate [1, 3] at lam = 2 is not optimal (optimum is [2, 2])
        assert kkt_residual(y, 2.0, y) > 0.1

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            kkt_residual([1.0, 2.0], 1.0, [1.0])


class TestOracle:
    def test_lambda_zero(self):
        y = np.array([3.0, 1.0, 4.0])
        assert np.array_equal(oracle_fused_lasso(y, 0.0), y)

    def test_two_point(self):
        assert oracle_fused_lasso([1.0, 3.0], 2.0, tol=1e-14) == pytest.approx([2.0, 2.0], abs=1e-6)

    def test_agrees_with_dp_seeded_instance(self):
        rng = np.random.default_rng(77)
        y = rng.standard_normal(8)
        ora = oracle_fused_lasso(y, 1.0, tol=1e-14)
        sol = solve_fused_lasso(y, 1.0)
        assert np.max(np.abs(sol.xhat - ora)) <= 1e-6

    def test_rejects_large_instances_and_bad_tol(self):
        with pytest.raises(ValidationError):
            oracle_fused_lasso(np.zeros(65), 1.0)
        with pytest.raises(ValidationError):
            oracle_fused_lasso(np.zeros(5), 1.0, tol=0.0)


class TestThirdPartyCrossCheck:
    def test_against_cvxpy(self):
        cp = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(21)
        for lam in [0.3, 2.0]:
            y = rng.uniform(-2, 2, 12)
            x = cp.Variable(12)
            obj = cp.Minimize(cp.sum_squares(x - y) + lam * cp.sum(cp.abs(cp.diff(x))))
            cp.Problem(obj).solve(solver="CLARABEL")
            sol = solve_fused_lasso(y, lam)
            assert np.max(np.abs(sol.xhat - x.value)) <= 1e-5
