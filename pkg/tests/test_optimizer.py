import numpy as np
import pytest

import covdesign as cd
from covdesign.optimizer import gradient_from_root, objective_from_root
from conftest import random_unit_rows


class TestProjectRows:
    def test_three_four_five(self):
        out = cd.project_rows(np.array([[3.0, 4.0], [0.0, 2.0]]))
        assert np.allclose(out[0], [0.6, 0.8])

    def test_unit_rows_are_a_fixed_point(self):
        r = random_unit_rows(4, seed=0)
        assert np.abs(cd.project_rows(r) - r).max() <= 1e-15

    def test_zero_row_falls_back_to_basis_vector(self):
        r = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
        out = cd.project_rows(r)
        assert np.array_equal(out[1], [0.0, 1.0, 0.0])
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0)


class TestCovarianceFromRoot:
    def test_identity(self):
        assert np.allclose(cd.covariance_from_root(np.eye(3)), 0.25 * np.eye(3))

    def test_identical_rows_hit_quarter(self):
        r = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert cd.covariance_from_root(r)[0, 1] == pytest.approx(0.25)

    def test_half_inner_product(self):
        r = np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        assert cd.covariance_from_root(r)[0, 1] == pytest.approx(1 / 12, abs=1e-15)

    def test_constraints_hold_for_random_roots(self):
        for seed in range(3):
            cov = cd.covariance_from_root(random_unit_rows(5, seed=seed))
            assert cd.is_valid_covariance(cov)


class TestGradient:
    def test_matches_central_finite_differences(self, sbm4):
        graph, clustering = sbm4
        summary = cd.build_cluster_summary(graph, clustering)
        r = random_unit_rows(4, seed=100)
        grad = gradient_from_root(r, summary, 1.0)
        rng = np.random.default_rng(5)
        step = 1e-5
        for _ in range(20):
            i, j = rng.integers(0, 4, size=2)
            basis = np.zeros((4, 4))
            basis[i, j] = step
            f_plus = objective_from_root(r + basis, summary, 1.0)[0]
            f_minus = objective_from_root(r - basis, summary, 1.0)[0]
            fd = (f_plus - f_minus) / (2 * step)
            denom = max(abs(fd), abs(grad[i, j]), 1e-12 * np.abs(grad).max())
            assert abs(fd - grad[i, j]) / denom <= 1e-4

    def test_edgeless_graph_is_stationary(self):
        graph = cd.Graph(4, np.empty((0, 2), dtype=np.int64))
        summary = cd.build_cluster_summary(graph, cd.Clustering([0, 0, 1, 1], 2))
        grad = gradient_from_root(np.eye(2), summary, 1.0)
        assert np.array_equal(grad, np.zeros((2, 2)))

    def test_variance_part_scales_with_omega_weight(self, sbm4):
        # the omega weight enters as (omega^2 + 4): 4, 8, 16 along this series
        graph, clustering = sbm4
        summary = cd.build_cluster_summary(graph, clustering)
        r = random_unit_rows(4, seed=101)
        g0 = gradient_from_root(r, summary, 0.0)
        g2 = gradient_from_root(r, summary, 2.0)
        g12 = gradient_from_root(r, summary, np.sqrt(12.0))
        assert np.allclose(g12 - g2, 2.0 * (g2 - g0), rtol=1e-12)
        v0 = objective_from_root(r, summary, 0.0)[2]
        v2 = objective_from_root(r, summary, 2.0)[2]
        assert v2 == pytest.approx(2.0 * v0, rel=1e-14)


class TestOptimize:
    def test_edgeless_objective_is_flat_and_start_is_returned(self):
        graph = cd.Graph(4, np.empty((0, 2), dtype=np.int64))
        summary = cd.build_cluster_summary(graph, cd.Clustering([0, 1, 2, 3], 4))
        root, trace = cd.optimize(summary, cd.OptimizerConfig(iterations=50))
        assert np.array_equal(root, np.eye(4))
        assert trace.objective[0] == 0.0 and trace.objective[-1] == 0.0

    def test_path_graph_improves_within_500_iterations(self, path_summary):
        _, trace = cd.optimize(path_summary, cd.OptimizerConfig(iterations=500))
        assert trace.objective[-1] < trace.objective[0]

    def test_two_joined_clusters_matches_sweep_oracle(self):
        # two clusters, every edge crossing: complete bipartite on 5 + 5
        edges = [(u, v) for u in range(5) for v in range(5, 10)]
        graph = cd.Graph(10, edges)
        clustering = cd.Clustering([0] * 5 + [1] * 5, 2)
        summary = cd.build_cluster_summary(graph, clustering)

        # 1-d oracle: sweep the pair correlation r and minimize directly
        rs = np.linspace(-1.0, 1.0, 40001)
        best_f = np.inf
        best_r = None
        for r in rs:
            cov = np.array([[0.25, np.arcsin(r) / (2 * np.pi)],
                            [np.arcsin(r) / (2 * np.pi), 0.25]])
            f = cd.objective_f(summary, cov, 1.0)
            if f < best_f:
                best_f, best_r = f, r
        # the minimizer saturates at full anti-correlation: the degree-weighted
        # variance term outweighs the bias term on every two-cluster instance
        assert best_r == pytest.approx(-1.0, abs=1e-4)

        root, trace = cd.optimize(summary, cd.OptimizerConfig(iterations=2000))
        gram = root @ root.T
        assert gram[0, 1] < -0.99
        assert trace.objective[-1] == pytest.approx(best_f, rel=1e-3)

    def test_constraints_hold_at_every_traced_iterate(self, sbm5):
        graph, clustering = sbm5
        summary = cd.build_cluster_summary(graph, clustering)
        _, trace = cd.optimize(summary, cd.OptimizerConfig(iterations=300),
                               collect_roots=True)
        for r in trace.roots:
            assert np.abs(np.linalg.norm(r, axis=1) - 1.0).max() <= 1e-12
            cov = cd.covariance_from_root(r)
            assert np.abs(np.diag(cov) - 0.25).max() == 0.0
            assert np.abs(cov).max() <= 0.25 + 1e-12

    def test_objective_decomposition_identity_along_trace(self, sbm5):
        graph, clustering = sbm5
        summary = cd.build_cluster_summary(graph, clustering)
        _, trace = cd.optimize(summary, cd.OptimizerConfig(iterations=200))
        for f, bias, variance in zip(trace.objective, trace.bias_term,
                                     trace.variance_term):
            assert f == pytest.approx(bias + variance, abs=1e-10 * max(1.0, f))

    def test_deterministic_rerun_is_bitwise_identical(self, sbm4):
        graph, clustering = sbm4
        summary = cd.build_cluster_summary(graph, clustering)
        config = cd.OptimizerConfig(iterations=150)
        r1, t1 = cd.optimize(summary, config)
        r2, t2 = cd.optimize(summary, config)
        assert np.array_equal(r1, r2)
        assert t1.objective == t2.objective

    def test_warm_start_shape_checked(self, path_summary):
        with pytest.raises(ValueError, match="expected"):
            cd.optimize(path_summary, r0=np.eye(3))

    def test_trace_final_entry_matches_returned_root(self, path_summary):
        root, trace = cd.optimize(path_summary, cd.OptimizerConfig(iterations=123,
                                                                   trace_stride=10),
                                  collect_roots=True)
        assert trace.iterations[-1] == 123
        assert np.array_equal(trace.roots[-1], root)
        f, _, _, _ = objective_from_root(root, path_summary, 1.0)
        assert trace.objective[-1] == f


class TestOptimizerConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            cd.OptimizerConfig(iterations=0)
        with pytest.raises(ValueError):
            cd.OptimizerConfig(step_size=-1.0)
        with pytest.raises(ValueError):
            cd.OptimizerConfig(beta1=1.5)
        with pytest.raises(ValueError):
            cd.OptimizerConfig(omega=-0.5)
