import numpy as np
import pytest
from numpy.testing import assert_allclose

from kdiffnet.knowledge import (
    EdgeGroupSet,
    NodeGroupSet,
    expand_node_groups,
    kev_dual_norm,
)
from kdiffnet.solvers import (
    DifferentialNetwork,
    SolverConfig,
    solve_diffee,
    solve_kdiffnet_e,
    solve_kdiffnet_eg,
    solve_kdiffnet_g,
    solve_kdiffnet_multi,
)

from oracles import solve_program_oracle


def random_backward(rng, p):
    b = rng.standard_normal((p, p))
    return (b + b.T) / 2


def random_weights(rng, p, lo=0.4, hi=2.0):
    w = rng.uniform(lo, hi, size=(p, p))
    return (w + w.T) / 2


class TestDiffee:
    def test_entrywise_threshold(self):
        b = np.array([[0.9]])
        assert_allclose(solve_diffee(b, 0.4).delta, [[0.5]])

    def test_equals_edge_solver_with_unit_weights(self):
        rng = np.random.default_rng(50)
        b = random_backward(rng, 12)
        d1 = solve_diffee(b, 0.3).delta
        d2 = solve_kdiffnet_e(b, np.ones((12, 12)), 0.3).delta
        assert_allclose(d1, d2, atol=0)

    def test_full_shrinkage(self):
        rng = np.random.default_rng(51)
        b = random_backward(rng, 6)
        net = solve_diffee(b, np.abs(b).max() + 0.1)
        assert_allclose(net.delta, np.zeros((6, 6)))

    def test_off_diagonal_only_keeps_diagonal(self):
        b = np.diag([5.0, -3.0]) + np.array([[0.0, 0.2], [0.2, 0.0]])
        net = solve_diffee(b, 1.0, off_diagonal_only=True)
        assert_allclose(np.diag(net.delta), [5.0, -3.0])
        assert_allclose(net.delta[0, 1], 0.0)


class TestKdiffnetE:
    def test_direct_formula(self):
        b = np.array([[1.0]])
        w = np.array([[0.6]])
        assert_allclose(solve_kdiffnet_e(b, w, 1.0).delta, [[0.4]])

    def test_zero_input(self):
        net = solve_kdiffnet_e(np.zeros((4, 4)), np.ones((4, 4)), 0.5)
        assert_allclose(net.delta, np.zeros((4, 4)))
        assert net.objective == 0.0

    def test_exact_feasibility(self):
        rng = np.random.default_rng(52)
        b = random_backward(rng, 8)
        w = random_weights(rng, 8)
        lam = 0.25
        net = solve_kdiffnet_e(b, w, lam)
        assert np.abs((net.delta - b) / w).max() <= lam + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            solve_kdiffnet_e(np.zeros((3, 3)), np.ones((2, 2)), 0.1)


class TestKdiffnetG:
    def test_block_shrinkage(self):
        eg = EdgeGroupSet(2, [[(0, 0), (0, 1), (1, 0), (1, 1)]])
        b = np.array([[3.0, 4.0], [0.0, 0.0]])
        net = solve_kdiffnet_g(b, eg, 2.5)
        assert_allclose(net.delta, [[1.5, 2.0], [0.0, 0.0]])

    def test_small_group_zeroed(self):
        eg = EdgeGroupSet(2, [[(0, 0), (0, 1), (1, 0), (1, 1)]])
        b = np.array([[0.3, 0.4], [0.0, 0.0]])
        net = solve_kdiffnet_g(b, eg, 2.5)
        assert_allclose(net.delta, np.zeros((2, 2)))

    def test_all_singletons_equals_unweighted_entrywise(self):
        rng = np.random.default_rng(53)
        b = random_backward(rng, 7)
        eg = EdgeGroupSet(7, [], singleton_complement=True)
        t = 0.35
        got = solve_kdiffnet_g(b, eg, t).delta
        ref = solve_kdiffnet_e(b, np.ones((7, 7)), t).delta
        assert_allclose(got, ref, atol=1e-14)


def small_instance(seed, p=4, group_nodes=2):
    rng = np.random.default_rng(seed)
    b = random_backward(rng, p)
    w = random_weights(rng, p)
    eg = expand_node_groups(NodeGroupSet([tuple(range(group_nodes))], p))
    return b, w, eg


class TestKdiffnetEG:
    def test_zero_backward_is_zero_fixed_point(self):
        p = 5
        eg = expand_node_groups(NodeGroupSet([(0, 1)], p))
        cfg = SolverConfig(lambda_n=0.2, eps=1.0, max_iter=50, tol=1e-9)
        net = solve_kdiffnet_eg(np.zeros((p, p)), np.ones((p, p)), eg, cfg)
        assert_allclose(net.delta, np.zeros((p, p)), atol=1e-12)
        assert net.converged
        assert net.iterations_run <= 2

    def test_decomposition_sums_to_delta(self):
        b, w, eg = small_instance(54)
        cfg = SolverConfig(lambda_n=0.3, eps=0.8, max_iter=3000, tol=1e-8)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        assert_allclose(net.delta, net.delta_e + net.delta_g, atol=1e-10)

    def test_matches_convex_oracle(self):
        b, w, eg = small_instance(55)
        cfg = SolverConfig(lambda_n=0.4, eps=0.7, max_iter=20000, tol=1e-10)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        _, _, ref_obj = solve_program_oracle(b, w, eg, 0.7, 0.4)
        assert net.converged
        assert net.objective == pytest.approx(ref_obj, rel=1e-3)

    def test_large_eps_all_singletons_reduces_to_edge_solver(self):
        rng = np.random.default_rng(56)
        p = 10
        b = random_backward(rng, p)
        w = random_weights(rng, p)
        eg = EdgeGroupSet(p, [], singleton_complement=True)
        lam = 0.3
        cfg = SolverConfig(lambda_n=lam, eps=1e6, max_iter=20000, tol=1e-9)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        ref = solve_kdiffnet_e(b, w, lam)
        assert np.abs(net.delta - ref.delta).max() < 1e-4

    def test_feasibility_at_convergence(self):
        b, w, eg = small_instance(57)
        lam, eps = 0.5, 0.9
        cfg = SolverConfig(lambda_n=lam, eps=eps, max_iter=20000, tol=1e-9)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        assert net.converged
        gap = net.delta - b
        assert np.abs(gap / w).max() <= lam * (1 + 1e-6) + cfg.tol
        group_max = max(
            eg.group_l2_norms(gap).max(),
            np.abs(eg.complement_values(gap)).max(),
        )
        assert group_max <= eps * lam * (1 + 1e-6) + cfg.tol
        # the same feasibility statement through the dual-norm components
        assert kev_dual_norm(gap, w, eg, eps) <= max(lam, 1.0) * (1 + 1e-5)

    def test_nonconvergence_reported_not_raised(self):
        b, w, eg = small_instance(58)
        cfg = SolverConfig(lambda_n=0.3, eps=1.0, max_iter=3, tol=1e-14)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        assert not net.converged
        assert net.iterations_run == 3

    def test_consensus_gap_small_when_converged(self):
        b, w, eg = small_instance(59)
        cfg = SolverConfig(lambda_n=0.4, eps=1.0, max_iter=20000, tol=1e-8)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        assert net.converged
        assert net.consensus_gap < cfg.tol


class TestKdiffnetMulti:
    def test_zero_backward(self):
        p = 4
        eg = expand_node_groups(NodeGroupSet([(0, 1)], p))
        cfg = SolverConfig(lambda_n=0.2, max_iter=50, tol=1e-9)
        net = solve_kdiffnet_multi(
            np.zeros((p, p)), np.ones((p, p)), np.ones((p, p)), eg, eg,
            eps_e=1.0, eps_1=1.0, eps_2=1.0, cfg=cfg,
        )
        assert_allclose(net.delta, np.zeros((p, p)), atol=1e-12)

    def test_duplicated_knowledge_reduces_to_single_pair(self):
        rng = np.random.default_rng(60)
        p = 6
        b = random_backward(rng, p)
        w = random_weights(rng, p)
        eg = expand_node_groups(NodeGroupSet([(0, 1, 2)], p))
        lam, eps = 0.35, 0.8
        cfg = SolverConfig(lambda_n=lam, eps=eps, max_iter=30000, tol=1e-10)
        single = solve_kdiffnet_eg(b, w, eg, cfg)
        multi = solve_kdiffnet_multi(
            b, w, w, eg, eg, eps_e=1.0, eps_1=eps, eps_2=eps, cfg=cfg,
        )
        assert np.abs(multi.delta - single.delta).max() < 1e-3

    def test_inert_second_source_reduces_to_single_pair(self):
        rng = np.random.default_rng(61)
        p = 6
        b = random_backward(rng, p)
        w1 = random_weights(rng, p)
        w2 = np.full((p, p), 1e6)
        eg1 = expand_node_groups(NodeGroupSet([(0, 1, 2)], p))
        eg2 = EdgeGroupSet(p, [], singleton_complement=True)
        lam, eps = 0.35, 0.8
        cfg = SolverConfig(lambda_n=lam, eps=eps, max_iter=30000, tol=1e-10)
        single = solve_kdiffnet_eg(b, w1, eg1, cfg)
        multi = solve_kdiffnet_multi(
            b, w1, w2, eg1, eg2, eps_e=1.0, eps_1=eps, eps_2=1e6, cfg=cfg,
        )
        assert np.abs(multi.delta - single.delta).max() < 1e-3

    def test_positive_eps_required(self):
        p = 3
        eg = EdgeGroupSet(p, [], singleton_complement=True)
        cfg = SolverConfig(lambda_n=0.1)
        with pytest.raises(ValueError, match="positive"):
            solve_kdiffnet_multi(
                np.zeros((p, p)), np.ones((p, p)), np.ones((p, p)), eg, eg,
                eps_e=0.0, eps_1=1.0, eps_2=1.0, cfg=cfg,
            )


class TestInvariants:
    def test_monotone_shrinkage_closed_forms(self):
        rng = np.random.default_rng(62)
        for _ in range(20):
            p = 8
            b = random_backward(rng, p)
            w = random_weights(rng, p)
            eg = expand_node_groups(NodeGroupSet([(0, 1, 2)], p))
            lams = np.sort(rng.uniform(0.05, 1.5, size=4))
            for solver in (
                lambda lam: solve_diffee(b, lam),
                lambda lam: solve_kdiffnet_e(b, w, lam),
                lambda lam: solve_kdiffnet_g(b, eg, lam),
            ):
                nnz = [np.count_nonzero(solver(lam).delta) for lam in lams]
                assert all(a >= b_ for a, b_ in zip(nnz, nnz[1:]))

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(63)
        b, w, eg = small_instance(63)
        assert_allclose(solve_diffee(b, 0.2).delta, solve_diffee(b, 0.2).delta.T)
        assert_allclose(solve_kdiffnet_e(b, w, 0.2).delta, solve_kdiffnet_e(b, w, 0.2).delta.T)
        assert_allclose(solve_kdiffnet_g(b, eg, 0.2).delta, solve_kdiffnet_g(b, eg, 0.2).delta.T)
        cfg = SolverConfig(lambda_n=0.3, eps=0.9, max_iter=10000, tol=1e-9)
        net = solve_kdiffnet_eg(b, w, eg, cfg)
        assert np.abs(net.delta - net.delta.T).max() < 1e-8


class TestSolverConfig:
    def test_rho_range(self):
        with pytest.raises(ValueError, match="rho"):
            SolverConfig(lambda_n=0.1, rho=2.0)
        with pytest.raises(ValueError, match="rho"):
            SolverConfig(lambda_n=0.1, rho=0.0)

    def test_positivity_checks(self):
        with pytest.raises(ValueError):
            SolverConfig(lambda_n=0.0)
        with pytest.raises(ValueError):
            SolverConfig(lambda_n=0.1, gamma=0.0)
        with pytest.raises(ValueError):
            SolverConfig(lambda_n=0.1, tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(lambda_n=0.1, max_iter=0)
        with pytest.raises(ValueError):
            SolverConfig(lambda_n=0.1, v=-0.5)

    def test_accepts_backward_map_object(self):
        from kdiffnet.linalg import BackwardMap

        bm = BackwardMap(values=np.zeros((3, 3)), v_used=0.1)
        net = solve_diffee(bm, 0.2)
        assert isinstance(net, DifferentialNetwork)
        assert_allclose(net.delta, np.zeros((3, 3)))
