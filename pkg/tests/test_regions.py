import numpy as np
import pytest

from czempc.condense import MpcProblem, build_condensed_qp
from czempc.regions import (
    ActiveSet,
    RegionRejected,
    kkt_residuals,
    reduced_active_set,
    region_from_scratch,
    region_iterative,
)
from czempc.sets import Polytope, Zonotope, chebyshev


def test_active_set_validation():
    a = ActiveSet(4, (3, 1))
    assert a.indices == (1, 3)
    assert a.cardinality == 2
    assert a.bits == (1 << 1) | (1 << 3)
    with pytest.raises(ValueError):
        ActiveSet(4, (1, 1))
    with pytest.raises(ValueError):
        ActiveSet(4, (1, 5))  # facet pair 1 and 1 + Dbar
    with pytest.raises(IndexError):
        ActiveSet(4, (8,))


def test_active_set_with_index_and_inactive():
    a = ActiveSet(3, (0,))
    b = a.with_index(4)
    assert b.indices == (0, 4)
    assert a.indices == (0,)  # immutable
    assert b.inactive().tolist() == [1, 2, 3, 5]


def test_root_region_is_unconstrained_law(dint_cp):
    cp = dint_cp
    res = region_from_scratch(cp, ActiveSet(cp.Dbar))
    # with no active facets the law is the unconstrained mpQP minimizer
    Ku_ref = -np.linalg.solve(cp.Qtilde, cp.Htilde.T)
    np.testing.assert_allclose(res.law.Ku, Ku_ref, atol=1e-9)
    np.testing.assert_allclose(res.law.ku, 0, atol=1e-9)
    assert res.region.L.shape == (2 * cp.Dbar, cp.n)


def test_iterative_matches_scratch_one_level(dint_cp):
    cp = dint_cp
    root = region_from_scratch(cp, ActiveSet(cp.Dbar))
    checked = 0
    for i in range(2 * cp.Dbar):
        try:
            it = region_iterative(cp, root, i)
        except RegionRejected:
            with pytest.raises(RegionRejected):
                region_from_scratch(cp, ActiveSet(cp.Dbar, (i,)))
            continue
        sc = region_from_scratch(cp, ActiveSet(cp.Dbar, (i,)))
        np.testing.assert_allclose(it.law.Ku, sc.law.Ku, atol=1e-9)
        np.testing.assert_allclose(it.law.ku, sc.law.ku, atol=1e-9)
        np.testing.assert_allclose(it.region.L, sc.region.L, atol=1e-9)
        np.testing.assert_allclose(it.region.l, sc.region.l, atol=1e-9)
        # Kinv depends on the null basis; verify it in the chain's own basis
        K = np.vstack([it.cache.Z.T @ cp.GQG, cp.F_D, cp.Y[[i]]])
        np.testing.assert_allclose(it.cache.Kinv, np.linalg.inv(K), atol=1e-8)
        checked += 1
    assert checked > 0


def test_iterative_rejects_already_active(dint_cp):
    cp = dint_cp
    root = region_from_scratch(cp, ActiveSet(cp.Dbar))
    child = None
    for i in range(2 * cp.Dbar):
        try:
            child = region_iterative(cp, root, i)
            break
        except RegionRejected:
            continue
    assert child is not None
    with pytest.raises(ValueError):
        region_iterative(cp, child, child.active.indices[0])


def test_parameter_pinned_facets_are_singular(dint_cp):
    """Facets of stage-0 state coordinates lie in the span of the equalities."""
    cp = dint_cp
    root = region_from_scratch(cp, ActiveSet(cp.Dbar))
    # lifted layout: N*gU input coords, then N*gX state coords (stage 0 first)
    first_state_coord = cp.N * cp.m
    with pytest.raises(RegionRejected) as exc:
        region_iterative(cp, root, first_state_coord)
    assert exc.value.reason == "singular"
    with pytest.raises(RegionRejected):
        region_from_scratch(cp, ActiveSet(cp.Dbar, (first_state_coord,)))


def test_too_deep_active_set_rejected(dint_cp):
    cp = dint_cp
    free = cp.Dbar - cp.nbar_c
    idx = tuple(range(free + 1))
    with pytest.raises(RegionRejected):
        region_from_scratch(cp, ActiveSet(cp.Dbar, idx))


def test_second_order_rejection_redundant_generators():
    # a 3-generator planar state set leaves cost-free lifted directions
    hexa = Zonotope(np.zeros(2), np.array([[4.0, 1.0, 0.5], [0.0, 3.0, 1.0]]))
    p = MpcProblem(
        np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[0.0], [1.0]]),
        np.eye(2), np.array([[0.1]]), np.eye(2), 2,
        hexa, Zonotope(np.zeros(1), np.eye(1)), hexa,
    )
    cp = build_condensed_qp(p)
    with pytest.raises(RegionRejected) as exc:
        region_from_scratch(cp, ActiveSet(cp.Dbar))
    assert exc.value.reason == "second_order"


def test_xi_star_respects_facets(dint_tree, dint_cp):
    cp = dint_cp
    for nd in dint_tree.nodes:
        cheb = chebyshev(Polytope(nd.region.L, nd.region.l))
        xi = nd.result.xi_star(cheb.center)
        slack = cp.Y @ xi - 1.0
        if nd.active.indices:
            assert np.max(np.abs(slack[list(nd.active.indices)])) <= 1e-8
        assert np.max(slack) <= 1e-8


def test_kkt_residuals_interior(dint_tree, dint_cp, rng):
    for nd in dint_tree.nodes:
        cheb = chebyshev(Polytope(nd.region.L, nd.region.l))
        for _ in range(3):
            d = rng.normal(size=dint_cp.n)
            x0 = cheb.center + 0.4 * cheb.radius * d / np.linalg.norm(d)
            res = kkt_residuals(dint_cp, nd.result, x0)
            assert res["stationarity"] <= 1e-8
            assert res["primal_eq"] <= 1e-8
            assert res["primal_ineq"] <= 1e-8
            assert res["complementarity"] <= 1e-8


def test_reduced_active_set_root_empty(dint_cp):
    root = region_from_scratch(dint_cp, ActiveSet(dint_cp.Dbar))
    assert reduced_active_set(dint_cp, root.law) == ()


def test_reduced_active_set_saturated_input(dint_cp, dint_tree):
    cp = dint_cp
    # node activating the first input coordinate's upper facet pins one input row
    pinned = [nd for nd in dint_tree.nodes if nd.active.indices == (0,)]
    assert pinned
    ared = reduced_active_set(cp, pinned[0].law)
    assert len(ared) == 1
    j = ared[0]
    # the pinned row is an input row: no parameter dependence, unit input coefficient
    np.testing.assert_allclose(cp.E_poly[j], 0, atol=1e-12)
    assert abs(cp.A_poly[j] @ pinned[0].law.ku - cp.b_poly[j]) <= 1e-9


def test_ared_monotone_along_edges(dint_tree, dint_cp):
    for nd in dint_tree.nodes:
        if nd.parent is None:
            continue
        parent = dint_tree.nodes[nd.parent]
        assert set(parent.ared) <= set(nd.ared)
