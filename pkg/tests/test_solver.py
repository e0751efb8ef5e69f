import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshless_lab.functions import SymbolicFunction, Zero
from meshless_lab.geometry import Domain, PointSet, generate_point_set
from meshless_lab.kernels import JetOrderError, Kernel, TrialSpace, trial_best_fit
from meshless_lab.poisson import manufactured, problem_from_solution
from meshless_lab.sobolev import QuadSpec
from meshless_lab.solver import (UntestableError, assemble, design_matrix, estimate_stability_factor,
                                 solve_least_squares)
from meshless_lab.testing import (TestComponent, TestDiscretization, build_test_discretization,
                                  reference_orders)

I = Domain.interval()
SQ = Domain.square(left="N")
KERN = Kernel("matern", 3.0, 2.5)


def td_1d_ten(mu=0):
    interior = PointSet(I, "interior", ((np.arange(10) + 0.5) / 10)[:, None])
    ends = PointSet(I, "dirichlet", np.array([[0.0], [1.0]]))
    return TestDiscretization(I, (TestComponent(1, interior, mu), TestComponent(2, ends, 0)), interior.fill)


def test_matrix_shape_and_zero_data():
    space = TrialSpace(KERN, np.linspace(0, 1, 7)[:, None])
    td = td_1d_ten()
    prob = problem_from_solution(Zero(1), I)
    sys = assemble(space, td, prob)
    assert sys.shape == (12, 7)
    assert np.all(sys.rhs == 0)
    assert np.allclose(sys.weights, [0.05**0.5] * 10 + [1, 1])
    assert sys.row_map[0] == (1, 0, (0,)) and sys.column_map[-1] == "center:6"


def test_weights_match_components():
    space = TrialSpace(KERN, generate_point_set(SQ, "interior", 0.25).nodes)
    td = build_test_discretization(SQ, 0.2, 0)
    sys = assemble(space, td, manufactured("trig", SQ))
    for c, sl in zip(td.components, td.blocks()):
        assert np.allclose(sys.weights[sl], td.s ** (c.n_k / 2))


@pytest.mark.parametrize("dom,h,s", [(I, 0.2, 0.04), (SQ, 0.34, 0.1)], ids=["1d", "2d"])
def test_synthesized_consistency_and_recovery(dom, h, s):
    """With u* in the trial space, rhs = A c and the solve recovers c."""
    space = TrialSpace(Kernel("gaussian", 2.0), generate_point_set(dom, "interior", h).nodes)
    c = np.random.default_rng(1).normal(size=space.size)
    td = build_test_discretization(dom, s, 0)
    sys = assemble(space, td, problem_from_solution(space.function(c), dom))
    assert np.linalg.norm(sys.rhs - sys.matrix @ c) <= 1e-9 * np.linalg.norm(sys.rhs)
    rep = solve_least_squares(sys)
    assert rep.rank == space.size
    assert np.linalg.norm(rep.coeffs - c) <= 1e-6 * np.linalg.norm(c)
    assert rep.residual <= 1e-8 * np.linalg.norm(sys.rhs)


def test_duplicate_centers_rank_deficient():
    centers = np.array([[0.2], [0.5], [0.5], [0.8]])
    space = TrialSpace(KERN, centers)
    sys = assemble(space, build_test_discretization(I, 0.05, 0), manufactured("trig", I))
    rep = solve_least_squares(sys)
    assert rep.rank < space.size
    # minimum norm splits the duplicated weight evenly
    assert rep.coeffs[1] == pytest.approx(rep.coeffs[2], rel=1e-8)


def test_solve_errors():
    space = TrialSpace(KERN, np.linspace(0, 1, 4)[:, None])
    sys = assemble(space, td_1d_ten(), manufactured("trig", I))
    with pytest.raises(ValueError, match="truncation"):
        solve_least_squares(sys, 1.0)
    sys.matrix[:] = 0.0
    with pytest.raises(ValueError, match="numerically zero"):
        solve_least_squares(sys)
    with pytest.raises(JetOrderError):
        assemble(TrialSpace(Kernel("matern", 3.0, 1.5), space.centers), td_1d_ten(1), manufactured("trig", I))


def test_underdetermined_warns():
    space = TrialSpace(KERN, np.linspace(0, 1, 30)[:, None])
    with pytest.warns(UserWarning, match="underdetermined"):
        assemble(space, td_1d_ten(), manufactured("trig", I))


@pytest.mark.parametrize("dom", [I, SQ], ids=["1d", "2d"])
def test_residual_below_best_fit(dom):
    space = TrialSpace(Kernel("matern", 3.0, 3.5), generate_point_set(dom, "interior", 0.2).nodes)
    td = build_test_discretization(dom, 0.1, 0)
    prob = manufactured("trig", dom)
    sys = assemble(space, td, prob)
    rep = solve_least_squares(sys)
    fit = trial_best_fit(space, prob.exact, 2, QuadSpec(cells=32, order=6), dom)
    zero = np.linalg.norm(sys.rhs)
    assert 0 <= rep.residual <= sys.residual(fit.coeffs) + 1e-12
    assert rep.residual <= zero


def test_residual_monotone_under_center_superset():
    td = build_test_discretization(I, 0.02, 0)
    prob = manufactured("trig", I)
    res = []
    for k in (3, 5, 9, 17):
        space = TrialSpace(KERN, np.linspace(0, 1, k)[:, None])
        res.append(solve_least_squares(assemble(space, td, prob)).residual)
    assert all(b <= a + 1e-10 for a, b in zip(res, res[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
def test_scaling_equivariance(c):
    space = TrialSpace(KERN, np.linspace(0, 1, 6)[:, None])
    td = build_test_discretization(I, 0.05, 0)
    u = SymbolicFunction("sin(3*x)", 1)
    base = solve_least_squares(assemble(space, td, problem_from_solution(u, I)))
    scaled = solve_least_squares(assemble(space, td, problem_from_solution(c * u, I)))
    assert scaled.residual == pytest.approx(abs(c) * base.residual, rel=1e-9)
    assert np.allclose(scaled.coeffs, c * base.coeffs, rtol=1e-8, atol=1e-10 * abs(c))


def test_tail_space_solves():
    space = TrialSpace(KERN, np.linspace(0, 1, 6)[:, None], tail_degree=2)
    prob = manufactured("poly2", I)
    rep = solve_least_squares(assemble(space, build_test_discretization(I, 0.05, 0), prob))
    assert rep.residual <= 1e-8


# stability factor ----------------------------------------------------------------


def test_beta_identity_is_one():
    space = TrialSpace(KERN, generate_point_set(SQ, "interior", 0.25).nodes)
    td = build_test_discretization(SQ, 0.2, 0)
    assert estimate_stability_factor(space, td, td) == pytest.approx(1.0, abs=1e-12)


def test_beta_at_least_one_for_refining_reference():
    space = TrialSpace(KERN, np.linspace(0, 1, 8)[:, None])
    td = build_test_discretization(I, 0.1, 0)
    extra = PointSet(I, "interior", np.vstack([td.component(1).points.nodes, [[0.33], [0.71]]]))
    ref = TestDiscretization(I, (TestComponent(1, extra, 0), td.component(2)), td.s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        beta = estimate_stability_factor(space, td, ref)
    assert beta >= 0.99


def test_beta_untestable():
    # a trial space with more columns than coarse rows has an invisible direction
    space = TrialSpace(KERN, np.linspace(0, 1, 20)[:, None])
    td = td_1d_ten()
    ref = build_test_discretization(I, 0.005, 0)
    with pytest.raises(UntestableError, match="untestable"):
        estimate_stability_factor(space, td, ref)


def test_beta_grows_like_prediction():
    """log-log slope of beta against s near mu1 - m for mu1 = 0, 1 (1D, m = 2)."""
    kern = Kernel("matern", 3.0, 2.5)
    slopes = {}
    for mu1 in (0, 1):
        s_vals, betas = [], []
        for h in (0.2, 0.1, 0.05):
            space = TrialSpace(kern, generate_point_set(I, "interior", h).nodes)
            td = build_test_discretization(I, h / 2, mu1)
            ref = build_test_discretization(I, td.s / 8, mu1, orders=reference_orders(2.0, 1))
            s_vals.append(td.s)
            betas.append(estimate_stability_factor(space, td, ref))
        slopes[mu1] = np.polyfit(np.log(s_vals), np.log(betas), 1)[0]
    assert slopes[0] == pytest.approx(-2.0, abs=0.5)
    assert slopes[1] == pytest.approx(-1.0, abs=0.5)
    assert slopes[0] < slopes[1]


def test_design_matrix_empty():
    td = TestDiscretization(I, (), 0.1)
    with pytest.raises(ValueError, match="empty test sets"):
        design_matrix(TrialSpace(KERN, np.array([[0.5]])), td)
