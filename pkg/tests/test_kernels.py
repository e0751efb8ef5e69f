import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshless_lab import jets
from meshless_lab.functions import SymbolicFunction
from meshless_lab.geometry import Domain, generate_point_set
from meshless_lab.kernels import JetOrderError, Kernel, TrialSpace, kernel_jet, trial_best_fit, trial_eval
from meshless_lab.lab import fit_rate
from meshless_lab.sobolev import QuadSpec

mp.mp.dps = 30

# independent profiles, written from textbook formulas

WENDLAND = {  # phi_{3,k}(r) normalised to 1 at r = 0
    0: lambda r: (1 - r) ** 2,
    1: lambda r: (1 - r) ** 4 * (4 * r + 1),
    2: lambda r: (1 - r) ** 6 * (35 * r**2 + 18 * r + 3) / 3,
    3: lambda r: (1 - r) ** 8 * (32 * r**3 + 25 * r**2 + 8 * r + 1),
}


def oracle_profile(kern: Kernel):
    a = mp.mpf(kern.shape)
    if kern.family == "gaussian":
        return lambda r: mp.exp(-((a * r) ** 2))
    if kern.family == "matern":
        nu = mp.mpf(kern.smoothness)
        norm = 2 ** (nu - 1) * mp.gamma(nu)
        return lambda r: (a * r) ** nu * mp.besselk(nu, a * r) / norm
    prof = WENDLAND[int(kern.smoothness)]
    return lambda r: prof(a * r) if a * r < 1 else mp.mpf(0)


def oracle_jet(kern, x, c, order):
    phi = oracle_profile(kern)
    n = len(x)
    c = [mp.mpf(v) for v in c]

    def f(*p):
        return phi(mp.sqrt(sum((pi - ci) ** 2 for pi, ci in zip(p, c))))

    return np.array([float(mp.diff(f, tuple(mp.mpf(v) for v in x), alpha))
                     for alpha in jets.multi_indices(n, order)])


KERNELS = [Kernel("gaussian", 1.3), Kernel("matern", 2.0, 2.5), Kernel("matern", 1.5, 3.5),
           Kernel("wendland", 0.8, 2), Kernel("wendland", 0.8, 1)]


@pytest.mark.parametrize("kern", KERNELS, ids=lambda k: f"{k.family}-{k.smoothness}")
def test_jet_matches_high_precision_differences(kern):
    """100 random pairs in 2D, all orders up to 2 or 3."""
    rng = np.random.default_rng(11)
    order = min(3, kern.max_order)
    for _ in range(100):
        x, c = rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2)
        if np.linalg.norm(x - c) < 1e-3:
            continue
        got = kernel_jet(kern, x, c, order)
        want = oracle_jet(kern, x, c, order)
        assert np.allclose(got, want, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("kern", KERNELS[:3], ids=lambda k: f"{k.family}-{k.smoothness}")
def test_jet_one_dimensional_high_order(kern):
    for x in (0.13, -0.41, 0.77):
        got = kernel_jet(kern, [x], [0.05], 4)
        assert np.allclose(got, oracle_jet(kern, [x], [0.05], 4), rtol=1e-6, atol=1e-8)


def test_gaussian_examples():
    g = Kernel("gaussian", 1.0)
    j = kernel_jet(g, [0.3, 0.3], [0.3, 0.3], 1)
    assert j[0] == 1.0 and np.all(j[1:] == 0)
    assert kernel_jet(g, [0.2], [0.2], 2)[2] == pytest.approx(-2.0, abs=1e-14)
    # central difference oracle with step 1e-4
    h = 1e-4
    fd = (math.exp(-(h**2)) - 2 + math.exp(-(h**2))) / h**2
    assert fd == pytest.approx(-2.0, abs=1e-6)


@pytest.mark.parametrize("kern", KERNELS[1:], ids=lambda k: f"{k.family}-{k.smoothness}")
def test_jet_at_coincident_points_is_finite(kern):
    j = kernel_jet(kern, [0.1, 0.2], [0.1, 0.2], kern.max_order)
    assert np.all(np.isfinite(j))
    assert j[0] == pytest.approx(1.0)
    # odd derivatives vanish at the center by symmetry
    for alpha, v in zip(jets.multi_indices(2, kern.max_order), j):
        if sum(alpha) % 2:
            assert v == 0.0
    # and agree with the limit from nearby points
    near = kernel_jet(kern, [0.1 + 1e-7, 0.2], [0.1, 0.2], 2)
    assert np.allclose(near, kernel_jet(kern, [0.1, 0.2], [0.1, 0.2], 2), atol=1e-5)


def test_jet_order_exceeded():
    with pytest.raises(JetOrderError, match="jet order exceeded"):
        kernel_jet(Kernel("matern", 1.0, 1.5), [0.0], [0.1], 3)
    assert Kernel("gaussian").max_order == 16


def test_kernel_validation():
    for bad in (dict(family="cubic"), dict(family="matern", shape=0.0), dict(family="matern", smoothness=2.0),
                dict(family="wendland", smoothness=1.5)):
        with pytest.raises(ValueError):
            Kernel(**bad)


def test_native_smoothness():
    assert Kernel("matern", 1.0, 2.5).native_smoothness(1) == 3.0
    assert Kernel("matern", 1.0, 6.5).m_tilde(2) == 5.5
    assert Kernel("wendland", 1.0, 1).native_smoothness(3) == 3.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.sampled_from(KERNELS))
def test_jet_symmetry_in_center(v, kern):
    """d^a_x Phi(x, c) = (-1)^|a| d^a_c Phi(x, c), i.e. swapping x and c."""
    x, c = np.array(v[:2]), np.array(v[2:])
    order = min(3, kern.max_order)
    sign = np.array([(-1) ** sum(a) for a in jets.multi_indices(2, order)])
    assert np.allclose(kernel_jet(kern, x, c, order), sign * kernel_jet(kern, c, x, order), atol=1e-12)


# trial functions ------------------------------------------------------------


def test_trial_eval_examples():
    kern = Kernel("matern", 2.0, 2.5)
    sp = TrialSpace(kern, np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.9]]))
    assert trial_eval(sp, np.zeros(3), [0.4, 0.1], (1, 0)) == 0.0
    one = TrialSpace(kern, np.array([[0.3, 0.6]]))
    assert trial_eval(one, [1.0], [0.3, 0.6], (0, 0)) == pytest.approx(1.0)
    two = TrialSpace(kern, np.array([[0.2, 0.5], [0.8, 0.5]]))
    assert trial_eval(two, [1.0, -1.0], [0.5, 0.1], (0, 0)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="dimension mismatch"):
        trial_eval(two, [1.0], [0.5, 0.1], (0, 0))
    with pytest.raises(ValueError, match="dimension mismatch"):
        trial_eval(two, [1.0, 1.0], [0.5], (0,))


def test_trial_eval_tail():
    sp = TrialSpace(Kernel("gaussian", 2.0), np.array([[0.0], [1.0]]), tail_degree=1)
    # coefficients (0, 0 | a0, a1) give a0 + a1 x
    assert trial_eval(sp, [0, 0, 2.0, 3.0], [0.5], (0,)) == pytest.approx(3.5)
    assert trial_eval(sp, [0, 0, 2.0, 3.0], [0.5], (1,)) == pytest.approx(3.0)


I = Domain.interval()
QUAD = QuadSpec(cells=64, order=8)


def test_best_fit_recovers_span_element():
    kern = Kernel("matern", 3.0, 2.5)
    sp = TrialSpace(kern, generate_point_set(I, "interior", 0.1).nodes)
    c = np.random.default_rng(0).normal(size=sp.size)
    fit = trial_best_fit(sp, sp.function(c), 1, QUAD, I)
    assert fit.relative_error <= 1e-8


def test_best_fit_tail_reproduces_polynomials():
    kern = Kernel("matern", 3.0, 2.5)
    centers = generate_point_set(I, "interior", 0.25).nodes
    target = SymbolicFunction("1 - 2*x + 3*x**2", 1)
    bare = trial_best_fit(TrialSpace(kern, centers), target, 0, QUAD, I)
    tail = trial_best_fit(TrialSpace(kern, centers, tail_degree=2), target, 0, QUAD, I)
    assert tail.relative_error <= 1e-8 < bare.relative_error


@pytest.mark.parametrize("nu,order", [(1.5, 0), (2.5, 0), (2.5, 1)])
def test_best_fit_rate_matches_native_smoothness(nu, order):
    """Log-log slope of the error within 30% of tau - order, decreasing errors."""
    kern = Kernel("matern", 3.0, nu)
    target = SymbolicFunction("sin(pi*x)", 1)
    pairs = []
    for h in (0.2, 0.1, 0.05, 0.025):
        A = generate_point_set(I, "interior", h)
        pairs.append((A.fill, trial_best_fit(TrialSpace(kern, A.nodes), target, order, QUAD, I).error))
    errs = [e for _, e in pairs]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    pred = kern.native_smoothness(1) - order
    assert fit_rate(pairs)[0] == pytest.approx(pred, rel=0.3)
