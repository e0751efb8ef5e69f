import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from meshless_lab.geometry import (Domain, GeometryError, PointSet, fill_distance, generate_point_set,
                                   separation_distance)

I = Domain.interval()
S = Domain.square()


def pts(dom, nodes, comp="interior"):
    return PointSet(dom, comp, np.asarray(nodes, dtype=float).reshape(-1, dom.dim))


# fill distance -------------------------------------------------------------


def test_fill_interval_examples():
    assert fill_distance(pts(I, [0, 0.5, 1])) == pytest.approx(0.25, abs=1e-9)
    assert fill_distance(pts(I, [0.5])) == pytest.approx(0.5, abs=1e-9)


def test_fill_cell_centered_square_grid():
    k = 4
    h = 1 / k
    c = (np.arange(k) + 0.5) * h
    A = np.stack(np.meshgrid(c, c), axis=-1).reshape(-1, 2)
    # brute-force oracle over 1200**2 probes
    g = np.linspace(0, 1, 1200)
    probe = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    oracle = cKDTree(A).query(probe)[0].max()
    assert oracle == pytest.approx(h * math.sqrt(2) / 2, rel=1e-6)
    assert fill_distance(pts(S, A)) == pytest.approx(oracle, rel=1e-6)


def test_fill_errors():
    with pytest.raises(GeometryError, match="empty sample set"):
        fill_distance(pts(I, np.zeros((0, 1))))
    with pytest.raises(GeometryError, match="node outside domain"):
        fill_distance(pts(I, [0.2, 1.5]))


def test_uniform_grid_fill_is_half_spacing():
    for k in (3, 7, 20):
        nodes = np.linspace(0, 1, k + 1)
        assert fill_distance(pts(I, nodes)) == pytest.approx(0.5 / k, abs=1e-9)


def test_zero_dimensional_boundary_has_zero_fill():
    b = generate_point_set(I, "dirichlet", 0.1)
    assert len(b) == 2 and b.fill == 0.0


# separation ----------------------------------------------------------------


@pytest.mark.parametrize("nodes,expected", [([0, 0.5, 1], 0.25), ([0, 0.1, 1], 0.05)])
def test_separation_examples(nodes, expected):
    assert separation_distance(pts(I, nodes)) == pytest.approx(expected)


def test_separation_grid_and_degenerate():
    g = np.linspace(0, 1, 5)
    A = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert separation_distance(pts(S, A)) == pytest.approx(0.125)
    with pytest.raises(GeometryError, match="degenerate set"):
        separation_distance(pts(I, [0.3]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_separation_rigid_motion_invariant(theta, tx, ty, seed):
    A = np.random.default_rng(seed).random((12, 2))
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    big = Domain.square(-10, 10)
    a = separation_distance(pts(big, A))
    b = separation_distance(pts(big, A @ R.T + [tx, ty]))
    assert b == pytest.approx(a, rel=1e-9)


# generation ----------------------------------------------------------------


def test_interval_uniform_grid():
    A = generate_point_set(I, "interior", 0.25)
    assert np.allclose(A.nodes[:, 0], [0, 0.5, 1])
    assert A.fill <= 0.375


@pytest.mark.parametrize("strategy", ["uniform-grid", "jittered-grid", "halton"])
@pytest.mark.parametrize("dom", [I, S, Domain.disk((0.5, 0.5), 0.5)], ids=["interval", "square", "disk"])
def test_measured_fill_near_target(strategy, dom):
    d = 0.08
    A = generate_point_set(dom, "interior", d, strategy, seed=3)
    assert 0.5 * d <= A.fill <= 1.5 * d
    assert np.all(dom.contains(A.nodes))


@pytest.mark.parametrize("strategy", ["uniform-grid", "jittered-grid", "halton"])
def test_boundary_fill_near_target(strategy):
    dom = Domain.square(left="N", top="N")
    for comp in ("dirichlet", "neumann"):
        B = generate_point_set(dom, comp, 0.1, strategy, seed=1)
        assert 0.05 <= B.fill <= 0.15
        assert np.all(dom.on_component(B.nodes, comp))


def test_square_count_scales_like_d_minus_2():
    counts = [len(generate_point_set(S, "interior", 0.2 / 2**i)) for i in range(3)]
    for a, b in zip(counts, counts[1:]):
        assert 2 <= b / a <= 8


def test_halton_deterministic():
    a = generate_point_set(S, "interior", 0.1, "halton", seed=7)
    b = generate_point_set(S, "interior", 0.1, "halton", seed=7)
    assert np.array_equal(a.nodes, b.nodes)


def test_budget_exceeded():
    with pytest.raises(GeometryError, match="budget exceeded"):
        generate_point_set(S, "interior", 1e-4)


def test_corners_are_dirichlet_only():
    dom = Domain.square(left="N")
    D = generate_point_set(dom, "dirichlet", 0.1)
    N = generate_point_set(dom, "neumann", 0.1)
    corners = dom.corners()
    dn = np.min(np.linalg.norm(N.nodes[:, None] - corners[None], axis=2))
    dd = np.min(np.linalg.norm(D.nodes[:, None] - corners[None], axis=2), axis=0)
    assert dn > 1e-6 and np.all(dd < 1e-12)
    # no duplicated corner nodes
    assert len(np.unique(np.round(D.nodes, 12), axis=0)) == len(D)


def test_domain_validation_and_roundtrip():
    with pytest.raises(GeometryError):
        Domain.interval(left="N", right="N")
    with pytest.raises(GeometryError):
        Domain.square(left="X")
    for dom in (Domain.interval(right="N"), Domain.square(top="N"),
                Domain.disk((0, 0), 1.0, arcs=[(0, math.pi, "D"), (math.pi, 2 * math.pi, "N")])):
        assert Domain.from_config(dom.to_config()) == dom
        assert dom.component_dim("dirichlet") == dom.dim - 1


def test_csv_roundtrip():
    dom = Domain.square(left="N")
    A = generate_point_set(dom, "neumann", 0.2)
    back = PointSet.from_csv(A.to_csv(), dom)[0]
    assert back.component == "neumann" and np.array_equal(back.nodes, A.nodes)


# properties ----------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.floats(0, 1))
def test_adding_a_point_never_increases_fill(nodes, extra):
    A = pts(I, nodes)
    assert fill_distance(A.union([extra])) <= fill_distance(A) + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_nested_refinement_in_2d(seed):
    rng = np.random.default_rng(seed)
    A = rng.random((10, 2))
    B = np.concatenate([A, rng.random((10, 2))])
    assert fill_distance(pts(S, B), resolution=201) <= fill_distance(pts(S, A), resolution=201) + 1e-12
