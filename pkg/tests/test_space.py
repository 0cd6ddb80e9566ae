from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmcompact.errors import SpaceError, PreconditionError
from mmcompact.space import (ball, ball_measure, build_space, circle_grid, critical_radii,
                             doubling_constant, dyadic_radii, from_coords, from_distance_matrix,
                             line_grid, min_ball_measure, random_cloud,
                             symmetric_difference_measure)

import oracles


def test_s3_construction(s3):
    assert s3.n_points == 3
    assert s3.diameter == 3.0
    assert s3.total_measure == 3.0


def test_circle4():
    c = circle_grid(4)
    off = c.dist[~np.eye(4, dtype=bool)]
    assert set(off.tolist()) == {0.25, 0.5}
    assert c.total_measure == 1.0
    assert c.periodic_shift_step == 0.25


def test_triangle_violation_rejected():
    d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(SpaceError, match="triangle"):
        from_distance_matrix(d, [1, 1, 1])


@pytest.mark.parametrize("weights", [[1, 0, 1], [1, -1, 1]])
def test_nonpositive_weight_rejected(weights):
    with pytest.raises(SpaceError):
        from_coords([0, 1, 3], weights)


def test_empty_space_rejected():
    with pytest.raises(SpaceError):
        build_space({"kind": "circle", "n": 0})


def test_build_space_kinds():
    assert build_space({"kind": "circle", "n": 8}).n_points == 8
    line = build_space({"kind": "line_grid", "n": 11, "length": 1.0})
    assert line.total_measure == pytest.approx(1.0, rel=1e-15)
    cloud = build_space({"kind": "random_cloud", "n": 20, "dimension": 3, "seed": 4})
    assert cloud.hash == random_cloud(20, 3, seed=4).hash
    with pytest.raises(SpaceError, match="seed"):
        build_space({"kind": "random_cloud", "n": 20})
    with pytest.raises(SpaceError):
        build_space({"kind": "torus"})


def test_ball_examples(s3):
    assert ball(s3, 0, 1).tolist() == [True, True, False]
    assert ball(s3, 2, 0.5).tolist() == [False, False, True]
    assert ball(s3, 1, s3.diameter).all()
    with pytest.raises(PreconditionError):
        ball(s3, 0, 0.0)


def test_ball_measure_examples(s3):
    assert ball_measure(s3, 2, 2) == 2
    assert ball_measure(s3, 0, 3) == 3
    single = from_coords([[0.0]], [0.7])
    assert ball_measure(single, 0, 1e-9) == 0.7
    assert ball_measure(single, 0, 1e9) == 0.7


def test_symmetric_difference_examples(s3):
    assert symmetric_difference_measure(s3, 0, 1, 1) == 0
    assert symmetric_difference_measure(s3, 0, 2, 1) == 3
    assert symmetric_difference_measure(s3, 2, 2, 1) == 0


def test_doubling_examples(s3):
    rep = doubling_constant(s3)
    assert rep.gamma == 3.0
    assert (rep.witness_point, rep.witness_radius) == (2, 1.5)
    assert ball_measure(s3, 2, 1.5) == 1 and ball_measure(s3, 2, 3) == 3
    assert doubling_constant(from_coords([[0.0]])).gamma == 1.0
    pair = doubling_constant(from_coords([0.0, 1.0]))
    assert pair.gamma == 2.0
    assert pair.witness_radius == 0.5


def test_critical_radii_s3(s3):
    assert critical_radii(s3).tolist() == [0.5, 1.0, 1.5, 2.0, 3.0]


def test_min_ball_measure_examples(s3):
    assert min_ball_measure(s3, [0, 1], 1) == 2
    assert min_ball_measure(s3, np.ones(3, bool), 0.5) == 1
    assert min_ball_measure(s3, [2], 2) == ball_measure(s3, 2, 2)
    with pytest.raises(PreconditionError):
        min_ball_measure(s3, [], 1)


def test_dyadic_radii():
    assert dyadic_radii(1.0, 0.2) == [1.0, 0.5, 0.25, 0.125]


@pytest.mark.parametrize("name", ["s3", "circle64", "cloud200"])
def test_doubling_matches_brute_force(corpus, name):
    space = corpus[name]
    dist, w = space.dist.tolist(), space.weight.tolist()
    if space.n_points > 64:
        idx = list(range(0, space.n_points, 5))
        space = from_distance_matrix(space.dist[np.ix_(idx, idx)], space.weight[idx])
        dist, w = space.dist.tolist(), space.weight.tolist()
    gamma = doubling_constant(space).gamma
    assert gamma == pytest.approx(oracles.doubling_sweep(dist, w, oracles.breakpoint_radii(dist)),
                                  rel=1e-12)
    sweep = np.linspace(space.diameter / 1000, space.diameter, 1000).tolist()
    assert gamma >= oracles.doubling_sweep(dist, w, sweep) * (1 - 1e-12)


def _random_space(seed: int, n: int):
    rng = np.random.default_rng(seed)
    coords = np.round(rng.random((n, 2)) * 8) / 4 + rng.random((n, 2)) * 1e-3
    return from_coords(coords, rng.uniform(0.5, 2.0, n))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_doubling_random_spaces(seed, n):
    space = _random_space(seed, n)
    dist, w = space.dist.tolist(), space.weight.tolist()
    rep = doubling_constant(space)
    assert rep.gamma == pytest.approx(
        oracles.doubling_sweep(dist, w, oracles.breakpoint_radii(dist)), rel=1e-12)
    x, r = rep.witness_point, rep.witness_radius
    assert ball_measure(space, x, 2 * r) / ball_measure(space, x, r) == pytest.approx(rep.gamma)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_ball_monotone_and_measure_bound(seed, n):
    space = _random_space(seed, n)
    radii = sorted(set(critical_radii(space).tolist()))
    for x in range(n):
        prev = np.zeros(n, bool)
        for r in radii:
            b = ball(space, x, r)
            assert np.all(b >= prev)
            prev = b
    for r in radii:
        for x in range(n):
            for y in range(n):
                diff = abs(ball_measure(space, x, r) - ball_measure(space, y, r))
                assert diff <= symmetric_difference_measure(space, x, y, r) + 1e-12


def test_line_grid_weights():
    g = line_grid(5, 4.0)
    assert g.weight.tolist() == [0.5, 1, 1, 1, 0.5]
    assert g.coords[:, 0].tolist() == [0, 1, 2, 3, 4]


def test_coincident_points_rejected():
    with pytest.raises(SpaceError):
        from_coords([0.0, 0.0, 1.0])


def test_space_is_immutable(s3):
    with pytest.raises(ValueError):
        s3.dist[0, 1] = 9.0
