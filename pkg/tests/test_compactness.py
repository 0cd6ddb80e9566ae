from __future__ import annotations

import math

import numpy as np
import pytest

from mmcompact.compactness import (CERTIFIED, CONDITION1_FAILED, CONDITION2_FAILED,
                                   check_condition_avg, check_condition_tail,
                                   construct_epsilon_net, default_radius_grid,
                                   greedy_net_oracle, is_relatively_compact,
                                   kr_translation_condition, vitali_selection)
from mmcompact.errors import NotShiftableError, PreconditionError
from mmcompact.families import oscillation, random_Ln, random_values, translate_bumps
from mmcompact.lp import FunctionFamily, LpFunction, lp_norm
from mmcompact.space import circle_grid, from_coords, line_grid, random_cloud

import oracles


@pytest.fixture(scope="module")
def circle1024():
    return circle_grid(1024)


@pytest.fixture(scope="module")
def bumps():
    return translate_bumps(line_grid(1001, 100.0), 10, 10.0, 1.0)


# ---------------------------------------------------------------- condition (1)


@pytest.mark.parametrize("values", [[0, 0, 0], [2.5, 2.5, 2.5]])
def test_avg_trivial_families(s3, values):
    res = check_condition_avg(FunctionFamily(s3, [values]), 0.1, [0.5, 1, 2])
    assert res.passed and res.delta == 2 and res.witness is None


def test_avg_errors(s3):
    with pytest.raises(PreconditionError):
        check_condition_avg(FunctionFamily(s3, []), 0.1, [1])
    with pytest.raises(PreconditionError):
        check_condition_avg(FunctionFamily(s3, [[1, 2, 3]]), 0.1, [])


def test_avg_oscillation_fails_from_002(circle1024):
    fam = oscillation(circle1024, 32)
    grid = default_radius_grid(circle1024, 0.02)
    res = check_condition_avg(fam, 0.1, grid, 2)
    assert not res.passed and res.delta is None
    assert res.witness.member == 31 and res.witness.radius == 0.02
    assert res.witness.value == pytest.approx(oracles.dirichlet_deviation(1024, 32, 0.02), rel=1e-9)
    # every member deviation agrees with the Dirichlet-kernel oracle
    for k in range(1, 33):
        for i, r in enumerate(res.profile.radii):
            assert res.profile.deviations[i, k - 1] == pytest.approx(
                oracles.dirichlet_deviation(1024, k, r), abs=1e-10)


def test_avg_oscillation_small_radii(circle1024):
    fam = oscillation(circle1024, 32)
    grid = [0.001, 0.002, 0.003, 0.004, 0.008, 0.02]
    res = check_condition_avg(fam, 0.1, grid, 2)
    worst = [max(oracles.dirichlet_deviation(1024, k, r) for k in range(1, 33)) for r in grid]
    first_bad = next(r for r, v in zip(grid, worst) if v >= 0.1)
    assert res.passed and res.delta == first_bad
    assert res.delta <= 0.008


# ---------------------------------------------------------------- condition (2)


def test_tail_zero_family_takes_first_candidate(s3):
    res = check_condition_tail(FunctionFamily(s3, [[0, 0, 0]]), 0.1)
    assert res.passed and res.tail_radius == res.candidate_radii[0]


def test_tail_bumps_needs_radius_90(bumps):
    res = check_condition_tail(bumps, 0.5)
    assert res.passed and res.tail_radius == 128
    assert res.max_tails[res.candidate_radii.index(64)] == pytest.approx(0.8185352771872451)


def test_tail_full_space_passes(rng):
    space = random_cloud(30, seed=2)
    fam = FunctionFamily(space, rng.normal(size=(4, 30)) * 100)
    res = check_condition_tail(fam, 1e-9, [(1.0, np.ones(30, bool))])
    assert res.passed and res.max_tails == (0.0,)


def test_tail_capped_bumps_fail(bumps):
    res = check_condition_tail(bumps, 0.1, max_radius=40)
    assert not res.passed
    assert res.witness.radius == 32
    assert 4 <= res.witness.member <= 9
    assert res.witness.value == pytest.approx(0.8185352771872451)


# ---------------------------------------------------------------- Vitali


def _assert_disjoint(space, sel):
    masks = sel.ball_masks(space)
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            assert not (masks[i] & masks[j]).any()


def test_vitali_singleton(s3):
    sel = vitali_selection(s3, [1], 0.6, 0.5)
    assert sel.centers == (1,) and sel.residual_measure == 0


def test_vitali_s3(s3):
    sel = vitali_selection(s3, np.ones(3, bool), 0.6, 0.5)
    assert sorted(sel.centers) == [0, 1, 2]
    assert all(np.count_nonzero(m) == 1 for m in sel.ball_masks(s3))
    assert sel.residual_measure == 0


def test_vitali_circle16():
    c = circle_grid(16)
    sel = vitali_selection(c, np.ones(16, bool), 0.30, 0.1)
    _assert_disjoint(c, sel)
    assert all(r < 0.30 for r in sel.radii)
    covered = np.logical_or.reduce(sel.ball_masks(c))
    assert covered.sum() >= 15
    assert sel.residual_measure < 0.1


def test_vitali_random_invariants(rng):
    for seed in range(10):
        space = random_cloud(60, seed=seed)
        E = rng.random(60) < 0.6
        delta = rng.uniform(0.01, 0.5, 60)
        target = rng.uniform(0.01, 0.2)
        sel = vitali_selection(space, E, delta, target)
        _assert_disjoint(space, sel)
        assert sel.residual_measure < target
        assert all(E[x] and r < delta[x] for x, r in zip(sel.centers, sel.radii))


# ---------------------------------------------------------------- nets


def test_net_zero_family(s3):
    net = construct_epsilon_net(FunctionFamily(s3, [[0, 0, 0]]), 0.5, 1.0, None, 2)
    assert net.size == 1 and net.distances == [0.0]
    assert np.all(net.element_values(0) == 0)


def test_net_constant_family(s3):
    net = construct_epsilon_net(FunctionFamily(s3, [[2.0, 2.0, 2.0]]), 0.5, s3.diameter, None, 2)
    assert net.size == 1
    phi = net.element_values(0)
    assert np.all(np.abs(phi - 2.0) <= net.threshold)
    assert net.distances[0] < 0.5


def test_net_two_members_share_element(s3):
    fam = FunctionFamily(s3, [[2, 4, 6], [2.05, 4.05, 6.05]])
    net = construct_epsilon_net(fam, 0.5, 1.0, None, 1)
    assert all(d < 0.5 for d in net.distances)
    # independent re-measurement against every element
    averages = [[3, 3, 6], [3.05, 3.05, 6.05]]
    w = s3.weight.tolist()
    table = [[oracles.norm(w, np.subtract(a, net.element_values(k)).tolist(), 1)
              for k in range(net.size)] for a in averages]
    assert [min(row) for row in table] == pytest.approx(net.distances)
    shared = [k for k in range(net.size) if all(row[k] < 0.5 for row in table)]
    assert shared


def test_net_quantisation_invariant(rng):
    space = circle_grid(128)
    fam = random_Ln(space, 8, 5.0, seed=3)
    net = construct_epsilon_net(fam, 0.3, 0.05, None, 2)
    from mmcompact.averaging import family_averages
    averages = family_averages(fam, 0.05)
    for i, x in enumerate(net.selection.centers):
        for v in averages[:, x]:
            gap = np.abs(net.levels[i] - v).min()
            assert gap <= net.threshold * (1 + 1e-12)
    assert net.certified


def test_net_to_dict_has_levels(s3):
    fam = FunctionFamily(s3, [[2, 4, 6], [0, 1, 0]])
    d = construct_epsilon_net(fam, 0.5, 1.0, None, 2).to_dict()
    assert d["levels"] and d["elements"] and d["certified"]


def test_greedy_oracle_examples(s3):
    assert greedy_net_oracle(FunctionFamily(s3, [[0, 0, 0]]), 0.1).size == 1
    assert greedy_net_oracle(FunctionFamily(s3, [[1, 2, 3], [1, 2, 3]]), 0.1).size == 1
    two = greedy_net_oracle(FunctionFamily(s3, [[0, 0, 0], [3, 3, 3]]), 1.0, 1)
    assert two.size == 2 and two.max_distance == 0
    with pytest.raises(PreconditionError):
        greedy_net_oracle(FunctionFamily(s3, []), 1.0)


# ---------------------------------------------------------------- classical condition


def test_kr_constant_and_zero():
    c = circle_grid(64)
    for v in (0.0, 3.0):
        res = kr_translation_condition(FunctionFamily(c, [np.full(64, v)]), 0.1, 10)
        assert res.passed and res.delta == 10 / 64 and res.first_failing_step is None


def test_kr_sin(circle1024):
    res = kr_translation_condition(oscillation(circle1024, 1), 0.1, 100, 2)
    assert res.first_failing_step == 24
    assert res.delta == pytest.approx(0.0234375)
    assert abs(res.delta - 0.0225) < 1.5 / 1024
    for a, v in res.profile:
        assert v == pytest.approx(oracles.shift_deviation(1024, round(a * 1024)), abs=1e-12)


def test_kr_needs_periodic_grid(s3):
    with pytest.raises(NotShiftableError):
        kr_translation_condition(FunctionFamily(s3, [[1, 2, 3]]), 0.1, 2)


# ---------------------------------------------------------------- full criterion


def test_zero_family_certified(s3):
    rep = is_relatively_compact(FunctionFamily(s3, [[0, 0, 0]]), 0.3)
    assert rep.verdict == CERTIFIED and rep.net.size == 1
    assert rep.to_dict()["net_size"] == 1


def test_oscillation_refuted(circle1024):
    rep = is_relatively_compact(oscillation(circle1024, 32), 0.1, 2,
                                radius_grid=default_radius_grid(circle1024, 0.02))
    assert rep.verdict == CONDITION1_FAILED
    assert rep.witness.member == 31


def test_bumps_refuted(bumps):
    rep = is_relatively_compact(bumps, 0.1, 2, max_candidate_radius=50)
    assert rep.verdict == CONDITION2_FAILED
    assert rep.witness.member >= 4


def test_report_schema(s3):
    d = is_relatively_compact(FunctionFamily(s3, [[1, 2, 3]]), 0.5).to_dict()
    assert list(d) == ["verdict", "epsilon", "delta", "tail_radius", "net_size",
                       "certified_radius", "witness"]


@pytest.mark.parametrize("eps", [0.05, 0.3, 2.0])
def test_every_finite_family_certified(eps):
    for seed in range(4):
        space = random_cloud(25, seed=seed)
        fam = random_values(space, 6, seed)
        rep = is_relatively_compact(fam, eps, 2)
        assert rep.verdict == CERTIFIED
        phis = [rep.net.element_values(k) for k in range(rep.net.size)]
        for f, d in zip(fam, rep.member_distances):
            measured = min(oracles.norm(space.weight.tolist(), (f.values - phi).tolist(), 2)
                           for phi in phis)
            assert measured == pytest.approx(d, rel=1e-12, abs=1e-15)
            assert measured < rep.certified_radius


def test_translation_norm_invariance(rng):
    from mmcompact.lp import translate
    c = circle_grid(100)
    f = LpFunction(c, rng.normal(size=100))
    for j in range(-5, 6):
        assert lp_norm(translate(f, j), 2) == pytest.approx(lp_norm(f, 2), rel=1e-13)


def test_net_agrees_with_greedy_oracle():
    space = circle_grid(256)
    w = space.weight.tolist()
    ratios = []
    for seed in range(5):
        fam = random_Ln(space, 10, 5.0, seed=seed)
        rep = is_relatively_compact(fam, 0.25, 2)
        assert rep.verdict == CERTIFIED
        oracle = greedy_net_oracle(fam, rep.certified_radius, 2)
        assert oracle.size <= len(fam)
        for f in fam:
            v = f.values.tolist()
            assert min(oracles.norm(w, np.subtract(v, rep.net.element_values(k)).tolist(), 2)
                       for k in range(rep.net.size)) < rep.certified_radius
            assert min(oracles.norm(w, np.subtract(v, fam.matrix[c]).tolist(), 2)
                       for c in oracle.centers) < rep.certified_radius
        ratios.append(rep.certified_radius / max(oracle.max_distance, 1e-300))
    assert max(ratios) <= 4
