import numpy as np
import pytest

from metricseg.core import AffinityGraph, build_metric_graph, make_rng, metric_to_affinity
from metricseg.metricfit import (
    ProjectionConfig,
    make_inconsistent_fixture,
    project_to_metric,
    projection_objective,
    sampled_offsets,
)
from metricseg.segment import connected_components


@pytest.fixture(scope="module")
def fixture_fit():
    graph = make_inconsistent_fixture()
    return graph, project_to_metric(graph, ProjectionConfig(seed=0))


def consistent_targets():
    yy, xx = np.mgrid[:16, :16]
    blocks = np.where((yy < 8)[..., None], [0.0, 0.0, 0.0], [1.0, 0.5, -0.3])
    ramp = np.stack([0.1 * xx, 0.05 * yy, 0.0 * xx], -1)
    return {"blocks": blocks, "ramp": ramp}


def test_sampled_offsets():
    offs = sampled_offsets(32)
    assert offs[:2] == [(0, 1), (1, 0)]
    assert (32, -32) in offs and max(max(abs(a), abs(b)) for a, b in offs) == 32
    assert len(set(offs)) == len(offs)


@pytest.mark.parametrize("name", ["blocks", "ramp"])
def test_round_trip_on_consistent_target(name):
    field = consistent_targets()[name]
    target = metric_to_affinity(build_metric_graph(field, sampled_offsets(8)))
    r = project_to_metric(target, ProjectionConfig(seed=1))
    assert r.objective < 1e-4
    nn = r.affinity.mask[:2]
    assert np.abs(r.affinity.channels[:2][nn] - target.channels[:2][nn]).max() < 0.02


def test_all_ones_collapse():
    offs = sampled_offsets(8)
    target = AffinityGraph(offs, np.ones((len(offs), 12, 12)))
    r = project_to_metric(target)
    assert r.metric.channels[r.metric.mask].max() < 0.05


def test_gradient_matches_finite_differences():
    rng = make_rng(2)
    offs = [(0, 1), (1, 0), (2, -1)]
    u = rng.standard_normal((5, 5, 3))
    targets = rng.uniform(0, 1, size=(3, 5, 5))
    mask = build_metric_graph(u, offs).mask
    _, grad = projection_objective(u, offs, targets, mask)
    num = np.zeros_like(u)
    h = 1e-6
    for idx in np.ndindex(u.shape):
        up, down = u.copy(), u.copy()
        up[idx] += h
        down[idx] -= h
        num[idx] = (projection_objective(up, offs, targets, mask)[0]
                    - projection_objective(down, offs, targets, mask)[0]) / (2 * h)
    np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-8)


def test_fixture_values():
    g = make_inconsistent_fixture()
    vert, _ = g.channel((1, 0))
    assert np.all(vert[7, :8] == 0.9) and np.all(vert[7, 8:] == 0.1)
    assert np.all(vert[:7] == 0.95) and np.all(vert[8:15] == 0.95)
    horiz, valid = g.channel((0, 1))
    assert np.all(horiz[valid] == 0.95)
    long_v, valid = g.channel((4, 0))
    assert np.all(long_v[:4][valid[:4]] == 0.9)
    assert np.all(long_v[4:8] == 0.1)
    assert np.all(long_v[8:12] == 0.9)


def test_fixture_deterministic_and_validated():
    a, b = make_inconsistent_fixture(), make_inconsistent_fixture()
    assert a.channels.tobytes() == b.channels.tobytes()
    with pytest.raises(ValueError):
        make_inconsistent_fixture((12, 16))


def test_degenerate_fixture_is_nearly_metric():
    r = project_to_metric(make_inconsistent_fixture(merge_fraction=0.0))
    assert r.residual < 1e-3


def test_projection_removes_merge_error(fixture_fit):
    graph, r = fixture_fit
    assert connected_components(graph).max() == 1
    after = connected_components(r.affinity)
    assert after.max() == 2
    truth = np.where(np.arange(16) < 8, 1, 2)[:, None] * np.ones((1, 16), dtype=int)
    assert np.array_equal(after, truth)


def test_fitted_metric_properties(fixture_fit):
    _, r = fixture_fit
    vals = r.affinity.channels[r.affinity.mask]
    assert np.all((vals > 0) & (vals <= 1))
    rng = make_rng(3)
    pix = rng.integers(0, 16, size=(1000, 3, 2))
    u = r.field

    def d(p, q):
        return float(np.abs(u[tuple(p)] - u[tuple(q)]).sum())

    assert max(d(i, k) - d(i, j) - d(j, k) for i, j, k in pix) <= 1e-9


def windows_ok(history, width=100):
    h = np.asarray(history)
    return bool(np.all(h[width:] <= h[:-width]))


@pytest.mark.parametrize("name", ["fixture", "blocks"])
def test_objective_windows_non_increasing(name):
    if name == "fixture":
        target = make_inconsistent_fixture()
    else:
        target = metric_to_affinity(build_metric_graph(consistent_targets()["blocks"], sampled_offsets(8)))
    runs = 10
    ok = sum(windows_ok(project_to_metric(target, ProjectionConfig(seed=s)).history) for s in range(runs))
    assert ok >= 0.95 * runs


def test_stops_at_plateau():
    r = project_to_metric(make_inconsistent_fixture(), ProjectionConfig(seed=0))
    assert r.converged and len(r.history) < 5001


def test_errors():
    offs = [(0, 1), (1, 0)]
    empty = AffinityGraph(offs, np.zeros((2, 4, 4)), np.zeros((2, 4, 4), dtype=bool))
    with pytest.raises(ValueError):
        project_to_metric(empty)
    g = make_inconsistent_fixture()
    with pytest.raises(ValueError):
        project_to_metric(g, ProjectionConfig(max_radius=4))
    with pytest.raises(ValueError):
        project_to_metric(g, ProjectionConfig(offsets=((0, 3),)))
    with pytest.raises(ValueError):
        ProjectionConfig(rtol=-1.0)


def test_offset_subset():
    g = make_inconsistent_fixture()
    r = project_to_metric(g, ProjectionConfig(offsets=((0, 1), (1, 0)), max_iters=200))
    assert r.num_edges == int(g.mask[:2].sum())
