import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bfs_components, same_partition
from oracles import dilation_by_bfs
from metricseg.core import AffinityGraph, MetricGraph, build_metric_graph, make_rng
from metricseg.loss import LossParams
from metricseg.optimize import FitConfig, fit_embeddings
from metricseg.segment import (
    SegmentationConfig,
    connected_components,
    dilate,
    postprocess,
    remove_small,
    seed_segment,
)
from metricseg.synth import voronoi_labels


def graph_from_planes(right, down, cls=MetricGraph):
    return cls([(0, 1), (1, 0)], np.stack([right, down]))


def test_all_edges_below_threshold():
    g = build_metric_graph(np.zeros((5, 7, 2)))
    labels = connected_components(g)
    assert np.all(labels == 1)


def test_vertical_separator():
    right = np.zeros((6, 6))
    right[:, 2] = 10.0
    labels = connected_components(graph_from_planes(right, np.zeros((6, 6))))
    assert labels.max() == 2
    assert np.all(labels[:, :3] == 1) and np.all(labels[:, 3:] == 2)


def test_affinity_graph_threshold():
    right = np.full((4, 4), 0.9)
    right[:, 1] = 0.2
    labels = connected_components(graph_from_planes(right, np.full((4, 4), 0.9), AffinityGraph))
    assert labels.max() == 2


def test_matches_bfs_oracle():
    rng = make_rng(0)
    for _ in range(10):
        right, down = rng.uniform(0, 3, size=(2, 16, 16))
        g = graph_from_planes(right, down)
        labels = connected_components(g, SegmentationConfig(cc_threshold=1.5))

        def joined(p, q):
            (y0, x0), (y1, x1) = sorted([p, q])
            return (right if y0 == y1 else down)[y0, x0] < 1.5

        assert same_partition(labels, bfs_components((16, 16), joined))


def test_scan_order_invariance():
    rng = make_rng(1)
    field = rng.standard_normal((12, 10, 2))
    a = connected_components(build_metric_graph(field))
    flipped = connected_components(build_metric_graph(field[::-1, ::-1]))[::-1, ::-1]
    assert same_partition(a, flipped)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_raising_threshold_only_merges(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    g = build_metric_graph(make_rng(seed).standard_normal((8, 8, 2)))
    fine = connected_components(g, SegmentationConfig(cc_threshold=lo))
    coarse = connected_components(g, SegmentationConfig(cc_threshold=hi))
    for lab in np.unique(fine):
        assert len(np.unique(coarse[fine == lab])) == 1


def test_requires_nn_offsets():
    g = MetricGraph([(0, 2)], np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        connected_components(g)


def test_eight_connectivity_uses_diagonals():
    field = np.zeros((2, 2, 1))
    field[0, 1] = field[1, 0] = 10.0
    offsets = [(0, 1), (1, 0), (1, 1), (1, -1)]
    g = build_metric_graph(field, offsets)
    assert connected_components(g, SegmentationConfig(connectivity=4)).max() == 4
    assert connected_components(g, SegmentationConfig(connectivity=8)).max() == 2


def test_postprocess_identity():
    labels = np.array([[1, 1, 2], [1, 2, 2]])
    assert np.array_equal(postprocess(labels), labels)


def test_singleton_removed():
    labels = np.zeros((5, 5), dtype=int)
    labels[2, 2] = 3
    assert np.all(remove_small(labels) == 0)
    assert np.all(postprocess(labels) == 0)


def test_channel_filled_like_bfs():
    labels = np.zeros((5, 14), dtype=int)
    labels[:, :4] = 2
    labels[:, 10:] = 1
    out = postprocess(labels, SegmentationConfig(max_dilation=10))
    assert np.all(out > 0)
    assert np.array_equal(out, dilation_by_bfs(labels, 10))
    # 6-px channel: each front advances 3 columns
    assert np.all(out[:, 4:7] == 2) and np.all(out[:, 7:10] == 1)


def test_odd_channel_tie_goes_to_smaller_label():
    labels = np.zeros((3, 7), dtype=int)
    labels[:, :2] = 4
    labels[:, 5:] = 3
    out = dilate(labels, 10)
    assert np.all(out[:, 2] == 4) and np.all(out[:, 4] == 3)
    assert np.all(out[:, 3] == 3)


def test_dilation_matches_bfs_random():
    rng = make_rng(2)
    for rounds in (0, 1, 3, 10):
        labels = rng.integers(0, 5, size=(12, 12)) * (rng.random((12, 12)) < 0.15)
        assert np.array_equal(dilate(labels, rounds), dilation_by_bfs(labels, rounds))


def test_dilation_never_overwrites():
    rng = make_rng(3)
    labels = rng.integers(0, 4, size=(10, 10))
    out = dilate(labels, 10)
    assert np.array_equal(out[labels > 0], labels[labels > 0])


def test_removal_leaves_no_small_segments():
    rng = make_rng(4)
    labels = connected_components(build_metric_graph(rng.standard_normal((16, 16, 1))),
                                  SegmentationConfig(cc_threshold=0.8))
    for min_size in (1, 3):
        cleaned = remove_small(labels, min_size)
        counts = np.bincount(cleaned.ravel())[1:]
        assert np.all((counts == 0) | (counts > min_size))


def test_seed_exact_means():
    gt = np.array([[1, 1, 0], [2, 2, 3]])
    means = {1: [0.0, 0.0], 2: [5.0, 1.0], 3: [-2.0, 4.0]}
    field = np.array([[means.get(int(l), [9.0, 9.0]) for l in row] for row in gt])
    assert np.array_equal(seed_segment(field, gt), gt)


def test_seed_single_object():
    gt = np.ones((4, 4), dtype=int)
    gt[0, 0] = 0
    out = seed_segment(make_rng(5).standard_normal((4, 4, 3)), gt)
    assert np.array_equal(out, gt)


def test_seed_matches_exhaustive_argmin():
    rng = make_rng(6)
    gt = rng.integers(1, 4, size=(10, 10))
    field = rng.standard_normal((10, 10, 3))
    out = seed_segment(field, gt)
    means = {lab: field[gt == lab].mean(0) for lab in (1, 2, 3)}
    for y in range(10):
        for x in range(10):
            d = {lab: np.abs(field[y, x] - mu).sum() for lab, mu in means.items()}
            assert out[y, x] == min(d, key=lambda lab: (d[lab], lab))


def test_seed_tie_goes_to_smallest_label():
    gt = np.array([[1, 1, 2, 2]])
    field = np.array([[[-1.0], [1.0], [1.0], [3.0]]])
    # means are 0 and 2; the middle pixels sit at 1.0, equidistant from both
    assert seed_segment(field, gt).tolist() == [[1, 1, 1, 2]]


def test_seed_errors():
    with pytest.raises(ValueError):
        seed_segment(np.zeros((2, 2, 1)), np.zeros((2, 2), dtype=int))


def test_seed_reproduces_gt_after_converged_fit():
    gt = voronoi_labels(16, 16, 3, seed=2)
    r = fit_embeddings(gt, FitConfig(loss=LossParams(dim=4, gamma=0.0), max_iters=1500, seed=3))
    assert np.array_equal(seed_segment(r.field, gt), gt)


def test_config_validation():
    for bad in (dict(cc_threshold=0), dict(affinity_threshold=1.0), dict(max_dilation=-1), dict(connectivity=6)):
        with pytest.raises(ValueError):
            SegmentationConfig(**bad)
