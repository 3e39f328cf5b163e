"""Instance segmentation through metric graphs built from per-pixel embeddings."""
from .core import (
    AffinityGraph,
    MetricGraph,
    affinity_to_metric,
    build_metric_graph,
    metric_to_affinity,
    relabel_connected,
)
from .evaluation import EvalReport, boundary_exclusion_mask, evaluate
from .loss import ExtMask, LossParams, LossReport, build_ext_mask, compute_loss, compute_loss_gradient
from .metricfit import ProjectionConfig, make_inconsistent_fixture, project_to_metric
from .optimize import AdamState, FitConfig, adam_step, fit_embeddings
from .segment import SegmentationConfig, connected_components, postprocess, seed_segment
from .synth import inject_drift, voronoi_labels
from .viz import PcaModel, fit_pca, render_rgb

__version__ = "0.1.0"
