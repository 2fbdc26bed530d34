"""Anisotropic, local threat functions over labeled data.

The threat of a perturbation at a labeled input is its maximal normalized
alignment with observed unsafe directions: unit vectors from the input toward
representative training points of other classes. The package covers index
construction (greedy k-center per class), threat evaluation (plain, masked,
class-weighted, and lp baselines), convex sublevel-set projections, relative
class-weight construction, simplified corruption generators, an exact oracle
on synthetic 2D tasks, and a `pd` command-line harness.
"""

from .errors import PDError
from .formats import (
    BooleanMask,
    HierarchyTree,
    LabeledDataset,
    MaskSet,
    RepresentativeIndex,
    WeightMatrix,
    load_dataset,
    load_hierarchy,
    load_index,
    load_masks,
    load_weight_matrix,
    load_weights_raw,
    save_dataset,
    save_hierarchy,
    save_index,
    save_masks,
    save_weights,
)
from .geometry import (
    SublevelSet,
    build_sublevel,
    contains,
    greedy_project,
    halfspace_project,
    lazy_project,
    project_intersection_linf,
)
from .index import (
    CalibrationResult,
    UnsafeDirectionSet,
    build_index,
    calibrate_k,
    unsafe_directions,
)
from .kcenter import KCenterResult, greedy_kcenter, objective_f
from .threat import (
    Attribution,
    ThreatRecord,
    avg_threat,
    evaluate_batch,
    lipschitz_constant,
    lp_threat,
    pd_s_threat,
    pd_threat,
    pd_w_threat,
    precompute_directions,
)
from .weights import (
    RawDistanceMatrix,
    combine_weights,
    euclidean_distance_matrix,
    lca_distance_matrix,
    relative_weights,
)

__version__ = "0.1.0"
