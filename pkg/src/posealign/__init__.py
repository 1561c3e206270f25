"""Landmark alignment as extreme-scale pose-class classification.

The pipeline: normalize shapes into a canonical frame, discretize them into
K pose classes (up to one class per training example), train a linear head
over image features with one of three losses, and treat the resulting class
posterior as a full probabilistic object: marginalize it into heatmaps and
global-statistic histograms, condition it on user clicks, decode it over
video time with an HMM, and refine it with pose-class cascaded regressors.
"""

from .bench import bench_head_scaling, head_flops, head_param_scalars
from .classifier import (
    ClassifierHead,
    TrainConfig,
    embed,
    multi_label_loss,
    nn_classify,
    scores,
    soft_target_loss,
    softmax_loss,
    train,
)
from .clustering import (
    MembershipSets,
    PoseClassSet,
    assign_classes,
    build_pose_classes,
    fit_bandwidths,
    kmeans_shapes,
    membership_histogram,
    membership_sets,
)
from .data import (
    Dataset,
    DatasetRecord,
    DatasetSchema,
    apply_occlusion,
    flip_augment,
    load_dataset,
    save_dataset,
    split_and_subsample,
)
from .evaluation import (
    CedCurve,
    ced_stats,
    evaluate_model,
    hard_subset,
    interactive_eval,
    loss_scaling_experiment,
    pt_pt_error,
    select_tau,
)
from .features import RandomProjectionExtractor, TrainableMlpExtractor
from .inference import (
    Evidence,
    GridSpec,
    LandmarkDistribution,
    PosePosterior,
    condition,
    map_class,
    marginal_global,
    marginal_heatmap,
    mixture,
    posterior,
    predict_landmarks,
)
from .model import AlignmentModel, build_model, load_model, save_model
from .pts import parse_pts, serialize_pts
from .refine import (
    BBoxRegressor,
    CascadedRegressor,
    apply_regressor,
    refine_bbox,
    train_bbox_regressor,
    train_pose_regressors,
)
from .shapes import (
    BBox,
    FlipPermutation,
    RawAnnotation,
    Shape,
    denormalize_shape,
    flip_shape,
    normalize_shape,
    shape_distance,
)
from .synthetic import SyntheticConfig, face_template, generate_synthetic
from .temporal import FrameSequence, TransitionStructure, build_transitions, lowpass_smooth, viterbi

__version__ = "0.1.0"
