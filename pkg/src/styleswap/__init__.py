"""Feed-forward face swapping as multi-image patch style transfer.

A swap runs in four steps: align the input face onto a fixed reference
frame, push it through a multi-scale transform network trained against a
style collection, warp the result back, and blend it into the original
with a gradient-domain composite. See the README for the CLI walkthrough.
"""

from .baseline import baseline_swap, select_baseline_index
from .compositing import SolverError, composite_swap, poisson_clone
from .features import (ExtractorSpec, FeatureExtractor, FeatureMap,
                       load_extractor)
from .geometry import (AffineTransform, LandmarkSet, ReferenceFace,
                       align_to_reference, default_reference, estimate_affine,
                       invert_affine, landmark_distance, transform_landmarks,
                       warp_image)
from .image import (load_image, load_luminance, load_mask, save_image,
                    save_luminance, save_mask, to_luminance)
from .lightnet import (LightNet, LightNetConfig, LightTrainConfig,
                       LightingPair, contrastive_loss, train_lightnet)
from .losses import (EPS_NORM, LossBreakdown, LossWeights, content_loss,
                     cosine_distance, extract_patches, light_loss, nn_select,
                     select_style_subset, style_loss, total_loss, tv_loss)
from .pipeline import PassthroughNet, swap
from .synth import (make_aligned_face, make_face_corpus, make_reference,
                    make_relight_dataset, make_scene)
from .tensorio import load_bundle, save_bundle
from .trainer import (TrainConfig, TrainingDiverged, load_content_dir,
                      load_style_dir, read_curves, train_stage, write_curves)
from .transformnet import BranchSpec, TransformNet, build

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "BranchSpec",
    "EPS_NORM",
    "ExtractorSpec",
    "FeatureExtractor",
    "FeatureMap",
    "LandmarkSet",
    "LightNet",
    "LightNetConfig",
    "LightTrainConfig",
    "LightingPair",
    "LossBreakdown",
    "LossWeights",
    "PassthroughNet",
    "ReferenceFace",
    "SolverError",
    "TrainConfig",
    "TrainingDiverged",
    "TransformNet",
    "align_to_reference",
    "baseline_swap",
    "build",
    "composite_swap",
    "content_loss",
    "contrastive_loss",
    "cosine_distance",
    "default_reference",
    "estimate_affine",
    "extract_patches",
    "invert_affine",
    "landmark_distance",
    "light_loss",
    "load_bundle",
    "load_content_dir",
    "load_extractor",
    "load_image",
    "load_luminance",
    "load_mask",
    "load_style_dir",
    "make_aligned_face",
    "make_face_corpus",
    "make_reference",
    "make_relight_dataset",
    "make_scene",
    "nn_select",
    "poisson_clone",
    "read_curves",
    "save_bundle",
    "save_image",
    "save_luminance",
    "save_mask",
    "select_baseline_index",
    "select_style_subset",
    "style_loss",
    "swap",
    "to_luminance",
    "total_loss",
    "train_lightnet",
    "train_stage",
    "transform_landmarks",
    "tv_loss",
    "warp_image",
    "write_curves",
]
