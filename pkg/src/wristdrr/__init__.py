"""Simulated wrist radiographs with pixel-aligned bone masks from labeled CT."""
from .augment import AugmentConfig, AugmentParams, apply_augmentation, derive_seed, sample_params
from .dataset import DatasetConfig, DatasetManifest, VolumeSource, export_training_layout, generate
from .estimators import CTConditioner, PairAugmenter, RadiographSimulator
from .exceptions import (
    ConfigError,
    DegenerateVolume,
    DimensionMismatch,
    EmptyRegion,
    IoFailure,
    MalformedHeader,
    PairingMismatch,
    SpecOutOfBounds,
    UnsupportedDatatype,
    UnsupportedOrientation,
    WristDRRError,
)
from .io import load_pair, load_volume, save_raw_json
from .labelproj import LabelMask, project_labels, resize_mask
from .metrics import MetricsReport, asd, dice, evaluate, evaluate_masks
from .phantom import PhantomSpec, Primitive, make_phantom, wrist_phantom
from .projection import (
    ProjectionConfig,
    Radiograph,
    normalize_minmax,
    project,
    resize,
    simulate_view,
    tissue_reduction,
)
from .volume import (
    BONE_NAMES,
    CtVolume,
    LabelVolume,
    clamp_air,
    clamp_artifacts,
    nearest_rank_percentile,
    resample_isotropic,
    resample_labels,
    rotate_volume,
)

__version__ = "0.1.0"
