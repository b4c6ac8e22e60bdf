"""scikit-learn compatible wrappers around the simulation pipeline.

The estimators are stateless apart from a validated configuration built in
``fit``; they exist so the pipeline slots into ``sklearn.pipeline.Pipeline``,
``clone`` and ``get_params``/``set_params`` tooling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .augment import AugmentConfig, apply_augmentation, derive_seed, sample_params
from .labelproj import LabelMask
from .projection import (
    DEFAULT_VIEW_ANGLES,
    ProjectionConfig,
    image_view,
    label_view,
    simulate_view,
)
from .validation import (
    check_co_registered,
    check_image_stack,
    check_label_volumes,
    check_mask_stack,
    check_volumes,
)
from .volume import clamp_air, clamp_artifacts, resample_isotropic


class CTConditioner(TransformerMixin, BaseEstimator):
    """Optional isotropic resampling, then artifact and air clamping."""

    def __init__(self, resample_mm=None, artifact_percentile=99, clamp_air=True):
        self.resample_mm = resample_mm
        self.artifact_percentile = artifact_percentile
        self.clamp_air = clamp_air

    def fit(self, X, y=None):
        self.n_volumes_in_ = len(check_volumes(X))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_volumes_in_")
        out = []
        for vol in check_volumes(X):
            if self.resample_mm:
                vol = resample_isotropic(vol, self.resample_mm)
            vol = clamp_artifacts(vol, self.artifact_percentile)
            if self.clamp_air:
                vol = clamp_air(vol)
            out.append(vol)
        return out


class RadiographSimulator(TransformerMixin, BaseEstimator):
    """Turn CT volumes into a stack of simulated radiographs, one per view.

    ``transform`` returns an array shaped ``(n_volumes * n_views, h, w)``
    ordered volume-major; ``transform_labels`` produces the matching masks.
    """

    def __init__(
        self,
        view_angles=DEFAULT_VIEW_ANGLES,
        attenuation_scale=None,
        adaptive_constant=4.0,
        tissue_low_percentile=20,
        tissue_target_percentile=10,
        artifact_percentile=99,
        output_size=(256, 256),
        rotation_axis="y",
        invert_for_tissue_reduction=False,
        resize_mode="direct",
        scan_from_far=False,
    ):
        self.view_angles = view_angles
        self.attenuation_scale = attenuation_scale
        self.adaptive_constant = adaptive_constant
        self.tissue_low_percentile = tissue_low_percentile
        self.tissue_target_percentile = tissue_target_percentile
        self.artifact_percentile = artifact_percentile
        self.output_size = output_size
        self.rotation_axis = rotation_axis
        self.invert_for_tissue_reduction = invert_for_tissue_reduction
        self.resize_mode = resize_mode
        self.scan_from_far = scan_from_far

    def _config(self):
        return ProjectionConfig(**self.get_params())

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.n_views_ = len(self.config_.view_angles)
        return self

    def simulate(self, X, Y):
        """Return ``(images, masks)`` stacks for paired CT and label volumes."""
        check_is_fitted(self, "config_")
        cts, labs = check_volumes(X), check_label_volumes(Y)
        if len(labs) != len(cts):
            raise ValueError(f"{len(cts)} CT volumes but {len(labs)} label volumes")
        pairs = [
            simulate_view(*check_co_registered(ct, lab), angle, self.config_)
            for ct, lab in zip(cts, labs)
            for angle in self.config_.view_angles
        ]
        return (
            np.stack([img.data for img, _ in pairs]),
            np.stack([mask.data for _, mask in pairs]),
        )

    def transform(self, X):
        check_is_fitted(self, "config_")
        return np.stack([
            image_view(ct, angle, self.config_).data
            for ct in check_volumes(X)
            for angle in self.config_.view_angles
        ])

    def transform_labels(self, Y):
        check_is_fitted(self, "config_")
        return np.stack([
            label_view(lab, angle, self.config_).data
            for lab in check_label_volumes(Y)
            for angle in self.config_.view_angles
        ])

    @property
    def angles_(self):
        check_is_fitted(self, "config_")
        return np.asarray(self.config_.view_angles)


class PairAugmenter(TransformerMixin, BaseEstimator):
    """Randomized affine augmentation producing ``copies_per_image`` draws per input.

    Seeds for copy ``c`` of input ``i`` derive from ``(random_state, i, c)``
    so results do not depend on batch composition order.
    """

    def __init__(
        self,
        copies_per_image=7,
        rotation_range=(-40.0, 40.0),
        translation_range=(-0.2, 0.2),
        zoom_range=(0.8, 1.2),
        hflip_probability=0.5,
        random_state=0,
    ):
        self.copies_per_image = copies_per_image
        self.rotation_range = rotation_range
        self.translation_range = translation_range
        self.zoom_range = zoom_range
        self.hflip_probability = hflip_probability
        self.random_state = random_state

    def fit(self, X=None, y=None):
        params = self.get_params()
        seed = params.pop("random_state")
        self.config_ = AugmentConfig(**params)
        self.seed_ = 0 if seed is None else int(seed)
        return self

    def sample(self, index, copy):
        check_is_fitted(self, "config_")
        return sample_params(derive_seed(self.seed_, f"item{index}", 0, copy), self.config_)

    def augment(self, X, Y=None):
        """Return ``(images, masks, params)``; masks is None when ``Y`` is None."""
        check_is_fitted(self, "config_")
        imgs = check_image_stack(X)
        masks = check_mask_stack(Y) if Y is not None else None
        if masks is not None and len(masks) != len(imgs):
            raise ValueError(f"{len(imgs)} images but {len(masks)} masks")
        out_img, out_mask, drawn = [], [], []
        for i, img in enumerate(imgs):
            mask = masks[i] if masks is not None else LabelMask(np.zeros(img.data.shape, np.uint8))
            for c in range(self.config_.copies_per_image):
                p = self.sample(i, c)
                a, m = apply_augmentation(img, mask, p)
                out_img.append(a.data)
                out_mask.append(m.data)
                drawn.append(p)
        return (
            np.stack(out_img),
            np.stack(out_mask) if masks is not None else None,
            drawn,
        )

    def transform(self, X):
        return self.augment(X)[0]

    def fit_augment(self, X, Y=None):
        return self.fit(X, Y).augment(X, Y)


__all__ = ["CTConditioner", "PairAugmenter", "RadiographSimulator"]
