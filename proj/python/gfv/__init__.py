"""Conditional grid-frame video generation toolkit.

Thin Python surface over the C++ core: the full CLI (`run`), the experiment
recipes, dataset synthesis, clip inspection and the evaluation metrics.
"""

try:
    # Installed layout: the extension lives inside the package.
    from ._gfv import (
        GfvError,
        clip_frame,
        clip_info,
        frechet_distance,
        label_oracle,
        make_dataset,
        num_motion_classes,
        psnr,
        recipe_names,
        run,
        run_recipe,
        temporal_consistency,
    )
except ImportError:  # pragma: no cover - build-tree layout
    # Build-tree layout: the extension sits next to the package on sys.path.
    from _gfv import (
        GfvError,
        clip_frame,
        clip_info,
        frechet_distance,
        label_oracle,
        make_dataset,
        num_motion_classes,
        psnr,
        recipe_names,
        run,
        run_recipe,
        temporal_consistency,
    )

__all__ = [
    "GfvError",
    "clip_frame",
    "clip_info",
    "frechet_distance",
    "label_oracle",
    "make_dataset",
    "num_motion_classes",
    "psnr",
    "recipe_names",
    "run",
    "run_recipe",
    "temporal_consistency",
]
