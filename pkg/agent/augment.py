"""
Random-crop augmentation and anchor/positive pairs for the contrastive loss.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CropSpec:
    source_height: int
    source_width: int
    crop_height: int
    crop_width: int

    def __post_init__(self):
        dims = (self.source_height, self.source_width, self.crop_height, self.crop_width)
        if any(int(d) != d or d <= 0 for d in dims):
            raise ContractError(f"crop dimensions must be positive integers, got {dims}")
        if self.crop_height > self.source_height or self.crop_width > self.source_width:
            raise ContractError(
                f"crop {self.crop_height}x{self.crop_width} larger than source "
                f"{self.source_height}x{self.source_width}"
            )

    @property
    def view_dim(self) -> int:
        return self.crop_height * self.crop_width

    @property
    def max_offsets(self) -> Tuple[int, int]:
        return self.source_height - self.crop_height, self.source_width - self.crop_width


@dataclass
class AugmentedBatch:
    anchors: np.ndarray       # [N, h*w]
    positives: np.ndarray     # [N, h*w]
    source_index: np.ndarray  # [N]

    def __len__(self):
        return len(self.source_index)


def _check_image(image: np.ndarray, spec: CropSpec):
    if image.shape != (spec.source_height, spec.source_width):
        raise ShapeError(f"image shape {list(image.shape)} does not match source "
                         f"{spec.source_height}x{spec.source_width}")


def draw_crop_offset(spec: CropSpec, rng: np.random.Generator) -> Tuple[int, int]:
    """Top/left offsets drawn uniformly from the valid range."""
    max_top, max_left = spec.max_offsets
    top = int(rng.integers(0, max_top + 1))
    left = int(rng.integers(0, max_left + 1))
    return top, left


def crop_at(image: np.ndarray, spec: CropSpec, top: int, left: int) -> np.ndarray:
    _check_image(image, spec)
    return image[top:top + spec.crop_height, left:left + spec.crop_width].copy()


def random_crop(image: np.ndarray, spec: CropSpec, rng: np.random.Generator) -> np.ndarray:
    """The crop_height x crop_width window at a uniform random offset; pixels copied exactly."""
    _check_image(image, spec)
    top, left = draw_crop_offset(spec, rng)
    return crop_at(image, spec, top, left)


def center_crop(image: np.ndarray, spec: CropSpec) -> np.ndarray:
    max_top, max_left = spec.max_offsets
    return crop_at(image, spec, max_top // 2, max_left // 2)


def center_views(observations: np.ndarray, spec: CropSpec) -> np.ndarray:
    """Flattened center crops for any leading dims: [..., H, W] -> [..., h*w]."""
    max_top, max_left = spec.max_offsets
    top, left = max_top // 2, max_left // 2
    if observations.shape[-2:] != (spec.source_height, spec.source_width):
        raise ShapeError(f"observations shape {list(observations.shape)} does not match source "
                         f"{spec.source_height}x{spec.source_width}")
    window = observations[..., top:top + spec.crop_height, left:left + spec.crop_width]
    return window.reshape(observations.shape[:-2] + (spec.view_dim,))


def make_pairs(observations: np.ndarray, spec: CropSpec, rng: np.random.Generator) -> AugmentedBatch:
    """
    Two independent random crops per observation.

    Args:
        observations: [N, H, W] source images
        spec: crop geometry
        rng: advanced by exactly 4 draws per observation (anchor offsets, then positive offsets)
    """
    if observations.ndim != 3 or len(observations) == 0:
        raise ContractError(f"make_pairs needs a non-empty [N, H, W] batch, got {list(observations.shape)}")
    anchors, positives = [], []
    for image in observations:
        anchors.append(random_crop(image, spec, rng).reshape(-1))
        positives.append(random_crop(image, spec, rng).reshape(-1))
    return AugmentedBatch(
        anchors=np.stack(anchors),
        positives=np.stack(positives),
        source_index=np.arange(len(observations)),
    )
