"""Deterministic random patch-drop occlusion over raster images.

The image is cut into a square-patch grid and an exact number of patches,
round(loss_fraction * num_patches), is blanked to a fill color. Ties in the
rounding use half-away-from-zero so counts are platform-independent; patch
selection is a seeded shuffle, so the same spec always drops the same
patches and every non-dropped pixel stays bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import derive_seed
from .errors import PatchDropError

DEFAULT_PATCH_SIZE = 16
DEFAULT_LEVELS = tuple(round(0.1 * i, 1) for i in range(10))  # 0.0 .. 0.9


@dataclass(frozen=True)
class PatchDropSpec:
    patch_size: int = DEFAULT_PATCH_SIZE
    loss_fraction: float = 0.0
    seed: int = 0
    fill_value: int | tuple[int, ...] = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise PatchDropError(f"patch_size must be >= 1, got {self.patch_size}")
        if not 0.0 <= self.loss_fraction <= 1.0:
            raise PatchDropError(
                f"loss_fraction must lie in [0, 1], got {self.loss_fraction}"
            )
        fill = self.fill_value
        values = fill if isinstance(fill, tuple) else (fill,)
        for v in values:
            if not 0 <= int(v) <= 255:
                raise PatchDropError(f"fill_value components must be 8-bit, got {v}")


@dataclass
class RasterImage:
    """Row-major 8-bit image; 1 (gray), 3 (RGB) or 4 (RGBA) channels."""

    pixels: np.ndarray  # shape (height, width, channels), dtype uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3, 4):
            raise PatchDropError(f"expected (H, W, C) with C in (1, 3, 4), got {px.shape}")
        self.pixels = np.ascontiguousarray(px, dtype=np.uint8)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def select_patches(num_patches: int, loss_fraction: float, seed: int) -> list[int]:
    """Choose exactly round(loss_fraction * num_patches) distinct patch
    indices (row-major grid order) via a seeded shuffle."""
    count = _round_half_away(loss_fraction * num_patches)
    order = np.random.default_rng(seed).permutation(num_patches)
    return sorted(int(i) for i in order[:count])


def drop_patches(image: RasterImage, spec: PatchDropSpec) -> RasterImage:
    """Blank a seeded random selection of patches; all other pixels are
    bit-identical to the input. Image dimensions must be exact multiples of
    the patch size."""
    p = spec.patch_size
    if image.height % p or image.width % p:
        raise PatchDropError(
            f"image {image.width}x{image.height} is not divisible by patch_size {p}"
        )
    rows, cols = image.height // p, image.width // p
    dropped = select_patches(rows * cols, spec.loss_fraction, spec.seed)
    fill = spec.fill_value
    if isinstance(fill, tuple):
        if len(fill) != image.channels:
            raise PatchDropError(
                f"fill_value has {len(fill)} components for a {image.channels}-channel image"
            )
        fill_px = np.array(fill, dtype=np.uint8)
    else:
        fill_px = np.full(image.channels, fill, dtype=np.uint8)
    out = image.pixels.copy()
    for idx in dropped:
        r, c = divmod(idx, cols)
        out[r * p : (r + 1) * p, c * p : (c + 1) * p, :] = fill_px
    return RasterImage(out)


def schedule(
    levels: list[float] | tuple[float, ...] = DEFAULT_LEVELS,
    *,
    base_seed: int = 0,
    patch_size: int = DEFAULT_PATCH_SIZE,
    fill_value: int | tuple[int, ...] = 0,
) -> list[PatchDropSpec]:
    """One spec per information-loss level, with per-level seeds derived
    deterministically from the base seed and the level index."""
    specs = []
    for i, level in enumerate(levels):
        if not 0.0 <= level <= 1.0:
            raise PatchDropError(f"information-loss level must lie in [0, 1], got {level}")
        specs.append(
            PatchDropSpec(
                patch_size=patch_size,
                loss_fraction=float(level),
                seed=derive_seed(base_seed, "patch-drop-level", i),
                fill_value=fill_value,
            )
        )
    return specs


# ---------------------------------------------------------------------------
# PNG I/O (the CLI surface reads and writes PNG trees)


def read_png(path) -> RasterImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGB")
        return RasterImage(np.asarray(im))


def write_png(image: RasterImage, path) -> None:
    from PIL import Image

    px = image.pixels
    if px.shape[2] == 1:
        Image.fromarray(px[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(px).save(path, format="PNG")
