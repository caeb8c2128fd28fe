"""Model registry: resolve a model name to (module, preprocessing, labels).

Three name schemes:

  builtin:tiny17        small CNN with fixed seeded weights and a 17-class
                        head over the kitchen-object labels; always
                        available, used for smoke tests and contract checks
  file:PATH             a TorchScript module; an optional PATH.meta.json
                        sidecar overrides labels / input size / normalization
  torchvision:NAME      any torchvision classification model with its
                        published weights and eval preprocessing (requires
                        the weights to be downloadable or cached)

Preprocessing is part of the resolved model and is recorded verbatim in the
log's provenance header, including the effective input size, because input
resolution differences between architectures are a known confound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from PIL import Image

from .labels import NVD_CLASS_NAMES

BUILTIN_SEED = 20220914


class ModelResolutionError(Exception):
    pass


@dataclass
class PreprocessSpec:
    input_size: int = 64
    mean: tuple[float, ...] = (0.5, 0.5, 0.5)
    std: tuple[float, ...] = (0.5, 0.5, 0.5)
    resize_mode: str = "bilinear"

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "mean": list(self.mean),
            "std": list(self.std),
            "resize_mode": self.resize_mode,
        }

    def __call__(self, image: Image.Image) -> torch.Tensor:
        resample = Image.BILINEAR if self.resize_mode == "bilinear" else Image.BICUBIC
        image = image.convert("RGB").resize((self.input_size, self.input_size), resample)
        arr = np.asarray(image, dtype=np.float32) / 255.0
        arr = (arr - np.array(self.mean, dtype=np.float32)) / np.array(self.std, dtype=np.float32)
        return torch.from_numpy(arr.transpose(2, 0, 1))


@dataclass
class ResolvedModel:
    name: str
    module: torch.nn.Module
    labels: tuple[str, ...]
    preprocess: Callable[[Image.Image], torch.Tensor]
    preprocess_info: dict = field(default_factory=dict)


class TinyNet(torch.nn.Module):
    """Throwaway-size CNN; its value is being deterministic and fast, not
    accurate."""

    def __init__(self, num_classes: int):
        super().__init__()
        self.features = torch.nn.Sequential(
            torch.nn.Conv2d(3, 8, 3, stride=2, padding=1),
            torch.nn.ReLU(),
            torch.nn.Conv2d(8, 16, 3, stride=2, padding=1),
            torch.nn.ReLU(),
            torch.nn.AdaptiveAvgPool2d(1),
        )
        self.head = torch.nn.Linear(16, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x).flatten(1))


def _resolve_builtin(variant: str) -> ResolvedModel:
    if variant != "tiny17":
        raise ModelResolutionError(f"unknown builtin model {variant!r}")
    torch.manual_seed(BUILTIN_SEED)
    module = TinyNet(len(NVD_CLASS_NAMES))
    module.eval()
    spec = PreprocessSpec()
    return ResolvedModel(
        name=f"builtin:{variant}",
        module=module,
        labels=NVD_CLASS_NAMES,
        preprocess=spec,
        preprocess_info=spec.to_dict(),
    )


def _resolve_file(path_str: str) -> ResolvedModel:
    path = Path(path_str)
    if not path.is_file():
        raise ModelResolutionError(f"model file not found: {path}")
    try:
        module = torch.jit.load(str(path), map_location="cpu")
    except Exception as exc:
        raise ModelResolutionError(f"cannot load TorchScript model {path}: {exc}") from exc
    module.eval()
    labels: tuple[str, ...] = NVD_CLASS_NAMES
    spec = PreprocessSpec()
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    if sidecar.is_file():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        labels = tuple(meta.get("labels", labels))
        spec = PreprocessSpec(
            input_size=meta.get("input_size", spec.input_size),
            mean=tuple(meta.get("mean", spec.mean)),
            std=tuple(meta.get("std", spec.std)),
            resize_mode=meta.get("resize_mode", spec.resize_mode),
        )
    return ResolvedModel(
        name=f"file:{path.name}",
        module=module,
        labels=labels,
        preprocess=spec,
        preprocess_info=spec.to_dict(),
    )


def _resolve_torchvision(name: str) -> ResolvedModel:
    try:
        from torchvision.models import get_model, get_model_weights
    except ImportError as exc:
        raise ModelResolutionError("torchvision is not installed") from exc
    try:
        weights = get_model_weights(name).DEFAULT
    except Exception as exc:
        raise ModelResolutionError(f"unknown torchvision model {name!r}: {exc}") from exc
    try:
        module = get_model(name, weights=weights)
    except Exception as exc:
        raise ModelResolutionError(
            f"cannot load weights for torchvision model {name!r} "
            f"(download or cache required): {exc}"
        ) from exc
    module.eval()
    transform = weights.transforms()
    size = getattr(transform, "crop_size", None) or getattr(transform, "resize_size", None)
    info = {"recipe": repr(transform)}
    if size:
        info["input_size"] = size[0] if isinstance(size, (list, tuple)) else size
    return ResolvedModel(
        name=f"torchvision:{name}",
        module=module,
        labels=tuple(weights.meta["categories"]),
        preprocess=lambda img: transform(img.convert("RGB")),
        preprocess_info=info,
    )


def resolve_model(name: str) -> ResolvedModel:
    scheme, sep, rest = name.partition(":")
    if not sep:
        raise ModelResolutionError(
            f"unresolvable model {name!r}; expected builtin:NAME, file:PATH or torchvision:NAME"
        )
    if scheme == "builtin":
        return _resolve_builtin(rest)
    if scheme == "file":
        return _resolve_file(rest)
    if scheme == "torchvision":
        return _resolve_torchvision(rest)
    raise ModelResolutionError(f"unresolvable model {name!r}; unknown scheme {scheme!r}")
