"""Frozen torchvision feature extractors.

A backbone id is either a torchvision model name (``resnet18``,
``mobilenet_v2``, ...) loaded with its default pretrained weights, or
``untrained:<name>`` for the same architecture with a fixed-seed random
initialization. The untrained variant exists for offline environments
where checkpoint downloads are unavailable; random convolutional
features still separate visually distinct classes, but nothing
ImageNet-grade should be expected of them.

Features come from the model with its classification head replaced by
identity, i.e. the globally pooled penultimate activations. Models are
always set to eval mode and run under ``torch.no_grad``; nothing here
ever fine-tunes.
"""

from __future__ import annotations

import torch
from torch import nn
from torchvision import models as tvm
from torchvision import transforms

UNTRAINED_PREFIX = "untrained:"
_UNTRAINED_SEED = 0

# torchvision families and the attribute holding their classification head
_HEAD_ATTRS = ("fc", "classifier", "head", "heads")

SUPPORTED = (
    "resnet18",
    "resnet34",
    "resnet50",
    "mobilenet_v2",
    "mobilenet_v3_small",
    "mobilenet_v3_large",
    "efficientnet_b0",
    "squeezenet1_0",
    "convnext_tiny",
)

# ImageNet preprocessing, applied uniformly so pretrained and untrained
# variants of one architecture see identical inputs
PREPROCESS_DESC = (
    "resize(256) -> center_crop(224) -> to_tensor -> "
    "normalize(mean=[0.485,0.456,0.406], std=[0.229,0.224,0.225])"
)


def build_preprocess() -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
        ]
    )


class UnknownBackboneError(ValueError):
    pass


def _strip_head(model: nn.Module, name: str) -> nn.Module:
    for attr in _HEAD_ATTRS:
        if hasattr(model, attr):
            setattr(model, attr, nn.Identity())
            return model
    raise UnknownBackboneError(
        f"backbone {name!r} has no recognized classification head to strip"
    )


def load_backbone(backbone_id: str) -> tuple[nn.Module, str]:
    """Return (frozen feature extractor, weights description)."""
    name = backbone_id
    untrained = backbone_id.startswith(UNTRAINED_PREFIX)
    if untrained:
        name = backbone_id[len(UNTRAINED_PREFIX):]
    if name not in SUPPORTED:
        raise UnknownBackboneError(
            f"unknown backbone {backbone_id!r}; supported: {', '.join(SUPPORTED)} "
            f"(optionally prefixed with {UNTRAINED_PREFIX!r})"
        )
    if untrained:
        torch.manual_seed(_UNTRAINED_SEED)
        model = tvm.get_model(name, weights=None)
        weights_desc = f"untrained (seed {_UNTRAINED_SEED})"
    else:
        model = tvm.get_model(name, weights="DEFAULT")
        weights_desc = "torchvision DEFAULT pretrained"
    model = _strip_head(model, name)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model, weights_desc


def feature_dim(model: nn.Module) -> int:
    with torch.no_grad():
        out = model(torch.zeros(1, 3, 224, 224))
    return int(out.reshape(1, -1).shape[1])
