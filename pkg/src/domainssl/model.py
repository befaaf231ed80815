"""Multi-head model: shared conv backbone, object head, pretext heads, domain discriminator.

Every head consumes the same feature vector. The discriminator sits behind a
gradient-reversal boundary: forward identity, backward multiplies the feature
gradient by -lambda, while the discriminator's own parameters receive the
plain gradient.

Two backbone variants exist. "small_conv" is the compact
conv-pool-conv-pool-fc-fc reference network (feature dim 128 on 32x32 RGB).
"small_conv_gap" replaces the fc tail with global average pooling over the
final conv maps, which is what class activation maps require.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import FormatError, UnsupportedArchitecture

CHECKPOINT_FORMAT = "domainssl-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class BackboneSpec:
    kind: str = "small_conv"  # "small_conv" | "small_conv_gap"
    input_size: int = 32
    in_channels: int = 3
    conv_channels: tuple[int, int] = (32, 64)
    fc_width: int = 1024
    feature_dim: int = 128

    def __post_init__(self):
        if self.kind not in ("small_conv", "small_conv_gap"):
            raise ValueError(f"unknown backbone kind {self.kind!r}")
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))


@dataclass(frozen=True)
class TaskHeadSpec:
    """Descriptor of one pretext head; enough to rebuild its label space from a checkpoint."""

    kind: str  # "jigsaw" | "rotation"
    cardinality: int
    grid_n: int = 0
    perm_seed: int = 0


@dataclass(frozen=True)
class ModelSpec:
    backbone: BackboneSpec
    num_classes: int
    tasks: tuple[TaskHeadSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))


def reference_backbone(input_size: int = 32, in_channels: int = 3) -> BackboneSpec:
    return BackboneSpec(kind="small_conv", input_size=input_size, in_channels=in_channels)


class _SmallConv(nn.Module):
    def __init__(self, spec: BackboneSpec):
        super().__init__()
        c1, c2 = spec.conv_channels
        self.conv1 = nn.Conv2d(spec.in_channels, c1, 5)
        self.conv2 = nn.Conv2d(c1, c2, 5)
        self.pool = nn.MaxPool2d(2)
        side = ((spec.input_size - 4) // 2 - 4) // 2
        if side < 1:
            raise ValueError(f"input size {spec.input_size} too small for this backbone")
        self.fc1 = nn.Linear(c2 * side * side, spec.fc_width)
        self.fc2 = nn.Linear(spec.fc_width, spec.feature_dim)
        self.out_dim = spec.feature_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.pool(torch.relu(self.conv1(x)))
        x = self.pool(torch.relu(self.conv2(x)))
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        return torch.relu(self.fc2(x))


class _SmallConvGap(nn.Module):
    def __init__(self, spec: BackboneSpec):
        super().__init__()
        c1, c2 = spec.conv_channels
        self.conv1 = nn.Conv2d(spec.in_channels, c1, 5)
        self.conv2 = nn.Conv2d(c1, c2, 5)
        self.pool = nn.MaxPool2d(2)
        if (spec.input_size - 4) // 2 - 4 < 1:
            raise ValueError(f"input size {spec.input_size} too small for this backbone")
        self.out_dim = c2

    def spatial_maps(self, x: torch.Tensor) -> torch.Tensor:
        x = self.pool(torch.relu(self.conv1(x)))
        return torch.relu(self.conv2(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.spatial_maps(x).mean(dim=(2, 3))


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, lam):
        ctx.lam = lam
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return -ctx.lam * grad_output, None


def grad_reverse(x: torch.Tensor, lam: float) -> torch.Tensor:
    """Identity forward; backward multiplies the incoming gradient by -lam, exactly."""
    return _GradReverse.apply(x, lam)


class ModelBundle(nn.Module):
    """Backbone plus object head, one pretext head per task, and the domain discriminator."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        if spec.backbone.kind == "small_conv":
            self.backbone = _SmallConv(spec.backbone)
        else:
            self.backbone = _SmallConvGap(spec.backbone)
        feat = self.backbone.out_dim
        self.feature_dim = feat
        self.object_head = nn.Linear(feat, spec.num_classes)
        self.pretext_heads = nn.ModuleDict(
            {t.kind: nn.Linear(feat, t.cardinality) for t in spec.tasks}
        )
        hidden = min(1024, 8 * feat)
        self.discriminator = nn.Sequential(
            nn.Linear(feat, hidden), nn.ReLU(), nn.Linear(hidden, hidden), nn.ReLU(), nn.Linear(hidden, 1)
        )

    @property
    def dtype(self) -> torch.dtype:
        return self.object_head.weight.dtype


def images_to_tensor(bundle: ModelBundle, images: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Convert a stack of (N, H, W, C) images to the (N, C, H, W) tensor the backbone expects."""
    if isinstance(images, torch.Tensor):
        x = images
    else:
        arr = np.ascontiguousarray(np.asarray(images))
        if arr.ndim != 4:
            raise ValueError(f"expected (N, H, W, C) images, got shape {arr.shape}")
        x = torch.from_numpy(arr).permute(0, 3, 1, 2)
    spec = bundle.spec.backbone
    if x.shape[1] != spec.in_channels or x.shape[2] != spec.input_size or x.shape[3] != spec.input_size:
        raise ValueError(
            f"images of shape {tuple(x.shape)} do not match backbone input "
            f"({spec.in_channels}, {spec.input_size}, {spec.input_size})"
        )
    return x.to(bundle.dtype)


def forward_features(bundle: ModelBundle, images: np.ndarray | torch.Tensor) -> torch.Tensor:
    return bundle.backbone(images_to_tensor(bundle, images))


def classify(bundle: ModelBundle, features: torch.Tensor) -> torch.Tensor:
    return bundle.object_head(features)


def pretext_logits(bundle: ModelBundle, features: torch.Tensor, task) -> torch.Tensor:
    kind = getattr(task, "kind", task)
    kind = getattr(kind, "value", kind)
    if kind not in bundle.pretext_heads:
        raise ValueError(f"no pretext head for task {kind!r}; available: {list(bundle.pretext_heads)}")
    return bundle.pretext_heads[kind](features)


def discriminate_domain(bundle: ModelBundle, features: torch.Tensor, lam: float) -> torch.Tensor:
    """Per-row probability that a feature row is source; gradients into the
    backbone are reversed and scaled by lam, the discriminator's own are not."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    logits = bundle.discriminator(grad_reverse(features, lam))
    return torch.sigmoid(logits).squeeze(-1)


def init_parameters(spec: ModelSpec, seed: int, dtype: torch.dtype = torch.float32) -> ModelBundle:
    """Build a bundle with fan-in-scaled uniform weights and zero biases, deterministic under seed."""
    bundle = ModelBundle(spec).to(dtype)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in bundle.modules():
            if isinstance(module, nn.Linear):
                fan_in = module.in_features
            elif isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
            else:
                continue
            bound = 1.0 / math.sqrt(fan_in)
            module.weight.uniform_(-bound, bound, generator=gen)
            module.bias.zero_()
    return bundle


# ----------------------------------------------------------------------------
# Checkpoints: JSON header + raw little-endian arrays in state_dict order
# ----------------------------------------------------------------------------

def _spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "backbone": {
            "kind": spec.backbone.kind,
            "input_size": spec.backbone.input_size,
            "in_channels": spec.backbone.in_channels,
            "conv_channels": list(spec.backbone.conv_channels),
            "fc_width": spec.backbone.fc_width,
            "feature_dim": spec.backbone.feature_dim,
        },
        "num_classes": spec.num_classes,
        "tasks": [
            {"kind": t.kind, "cardinality": t.cardinality, "grid_n": t.grid_n, "perm_seed": t.perm_seed}
            for t in spec.tasks
        ],
    }


def _spec_from_dict(d: dict) -> ModelSpec:
    bb = d["backbone"]
    return ModelSpec(
        backbone=BackboneSpec(
            kind=bb["kind"],
            input_size=bb["input_size"],
            in_channels=bb["in_channels"],
            conv_channels=tuple(bb["conv_channels"]),
            fc_width=bb["fc_width"],
            feature_dim=bb["feature_dim"],
        ),
        num_classes=d["num_classes"],
        tasks=tuple(TaskHeadSpec(**t) for t in d["tasks"]),
    )


def save_checkpoint(bundle: ModelBundle, path: str | Path, config_hash: str = "") -> None:
    state = bundle.state_dict()
    arrays = []
    blobs = []
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy()
        blob = np.ascontiguousarray(arr).tobytes()
        arrays.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "nbytes": len(blob)})
        blobs.append(blob)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_spec": _spec_to_dict(bundle.spec),
        "config_hash": config_hash,
        "arrays": arrays,
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    Path(path).write_bytes(payload + b"".join(blobs))


def load_checkpoint(path: str | Path, dtype: torch.dtype = torch.float32) -> tuple[ModelBundle, str]:
    """Rebuild a bundle from disk; rejects unknown formats and version mismatches."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing checkpoint header")
    try:
        header = json.loads(raw[:nl])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed checkpoint header") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise FormatError(
            f"{path}: checkpoint version {header.get('version')} not supported (expected {CHECKPOINT_VERSION})"
        )
    spec = _spec_from_dict(header["model_spec"])
    bundle = ModelBundle(spec).to(dtype)
    offset = nl + 1
    state = {}
    for entry in header["arrays"]:
        blob = raw[offset : offset + entry["nbytes"]]
        if len(blob) != entry["nbytes"]:
            raise FormatError(f"{path}: truncated array data for {entry['name']}")
        arr = np.frombuffer(blob, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
        state[entry["name"]] = torch.from_numpy(arr).to(dtype)
        offset += entry["nbytes"]
    bundle.load_state_dict(state)
    return bundle, header.get("config_hash", "")


def config_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
