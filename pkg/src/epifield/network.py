"""Residual convolutional network that inpaints blank EPI bands.

The model predicts only the difference between the intact EPI and its sparse
version: a global shortcut adds the input back onto the last convolution's
output, so known rows pass through untouched and the convolutional branch
learns the blank-band content.  Five sections of residual blocks (two
convolutions each, identity skip added before the block's final activation)
keep spatial size everywhere: no pooling, zero padding of (k - 1) / 2 per
kernel k.  With the default five sections of three blocks plus the stem and
the 3-channel output convolution, the network has 32 convolutional layers.

Weights are serialized in a small versioned container: magic, version, a
JSON header (config, tensor names and shapes), then raw little-endian
float32 tensors in build order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .sampling import EPIWindow

WEIGHTS_MAGIC = b"EPIW"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters.

    ``filters[i]`` and ``kernels[i]`` set the channel count and square kernel
    size of section i; all kernels must be odd so convolutions can preserve
    spatial size.
    """

    filters: tuple[int, ...] = (32, 64, 128, 256, 512)
    kernels: tuple[int, ...] = (9, 7, 5, 5, 5)
    blocks_per_section: int = 3
    activation: str = "elu"

    def __post_init__(self) -> None:
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if len(self.filters) == 0:
            raise ValueError("filters must not be empty")
        if len(self.filters) != len(self.kernels):
            raise ValueError(
                f"filters ({len(self.filters)}) and kernels ({len(self.kernels)}) "
                "must have one entry per section"
            )
        if any(f < 1 for f in self.filters):
            raise ValueError(f"filter counts must be positive, got {self.filters}")
        if any(k < 1 or k % 2 == 0 for k in self.kernels):
            raise ValueError(f"kernels must be odd and positive, got {self.kernels}")
        if self.blocks_per_section < 1:
            raise ValueError(f"blocks_per_section must be >= 1, got {self.blocks_per_section}")
        if self.activation != "elu":
            raise ValueError(f"only the 'elu' activation is supported, got {self.activation}")

    @property
    def sections(self) -> int:
        return len(self.filters)

    @property
    def conv_layer_count(self) -> int:
        """Stem + two per residual block + output layer (skip projections excluded)."""
        return 2 + self.sections * self.blocks_per_section * 2

    @property
    def residual_block_count(self) -> int:
        return self.sections * self.blocks_per_section

    @property
    def max_kernel(self) -> int:
        return max(self.kernels)

    def to_dict(self) -> dict:
        return {
            "filters": list(self.filters),
            "kernels": list(self.kernels),
            "blocks_per_section": self.blocks_per_section,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            filters=tuple(d["filters"]),
            kernels=tuple(d["kernels"]),
            blocks_per_section=int(d["blocks_per_section"]),
            activation=d.get("activation", "elu"),
        )


class ResidualBlock(nn.Module):
    """conv -> ELU -> conv, identity skip added, then ELU.

    When the block changes the channel count (first block of a section), the
    skip path goes through a 1x1 projection.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel: int) -> None:
        super().__init__()
        pad = (kernel - 1) // 2
        self.conv1 = nn.Conv2d(in_ch, out_ch, kernel, padding=pad)
        self.conv2 = nn.Conv2d(out_ch, out_ch, kernel, padding=pad)
        self.proj = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.conv2(F.elu(self.conv1(x)))
        skip = x if self.proj is None else self.proj(x)
        return F.elu(y + skip)


class EpiResNet(nn.Module):
    """The EPI inpainting network; holds its config alongside the layers."""

    def __init__(self, config: NetworkConfig) -> None:
        super().__init__()
        self.config = config
        k0 = config.kernels[0]
        self.stem = nn.Conv2d(3, config.filters[0], k0, padding=(k0 - 1) // 2)
        blocks = []
        in_ch = config.filters[0]
        for ch, kernel in zip(config.filters, config.kernels):
            for _ in range(config.blocks_per_section):
                blocks.append(ResidualBlock(in_ch, ch, kernel))
                in_ch = ch
        self.blocks = nn.ModuleList(blocks)
        k_out = config.kernels[-1]
        self.out_conv = nn.Conv2d(config.filters[-1], 3, k_out, padding=(k_out - 1) // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] < self.config.max_kernel or x.shape[-1] < self.config.max_kernel:
            raise ValueError(
                f"input {tuple(x.shape[-2:])} is smaller than the largest "
                f"kernel ({self.config.max_kernel})"
            )
        h = F.elu(self.stem(x))
        for block in self.blocks:
            h = block(h)
        return x + self.out_conv(h)


def _xavier_limit(weight: torch.Tensor) -> float:
    out_ch, in_ch, kh, kw = weight.shape
    fan_in = in_ch * kh * kw
    fan_out = out_ch * kh * kw
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def build_network(
    config: NetworkConfig, seed: int = 0, dtype: torch.dtype = torch.float32
) -> EpiResNet:
    """Construct the network with fan-based uniform (Xavier) initialization.

    Weights are drawn from U(-limit, limit) with limit = sqrt(6 / (fan_in +
    fan_out)) by a generator seeded with ``seed``, in parameter build order;
    biases start at zero.  The same seed always yields identical parameters.
    """
    net = EpiResNet(config)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, param in net.named_parameters():
            if name.endswith("bias"):
                param.zero_()
            else:
                limit = _xavier_limit(param)
                values = rng.uniform(-limit, limit, size=tuple(param.shape))
                param.copy_(torch.from_numpy(values.astype(np.float64)))
    return net.to(dtype)


def zero_parameters_(net: EpiResNet) -> EpiResNet:
    """Zero every parameter in place, making the network an exact identity."""
    with torch.no_grad():
        for param in net.parameters():
            param.zero_()
    return net


def count_conv_layers(net: EpiResNet) -> int:
    """Convolutional layers excluding 1x1 skip projections."""
    n = 0
    for name, module in net.named_modules():
        if isinstance(module, nn.Conv2d) and not name.endswith("proj"):
            n += 1
    return n


def windows_to_tensor(stack: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(N, H, W, 3) float array -> (N, 3, H, W) tensor."""
    arr = np.ascontiguousarray(np.moveaxis(stack, -1, 1))
    return torch.from_numpy(arr).to(dtype)


def tensor_to_windows(t: torch.Tensor) -> np.ndarray:
    """(N, 3, H, W) tensor -> (N, H, W, 3) float32 array."""
    return np.moveaxis(t.detach().cpu().numpy(), 1, -1).astype(np.float32)


def forward_windows(net: EpiResNet, stack: np.ndarray, chunk: int = 32) -> np.ndarray:
    """Run the network over a stack of (N, H, W, 3) windows without gradients."""
    dtype = next(net.parameters()).dtype
    outs = []
    with torch.no_grad():
        for i in range(0, stack.shape[0], chunk):
            x = windows_to_tensor(stack[i : i + chunk], dtype)
            outs.append(tensor_to_windows(net(x)))
    return np.concatenate(outs, axis=0)


def forward_window(net: EpiResNet, window: EPIWindow) -> EPIWindow:
    """Estimate the intact window for one sparse window."""
    out = forward_windows(net, window.pixels[None])[0]
    return EPIWindow(out, gap=window.gap, subfield_size=window.subfield_size)


def save_weights(net: EpiResNet, path: str | Path) -> None:
    """Serialize config and parameters to the versioned binary container."""
    names = []
    shapes = []
    blobs = []
    for name, param in net.named_parameters():
        arr = param.detach().cpu().numpy().astype("<f4")
        names.append(name)
        shapes.append(list(arr.shape))
        blobs.append(arr.tobytes())
    header = json.dumps(
        {
            "config": net.config.to_dict(),
            "dtype": "<f4",
            "tensors": [{"name": n, "shape": s} for n, s in zip(names, shapes)],
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", WEIGHTS_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_weights(path: str | Path) -> EpiResNet:
    """Rebuild a network from a weight container written by :func:`save_weights`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != WEIGHTS_MAGIC:
            raise ValueError(f"{path}: not a weight container (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != WEIGHTS_VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        config = NetworkConfig.from_dict(header["config"])
        net = EpiResNet(config)
        params = dict(net.named_parameters())
        expected = [(n, list(p.shape)) for n, p in net.named_parameters()]
        listed = [(t["name"], t["shape"]) for t in header["tensors"]]
        if expected != listed:
            raise ValueError(f"{path}: tensor list does not match the stored config")
        with torch.no_grad():
            for entry in header["tensors"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(count * 4), dtype="<f4").reshape(shape)
                params[entry["name"]].copy_(torch.from_numpy(data.copy()))
    return net
