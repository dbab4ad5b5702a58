"""Training loop for the EPI inpainting network.

Supervision is plain MSE between the network output (sparse window plus
predicted residual) and the intact window, optimized with bias-corrected
ADAM under a staircase learning-rate schedule.  All randomness (shuffling,
augmentation) flows from one seeded generator in a fixed order, so a run is
bit-reproducible from its seed, data, and config.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .network import (
    EpiResNet,
    NetworkConfig,
    build_network,
    tensor_to_windows,
    windows_to_tensor,
)
from .sampling import EPIWindow

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters and augmentation ranges."""

    lr0: float = 1e-4
    decay: float = 0.96
    decay_every: int = 2256
    batch_size: int = 30
    epochs: int = 5
    brightness_range: tuple[float, float] = (0.8, 1.2)
    noise_sigma_range: tuple[float, float] = (0.0, 0.02)
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.lr0 > 0 and self.decay > 0 and self.decay_every > 0):
            raise ValueError("lr0, decay and decay_every must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.brightness_range[0] > self.brightness_range[1]:
            raise ValueError(f"bad brightness range {self.brightness_range}")
        if not (0 <= self.noise_sigma_range[0] <= self.noise_sigma_range[1]):
            raise ValueError(f"bad noise sigma range {self.noise_sigma_range}")


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """Staircase schedule: lr0 * decay ** floor(iteration / decay_every)."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    return cfg.lr0 * cfg.decay ** (iteration // cfg.decay_every)


def _as_stack(batch: Sequence[EPIWindow] | np.ndarray) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        stack = batch
    else:
        stack = np.stack([w.pixels for w in batch])
    if stack.ndim != 4 or stack.shape[-1] != 3:
        raise ValueError(f"batch must stack to (N, H, W, 3), got {stack.shape}")
    return stack.astype(np.float32, copy=False)


def mse_loss(
    outputs: Sequence[EPIWindow] | np.ndarray, targets: Sequence[EPIWindow] | np.ndarray
) -> float:
    """Mean over the batch of each window's mean squared per-channel error."""
    out = _as_stack(outputs)
    tgt = _as_stack(targets)
    if out.shape != tgt.shape:
        raise ValueError(f"shape mismatch: {out.shape} vs {tgt.shape}")
    return float(_mse_loss_torch(torch.from_numpy(out), torch.from_numpy(tgt)))


def _mse_loss_torch(out: torch.Tensor, tgt: torch.Tensor) -> torch.Tensor:
    per_window = ((out - tgt) ** 2).mean(dim=tuple(range(1, out.ndim)))
    return per_window.mean()


def _augment_arrays(
    incomplete: np.ndarray,
    intact: np.ndarray,
    blank: slice,
    rng: np.random.Generator,
    cfg: TrainConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Brightness-scale a pair jointly, then add noise to the valid sparse rows.

    Draw order (scale, sigma, noise) is fixed; the blank band stays zero.
    """
    scale = rng.uniform(*cfg.brightness_range)
    sigma = rng.uniform(*cfg.noise_sigma_range)
    inc = np.clip(incomplete * scale, 0.0, 1.0)
    tgt = np.clip(intact * scale, 0.0, 1.0)
    noise = rng.normal(0.0, sigma, size=inc.shape) if sigma > 0 else None
    if noise is not None:
        inc = inc + noise
        inc[blank] = 0.0
        inc = np.clip(inc, 0.0, 1.0)
    return inc.astype(np.float32), tgt.astype(np.float32)


def augment_pair(
    incomplete: EPIWindow,
    intact: EPIWindow,
    rng: np.random.Generator,
    cfg: TrainConfig,
) -> tuple[EPIWindow, EPIWindow]:
    """Randomly adjust a training pair's brightness and noise the sparse side."""
    inc, tgt = _augment_arrays(
        incomplete.pixels, intact.pixels, incomplete.blank_rows, rng, cfg
    )
    return (
        EPIWindow(inc, gap=incomplete.gap, subfield_size=incomplete.subfield_size),
        EPIWindow(tgt, gap=intact.gap, subfield_size=intact.subfield_size),
    )


def parameter_gradients(
    net: EpiResNet,
    inputs: Sequence[EPIWindow] | np.ndarray,
    targets: Sequence[EPIWindow] | np.ndarray,
) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of the batch loss for every parameter."""
    dtype = next(net.parameters()).dtype
    x = windows_to_tensor(_as_stack(inputs), dtype)
    y = windows_to_tensor(_as_stack(targets), dtype)
    net.zero_grad(set_to_none=True)
    loss = _mse_loss_torch(net(x), y)
    loss.backward()
    grads = {}
    for name, param in net.named_parameters():
        grads[name] = param.grad.detach().cpu().numpy().copy()
    net.zero_grad(set_to_none=True)
    return grads


@dataclass
class TrainResult:
    """Final parameters plus the per-iteration loss and learning-rate history."""

    net: EpiResNet
    losses: np.ndarray
    lrs: np.ndarray

    def epoch_mean_losses(self, epochs: int) -> np.ndarray:
        return np.array([c.mean() for c in np.array_split(self.losses, epochs)])

    def save_loss_csv(self, path: str | Path) -> None:
        lines = ["iteration,lr,loss"]
        for i, (lr, loss) in enumerate(zip(self.lrs, self.losses)):
            lines.append(f"{i},{lr:.10g},{loss:.10g}")
        Path(path).write_text("\n".join(lines) + "\n")


def train(
    pairs: Sequence[tuple[EPIWindow, EPIWindow]],
    net_cfg: NetworkConfig,
    train_cfg: TrainConfig,
) -> TrainResult:
    """Fit the network on (incomplete, intact) window pairs.

    Each epoch shuffles the pairs and walks batches of ``batch_size`` (the
    whole set forms a single batch when it is smaller); every batch is
    augmented, and parameters follow bias-corrected ADAM at the staircase
    learning rate.  Identical (pairs, configs) produce bit-identical results.
    """
    if not pairs:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(train_cfg.seed)
    net = build_network(net_cfg, seed=train_cfg.seed)
    blank = pairs[0][0].blank_rows
    inc_all = np.stack([p[0].pixels for p in pairs])
    tgt_all = np.stack([p[1].pixels for p in pairs])
    n = inc_all.shape[0]
    batch = min(train_cfg.batch_size, n)

    params = [p for _, p in net.named_parameters()]
    m_state = [torch.zeros_like(p) for p in params]
    v_state = [torch.zeros_like(p) for p in params]

    losses: list[float] = []
    lrs: list[float] = []
    step = 0
    for _ in range(train_cfg.epochs):
        perm = rng.permutation(n)
        for b0 in range(0, n - batch + 1, batch):
            idx = perm[b0 : b0 + batch]
            inc = np.empty((len(idx),) + inc_all.shape[1:], dtype=np.float32)
            tgt = np.empty_like(inc)
            for j, i in enumerate(idx):
                inc[j], tgt[j] = _augment_arrays(
                    inc_all[i], tgt_all[i], blank, rng, train_cfg
                )
            x = windows_to_tensor(inc)
            y = windows_to_tensor(tgt)
            net.zero_grad(set_to_none=True)
            loss = _mse_loss_torch(net(x), y)
            loss.backward()

            lr = lr_at(step, train_cfg)
            step += 1
            with torch.no_grad():
                bc1 = 1.0 - ADAM_BETA1**step
                bc2 = 1.0 - ADAM_BETA2**step
                for p, m, v in zip(params, m_state, v_state):
                    g = p.grad
                    m.mul_(ADAM_BETA1).add_(g, alpha=1.0 - ADAM_BETA1)
                    v.mul_(ADAM_BETA2).addcmul_(g, g, value=1.0 - ADAM_BETA2)
                    denom = (v / bc2).sqrt_().add_(ADAM_EPS)
                    p.addcdiv_(m / bc1, denom, value=-lr)
            losses.append(float(loss.detach()))
            lrs.append(lr)
    net.zero_grad(set_to_none=True)
    return TrainResult(net=net, losses=np.array(losses), lrs=np.array(lrs))
