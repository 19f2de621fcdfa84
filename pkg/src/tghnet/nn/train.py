"""Mini-batch training loop for the g-and-h and Gaussian heads.

Shuffling is driven by a single seeded generator so a fixed seed gives a
bitwise-identical run.  Validation uses eval-mode batch norm; the
parameters with the best validation loss are restored at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from ..loss import (
    DEFAULT_LINK,
    LinkConfig,
    gaussian_head_loss,
    tukey_head_loss,
)
from ..tgh import DEFAULT_SOLVER, InverseSolverConfig
from .network import Network
from .optim import Adam, AdamConfig, effective_lr

LOSS_KINDS = ("tukey", "gaussian")

_EVAL_CHUNK = 65536


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 4096
    seed: int = 0
    clip_norm: float | None = 10.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive or None")


@dataclass
class TrainHistory:
    """Per-epoch record: epoch index, effective lr, train and val mean loss."""

    epoch: list[int]
    lr: list[float]
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int | None = None

    def __len__(self) -> int:
        return len(self.epoch)


def _head_loss(kind: str, y, raw, link_cfg, solver_cfg):
    if kind == "tukey":
        mean, head_grad, _ = tukey_head_loss(y, raw, link_cfg, solver_cfg)
    else:
        mean, head_grad, _ = gaussian_head_loss(y, raw, link_cfg)
    return mean, head_grad


def _clip_grads(grads: list[np.ndarray], max_norm: float) -> None:
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale


def evaluate_mean_loss(net: Network, x: np.ndarray, y: np.ndarray, kind: str,
                       link_cfg: LinkConfig = DEFAULT_LINK,
                       solver_cfg: InverseSolverConfig = DEFAULT_SOLVER) -> float:
    """Mean head loss over a dataset with eval-mode batch norm."""
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")
    total = 0.0
    n = len(y)
    for start in range(0, n, _EVAL_CHUNK):
        stop = min(start + _EVAL_CHUNK, n)
        raw = net.forward(x[start:stop], train=False)
        mean, _ = _head_loss(kind, y[start:stop], raw, link_cfg, solver_cfg)
        total += mean * (stop - start)
    return total / n


def train(net: Network, x: np.ndarray, y: np.ndarray,
          train_idx: np.ndarray, val_idx: np.ndarray, kind: str,
          adam_cfg: AdamConfig, train_cfg: TrainConfig,
          link_cfg: LinkConfig = DEFAULT_LINK,
          solver_cfg: InverseSolverConfig = DEFAULT_SOLVER) -> TrainHistory:
    """Train the network in place; returns the per-epoch history.

    After the last epoch the network is reset to the parameters (and
    batch-norm running statistics) of the epoch with the lowest
    validation loss.  Raises NumericalError with epoch/batch context if a
    batch loss turns non-finite.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise ValueError("train and validation splits must be non-empty")

    rng = np.random.default_rng(train_cfg.seed)
    opt = Adam(net.parameters(), adam_cfg)
    history = TrainHistory([], [], [], [])
    best_val = np.inf
    best_state = None

    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(train_idx))
        epoch_sum = 0.0
        for b, start in enumerate(range(0, len(order), train_cfg.batch_size)):
            rows = train_idx[order[start:start + train_cfg.batch_size]]
            raw = net.forward(x[rows], train=True)
            mean, head_grad = _head_loss(kind, y[rows], raw, link_cfg, solver_cfg)
            if not np.isfinite(mean):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, batch {b}"
                )
            grads = net.backward(head_grad)
            if train_cfg.clip_norm is not None:
                _clip_grads(grads, train_cfg.clip_norm)
            opt.step(net.parameters(), grads, epoch)
            epoch_sum += mean * len(rows)
        train_loss = epoch_sum / len(train_idx)
        val_loss = evaluate_mean_loss(
            net, x[val_idx], y[val_idx], kind, link_cfg, solver_cfg
        )
        if not np.isfinite(val_loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        history.epoch.append(epoch)
        history.lr.append(effective_lr(adam_cfg, epoch))
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_state = net.get_state()
            history.best_epoch = epoch

    if best_state is not None:
        net.set_state(best_state)
    return history
