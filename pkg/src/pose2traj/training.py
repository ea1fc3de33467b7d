"""Teacher-forced training with MSE loss and Adam."""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from typing import Callable, Sequence

import numpy as np

from .autodiff import AdamState, Tensor, adam_step, backward, clip_grad_norm, mean, square, sub
from .checkpoint import Checkpoint
from .config import TrainConfig
from .data.features import TrainingExample, stack_examples
from .errors import DivergedLoss, EmptyDataset, ShapeMismatch
from .model import ModelConfig, forward_batch, init_params

log = logging.getLogger(__name__)


def split_validation(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train, validation) index split; depends only on ``n``, ``fraction`` and ``seed``."""
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(n * fraction))
    if n_val >= n:
        n_val = n - 1
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    return mean(square(sub(pred, target)))


def evaluate_mse(params, config: ModelConfig, examples: Sequence[TrainingExample], batch_size: int = 256):
    """Eval-mode MSE averaged over every output element of ``examples``; None when empty."""
    if not len(examples):
        return None
    total, count = 0.0, 0
    for lo in range(0, len(examples), batch_size):
        b = stack_examples(examples[lo : lo + batch_size])
        out = forward_batch(params, config, b["enc_in"], b["enc_times"], b["dec_in"], b["dec_times"])
        diff = out.data - b["target"]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def _check_dims(examples, config: ModelConfig) -> None:
    e = examples[0]
    if e.enc_in.shape[1] != config.feature_dim:
        raise ShapeMismatch(f"examples carry {e.enc_in.shape[1]} features, {config.family} expects {config.feature_dim}")
    if e.enc_in.shape[0] != config.enc_len_frames:
        raise ShapeMismatch(f"examples have {e.enc_in.shape[0]} encoder frames, config says {config.enc_len_frames}")
    if e.target.shape[0] != config.horizon_frames + 1:
        raise ShapeMismatch(f"examples have {e.target.shape[0]} target rows, config says {config.horizon_frames + 1}")


def params_from_arrays(arrays) -> "OrderedDict[str, Tensor]":
    return OrderedDict((k, Tensor(v.copy(), requires_grad=True)) for k, v in arrays.items())


def train(
    examples: Sequence[TrainingExample],
    model_config: ModelConfig,
    train_config: TrainConfig | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> Checkpoint:
    """Fit a fresh model on ``examples`` with ground-truth decoder inputs.

    A validation split is carved off before the first update and only ever
    evaluated. Row 0 of the metrics log holds the eval-mode losses at
    initialization; each later row holds the mean training-batch loss of that
    epoch and the eval-mode validation loss after it.
    """
    train_config = train_config or TrainConfig()
    train_config.validate()
    model_config.validate()
    if not len(examples):
        raise EmptyDataset("no training examples")
    _check_dims(examples, model_config)

    tr_idx, val_idx = split_validation(len(examples), train_config.validation_fraction, train_config.shuffle_seed)
    train_set = [examples[i] for i in tr_idx]
    val_set = [examples[i] for i in val_idx]

    params = init_params(model_config)
    plist = list(params.values())
    state = AdamState.for_params(plist)
    order_rng = np.random.default_rng(train_config.shuffle_seed)
    drop_rng = np.random.default_rng([model_config.seed, train_config.shuffle_seed])

    metrics = [
        {
            "epoch": 0,
            "train_mse": evaluate_mse(params, model_config, train_set),
            "val_mse": evaluate_mse(params, model_config, val_set),
        }
    ]
    log.info("epoch 0 train_mse=%s val_mse=%s", metrics[0]["train_mse"], metrics[0]["val_mse"])
    if on_epoch:
        on_epoch(metrics[0])

    bs = train_config.batch_size
    batch_index = 0
    for epoch in range(1, train_config.epochs + 1):
        perm = order_rng.permutation(len(train_set))
        losses = []
        for lo in range(0, len(perm), bs):
            b = stack_examples([train_set[i] for i in perm[lo : lo + bs]])
            pred = forward_batch(
                params, model_config, b["enc_in"], b["enc_times"], b["dec_in"], b["dec_times"], True, drop_rng
            )
            loss = mse_loss(pred, b["target"])
            value = loss.data.item()
            if not math.isfinite(value):
                raise DivergedLoss(f"non-finite loss {value} at batch {batch_index} (epoch {epoch})", batch_index)
            backward(loss)
            if train_config.grad_clip:
                clip_grad_norm(plist, train_config.grad_clip)
            adam_step(
                plist,
                state,
                train_config.lr,
                train_config.beta1,
                train_config.beta2,
                train_config.eps,
                train_config.weight_decay,
            )
            losses.append(value)
            batch_index += 1
        row = {"epoch": epoch, "train_mse": float(np.mean(losses)), "val_mse": evaluate_mse(params, model_config, val_set)}
        metrics.append(row)
        log.info("epoch %d train_mse=%s val_mse=%s", epoch, row["train_mse"], row["val_mse"])
        if on_epoch:
            on_epoch(row)

    names = list(params)
    return Checkpoint(
        model_config=model_config,
        train_config=train_config,
        params=OrderedDict((k, p.data.copy()) for k, p in params.items()),
        epoch=train_config.epochs,
        metrics_log=metrics,
        adam_step_count=state.step_count,
        adam_m=OrderedDict(zip(names, (m.copy() for m in state.m))),
        adam_v=OrderedDict(zip(names, (v.copy() for v in state.v))),
    )


def metrics_csv(metrics_log: Sequence[dict], header_lines: Sequence[str] = ()) -> str:
    """Render the metrics log as ``epoch,train_mse,val_mse`` CSV."""
    lines = [f"# {h}" for h in header_lines] + ["epoch,train_mse,val_mse"]
    for row in metrics_log:
        cells = ["" if row[k] is None else repr(float(row[k])) for k in ("train_mse", "val_mse")]
        lines.append(f"{row['epoch']},{cells[0]},{cells[1]}")
    return "\n".join(lines) + "\n"
