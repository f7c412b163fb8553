"""Training loop: seeded shuffling, train-split augmentation, per-epoch
validation, best-on-validation checkpointing, CSV history."""

import os
from dataclasses import dataclass

import numpy as np

from . import functional as F
from .augment import AugmentConfig, augment
from .data import normalize_stack
from .model import ModelConfig, build_model, save_checkpoint
from .optim import Adam, ScheduleConfig, lr_at
from .tensor import Tensor, no_grad

HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 8
    seed: int = 7
    base_lr: float = 2e-4
    min_lr: float = 2e-6
    warmup_epochs: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    stop_train_acc: float = 0.0  # early stop once clean-train accuracy reaches this (0 = off)

    def schedule(self):
        # short smoke runs clamp the warmup so the schedule invariant holds
        warmup = min(self.warmup_epochs, self.epochs - 1)
        return ScheduleConfig(self.base_lr, self.min_lr, warmup, self.epochs).validate()


@dataclass
class SplitData:
    """Raw [0, 1] resized images; standardization happens inside the loop."""

    train_images: np.ndarray
    train_labels: np.ndarray
    val_images: np.ndarray
    val_labels: np.ndarray


@dataclass
class TrainResult:
    history: list
    best_state: dict
    best_val_acc: float
    best_epoch: int
    steps: int
    model: object
    history_path: str = ""
    checkpoint_path: str = ""


def evaluate(model, images_std, labels, batch_size=32):
    """Eval-mode pass: (mean cross-entropy, accuracy, predictions)."""
    losses = []
    preds = np.empty(len(labels), dtype=np.int64)
    with no_grad():
        for lo in range(0, len(labels), batch_size):
            hi = min(lo + batch_size, len(labels))
            logits = model.forward(Tensor(images_std[lo:hi]), "eval")
            losses.append(float(F.cross_entropy_loss(logits, labels[lo:hi]).data) * (hi - lo))
            preds[lo:hi] = logits.data.argmax(axis=1)
    return sum(losses) / len(labels), float((preds == labels).mean()), preds


def _batch_norms(module):
    from .modules import BatchNorm2d

    found = []
    for _, child in module._children():
        if isinstance(child, BatchNorm2d):
            found.append(child)
        found.extend(_batch_norms(child))
    return found


def refresh_batchnorm_stats(model, images_std, batch_size=32):
    """Re-estimate batch-norm running stats from clean data (precise-BN).

    Augmented training batches and clean evaluation images have systematically
    different layer statistics; stats learned from the former misnormalize the
    latter. Momentum 1/(i+1) over clean batches leaves each running buffer at
    the plain average of the clean-batch statistics, deterministic and
    independent of the augmented history.
    """
    norms = _batch_norms(model)
    if not norms or len(images_std) < 2:
        return
    saved = [bn.momentum for bn in norms]
    with no_grad():
        for i, lo in enumerate(range(0, len(images_std), batch_size)):
            hi = min(lo + batch_size, len(images_std))
            if hi - lo == 1:  # the 1x1-spatial norms need at least two samples
                lo = max(0, lo - 1)
            for bn in norms:
                bn.momentum = 1.0 / (i + 1)
            model.forward(Tensor(images_std[lo:hi]), "train")
    for bn, momentum in zip(norms, saved):
        bn.momentum = momentum


def history_csv_text(history):
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history:
        lines.append(
            f"{row['epoch']},{row['lr']:.10g},{row['train_loss']:.6f},"
            f"{row['train_acc']:.6f},{row['val_loss']:.6f},{row['val_acc']:.6f}"
        )
    return "\n".join(lines) + "\n"


def train(model_cfg: ModelConfig, data: SplitData, cfg: TrainConfig,
          aug_cfg: AugmentConfig | None = None, out_dir=None, progress=None):
    """Run the full loop; returns history plus the best-on-validation state.

    ``train_loss`` is the mean objective over the epoch's augmented batches;
    ``train_acc`` is measured on the clean (un-augmented) train split in eval
    mode after the epoch. Batch-norm running stats are re-estimated from the
    clean train split before each evaluation (see
    :func:`refresh_batchnorm_stats`); the checkpointed states carry those
    stats. Everything stochastic derives from ``cfg.seed``.
    """
    if len(data.train_labels) == 0 or len(data.val_labels) == 0:
        raise ValueError("train and val splits must be nonempty")
    aug_cfg = aug_cfg or AugmentConfig()
    sched = cfg.schedule()
    model = build_model(model_cfg, cfg.seed)
    opt = Adam(list(model.named_parameters()), cfg.beta1, cfg.beta2,
               weight_decay=cfg.weight_decay)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA5]))
    aug_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB6]))

    train_clean = normalize_stack(data.train_images)
    val_std = normalize_stack(data.val_images)
    n = len(data.train_labels)

    history = []
    best_state = model.state_copy()
    best_val_acc = -1.0
    best_val_loss = float("inf")
    best_epoch = -1
    steps = 0
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, sched)
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = np.stack([augment(data.train_images[i], aug_cfg, aug_rng) for i in idx])
            logits = model.forward(Tensor(normalize_stack(batch)), "train")
            loss = F.cross_entropy_loss(logits, data.train_labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step(lr)
            steps += 1
            loss_sum += float(loss.data) * len(idx)

        # evaluation sees clean images; re-estimate the BN stats from them
        refresh_batchnorm_stats(model, train_clean)
        _, train_acc, _ = evaluate(model, train_clean, data.train_labels)
        val_loss, val_acc, _ = evaluate(model, val_std, data.val_labels)
        history.append({
            "epoch": epoch, "lr": lr, "train_loss": loss_sum / n,
            "train_acc": train_acc, "val_loss": val_loss, "val_acc": val_acc,
        })
        if progress is not None:
            progress(history[-1])
        # best by validation accuracy; ties broken by validation loss, so a
        # saturated val split still tracks the most confident checkpoint
        if val_acc > best_val_acc or (val_acc == best_val_acc and val_loss < best_val_loss):
            best_val_acc = val_acc
            best_val_loss = val_loss
            best_epoch = epoch
            best_state = model.state_copy()
        if cfg.stop_train_acc and train_acc >= cfg.stop_train_acc:
            break

    result = TrainResult(history, best_state, best_val_acc, best_epoch, steps, model)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.history_path = os.path.join(out_dir, "history.csv")
        with open(result.history_path, "w", encoding="utf-8") as fh:
            fh.write(history_csv_text(history))
        result.checkpoint_path = os.path.join(out_dir, "best.ckpt")
        save_checkpoint(best_state, result.checkpoint_path)
    return result
