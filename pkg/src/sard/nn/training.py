"""Training loop for the residual despeckler.

Each epoch draws a fresh speckle field per training truth (the frozen
archived inputs can be used instead for overfit checks), clips the noisy
image at the dataset's percentile, min-max normalizes with the
dataset-global range, and optimizes the composite loss with Adam under
the stepped learning-rate schedule.  Validation PSNR/SSIM against the
raw truths is recorded every epoch and a checkpoint is written per epoch
so a diverged run always leaves its last good state behind.
"""

from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass

import numpy as np

from .. import metrics
from ..grid import ImageGrid, percentile_value
from ..speckle import sample_gamma_speckle, stream_rng
from .loss import composite_loss
from .model import ResidualModel, save_checkpoint
from .optim import Adam, lr_at


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr0: float = 0.002
    decay: float = 0.8
    decay_step: int = 5
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1e-5
    looks: int = 4
    seed: int = 0
    fresh_speckle: bool = True

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.decay_step, self.looks) < 1:
            raise ValueError("epochs, batch_size, decay_step and looks must be positive")
        if min(self.lr0, self.decay, self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("lr0, decay and loss weights must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def _preprocess(raw: np.ndarray, clip_p: float, lo: float, scale: float) -> np.ndarray:
    """Clip each channel at its percentile, normalize, clamp to [0, 1]."""
    out = np.empty_like(raw)
    for c in range(raw.shape[0]):
        cap = percentile_value(raw[c], clip_p)
        out[c] = np.minimum(raw[c], cap)
    return np.clip((out - lo) / scale, 0.0, 1.0)


def _validate(model, val_inputs: np.ndarray, val_truths, norm, batch_size: int):
    """Mean PSNR/SSIM of denormalized predictions against raw truths."""
    psnrs, ssims = [], []
    scale = (norm.max - norm.min) + norm.epsilon
    for start in range(0, val_inputs.shape[0], batch_size):
        chunk = val_inputs[start:start + batch_size]
        filtered, _ = model.forward(chunk, train=False)
        pred = filtered * scale + norm.min
        for j in range(chunk.shape[0]):
            truth = val_truths[start + j]
            pred_img = ImageGrid(pred[j])
            psnrs.append(metrics.psnr(truth, pred_img))
            ssims.append(metrics.ssim(truth, pred_img))
    return float(np.mean(psnrs)), float(np.mean(ssims))


def _write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_psnr", "val_ssim"])
        for row in history:
            writer.writerow([row["epoch"], f"{row['lr']:.8f}", f"{row['train_loss']:.6f}",
                             f"{row['val_psnr']:.4f}", f"{row['val_ssim']:.4f}"])


def train(archive, cfg: TrainConfig, out_dir=None, log_fn=None):
    """Train on an archive's train split; returns (model, history).

    ``archive`` needs train and validation splits plus normalization
    params.  ``out_dir``, when given, receives checkpoint.sarm and
    history.csv, refreshed every epoch.
    """
    train_pairs = archive.pairs_for("train")
    val_pairs = archive.pairs_for("val")
    if not train_pairs or not val_pairs:
        raise ValueError("archive must provide nonempty train and val splits")
    norm = archive.normalization
    clip_p = archive.clip_p
    lo, scale = norm.min, (norm.max - norm.min) + norm.epsilon

    c, h, w = train_pairs[0].truth.shape
    n = len(train_pairs)
    truths_raw = np.stack([p.truth.data for p in train_pairs])
    truths_norm = np.clip((truths_raw - lo) / scale, 0.0, 1.0)
    frozen_inputs = np.stack([
        _preprocess(p.input.data, clip_p, lo, scale) for p in train_pairs])
    val_inputs = np.stack([
        _preprocess(p.input.data, clip_p, lo, scale) for p in val_pairs])
    val_truths = [p.truth for p in val_pairs]

    model = ResidualModel(seed=cfg.seed)
    adam = Adam(model.parameters())
    history = []
    ckpt_path = os.path.join(out_dir, "checkpoint.sarm") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg.lr0, cfg.decay, cfg.decay_step)
        order = stream_rng(cfg.seed, 7, epoch).permutation(n)
        epoch_loss, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            if sel.size < 2:
                continue  # batch norm needs at least two samples
            if cfg.fresh_speckle:
                x = np.empty((sel.size, c, h, w), dtype=np.float32)
                for j, idx in enumerate(sel):
                    field = sample_gamma_speckle(w, h, c, cfg.looks, cfg.seed,
                                                 stream=(epoch, int(idx)))
                    x[j] = _preprocess(truths_raw[idx] * field.data, clip_p, lo, scale)
            else:
                x = frozen_inputs[sel]
            filtered, _ = model.forward(x, train=True)
            loss_val, grad = composite_loss(filtered, truths_norm[sel],
                                            cfg.alpha, cfg.beta, cfg.gamma)
            model.backward(grad)
            adam.step(model.gradients(), lr)
            epoch_loss += loss_val * sel.size
            seen += sel.size

        val_psnr, val_ssim = _validate(model, val_inputs, val_truths, norm, cfg.batch_size)
        row = {"epoch": epoch, "lr": lr, "train_loss": epoch_loss / max(seen, 1),
               "val_psnr": val_psnr, "val_ssim": val_ssim}
        history.append(row)
        if log_fn is not None:
            log_fn(row)
        if out_dir:
            tmp = ckpt_path + ".tmp"
            save_checkpoint(model, tmp, train_config=cfg.to_dict(),
                            normalization=norm.to_dict(), clip_percentile=clip_p)
            os.replace(tmp, ckpt_path)
            _write_history(os.path.join(out_dir, "history.csv"), history)
    return model, history
