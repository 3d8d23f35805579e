"""Training loop: SSIM loss, AdamW, step-decay schedule, mixed undersampling."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import ParamStore, Tensor, default_dtype
from .autodiff.tensor import get_default_dtype
from .evaluation.metrics import (SSIM_K1, SSIM_K2, filter_matrix, image_metrics)
from .masks import generate
from .model import CardioMM
from .text import TextBundle, compose_metadata_text

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class NonFiniteGradientError(TrainingError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.param = name


@dataclass
class TrainConfig:
    epochs: int = 15
    lr0: float = 2e-4
    lr_decay: float = 0.3
    decay_every: int = 5
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 1
    seed: int = 0
    patterns: tuple[str, ...] = ("uniform", "random", "radial")
    afs: tuple[float, ...] = (4, 8, 16, 24)
    acs_lines: int = 20
    acs_block: tuple[int, int] = (20, 20)
    val_pattern: str = "uniform"
    val_af: float = 8
    dtype: str = "float32"
    max_steps_per_epoch: int | None = None

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size != 1:
            raise ValueError("only batch_size 1 is supported")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")
        self.patterns = tuple(self.patterns)
        self.afs = tuple(self.afs)
        self.betas = tuple(self.betas)
        self.acs_block = tuple(self.acs_block)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training config fields: {sorted(unknown)}")
        return cls(**d)

    @property
    def grid(self) -> list[tuple[str, float]]:
        return [(p, a) for p in self.patterns for a in self.afs]


# ------------------------------------------------------------------ loss
def ssim_loss(recon: Tensor, ref, data_range: float | None = None) -> Tensor:
    """``1 - SSIM(recon, ref)``, differentiable with respect to ``recon``.

    Uses the same window, constants and valid-region averaging as
    :func:`cardiomm.evaluation.metrics.ssim`.
    """
    ref_t = ref if isinstance(ref, Tensor) else Tensor(np.asarray(ref, dtype=recon.dtype))
    if recon.shape != ref_t.shape or recon.ndim != 2:
        raise ValueError(f"ssim_loss shape mismatch {recon.shape} vs {ref_t.shape}")
    L = float(ref_t.data.max()) if data_range is None else data_range
    c1, c2 = (SSIM_K1 * L) ** 2, (SSIM_K2 * L) ** 2
    gy = Tensor(filter_matrix(recon.shape[0]).astype(recon.dtype))
    gxt = Tensor(filter_matrix(recon.shape[1]).T.astype(recon.dtype))

    def filt(a):
        return gy @ a @ gxt

    x, y = recon, ref_t
    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (mx * my * 2.0 + c1) * (sxy * 2.0 + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return 1.0 - (num / den).mean()


# ------------------------------------------------------------- optimiser
def lr_at(epoch: int, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr0 * cfg.lr_decay ** (epoch // cfg.decay_every)


def adamw_step(store: ParamStore, cfg: TrainConfig, lr: float) -> None:
    """One decoupled-weight-decay Adam update using the ``.grad`` of each parameter.

    Parameters without a gradient still receive weight decay.
    """
    b1, b2 = cfg.betas
    for name, p in store.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradientError(name)
    for name, p in store.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        st = store.state.get(name)
        if st is None:
            st = store.state[name] = {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data),
                                      "step": 0}
        st["step"] += 1
        t = st["step"]
        st["m"] = b1 * st["m"] + (1 - b1) * g
        st["v"] = b2 * st["v"] + (1 - b2) * g * g
        m_hat = st["m"] / (1 - b1 ** t)
        v_hat = st["v"] / (1 - b2 ** t)
        p.data = (p.data * (1 - lr * cfg.weight_decay)
                  - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(p.dtype, copy=False)


# ------------------------------------------------------------- sampling
def sample_undersampling(rng: np.random.Generator, cfg: TrainConfig) -> tuple[str, float, int]:
    """Uniform draw of ``(pattern, af)`` from the configured grid plus a mask seed."""
    grid = cfg.grid
    if not grid:
        raise ValueError("undersampling grid is empty")
    pattern, af = grid[int(rng.integers(len(grid)))]
    return pattern, af, int(rng.integers(2 ** 31))


def make_mask(pattern: str, af: float, shape: tuple[int, int], seed: int, cfg: TrainConfig):
    return generate(pattern, shape[0], shape[1], af, seed=seed, acs_lines=cfg.acs_lines,
                    acs_block=cfg.acs_block)


def texts_for(record, mask) -> TextBundle:
    return TextBundle(compose_metadata_text(record.metadata), mask.text)


def record_loss(model: CardioMM, record, mask) -> Tensor:
    """SSIM loss of the SoS reconstruction against the max-normalised reference."""
    ref = np.asarray(record.reference, dtype=float)
    peak = ref.max()
    out = model.reconstruct(record.kspace.astype(complex), mask, texts_for(record, mask))
    recon = out.magnitude * (out.scale / peak)
    return ssim_loss(recon, (ref / peak).astype(get_default_dtype()), data_range=1.0)


def validate(model: CardioMM, records, cfg: TrainConfig) -> dict:
    psnrs, ssims = [], []
    for i, rec in enumerate(records):
        mask = make_mask(cfg.val_pattern, cfg.val_af, rec.kspace.shape[-2:], i, cfg)
        out = model.infer(rec.kspace.astype(complex), mask, texts_for(rec, mask))
        m = image_metrics(rec.reference, out.sos())
        psnrs.append(m["psnr"])
        ssims.append(m["ssim"])
    return {"val_psnr": float(np.mean(psnrs)), "val_ssim": float(np.mean(ssims))}


# ---------------------------------------------------------------- train
@dataclass
class TrainResult:
    best_checkpoint: Path
    last_checkpoint: Path
    epochs: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)


def _append_csv(path: Path, row: dict) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(row)


def _fmt(v):
    return f"{v:.10g}" if isinstance(v, float) else v


def train(model: CardioMM, train_records, val_records, cfg: TrainConfig,
          out_dir: str | os.PathLike, resume: bool = False) -> TrainResult:
    """Train ``model`` in place; writes checkpoints and CSV logs to ``out_dir``.

    Outputs: ``last`` and ``best`` checkpoints (best by validation SSIM),
    ``steps.csv`` and ``epochs.csv``. With ``resume=True`` training continues
    after the last completed epoch recorded in ``last``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not train_records:
        raise TrainingError("no training records")
    dtype = np.float64 if cfg.dtype == "float64" else np.float32
    with default_dtype(dtype):
        model.store.astype(dtype)
        start, best_ssim = 0, -math.inf
        result = TrainResult(out / "best", out / "last")
        if resume and (out / "last.model.json").exists():
            state = json.loads((out / "last.model.json").read_text())["extra"]
            model.store.load(out / "last")
            start, best_ssim = state["epoch"] + 1, state["best_ssim"]
        else:
            for name in ("steps.csv", "epochs.csv"):
                (out / name).unlink(missing_ok=True)
        n = len(train_records)
        for epoch in range(start, cfg.epochs):
            lr = lr_at(epoch, cfg)
            order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
            if cfg.max_steps_per_epoch is not None:
                order = order[:cfg.max_steps_per_epoch]
            losses = []
            for step, idx in enumerate(order):
                rec = train_records[int(idx)]
                rng = np.random.default_rng([cfg.seed, epoch, step])
                pattern, af, mseed = sample_undersampling(rng, cfg)
                mask = make_mask(pattern, af, rec.kspace.shape[-2:], mseed, cfg)
                model.store.zero_grad()
                loss = record_loss(model, rec, mask)
                value = loss.item()
                if not np.isfinite(value):
                    model.save(out / "abort", extra={"epoch": epoch, "step": step})
                    raise TrainingError(f"non-finite loss at epoch {epoch} step {step}; "
                                        f"state dumped to {out / 'abort'}")
                loss.backward()
                adamw_step(model.store, cfg, lr)
                losses.append(value)
                result.step_losses.append(value)
                _append_csv(out / "steps.csv", {"epoch": epoch, "step": step,
                                                "record": int(idx), "pattern": pattern,
                                                "af": _fmt(float(af)), "loss": _fmt(value)})
            row = {"epoch": epoch, "lr": lr, "train_loss": float(np.mean(losses))}
            if val_records:
                row.update(validate(model, val_records, cfg))
            improved = row.get("val_ssim", -row["train_loss"]) > best_ssim
            if improved:
                best_ssim = row.get("val_ssim", -row["train_loss"])
                model.save(out / "best", extra={"epoch": epoch, "metrics": row})
            row["best"] = int(improved)
            model.save(out / "last", extra={"epoch": epoch, "best_ssim": best_ssim})
            result.epochs.append(row)
            _append_csv(out / "epochs.csv", {k: _fmt(v) for k, v in row.items()})
            log.info("epoch %d: %s", epoch, row)
    return result
