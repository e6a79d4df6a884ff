"""Mini-batch training loop and checkpoint container for :class:`VitModel`."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import torch

from .container import ContainerError, read_container, write_container
from .vit import NonFiniteError, VitConfig, VitModel, cross_entropy

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}: {detail}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # stop once an epoch's running train accuracy reaches this value
    stop_at_accuracy: float | None = None


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    seconds: float


@dataclass
class Checkpoint:
    config: VitConfig
    state: dict[str, torch.Tensor]
    hyper: TrainConfig
    epoch: int = 0
    history: list[EpochStats] = field(default_factory=list)
    optimizer_state: dict | None = None

    def build_model(self) -> VitModel:
        model = VitModel(self.config)
        dtype = next(iter(self.state.values())).dtype
        model.to(dtype)
        model.load_state_dict(self.state)
        return model

    def save(self, path: str | os.PathLike) -> None:
        blobs = {f"model.{k}": v.detach().cpu().numpy() for k, v in self.state.items()}
        opt_meta = None
        if self.optimizer_state is not None:
            names = list(self.state_param_names())
            opt_meta = {"step": {}, "param_groups": self.optimizer_state["param_groups"]}
            for idx, st in self.optimizer_state["state"].items():
                name = names[idx]
                opt_meta["step"][name] = float(st["step"])
                blobs[f"adam.{name}.exp_avg"] = st["exp_avg"].cpu().numpy()
                blobs[f"adam.{name}.exp_avg_sq"] = st["exp_avg_sq"].cpu().numpy()
        meta = {
            "config": self.config.to_dict(),
            "hyper": asdict(self.hyper),
            "epoch": self.epoch,
            "history": [asdict(h) for h in self.history],
            "optimizer": opt_meta,
            # batch order is a pure function of (seed, epoch); no RNG stream to persist
            "rng": {"shuffle": "numpy.default_rng([seed, epoch])", "seed": self.hyper.seed},
        }
        write_container(path, "checkpoint", CHECKPOINT_VERSION, meta, blobs)

    def state_param_names(self):
        # parameter order of VitModel.parameters(), which the optimizer indexes by
        return [n for n, _ in VitModel(self.config).named_parameters()]

    @classmethod
    def load(cls, path: str | os.PathLike) -> Checkpoint:
        meta, blobs = read_container(path, "checkpoint", CHECKPOINT_VERSION)
        try:
            config = VitConfig(**meta["config"])
            hyper = TrainConfig(**meta["hyper"])
            history = [EpochStats(**h) for h in meta["history"]]
            state = {
                k[len("model.") :]: torch.from_numpy(v)
                for k, v in blobs.items()
                if k.startswith("model.")
            }
            ckpt = cls(config, state, hyper, int(meta["epoch"]), history)
            opt_meta = meta.get("optimizer")
            if opt_meta is not None:
                names = ckpt.state_param_names()
                opt_state = {}
                for idx, name in enumerate(names):
                    if name not in opt_meta["step"]:
                        continue
                    opt_state[idx] = {
                        "step": torch.tensor(opt_meta["step"][name]),
                        "exp_avg": torch.from_numpy(blobs[f"adam.{name}.exp_avg"]),
                        "exp_avg_sq": torch.from_numpy(blobs[f"adam.{name}.exp_avg_sq"]),
                    }
                ckpt.optimizer_state = {"state": opt_state, "param_groups": opt_meta["param_groups"]}
        except (KeyError, TypeError) as exc:
            raise ContainerError(f"{path}: incomplete checkpoint ({exc})") from exc
        return ckpt


def make_optimizer(model: VitModel, hyper: TrainConfig) -> torch.optim.Optimizer:
    if hyper.optimizer == "adam":
        return torch.optim.Adam(
            model.parameters(), lr=hyper.lr, betas=(hyper.beta1, hyper.beta2), eps=hyper.eps
        )
    if hyper.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=hyper.lr)
    raise ValueError(f"unknown optimizer {hyper.optimizer!r}")


def train(
    model: VitModel,
    images: np.ndarray | torch.Tensor,
    labels: np.ndarray | torch.Tensor,
    hyper: TrainConfig = TrainConfig(),
    checkpoint_path: str | os.PathLike | None = None,
    resume: Checkpoint | None = None,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> Checkpoint:
    """Train ``model`` in place; returns the final checkpoint.

    A checkpoint is written atomically after every epoch when
    ``checkpoint_path`` is set, so a divergence leaves the last good one.
    """
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(np.asarray(images), dtype=dtype)
    y = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    if x.shape[1:] != (model.config.height, model.config.width):
        raise ValueError(
            f"images are {tuple(x.shape[1:])}, model expects "
            f"{(model.config.height, model.config.width)}"
        )
    n = len(x)
    if n == 0:
        raise ValueError("no training samples")

    opt = make_optimizer(model, hyper)
    history: list[EpochStats] = []
    start_epoch = 0
    if resume is not None:
        model.load_state_dict(resume.state)
        if resume.optimizer_state is not None:
            opt.load_state_dict(resume.optimizer_state)
        history = list(resume.history)
        start_epoch = resume.epoch

    ckpt = None
    for epoch in range(start_epoch, hyper.epochs):
        t0 = time.perf_counter()
        order = torch.from_numpy(np.random.default_rng([hyper.seed, epoch]).permutation(n))
        model.train()
        total_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, hyper.batch_size)):
            idx = order[start : start + hyper.batch_size]
            xb, yb = x[idx], y[idx]
            opt.zero_grad(set_to_none=True)
            logits = model(xb)
            loss = cross_entropy(logits, yb)
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch + 1, b, f"loss is {loss.item()}")
            loss.backward()
            for name, p in model.named_parameters():
                if p.grad is not None and not torch.isfinite(p.grad).all():
                    raise TrainingDiverged(epoch + 1, b, f"non-finite gradient in {name}")
            opt.step()
            total_loss += loss.item() * len(idx)
            correct += int((logits.argmax(-1) == yb).sum())
        stats = EpochStats(epoch + 1, total_loss / n, correct / n, time.perf_counter() - t0)
        history.append(stats)
        log.info("epoch %d loss %.4f acc %.4f (%.1fs)", stats.epoch, stats.loss, stats.accuracy,
                 stats.seconds)
        if on_epoch is not None:
            on_epoch(stats)
        ckpt = Checkpoint(
            model.config,
            {k: v.detach().clone() for k, v in model.state_dict().items()},
            hyper,
            epoch + 1,
            list(history),
            opt.state_dict(),
        )
        if checkpoint_path is not None:
            ckpt.save(checkpoint_path)
        if hyper.stop_at_accuracy is not None and stats.accuracy >= hyper.stop_at_accuracy:
            break
    if ckpt is None:  # nothing left to run
        ckpt = resume or Checkpoint(model.config, dict(model.state_dict()), hyper)
    return ckpt


@torch.no_grad()
def predict_logits(model: VitModel, images: np.ndarray, batch_size: int = 256) -> torch.Tensor:
    model.eval()
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(np.asarray(images), dtype=dtype)
    if len(x) == 0:
        return torch.zeros(0, model.config.num_classes, dtype=dtype)
    return torch.cat([model(x[i : i + batch_size]) for i in range(0, len(x), batch_size)])


__all__ = [
    "Checkpoint",
    "EpochStats",
    "NonFiniteError",
    "TrainConfig",
    "TrainingDiverged",
    "predict_logits",
    "train",
]
