"""End-to-end encoder: TxRecord -> opcode TF-IDF + scaled numerics -> image.

A bundle directory holds everything needed to encode and classify::

    bundle.json      image geometry and component file names
    tfidf.bin        fitted TfidfModel
    scaler.bin       fitted ScalerParams
    model.ckpt       ViT checkpoint (after training)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tfidf
from .dataset import CLASS_NAMES, TxRecord
from .disasm import disassemble
from .imager import (
    NUM_NUMERIC,
    ImageSpec,
    ScalerParams,
    assemble,
    build_image,
    fit_scaler,
    standardize,
)
from .training import Checkpoint, predict_logits
from .vit import VitModel

BUNDLE_FILE = "bundle.json"
BUNDLE_VERSION = 1


class BundleError(ValueError):
    """Bundle components are missing or dimensionally inconsistent."""


def numeric_features(record: TxRecord) -> list[float]:
    return [float(record.gas), float(len(record.code))]


@dataclass
class Encoder:
    tfidf: tfidf.TfidfModel
    scaler: ScalerParams
    spec: ImageSpec

    def __post_init__(self):
        feat = NUM_NUMERIC + self.tfidf.d_op
        if self.scaler.dim != NUM_NUMERIC:
            raise BundleError(f"scaler has {self.scaler.dim} features, expected {NUM_NUMERIC}")
        if feat > self.spec.body_size:
            raise BundleError(
                f"feature vector ({feat}) does not fit the {self.spec.body_rows}x"
                f"{self.spec.width} image body ({self.spec.body_size})"
            )

    def features(self, record: TxRecord) -> np.ndarray:
        u = standardize(self.scaler, numeric_features(record))
        u_op = self.tfidf.transform(disassemble(record.code).tokens)
        return assemble(u, u_op)

    def encode(self, record: TxRecord) -> np.ndarray:
        return build_image(self.features(record), record.value, self.spec)

    def encode_many(self, records: Iterable[TxRecord]) -> np.ndarray:
        images = [self.encode(r) for r in records]
        if not images:
            return np.zeros((0, self.spec.height, self.spec.width), dtype=np.float32)
        return np.stack(images).astype(np.float32)


def fit_encoder(records: Sequence[TxRecord], spec: ImageSpec = ImageSpec()) -> Encoder:
    """Fit TF-IDF and the scaler on training records only."""
    corpus = [disassemble(r.code).tokens for r in records]
    return Encoder(tfidf.fit(corpus), fit_scaler([numeric_features(r) for r in records]), spec)


@dataclass
class Bundle:
    root: Path
    encoder: Encoder
    checkpoint: Checkpoint | None = None

    @property
    def checkpoint_path(self) -> Path:
        return self.root / "model.ckpt"

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.encoder.tfidf.save(self.root / "tfidf.bin")
        self.encoder.scaler.save(self.root / "scaler.bin")
        manifest = {
            "format_version": BUNDLE_VERSION,
            "image": {"height": self.encoder.spec.height, "width": self.encoder.spec.width},
            "tfidf": "tfidf.bin",
            "scaler": "scaler.bin",
            "checkpoint": "model.ckpt",
        }
        (self.root / BUNDLE_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if self.checkpoint is not None:
            self.checkpoint.save(self.checkpoint_path)

    @classmethod
    def load(cls, root: str | os.PathLike, require_model: bool = False) -> Bundle:
        root = Path(root)
        try:
            manifest = json.loads((root / BUNDLE_FILE).read_text())
        except FileNotFoundError:
            raise BundleError(f"{root}: no {BUNDLE_FILE}; run `fit` first") from None
        if manifest.get("format_version") != BUNDLE_VERSION:
            raise BundleError(f"{root}: unsupported bundle version {manifest.get('format_version')}")
        spec = ImageSpec(**manifest["image"])
        enc = Encoder(
            tfidf.TfidfModel.load(root / manifest["tfidf"]),
            ScalerParams.load(root / manifest["scaler"]),
            spec,
        )
        ckpt_path = root / manifest["checkpoint"]
        ckpt = Checkpoint.load(ckpt_path) if ckpt_path.exists() else None
        if ckpt is None and require_model:
            raise BundleError(f"{root}: no trained checkpoint; run `train` first")
        bundle = cls(root, enc, ckpt)
        bundle.check()
        return bundle

    def check(self) -> None:
        if self.checkpoint is None:
            return
        c = self.checkpoint.config
        spec = self.encoder.spec
        if (c.height, c.width) != (spec.height, spec.width):
            raise BundleError(
                f"checkpoint expects {c.height}x{c.width} images, bundle encodes "
                f"{spec.height}x{spec.width}"
            )


@dataclass
class Prediction:
    class_id: int
    class_name: str
    logits: list[float]

    @property
    def max_logit(self) -> float:
        return max(self.logits)


class Detector:
    """Encode records and classify them with a trained model."""

    def __init__(self, encoder: Encoder, model: VitModel):
        c = model.config
        if (c.height, c.width) != (encoder.spec.height, encoder.spec.width):
            raise BundleError("model input size does not match the encoder image size")
        self.encoder = encoder
        self.model = model.eval()

    @classmethod
    def from_bundle(cls, bundle: Bundle) -> Detector:
        if bundle.checkpoint is None:
            raise BundleError(f"{bundle.root}: no trained checkpoint")
        return cls(bundle.encoder, bundle.checkpoint.build_model())

    def classify(self, records: Sequence[TxRecord]) -> list[Prediction]:
        return self.classify_images(self.encoder.encode_many(records))

    def classify_images(self, images: np.ndarray) -> list[Prediction]:
        if len(images) == 0:
            return []
        logits = predict_logits(self.model, images)
        out = []
        for row in logits.tolist():
            cid = int(np.argmax(row))
            name = CLASS_NAMES[cid] if cid < len(CLASS_NAMES) else str(cid)
            out.append(Prediction(cid, name, row))
        return out
