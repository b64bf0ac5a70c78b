"""Checkpoint persistence: meta.json plus a packed weights.bin.

All tensors (parameters, then Adam first moments, then second moments) are
concatenated as little-endian float64 in manifest order, so a save/load
cycle is bitwise exact and re-saving a loaded checkpoint reproduces the
original files byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .embeddings import EmbeddingMatrix
from .training import AdamState, EpochRecord, EvalReport, Model, TrainConfig, evaluate

META_NAME = "meta.json"
WEIGHTS_NAME = "weights.bin"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    vocab_fingerprint: str
    class_count: int
    tensors: dict[str, np.ndarray]  # insertion order = parameter order
    adam: AdamState
    history: list[EpochRecord]
    best_epoch: int  # first epoch attaining the best dev accuracy
    snapshot_epoch: int  # epoch whose parameters are stored (last tie)
    window_sizes: tuple[int, ...]
    num_filters: int
    hidden: int

    def has_pre_attention(self) -> bool:
        return any(name.startswith("pre_attention.") for name in self.tensors)


def save_checkpoint(ckpt: Checkpoint, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = [
        {"name": name, "shape": list(arr.shape)} for name, arr in ckpt.tensors.items()
    ]
    meta = {
        "format_version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "vocab_fingerprint": ckpt.vocab_fingerprint,
        "class_count": ckpt.class_count,
        "tensor_manifest": manifest,
        "weights_layout": ["parameters", "adam_m", "adam_v"],
        "adam_step": ckpt.adam.step,
        "best_epoch": ckpt.best_epoch,
        "snapshot_epoch": ckpt.snapshot_epoch,
        "history": [
            {"epoch": r.epoch, "train_loss": r.train_loss, "dev_accuracy": r.dev_accuracy}
            for r in ckpt.history
        ],
        "window_sizes": list(ckpt.window_sizes),
        "num_filters": ckpt.num_filters,
        "hidden": ckpt.hidden,
    }
    (directory / META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(directory / WEIGHTS_NAME, "wb") as fh:
        for group in (ckpt.tensors, ckpt.adam.m, ckpt.adam.v):
            for name, _ in ((m["name"], None) for m in manifest):
                fh.write(np.ascontiguousarray(group[name], dtype="<f8").tobytes())


def load_checkpoint(directory: str | Path) -> Checkpoint:
    directory = Path(directory)
    meta_path = directory / META_NAME
    weights_path = directory / WEIGHTS_NAME
    if not meta_path.is_file() or not weights_path.is_file():
        raise FileNotFoundError(f"checkpoint files missing under {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {meta.get('format_version')!r}")
    manifest = meta["tensor_manifest"]
    raw = weights_path.read_bytes()
    sizes = [int(np.prod(m["shape"])) if m["shape"] else 1 for m in manifest]
    total = sum(sizes)
    expected_bytes = total * 3 * 8
    if len(raw) != expected_bytes:
        raise ValueError(
            f"weights.bin holds {len(raw)} bytes, manifest implies {expected_bytes}"
        )
    flat = np.frombuffer(raw, dtype="<f8")

    def read_group(offset: int) -> dict[str, np.ndarray]:
        out = {}
        pos = offset
        for m, size in zip(manifest, sizes):
            out[m["name"]] = flat[pos:pos + size].reshape(m["shape"]).copy()
            pos += size
        return out

    tensors = read_group(0)
    adam_m = read_group(total)
    adam_v = read_group(2 * total)
    return Checkpoint(
        config=TrainConfig.from_dict(meta["config"]),
        vocab_fingerprint=meta["vocab_fingerprint"],
        class_count=meta["class_count"],
        tensors=tensors,
        adam=AdamState(step=meta["adam_step"], m=adam_m, v=adam_v),
        history=[
            EpochRecord(r["epoch"], r["train_loss"], r["dev_accuracy"])
            for r in meta["history"]
        ],
        best_epoch=meta["best_epoch"],
        snapshot_epoch=meta["snapshot_epoch"],
        window_sizes=tuple(meta["window_sizes"]),
        num_filters=meta["num_filters"],
        hidden=meta["hidden"],
    )


def restore_model(ckpt: Checkpoint, embeddings: EmbeddingMatrix) -> Model:
    """Rebuild a Model carrying exactly the checkpointed parameters."""
    model = Model(
        ckpt.config.variant,
        embeddings,
        ckpt.class_count,
        np.random.default_rng(0),  # init values are overwritten below
        window_sizes=ckpt.window_sizes,
        num_filters=ckpt.num_filters,
        hidden=ckpt.hidden,
    )
    names = [name for name, _ in model.named_parameters()]
    if names != list(ckpt.tensors.keys()):
        raise ValueError("checkpoint manifest does not match the model's parameters")
    for name, p in model.named_parameters():
        stored = ckpt.tensors[name]
        if stored.shape != p.data.shape:
            raise ValueError(f"checkpoint tensor {name} has shape {stored.shape}, "
                             f"model expects {p.data.shape}")
        p.data = stored.copy()
    return model


def check_fingerprint(ckpt: Checkpoint, vocab: Vocabulary) -> None:
    if ckpt.vocab_fingerprint and ckpt.vocab_fingerprint != vocab.fingerprint():
        raise RuntimeError(
            "vocabulary fingerprint mismatch: the checkpoint was trained on a "
            "different vocabulary"
        )


def evaluate_checkpoint(
    ckpt: Checkpoint,
    embeddings: EmbeddingMatrix,
    vocab: Vocabulary,
    examples,
) -> EvalReport:
    check_fingerprint(ckpt, vocab)
    return evaluate(restore_model(ckpt, embeddings), examples)
