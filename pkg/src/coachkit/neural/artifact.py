"""Binary model artifact: magic ``ACAM``, format version, JSON header
(model config, class order, vocabulary hash, declared parameter order),
then the little-endian float32 parameter arrays in that order."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from coachkit.neural.model import ModelConfig, NeuralError, TransformerClassifier

ARTIFACT_MAGIC = b"ACAM"
ARTIFACT_VERSION = 1
CLASS_ORDER = ["not_coachable", "coachable"]


class ArtifactError(NeuralError):
    pass


def save_model(model: TransformerClassifier, path: str | Path, vocab_hash: str) -> None:
    header = {
        "config": asdict(model.config),
        "class_order": CLASS_ORDER,
        "vocab_hash": vocab_hash,
        "dtype": "float32",
        "params": [
            {"name": name, "shape": list(shape)} for name, shape in model.param_shapes()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(ARTIFACT_MAGIC)
        fh.write(ARTIFACT_VERSION.to_bytes(4, "little"))
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for name, _ in model.param_shapes():
            fh.write(np.ascontiguousarray(model.params[name].astype("<f4")).tobytes())


def load_model(
    path: str | Path, expect_vocab_hash: str | None = None
) -> tuple[TransformerClassifier, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != ARTIFACT_MAGIC:
            raise ArtifactError(f"{path}: bad magic {magic!r}")
        version = int.from_bytes(fh.read(4), "little")
        if version != ARTIFACT_VERSION:
            raise ArtifactError(f"{path}: unsupported format version {version}")
        length = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(length).decode("utf-8"))
        if header.get("class_order") != CLASS_ORDER:
            raise ArtifactError(f"{path}: unexpected class order {header.get('class_order')}")
        if expect_vocab_hash is not None and header.get("vocab_hash") != expect_vocab_hash:
            raise ArtifactError(
                f"{path}: vocabulary hash mismatch (artifact {header.get('vocab_hash')!r})"
            )
        config = ModelConfig(**header["config"])
        model = TransformerClassifier(config, dtype=np.float32)
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 4)
            if len(data) != count * 4:
                raise ArtifactError(f"{path}: truncated parameter {spec['name']!r}")
            model.params[spec["name"]] = (
                np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float32)
            )
        declared = {name for name, _ in model.param_shapes()}
        if declared != set(model.params):
            raise ArtifactError(f"{path}: parameter set does not match config")
    return model, header
