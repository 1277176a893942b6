"""Versioned, deterministic model serialization.

Artifact layout (.nidsmodel):

    bytes 0..7    magic "NIDSDL1\\n"
    bytes 8..15   u64 little-endian header length
    header        canonical JSON: format version, arch, layer plan,
                  input_dim, threshold, encoder digest, training config
                  summary, tensor names/shapes in payload order
    payload       parameter tensors, little-endian IEEE-754 float32,
                  in the declared order

Training always runs in float64; only this artifact narrows to float32.
The paired encoder lives in its own JSON file (.nidsenc) and is linked
by sha256 digest.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ArtifactError, UnsupportedVersionError
from .models import ModelSpec, TrainConfig, TrainedModel, network_from_plan

MAGIC = b"NIDSDL1\n"
FORMAT_VERSION = 1


def save_model(model: TrainedModel, encoder_digest: str) -> bytes:
    """Serialize a trained model; same model always yields the same bytes."""
    params = model.net.params
    tensors = []
    payload = bytearray()
    for name, arr in params.items():
        if not np.isfinite(arr).all():
            raise ArtifactError(f"parameter {name!r} contains non-finite values")
        tensors.append({"name": name, "shape": list(arr.shape)})
        payload += arr.astype("<f4").tobytes()
    header = {
        "format_version": FORMAT_VERSION,
        "arch": model.spec.arch,
        "input_dim": model.spec.input_dim,
        "plan": list(model.spec.plan),
        "threshold": model.threshold,
        "encoder_digest": encoder_digest,
        "train_config": {
            "epochs": model.config.epochs,
            "lr": model.config.lr,
            "batch_size": model.config.batch_size,
            "validation_fraction": model.config.validation_fraction,
            "seed": model.config.seed,
        },
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + bytes(payload)


def write_model(model: TrainedModel, encoder_digest: str, path) -> None:
    data = save_model(model, encoder_digest)
    with open(path, "wb") as fh:
        fh.write(data)


def load_model(data: bytes) -> TrainedModel:
    """Reconstruct an inference-ready model; raises on any structural defect."""
    if len(data) < len(MAGIC):
        raise ArtifactError("truncated stream: missing magic bytes")
    if data[: len(MAGIC)] != MAGIC:
        raise ArtifactError("not a model artifact")
    if len(data) < len(MAGIC) + 8:
        raise ArtifactError("truncated stream: missing header length")
    (header_len,) = struct.unpack_from("<Q", data, len(MAGIC))
    header_start = len(MAGIC) + 8
    if len(data) < header_start + header_len:
        raise ArtifactError("truncated stream: missing header")
    try:
        header = json.loads(data[header_start : header_start + header_len])
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"corrupt header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported artifact format version: {version!r}")

    plan = tuple(header["plan"])
    net = network_from_plan(plan)
    params = net.params
    declared = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
    if [n for n, _ in declared] != list(params):
        raise ArtifactError("header tensor list does not match the declared layer plan")
    pos = header_start + header_len
    for name, shape in declared:
        if params[name].shape != shape:
            raise ArtifactError(f"tensor {name!r}: header shape {shape} does not match plan {params[name].shape}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        chunk = data[pos : pos + nbytes]
        if len(chunk) < nbytes:
            raise ArtifactError(f"truncated stream: missing payload for tensor {name!r}")
        values = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
        params[name][...] = values
        pos += nbytes
    if pos != len(data):
        raise ArtifactError(f"{len(data) - pos} trailing byte(s) after payload")

    config = TrainConfig(
        epochs=header["train_config"]["epochs"],
        lr=header["train_config"]["lr"],
        batch_size=header["train_config"]["batch_size"],
        validation_fraction=header["train_config"]["validation_fraction"],
        seed=header["train_config"]["seed"],
        threshold=header["threshold"],
    )
    spec = ModelSpec(header["arch"], header["input_dim"], plan, net.param_count())
    return TrainedModel(
        spec=spec,
        net=net,
        config=config,
        history=(),
        threshold=header["threshold"],
        encoder_digest=header["encoder_digest"],
    )


def read_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())
