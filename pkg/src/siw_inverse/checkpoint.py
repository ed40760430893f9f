"""Binary checkpoints for :class:`~siw_inverse.neural.MlpModel`.

File layout
-----------
``MAGIC`` (8 bytes) | header length (little-endian uint64) | UTF-8 JSON header |
parameter blobs. Each blob is a raw little-endian float32 array in row-major
order; the header lists its name, shape, byte offset (relative to the end of
the header), byte count and SHA-256.

Blobs are written in :meth:`MlpModel.parameters` order (``W0, b0, W1, ...``)
followed by the Adam first and second moments when an optimiser state is
saved. The header also carries the layer specs, seed, training schedule and
the checksum of the dataset the model was trained on.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import CheckpointError, DatasetIntegrityError, SchemaVersionError, ShapeMismatchError
from .models import RNG_ALGORITHM, TrainConfig
from .neural import AdamState, LayerSpec, MlpModel

if TYPE_CHECKING:
    from pathlib import Path

    from .neural import Array

logger = logging.getLogger(__name__)

MAGIC = b"SIWCKPT\x00"
FORMAT_VERSION = 1

_LENGTH = struct.Struct("<Q")
_DTYPE = "<f4"


class BlobEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    shape: list[int]
    offset: int
    nbytes: int
    sha256: str


class AdamEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step_count: int
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float


class CheckpointHeader(BaseModel):
    """JSON header of a checkpoint file."""

    model_config = ConfigDict(extra="forbid")

    format_version: Literal[1]
    name: str
    rng_algorithm: str
    dtype: Literal["<f4"]
    layers: list[dict[str, Any]]
    seed: int | None
    train_config: dict[str, Any] | None
    dataset_checksum: str | None
    adam: AdamEntry | None
    blobs: list[BlobEntry]


@dataclass
class Checkpoint:
    """A loaded checkpoint.

    ``dataset_mismatch`` is True when the caller supplied a dataset checksum
    that differs from the one recorded at save time.
    """

    model: MlpModel
    adam: AdamState | None
    header: CheckpointHeader
    dataset_mismatch: bool = False


def _train_config_dict(config: TrainConfig | None) -> dict[str, Any] | None:
    return None if config is None else dataclasses.asdict(config)


def save_checkpoint(
    model: MlpModel,
    state: AdamState | None,
    path: Path,
    *,
    name: str = "model",
    train_config: TrainConfig | None = None,
    dataset_checksum: str | None = None,
) -> str:
    """Write ``model`` (and optionally its Adam state) to ``path`` atomically.

    Returns the SHA-256 of the whole file, used by bundle manifests.
    """
    arrays: list[tuple[str, Array]] = []
    for index, (w, b) in enumerate(zip(model.weights, model.biases, strict=True)):
        arrays.extend(((f"W{index}", w), (f"b{index}", b)))
    if state is not None:
        arrays.extend((f"adam_m{index}", m) for index, m in enumerate(state.first_moment))
        arrays.extend((f"adam_v{index}", v) for index, v in enumerate(state.second_moment))

    payloads: list[bytes] = []
    blobs: list[BlobEntry] = []
    offset = 0
    for blob_name, array in arrays:
        data = np.ascontiguousarray(array, dtype=_DTYPE).tobytes()
        blobs.append(BlobEntry(name=blob_name, shape=list(array.shape), offset=offset, nbytes=len(data), sha256=hashlib.sha256(data).hexdigest()))
        payloads.append(data)
        offset += len(data)

    header = CheckpointHeader(
        format_version=FORMAT_VERSION,
        name=name,
        rng_algorithm=RNG_ALGORITHM,
        dtype=_DTYPE,
        layers=[spec.to_dict() for spec in model.layers],
        seed=model.seed,
        train_config=_train_config_dict(train_config),
        dataset_checksum=dataset_checksum,
        adam=None
        if state is None
        else AdamEntry(step_count=state.step_count, learning_rate=state.learning_rate, beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon),
        blobs=blobs,
    )
    header_bytes = json.dumps(header.model_dump(mode="json"), sort_keys=True).encode("utf-8")
    content = b"".join([MAGIC, _LENGTH.pack(len(header_bytes)), header_bytes, *payloads])

    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_name(path.name + ".tmp")
    temp.write_bytes(content)
    temp.replace(path)
    digest = hashlib.sha256(content).hexdigest()
    logger.debug("Saved checkpoint", extra={"path": str(path), "model": name, "parameters": model.parameter_count})
    return digest


def _parse_header(content: bytes, path: Path) -> tuple[CheckpointHeader, int]:
    if content[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    start = len(MAGIC) + _LENGTH.size
    if len(content) < start:
        raise DatasetIntegrityError(f"{path} is truncated inside its header")
    (length,) = _LENGTH.unpack_from(content, len(MAGIC))
    if len(content) < start + length:
        raise DatasetIntegrityError(f"{path} is truncated inside its header")
    try:
        raw = json.loads(content[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetIntegrityError(f"{path} has an unreadable header: {exc}") from exc
    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != FORMAT_VERSION:
        raise SchemaVersionError(f"{path} declares checkpoint format {version!r}; this release reads format {FORMAT_VERSION}")
    try:
        return CheckpointHeader.model_validate(raw), start + length
    except ValidationError as exc:
        raise CheckpointError(f"{path} has a malformed header: {exc}") from exc


def _read_blob(content: bytes, base: int, entry: BlobEntry, path: Path) -> Array:
    begin = base + entry.offset
    data = content[begin : begin + entry.nbytes]
    if len(data) != entry.nbytes:
        raise DatasetIntegrityError(f"{path} is truncated: blob {entry.name} holds {len(data)} of {entry.nbytes} bytes")
    if hashlib.sha256(data).hexdigest() != entry.sha256:
        raise DatasetIntegrityError(f"{path}: blob {entry.name} failed its SHA-256 checksum")
    return np.frombuffer(data, dtype=_DTYPE).reshape(entry.shape).astype(np.float32)


def load_checkpoint(
    path: Path,
    *,
    dataset_checksum: str | None = None,
    expected_layers: list[LayerSpec] | tuple[LayerSpec, ...] | None = None,
) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Parameters
    ----------
    dataset_checksum:
        Checksum of the dataset the caller is about to use. A difference from
        the recorded checksum is logged as a warning and flagged on the result.
    expected_layers:
        When given, the stored architecture must match exactly.

    Raises
    ------
    SchemaVersionError
        For an unknown format version.
    DatasetIntegrityError
        For truncated content or a failed blob checksum.
    CheckpointError
        For a foreign file, a malformed header, or an architecture mismatch.
    """
    content = path.read_bytes()
    header, base = _parse_header(content, path)
    blobs = {entry.name: _read_blob(content, base, entry, path) for entry in header.blobs}
    try:
        layers = tuple(LayerSpec.from_dict(spec) for spec in header.layers)
        model = MlpModel(
            layers=layers,
            weights=[blobs[f"W{index}"] for index in range(len(layers))],
            biases=[blobs[f"b{index}"] for index in range(len(layers))],
            seed=header.seed,
        )
    except (KeyError, ValueError, ShapeMismatchError) as exc:
        raise CheckpointError(f"{path} does not describe a consistent model: {exc}") from exc
    if expected_layers is not None and tuple(expected_layers) != layers:
        raise CheckpointError(f"{path} holds architecture {[s.describe() for s in layers]}, expected {[s.describe() for s in expected_layers]}")

    adam: AdamState | None = None
    if header.adam is not None:
        count = 2 * len(layers)
        adam = AdamState(
            first_moment=[blobs[f"adam_m{index}"] for index in range(count)],
            second_moment=[blobs[f"adam_v{index}"] for index in range(count)],
            step_count=header.adam.step_count,
            learning_rate=header.adam.learning_rate,
            beta1=header.adam.beta1,
            beta2=header.adam.beta2,
            epsilon=header.adam.epsilon,
        )

    mismatch = dataset_checksum is not None and header.dataset_checksum is not None and dataset_checksum != header.dataset_checksum
    if mismatch:
        logger.warning(
            "Checkpoint was trained on a different dataset",
            extra={"path": str(path), "model": header.name, "recorded": header.dataset_checksum, "current": dataset_checksum},
        )
    return Checkpoint(model=model, adam=adam, header=header, dataset_mismatch=mismatch)


__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "Checkpoint",
    "CheckpointHeader",
    "load_checkpoint",
    "save_checkpoint",
]
