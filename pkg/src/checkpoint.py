"""
Binary checkpoint format.

All integers and floats are little-endian::

    magic      b"CRND1"
    version    uint32
    config     uint32 length + UTF-8 JSON (sorted keys)
    epoch      uint32
    optimizer  uint64 step, float64 lr, beta1, beta2, eps, weight_decay
    count      uint32 number of tensor records
    records    uint16 name length + name, uint8 ndim, uint32 dims, float64 values

Records hold the parameters in store order under ``param/<name>``, then the
Adam moments under ``adam.m/<name>`` and ``adam.v/<name>``.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from .config import TrainConfig, config_from_dict, config_to_dict
from .errors import BadMagicError, CheckpointError, TruncatedRecordError, VersionMismatchError
from .model import ContourRend
from .numerics import OptimizerState, ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"CRND1"
VERSION = 1
PARAM_PREFIX = "param/"
FIRST_MOMENT_PREFIX = "adam.m/"
SECOND_MOMENT_PREFIX = "adam.v/"


@dataclass
class Checkpoint:
    """
    Everything needed to resume training or run inference.

    :param config: Configuration the model was trained with.
    :param params: Model parameters.
    :param optimizer: Adam state, moments included.
    :param epoch: Number of completed epochs.
    """

    config: TrainConfig
    params: ParamStore
    optimizer: OptimizerState
    epoch: int

    def model(self) -> ContourRend:
        return ContourRend(self.config.generator, self.config.renderer, self.params)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    config_json = json.dumps(config_to_dict(checkpoint.config), sort_keys=True).encode("utf-8")
    opt = checkpoint.optimizer
    chunks = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", len(config_json)),
        config_json,
        struct.pack("<I", checkpoint.epoch),
        struct.pack("<Qddddd", opt.step, opt.lr, opt.beta1, opt.beta2, opt.eps, opt.weight_decay),
    ]

    records: List[Tuple[str, np.ndarray]] = []
    for name, entry in checkpoint.params.items():
        records.append((PARAM_PREFIX + name, entry.value))
    for name, entry in checkpoint.params.items():
        records.append((FIRST_MOMENT_PREFIX + name, opt.first_moment.get(name, np.zeros_like(entry.value))))
    for name, entry in checkpoint.params.items():
        records.append((SECOND_MOMENT_PREFIX + name, opt.second_moment.get(name, np.zeros_like(entry.value))))

    chunks.append(struct.pack("<I", len(records)))
    for name, tensor in records:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise TruncatedRecordError(
                f"checkpoint truncated while reading {what}: need {size} bytes at offset {self.offset}, "
                f"{len(self.data) - self.offset} left"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data: bytes) -> Checkpoint:
    """
    Parses bytes produced by :func:`encode_checkpoint`.

    :raises BadMagicError: If the data does not start with the magic bytes.
    :raises VersionMismatchError: For another format version.
    :raises TruncatedRecordError: If the data ends inside a field.
    :raises CheckpointError: For inconsistent contents.
    """
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    reader = _Reader(data)
    reader.take(len(MAGIC), "magic")
    (version,) = reader.unpack("<I", "version")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version} is not supported (expected {VERSION})")

    (config_len,) = reader.unpack("<I", "config length")
    try:
        config = config_from_dict(json.loads(reader.take(config_len, "config").decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable config in checkpoint: {exc}") from exc
    (epoch,) = reader.unpack("<I", "epoch")
    step, lr, beta1, beta2, eps, weight_decay = reader.unpack("<Qddddd", "optimizer state")

    tensors: Dict[str, np.ndarray] = {}
    (count,) = reader.unpack("<I", "record count")
    for index in range(count):
        (name_len,) = reader.unpack("<H", f"record {index} name length")
        name = reader.take(name_len, f"record {index} name").decode("utf-8")
        (ndim,) = reader.unpack("<B", f"record {name!r} rank")
        shape = reader.unpack(f"<{ndim}I", f"record {name!r} shape")
        size = int(np.prod(shape, dtype=np.int64))
        payload = reader.take(8 * size, f"record {name!r} values")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.offset != len(data):
        raise CheckpointError(f"{len(data) - reader.offset} trailing bytes after the last record")

    params = ParamStore()
    optimizer = OptimizerState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay, step=step)
    for key, tensor in tensors.items():
        if key.startswith(PARAM_PREFIX):
            params.add(key[len(PARAM_PREFIX) :], tensor)
    for name in params:
        try:
            optimizer.first_moment[name] = tensors[FIRST_MOMENT_PREFIX + name].copy()
            optimizer.second_moment[name] = tensors[SECOND_MOMENT_PREFIX + name].copy()
        except KeyError as exc:
            raise CheckpointError(f"missing optimizer moment record {exc.args[0]!r}") from None

    checkpoint = Checkpoint(config, params, optimizer, epoch)
    _check_layout(checkpoint)
    return checkpoint


def _check_layout(checkpoint: Checkpoint) -> None:
    expected = ContourRend.initialize(checkpoint.config.generator, checkpoint.config.renderer).params
    if expected.names() != checkpoint.params.names():
        missing = sorted(set(expected.names()) - set(checkpoint.params.names()))
        extra = sorted(set(checkpoint.params.names()) - set(expected.names()))
        raise CheckpointError(f"parameters do not match the config: missing {missing}, unexpected {extra}")
    for name in expected:
        if expected[name].shape != checkpoint.params[name].shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {checkpoint.params[name].shape}, config implies {expected[name].shape}"
            )


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> None:
    data = encode_checkpoint(checkpoint)
    Path(path).write_bytes(data)
    logger.info("saved checkpoint (epoch %d, %d bytes) to %s", checkpoint.epoch, len(data), path)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Reads a checkpoint file; see :func:`decode_checkpoint` for the errors raised.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file {path} does not exist")
    return decode_checkpoint(path.read_bytes())
