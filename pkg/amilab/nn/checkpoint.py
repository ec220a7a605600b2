"""AMI1 checkpoint container.

Layout (little-endian): magic b"AMI1", uint32 format version, then for each block until EOF:
uint32 name length, UTF-8 name, uint32 rank, rank x uint32 dims, float64 values (C order).
"""
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import ConfigurationError
from ..utils.hashing import git_blob_hash
from .params import ParameterSet

MAGIC = b"AMI1"
FORMAT_VERSION = 1


def encode(params: ParameterSet) -> bytes:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name, arr in params.raw_blocks().items():
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def _unpack(fmt: str, data: bytes, offset: int) -> tuple:
    if offset + struct.calcsize(fmt) > len(data):
        raise ConfigurationError("Truncated AMI1 checkpoint")
    return struct.unpack_from(fmt, data, offset)


def decode(data: bytes, owner: Optional[str] = None) -> ParameterSet:
    if data[:4] != MAGIC:
        raise ConfigurationError("Not an AMI1 checkpoint (bad magic)")
    (version,) = _unpack("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"Unsupported checkpoint format version {version}")
    offset = 8
    blocks: "OrderedDict[str, np.ndarray]" = OrderedDict()
    while offset < len(data):
        (name_len,) = _unpack("<I", data, offset)
        offset += 4
        if offset + name_len > len(data):
            raise ConfigurationError("Truncated AMI1 checkpoint")
        try:
            name = data[offset:offset + name_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise ConfigurationError(f"Corrupt AMI1 checkpoint: block name at byte {offset} is not UTF-8") from e
        offset += name_len
        (rank,) = _unpack("<I", data, offset)
        offset += 4
        dims = _unpack(f"<{rank}I", data, offset)
        offset += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        if offset + 8 * count > len(data):
            raise ConfigurationError("Truncated AMI1 checkpoint")
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
        offset += 8 * count
        blocks[name] = values.reshape(dims)
    return ParameterSet(blocks, owner=owner)


def save_checkpoint(path: str | Path, params: ParameterSet) -> str:
    """Write the container and return its git-style content hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode(params)
    path.write_bytes(data)
    return git_blob_hash(data)


def load_checkpoint(path: str | Path, owner: Optional[str] = None) -> ParameterSet:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Checkpoint not found: {path}")
    return decode(path.read_bytes(), owner=owner)
