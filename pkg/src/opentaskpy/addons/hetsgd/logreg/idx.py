"""IDX container parsing (images 0x00000803, labels 0x00000801), gzip aware."""

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import opentaskpy.otflogging

from ..exceptions import IdxFormatError

logger = opentaskpy.otflogging.init_logging(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
_GZIP_MAGIC = b"\x1f\x8b"
_DIMENSIONS = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}


@dataclass
class IdxDataset:
    """Flattened images (n x d0 uint8) with their labels."""

    images: np.ndarray
    labels: np.ndarray
    shape: tuple[int, ...] = ()
    source: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check the image and label counts agree."""
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        """Number of examples."""
        return int(self.labels.shape[0])


def _decompress(buffer: bytes) -> bytes:
    if buffer[:2] == _GZIP_MAGIC:
        return gzip.decompress(buffer)
    return buffer


def parse_idx(buffer: bytes) -> np.ndarray:
    """Decode one IDX buffer into an array.

    Images come back as (n, rows, cols) uint8, labels as (n,) uint8.

    Args:
        buffer: Raw or gzip-compressed IDX bytes

    Returns:
        np.ndarray: The decoded tensor

    Raises:
        IdxFormatError: Unknown magic or truncated payload
    """
    data = _decompress(bytes(buffer))
    if len(data) < 4:
        raise IdxFormatError("short read: missing IDX magic")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in _DIMENSIONS:
        raise IdxFormatError(f"unrecognized magic 0x{magic:08x}")
    rank = _DIMENSIONS[magic]
    header_size = 4 + 4 * rank
    if len(data) < header_size:
        raise IdxFormatError(f"short read: header needs {header_size} bytes, got {len(data)}")
    dims = struct.unpack(f">{rank}I", data[4:header_size])
    expected = int(np.prod(dims, dtype=np.int64))
    payload = data[header_size:]
    if len(payload) < expected:
        raise IdxFormatError(f"short read: expected {expected} payload bytes, got {len(payload)}")
    if len(payload) > expected:
        logger.warning(f"Ignoring {len(payload) - expected} trailing bytes after IDX payload")
    return np.frombuffer(payload[:expected], dtype=np.uint8).reshape(dims).copy()


def write_idx(array: np.ndarray) -> bytes:
    """Encode a uint8 label vector or image tensor as IDX bytes."""
    values = np.asarray(array, dtype=np.uint8)
    if values.ndim == 1:
        magic = LABELS_MAGIC
    elif values.ndim == 3:
        magic = IMAGES_MAGIC
    else:
        raise IdxFormatError(f"IDX writer supports 1-D labels or 3-D images, got {values.ndim}-D")
    header = struct.pack(f">I{values.ndim}I", magic, *values.shape)
    return header + values.tobytes()


def load_idx_pair(images: bytes, labels: bytes, source: dict[str, Any] | None = None) -> IdxDataset:
    """Combine an image buffer and a label buffer into a dataset."""
    image_tensor = parse_idx(images)
    label_vector = parse_idx(labels)
    if image_tensor.ndim != 3:
        raise IdxFormatError("image buffer does not hold a 3-D tensor")
    if label_vector.ndim != 1:
        raise IdxFormatError("label buffer does not hold a label vector")
    if label_vector.size and int(label_vector.max()) > 9:
        raise IdxFormatError(f"labels must lie in 0..9, found {int(label_vector.max())}")
    count = image_tensor.shape[0]
    dataset = IdxDataset(
        images=image_tensor.reshape(count, -1),
        labels=label_vector,
        shape=tuple(image_tensor.shape[1:]),
        source=source or {},
    )
    logger.info(f"Loaded {count} images of shape {dataset.shape}")
    return dataset


def read_idx_files(images_path: str | Path, labels_path: str | Path) -> IdxDataset:
    """Read an image file and a label file from disk."""
    return load_idx_pair(
        Path(images_path).read_bytes(),
        Path(labels_path).read_bytes(),
        {"images": str(images_path), "labels": str(labels_path)},
    )
