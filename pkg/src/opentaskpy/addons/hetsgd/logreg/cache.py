"""Binary cache of a reduced dataset.

Layout: header ``<4sHQQ`` (magic ``HSGD``, version, n, d), then n*d
little-endian float64 features row-major, then n uint8 digit labels.
"""

import struct
from pathlib import Path

import numpy as np

from ..exceptions import CacheFormatError

CACHE_MAGIC = b"HSGD"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")


def encode_cache(features: np.ndarray, digits: np.ndarray) -> bytes:
    """Serialise features and digit labels."""
    matrix = np.asarray(features, dtype="<f8")
    labels = np.asarray(digits, dtype=np.uint8)
    if matrix.ndim != 2 or labels.shape != (matrix.shape[0],):
        raise CacheFormatError("need an n x d feature matrix and n labels")
    n, d = matrix.shape
    return _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, n, d) + matrix.tobytes() + labels.tobytes()


def decode_cache(buffer: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of ``encode_cache``."""
    if len(buffer) < _HEADER.size:
        raise CacheFormatError("short read: cache header truncated")
    magic, version, n, d = _HEADER.unpack_from(buffer)
    if magic != CACHE_MAGIC:
        raise CacheFormatError(f"bad cache magic {magic!r}")
    if version != CACHE_VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    feature_bytes = 8 * n * d
    expected = _HEADER.size + feature_bytes + n
    if len(buffer) != expected:
        raise CacheFormatError(f"cache should hold {expected} bytes, got {len(buffer)}")
    start = _HEADER.size
    features = np.frombuffer(buffer, dtype="<f8", count=n * d, offset=start).reshape(n, d)
    labels = np.frombuffer(buffer, dtype=np.uint8, count=n, offset=start + feature_bytes)
    return features.astype(np.float64), labels.copy()


def write_cache(path: str | Path, features: np.ndarray, digits: np.ndarray) -> None:
    """Write a cache file."""
    Path(path).write_bytes(encode_cache(features, digits))


def read_cache(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a cache file."""
    return decode_cache(Path(path).read_bytes())
