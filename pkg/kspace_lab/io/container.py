"""
Binary tensor container, little-endian throughout.

    magic "KSR1" | version u16 | entry count u32
    per entry: name length u16, UTF-8 name, dtype code u8, ndim u8,
               dims u64 * ndim, raw row-major payload

Used for images, k-space, masks, checkpoints and loss histories.
"""

import hashlib
import logging
import math
import os
import struct
from typing import Dict, Mapping

import numpy as np

from kspace_lab.utils.validators import IoError

logger = logging.getLogger(__name__)

MAGIC = b"KSR1"
VERSION = 1
MAX_DIM = np.iinfo(np.intp).max

DTYPE_CODES = {
    1: np.dtype('<f4'),
    2: np.dtype('<f8'),
    3: np.dtype('<c8'),
    4: np.dtype('<c16'),
    5: np.dtype('?'),
}
CODE_FOR_KIND = {dtype.str: code for code, dtype in DTYPE_CODES.items()}


def _code_for(name: str, array: np.ndarray) -> int:
    dtype = array.dtype.newbyteorder('<') if array.dtype.byteorder == '>' else array.dtype
    code = CODE_FOR_KIND.get(np.dtype(dtype).str)
    if code is None:
        raise IoError(f"Entry '{name}' has unsupported dtype {array.dtype}")
    return code


def encode(entries: Mapping[str, np.ndarray]) -> bytes:
    """Serialise named arrays, in the mapping's order."""
    parts = [MAGIC, struct.pack('<HI', VERSION, len(entries))]
    for name, value in entries.items():
        array = np.asarray(value)
        code = _code_for(name, array)
        raw_name = name.encode('utf-8')
        if len(raw_name) > 0xFFFF or array.ndim > 0xFF:
            raise IoError(f"Entry '{name}' cannot be represented in the container")

        parts.append(struct.pack('<H', len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack('<BB', code, array.ndim))
        parts.append(struct.pack(f'<{array.ndim}Q', *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes())
    return b''.join(parts)


def decode(blob: bytes) -> Dict[str, np.ndarray]:
    view = memoryview(blob)
    offset = 0

    def take(size: int) -> memoryview:
        nonlocal offset
        if offset + size > len(view):
            raise IoError("Container is truncated")
        chunk = view[offset:offset + size]
        offset += size
        return chunk

    if bytes(take(4)) != MAGIC:
        raise IoError("Not a tensor container (bad magic)")
    version, count = struct.unpack('<HI', take(6))
    if version != VERSION:
        raise IoError(f"Unsupported container version {version}")

    entries: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = struct.unpack('<H', take(2))
        try:
            name = bytes(take(name_length)).decode('utf-8')
        except UnicodeDecodeError:
            raise IoError("Entry name is not valid UTF-8") from None
        code, ndim = struct.unpack('<BB', take(2))
        if code not in DTYPE_CODES:
            raise IoError(f"Entry '{name}' has unknown dtype code {code}")
        dims = struct.unpack(f'<{ndim}Q', take(8 * ndim))
        if any(dim > MAX_DIM for dim in dims):
            raise IoError(f"Entry '{name}' declares an impossible dimension {max(dims)}")
        dtype = DTYPE_CODES[code]
        # Exact integer product, checked against the bytes left in `take`.
        payload = take(math.prod(dims) * dtype.itemsize)
        try:
            entries[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
        except ValueError as error:
            raise IoError(f"Entry '{name}' cannot be shaped to {dims}: {error}") from None

    if offset != len(view):
        raise IoError(f"{len(view) - offset} trailing bytes after the last entry")
    return entries


def sha256_hex(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def save_container(path: str, entries: Mapping[str, np.ndarray]) -> str:
    """Write a container file and return its SHA-256 checksum."""
    blob = encode(entries)
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as handle:
            handle.write(blob)
    except OSError as error:
        raise IoError(f"Cannot write {path}: {error}") from None

    checksum = sha256_hex(blob)
    logger.info(f"Wrote {path} ({len(entries)} entries, sha256 {checksum})")
    return checksum


def load_container(path: str) -> Dict[str, np.ndarray]:
    try:
        with open(path, 'rb') as handle:
            blob = handle.read()
    except OSError as error:
        raise IoError(f"Cannot read {path}: {error}") from None
    return decode(blob)
