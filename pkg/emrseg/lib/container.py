"""
container.py
Binary tensor container shared by embeddings and models.

Layout:
    magic       8 bytes  b"EMRSEG1\\0"
    version     u32 little-endian
    manifest    u32 little-endian byte length, then UTF-8 text, one line per
                tensor: name<TAB>shape<TAB>dtype<TAB>offset<TAB>length
    data        raw little-endian arrays, offsets relative to the data start
    crc         u32 little-endian CRC-32 of every preceding byte
"""

import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict

import numpy as np

from emrseg.errors import ChecksumError, ContainerFormatError, ModelIOError, VersionMismatchError

logger = logging.getLogger(__name__)

MAGIC = b'EMRSEG1\x00'
FORMAT_VERSION = 1

_DTYPES = {
    'f8': np.dtype('<f8'),
    'f4': np.dtype('<f4'),
    'i8': np.dtype('<i8'),
    'u8': np.dtype('u1'),
}


def _dtype_name(array: np.ndarray) -> str:
    dtype = array.dtype.newbyteorder('<') if array.dtype.byteorder == '>' else array.dtype
    for name, candidate in _DTYPES.items():
        if dtype == candidate:
            return name
    raise ContainerFormatError(f"Unsupported tensor dtype: {array.dtype}")


def encode_container(tensors: Dict[str, np.ndarray], version: int = FORMAT_VERSION) -> bytes:
    """
    Serialize named arrays into container bytes.

    Tensors are written in sorted name order so identical inputs always give
    identical bytes.
    """
    manifest_lines = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        if '\t' in name or '\n' in name:
            raise ContainerFormatError(f"Tensor name may not contain tabs or newlines: {name!r}")
        array = np.asarray(tensors[name])
        dtype_name = _dtype_name(array)
        blob = np.ascontiguousarray(array, dtype=_DTYPES[dtype_name]).tobytes()
        shape = ','.join(str(d) for d in array.shape)
        manifest_lines.append(f"{name}\t{shape}\t{dtype_name}\t{offset}\t{len(blob)}")
        blobs.append(blob)
        offset += len(blob)

    manifest = '\n'.join(manifest_lines).encode('utf-8')
    body = b''.join([
        MAGIC,
        struct.pack('<I', version),
        struct.pack('<I', len(manifest)),
        manifest,
        *blobs,
    ])
    return body + struct.pack('<I', zlib.crc32(body) & 0xFFFFFFFF)


def decode_container(data: bytes) -> Dict[str, np.ndarray]:
    """
    Parse container bytes back into named arrays.

    Raises:
        ContainerFormatError: bad magic or malformed manifest
        ChecksumError: CRC-32 mismatch
        VersionMismatchError: unsupported format version
    """
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise ContainerFormatError("Not an emrseg container (bad magic bytes)")

    body, (stored_crc,) = data[:-4], struct.unpack('<I', data[-4:])
    actual_crc = zlib.crc32(body) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(f"Checksum mismatch: stored {stored_crc:08x}, computed {actual_crc:08x}")

    (version,) = struct.unpack('<I', body[8:12])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"Container version {version} not supported (expected {FORMAT_VERSION})")

    (manifest_len,) = struct.unpack('<I', body[12:16])
    data_start = 16 + manifest_len
    if data_start > len(body):
        raise ContainerFormatError("Manifest length exceeds container size")

    try:
        manifest = body[16:data_start].decode('utf-8')
    except UnicodeDecodeError as e:
        raise ContainerFormatError(f"Manifest is not valid UTF-8: {e}") from e

    tensors = {}
    for line in filter(None, manifest.split('\n')):
        try:
            name, shape_text, dtype_name, offset, length = line.split('\t')
            shape = tuple(int(d) for d in shape_text.split(',')) if shape_text else ()
            offset, length = int(offset), int(length)
            dtype = _DTYPES[dtype_name]
        except (ValueError, KeyError) as e:
            raise ContainerFormatError(f"Malformed manifest line: {line!r}") from e

        start = data_start + offset
        if start + length > len(body):
            raise ContainerFormatError(f"Tensor '{name}' runs past the end of the container")
        array = np.frombuffer(body, dtype=dtype, count=length // dtype.itemsize, offset=start)
        if int(np.prod(shape, dtype=np.int64)) != array.size:
            raise ContainerFormatError(f"Tensor '{name}' shape {shape} does not match {array.size} values")
        tensors[name] = array.reshape(shape).copy()

    return tensors


def write_container(path, tensors: Dict[str, np.ndarray]) -> str:
    """
    Write a container file.

    Args:
        path: Destination path
        tensors: Named arrays

    Returns:
        The path written, as a string
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_container(tensors))
    except OSError as e:
        logger.error(f"Failed to write container {path}: {str(e)}")
        raise ModelIOError(f"Cannot write {path}: {e}") from e
    logger.debug(f"Wrote container {path} with {len(tensors)} tensor(s)")
    return str(path)


def read_container(path) -> Dict[str, np.ndarray]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ModelIOError(f"Cannot read {path}: {e}") from e
    return decode_container(data)


def is_container(path) -> bool:
    """True when the file starts with the container magic bytes."""
    try:
        with open(path, 'rb') as f:
            return f.read(len(MAGIC)) == MAGIC
    except OSError:
        return False


def pack_json(obj) -> np.ndarray:
    """Store a JSON document as a u8 tensor."""
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(',', ':'))
    return np.frombuffer(text.encode('utf-8'), dtype=np.uint8).copy()


def unpack_json(array: np.ndarray):
    try:
        return json.loads(np.asarray(array, dtype=np.uint8).tobytes().decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as e:
        raise ContainerFormatError(f"Embedded JSON document is corrupt: {e}") from e
