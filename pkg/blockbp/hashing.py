"""
Hashing utilities for blockbp.

Config hashes for output headers and streamed file digests for the PEPS
sidecar.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, BinaryIO, Mapping, Optional

from blockbp.logging import logger


# Default chunk size for streaming hash calculation (64KB)
HASH_CHUNK_SIZE = 65536


def calculate_hash(
    data: bytes | BinaryIO,
    algorithm: str = 'sha256',
    chunk_size: int = HASH_CHUNK_SIZE,
) -> str:
    """Calculate hash of raw data.

    Args:
        data: Bytes or file-like object to hash
        algorithm: Hash algorithm ('sha256', 'md5', 'sha1')
        chunk_size: Chunk size for streaming reads

    Returns:
        Hex digest string of the hash
    """
    hasher = hashlib.new(algorithm)

    if isinstance(data, bytes):
        hasher.update(data)
    else:
        while True:
            chunk = data.read(chunk_size)
            if not chunk:
                break
            hasher.update(chunk)

    return hasher.hexdigest()


def hash_file(
    path: Path,
    algorithm: str = 'sha256',
    chunk_size: int = HASH_CHUNK_SIZE,
) -> Optional[str]:
    """Calculate hash of a file on disk.

    Returns:
        Hex digest string, or None if file cannot be read
    """
    try:
        with open(path, 'rb') as f:
            return calculate_hash(f, algorithm, chunk_size)
    except OSError as e:
        logger.debug(f"Failed to hash file {path}: {e}")
        return None


def config_hash(config: Mapping[str, Any], length: int = 16) -> str:
    """Stable short hash of a configuration mapping.

    Keys are sorted and the mapping serialized as compact JSON so that the
    same configuration always hashes identically.
    """
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return calculate_hash(canonical.encode('utf-8'))[:length]
