"""
PEPS files.

A stored PEPS is a little-endian binary container (layout in
PEPS_FORMAT.md) next to a JSON sidecar ``<file>.json`` that records how
it was produced and the SHA-256 of the container.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from blockbp.errors import PepsFormatError
from blockbp.hashing import hash_file
from blockbp.logging import logger
from blockbp.network import Lattice, PepsNetwork

MAGIC = b'BBPPEPS1'
FORMAT_VERSION = 1

# version, rows, cols, boundary tag, d
_HEADER = struct.Struct('<IIIII')
_SITE = struct.Struct('<I5I')

BOUNDARY_TAGS: Dict[str, int] = {'open': 0, 'periodic': 1, 'infinite': 2}
_TAG_BOUNDARIES = {v: k for k, v in BOUNDARY_TAGS.items()}


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.json')


def encode_peps(psi: PepsNetwork) -> bytes:
    """Binary container of ``psi``."""
    lattice = psi.lattice
    parts = [
        MAGIC,
        _HEADER.pack(FORMAT_VERSION, lattice.rows, lattice.cols, BOUNDARY_TAGS[lattice.boundary], psi.phys_dim),
    ]
    for t in psi.sites:
        parts.append(_SITE.pack(t.ndim, *t.shape))
        parts.append(np.ascontiguousarray(t, dtype='<c16').tobytes())
    return b''.join(parts)


def decode_peps(data: bytes, path: Optional[Path] = None) -> PepsNetwork:
    """Inverse of ``encode_peps``.

    Raises:
        PepsFormatError: On a bad magic, unknown version, truncation or
            trailing bytes
    """
    if data[:len(MAGIC)] != MAGIC:
        raise PepsFormatError(f"not a PEPS file (magic {data[:len(MAGIC)]!r})", path=path)
    pos = len(MAGIC)
    try:
        version, rows, cols, tag, d = _HEADER.unpack_from(data, pos)
    except struct.error as e:
        raise PepsFormatError(f"truncated header: {e}", path=path) from e
    pos += _HEADER.size
    if version != FORMAT_VERSION:
        raise PepsFormatError(f"unsupported format version {version}", path=path)
    if tag not in _TAG_BOUNDARIES:
        raise PepsFormatError(f"unknown boundary tag {tag}", path=path)
    lattice = Lattice(rows, cols, _TAG_BOUNDARIES[tag])

    sites = []
    for index in range(lattice.n_sites):
        try:
            rank, *shape = _SITE.unpack_from(data, pos)
        except struct.error as e:
            raise PepsFormatError(f"truncated record for site {index}", path=path) from e
        pos += _SITE.size
        if rank != 5 or shape[0] != d:
            raise PepsFormatError(f"site {index} has rank {rank} and shape {shape}, expected phys dim {d}", path=path)
        nbytes = int(np.prod(shape)) * 16
        if pos + nbytes > len(data):
            raise PepsFormatError(f"truncated entries for site {index}", path=path)
        sites.append(np.frombuffer(data, dtype='<c16', count=nbytes // 16, offset=pos).reshape(shape).astype(complex))
        pos += nbytes
    if pos != len(data):
        raise PepsFormatError(f"{len(data) - pos} trailing bytes", path=path)
    return PepsNetwork(lattice, tuple(sites))


def save_peps(psi: PepsNetwork, path: Path, metadata: Optional[Mapping[str, Any]] = None) -> Path:
    """Write the container and its sidecar.

    ``metadata`` (model, D, seed, config_hash, ...) is stored in the
    sidecar together with the format and code versions and the container
    digest.
    """
    from blockbp import __version__

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_peps(psi))
    sidecar = {
        'format_version': FORMAT_VERSION,
        'version': __version__,
        'rows': psi.lattice.rows,
        'cols': psi.lattice.cols,
        'boundary': psi.lattice.boundary,
        'd': psi.phys_dim,
        'D': psi.bond_dim,
    }
    sidecar.update(dict(metadata or {}))
    sidecar['sha256'] = hash_file(path)
    with open(sidecar_path(path), 'w', encoding='utf-8') as f:
        json.dump(sidecar, f, indent=2, sort_keys=True, default=str)
    logger.info(f"Saved PEPS {psi.lattice.rows}x{psi.lattice.cols} (D={psi.bond_dim}) to {path}")
    return path


def read_sidecar(path: Path) -> Dict[str, Any]:
    """Sidecar metadata of a stored PEPS; empty if there is none."""
    side = sidecar_path(path)
    if not side.exists():
        return {}
    try:
        with open(side, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise PepsFormatError(f"unreadable sidecar {side}: {e}", path=side) from e


def load_peps(path: Path, verify: bool = True) -> Tuple[PepsNetwork, Dict[str, Any]]:
    """Read a stored PEPS and its sidecar.

    With ``verify`` the container digest must match the sidecar's
    ``sha256`` when both exist.

    Raises:
        PepsFormatError: On a malformed file or a digest mismatch
    """
    path = Path(path)
    if not path.exists():
        raise PepsFormatError(f"no PEPS file at {path}", path=path)
    meta = read_sidecar(path)
    if verify and meta.get('sha256'):
        digest = hash_file(path)
        if digest != meta['sha256']:
            raise PepsFormatError(f"digest mismatch for {path}: sidecar {meta['sha256'][:12]}, file {str(digest)[:12]}", path=path)
    psi = decode_peps(path.read_bytes(), path)
    logger.debug(f"Loaded PEPS {psi.lattice.rows}x{psi.lattice.cols} from {path}")
    return psi, meta
