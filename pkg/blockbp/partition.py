"""
Block partitions of a lattice.

Blocks are rectangles of ``block_rows x block_cols`` sites laid out on a
shifted grid; the bundles of lattice edges between adjacent blocks are
super edges, each carrying one MPS message per direction. Open lattices
are partitioned as their periodic embedding (wrap legs of dim 1), and an
infinite lattice is covered by a single block that messages itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from blockbp.constants import OPPOSITE, SIDE_STEP
from blockbp.errors import PartitionError
from blockbp.network import Bond, Lattice, Site

Local = Tuple[int, int]
MessageKey = Tuple[int, str]


@dataclass(frozen=True)
class Block:
    """One block of a partition.

    Attributes:
        id: Row-major block index
        index: (I, J) position in the block grid
        origin: Lattice site of local (0, 0), before wrapping
        shape: (block rows, block cols)
        center: (r0, c0, n_rows, n_cols) in block-local coordinates
    """
    id: int
    index: Tuple[int, int]
    origin: Tuple[int, int]
    shape: Tuple[int, int]
    center: Tuple[int, int, int, int]

    def in_center(self, local: Local) -> bool:
        r0, c0, nr, nc = self.center
        return r0 <= local[0] < r0 + nr and c0 <= local[1] < c0 + nc

    def locals(self) -> List[Local]:
        return [(i, j) for i in range(self.shape[0]) for j in range(self.shape[1])]


@dataclass(frozen=True)
class SuperEdge:
    """Lattice edges between block ``blocks[0]`` and ``blocks[1]``.

    ``orientation`` 'h' joins the right side of the first block to the
    left side of the second (a vertical cut, edges listed top to bottom);
    'v' joins bottom to top (a horizontal cut, edges listed left to right).
    """
    id: int
    blocks: Tuple[int, int]
    orientation: str
    edges: Tuple[Bond, ...]


@dataclass(frozen=True)
class LocalBond:
    """A lattice bond seen inside a block: block-local endpoints a -> b."""
    block_id: int
    bond: Bond
    a: Local
    b: Local


@dataclass(frozen=True)
class BlockPartition:
    lattice: Lattice
    block_shape: Tuple[int, int]
    offset: Tuple[int, int]
    grid_shape: Tuple[int, int]
    blocks: Tuple[Block, ...]
    super_edges: Tuple[SuperEdge, ...]

    def site(self, block: Block, local: Local) -> Site:
        """Lattice site of a block-local coordinate."""
        r = (block.origin[0] + local[0]) % self.lattice.rows
        c = (block.origin[1] + local[1]) % self.lattice.cols
        return (r, c)

    def block_at(self, I: int, J: int) -> Block:
        nI, nJ = self.grid_shape
        return self.blocks[(I % nI) * nJ + (J % nJ)]

    def neighbor(self, block_id: int, side: str) -> int:
        """Block across ``side`` of ``block_id`` (wrapping)."""
        I, J = self.blocks[block_id].index
        dI, dJ = SIDE_STEP[side]
        return self.block_at(I + dI, J + dJ).id

    def incoming_key(self, block_id: int, side: str) -> MessageKey:
        """Key of the message that enters ``block_id`` through ``side``."""
        return (self.neighbor(block_id, side), OPPOSITE[side])

    def message_keys(self) -> List[MessageKey]:
        """All directed messages: (sender block, side it leaves through)."""
        return [(b.id, side) for b in self.blocks for side in ('up', 'left', 'down', 'right')]

    def side_locals(self, block: Block, side: str) -> List[Local]:
        """Block-local sites along ``side`` in boundary order."""
        br, bc = block.shape
        if side == 'up':
            return [(0, j) for j in range(bc)]
        if side == 'down':
            return [(br - 1, j) for j in range(bc)]
        if side == 'left':
            return [(i, 0) for i in range(br)]
        return [(i, bc - 1) for i in range(br)]

    def local_bonds(self, block: Block, center_only: bool = True) -> List[LocalBond]:
        """Lattice bonds internal to ``block`` (optionally inside its center)."""
        out = []
        br, bc = block.shape
        for (i, j) in block.locals():
            for orientation, (di, dj) in (('h', (0, 1)), ('v', (1, 0))):
                a, b = (i, j), (i + di, j + dj)
                if b[0] >= br or b[1] >= bc:
                    continue
                if center_only and not (block.in_center(a) and block.in_center(b)):
                    continue
                bond = Bond(self.site(block, a), orientation)
                if self.lattice.neighbor(bond.site, bond.side) != self.site(block, b):
                    continue
                out.append(LocalBond(block.id, bond, a, b))
        return out


def _center(shape: Tuple[int, int], center: Optional[Tuple[int, int]]) -> Tuple[int, int, int, int]:
    br, bc = shape
    if center is None:
        return (0, 0, br, bc)
    nr, nc = center
    if not (1 <= nr <= br and 1 <= nc <= bc):
        raise PartitionError(f"center {center} does not fit in block {shape}")
    return ((br - nr) // 2, (bc - nc) // 2, nr, nc)


def partition_blocks(
    lattice: Lattice,
    block_rows: int,
    block_cols: int,
    offset: Tuple[int, int] = (0, 0),
    center: Optional[Tuple[int, int]] = None,
) -> BlockPartition:
    """Split ``lattice`` into blocks of ``block_rows x block_cols``.

    Finite lattices need dimensions divisible by the block shape; an
    infinite lattice gets exactly one block, whose dims must be multiples
    of the unit cell. ``center`` is the (rows, cols) of a centered
    sub-rectangle, the whole block when None.

    Raises:
        PartitionError: If an axis is not divisible, naming the axis
    """
    rows, cols = lattice.rows, lattice.cols
    if block_rows < 1 or block_cols < 1:
        raise PartitionError(f"block shape must be positive, got {block_rows}x{block_cols}")
    if lattice.boundary == 'infinite':
        if block_rows % rows:
            raise PartitionError(f"block rows {block_rows} not a multiple of cell rows {rows}", axis='rows')
        if block_cols % cols:
            raise PartitionError(f"block cols {block_cols} not a multiple of cell cols {cols}", axis='cols')
        nI, nJ = 1, 1
    else:
        if rows % block_rows:
            raise PartitionError(f"{rows} rows not divisible by block rows {block_rows}", axis='rows')
        if cols % block_cols:
            raise PartitionError(f"{cols} cols not divisible by block cols {block_cols}", axis='cols')
        nI, nJ = rows // block_rows, cols // block_cols

    shape = (block_rows, block_cols)
    ctr = _center(shape, center)
    o_r, o_c = offset
    blocks = tuple(
        Block(
            id=I * nJ + J,
            index=(I, J),
            origin=(o_r + I * block_rows, o_c + J * block_cols),
            shape=shape,
            center=ctr,
        )
        for I in range(nI)
        for J in range(nJ)
    )
    partition = BlockPartition(lattice, shape, (o_r, o_c), (nI, nJ), blocks, ())

    super_edges = []
    for block in blocks:
        I, J = block.index
        right = partition.block_at(I, J + 1)
        h_edges = tuple(
            Bond(partition.site(block, (i, block_cols - 1)), 'h') for i in range(block_rows)
        )
        super_edges.append(SuperEdge(len(super_edges), (block.id, right.id), 'h', h_edges))
    for block in blocks:
        I, J = block.index
        below = partition.block_at(I + 1, J)
        v_edges = tuple(
            Bond(partition.site(block, (block_rows - 1, j)), 'v') for j in range(block_cols)
        )
        super_edges.append(SuperEdge(len(super_edges), (block.id, below.id), 'v', v_edges))
    return BlockPartition(lattice, shape, (o_r, o_c), (nI, nJ), blocks, tuple(super_edges))


def validate_partition(partition: BlockPartition, lattice: Lattice) -> None:
    """Check that blocks tile the lattice and edges are accounted for once.

    Every lattice edge must be internal to exactly one block or lie on
    exactly one super edge. Infinite lattices are checked for cell-multiple
    block dims only.

    Raises:
        PartitionError: On the first violated invariant
    """
    if lattice.boundary == 'infinite':
        br, bc = partition.block_shape
        if len(partition.blocks) != 1 or br % lattice.rows or bc % lattice.cols:
            raise PartitionError("infinite partition must be one block of cell multiples")
        return
    owner: Dict[Site, int] = {}
    for block in partition.blocks:
        for local in block.locals():
            site = partition.site(block, local)
            if site in owner:
                raise PartitionError(f"site {site} in blocks {owner[site]} and {block.id}")
            owner[site] = block.id
    missing = set(lattice.sites()) - set(owner)
    if missing:
        raise PartitionError(f"sites not covered: {sorted(missing)[:5]}")

    counts: Dict[Bond, int] = {}
    for block in partition.blocks:
        for lb in partition.local_bonds(block, center_only=False):
            counts[lb.bond] = counts.get(lb.bond, 0) + 1
    for edge in partition.super_edges:
        for bond in edge.edges:
            counts[bond] = counts.get(bond, 0) + 1
    for bond in lattice.edges():
        if counts.get(bond, 0) != 1:
            raise PartitionError(f"edge {bond} accounted for {counts.get(bond, 0)} times")


def default_offsets(block_shape: Tuple[int, int]) -> List[Tuple[int, int]]:
    """The unshifted grid and the grid shifted by half a block."""
    br, bc = block_shape
    return [(0, 0), (math.ceil(br / 2), math.ceil(bc / 2))]


def center_bonds(partition: BlockPartition) -> Set[Bond]:
    out: Set[Bond] = set()
    for block in partition.blocks:
        out.update(lb.bond for lb in partition.local_bonds(block))
    return out


def covering_offsets(
    lattice: Lattice,
    block_shape: Tuple[int, int],
    center: Optional[Tuple[int, int]] = None,
) -> List[Tuple[int, int]]:
    """Offsets whose block centers together contain every bond.

    Tries the default offsets first and then adds shifted grids greedily,
    always taking the offset covering most of the remaining bonds.

    Raises:
        PartitionError: If no set of offsets covers every bond
    """
    br, bc = block_shape
    wanted = set(lattice.bonds())
    chosen: List[Tuple[int, int]] = []
    covered: Set[Bond] = set()
    for off in default_offsets(block_shape):
        if off in chosen:
            continue
        bonds = center_bonds(partition_blocks(lattice, br, bc, off, center)) & wanted
        if bonds - covered:
            chosen.append(off)
            covered |= bonds
        if covered == wanted:
            return chosen

    candidates = [(r, c) for r in range(br) for c in range(bc) if (r, c) not in chosen]
    gains = {off: center_bonds(partition_blocks(lattice, br, bc, off, center)) & wanted for off in candidates}
    while covered != wanted:
        best = max(candidates, key=lambda off: len(gains[off] - covered), default=None)
        if best is None or not gains[best] - covered:
            left = sorted(wanted - covered, key=lambda b: (b.site, b.orientation))
            raise PartitionError(
                f"block {block_shape} with center {center} cannot cover bonds {[str(b) for b in left[:4]]}"
            )
        chosen.append(best)
        covered |= gains[best]
        candidates.remove(best)
    return chosen


def assign_bonds(
    bonds: Iterable[Bond],
    partitions: Sequence[BlockPartition],
) -> List[Dict[int, List[LocalBond]]]:
    """Give each bond to the first partition whose centers contain it.

    Returns:
        One mapping per partition: block id -> bonds to update there, in
        row-major order of the first endpoint. Bonds no partition covers
        are left out.
    """
    remaining = list(dict.fromkeys(bonds))
    out: List[Dict[int, List[LocalBond]]] = []
    for partition in partitions:
        by_block: Dict[int, List[LocalBond]] = {}
        available: Dict[Bond, LocalBond] = {}
        for block in partition.blocks:
            for lb in partition.local_bonds(block):
                available.setdefault(lb.bond, lb)
        still = []
        for bond in remaining:
            lb = available.get(bond)
            if lb is None:
                still.append(bond)
                continue
            by_block.setdefault(lb.block_id, []).append(lb)
        remaining = still
        out.append(by_block)
    return out
