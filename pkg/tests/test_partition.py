"""
Tests for blockbp.partition module.
"""
from dataclasses import replace

import pytest

from blockbp.errors import PartitionError
from blockbp.network import Lattice
from blockbp.partition import (
    assign_bonds,
    center_bonds,
    covering_offsets,
    default_offsets,
    partition_blocks,
    validate_partition,
)


class TestPartitionBlocks:
    """Tests for partition_blocks."""

    def test_six_by_six_in_three_by_three(self):
        """Test four blocks joined by eight super edges."""
        part = partition_blocks(Lattice(6, 6), 3, 3)
        assert len(part.blocks) == 4
        assert len(part.super_edges) == 8
        assert part.grid_shape == (2, 2)
        assert all(len(e.edges) == 3 for e in part.super_edges)

    def test_sites_wrap_with_offset(self):
        """Test block-local coordinates on a shifted grid."""
        part = partition_blocks(Lattice(6, 6), 3, 3, offset=(2, 2))
        last = part.blocks[-1]
        assert part.site(last, (0, 0)) == (5, 5)
        assert part.site(last, (1, 1)) == (0, 0)

    def test_neighbors_and_keys(self):
        """Test block adjacency and incoming message keys."""
        part = partition_blocks(Lattice(6, 6), 3, 3)
        assert part.neighbor(0, 'right') == 1
        assert part.neighbor(0, 'up') == 2
        assert part.incoming_key(0, 'right') == (1, 'left')
        assert len(part.message_keys()) == 16

    def test_side_locals(self):
        """Test boundary orderings."""
        part = partition_blocks(Lattice(4, 6), 2, 3)
        block = part.blocks[0]
        assert part.side_locals(block, 'down') == [(1, 0), (1, 1), (1, 2)]
        assert part.side_locals(block, 'right') == [(0, 2), (1, 2)]

    def test_center(self):
        """Test the centered core of a block."""
        part = partition_blocks(Lattice(6, 6), 3, 3, center=(1, 1))
        block = part.blocks[0]
        assert block.center == (1, 1, 1, 1)
        assert block.in_center((1, 1))
        assert not block.in_center((0, 1))
        assert part.local_bonds(block) == []
        assert len(part.local_bonds(block, center_only=False)) == 12

    def test_center_too_large(self):
        """Test that a center must fit its block."""
        with pytest.raises(PartitionError):
            partition_blocks(Lattice(6, 6), 3, 3, center=(4, 1))

    def test_indivisible_axis(self):
        """Test that the failing axis is named."""
        with pytest.raises(PartitionError) as info:
            partition_blocks(Lattice(5, 6), 3, 3)
        assert info.value.axis == 'rows'
        with pytest.raises(PartitionError) as info:
            partition_blocks(Lattice(6, 5), 3, 3)
        assert info.value.axis == 'cols'

    def test_infinite_single_block(self):
        """Test that an infinite cell gets one block of cell multiples."""
        lat = Lattice(2, 2, 'infinite')
        part = partition_blocks(lat, 4, 4)
        assert len(part.blocks) == 1
        assert part.neighbor(0, 'left') == 0
        validate_partition(part, lat)
        with pytest.raises(PartitionError):
            partition_blocks(lat, 3, 4)


class TestValidatePartition:
    """Tests for validate_partition."""

    @pytest.mark.parametrize('offset', [(0, 0), (1, 2), (2, 2)])
    def test_valid(self, offset):
        """Test that shifted grids still tile the lattice."""
        lat = Lattice(6, 6)
        validate_partition(partition_blocks(lat, 3, 3, offset), lat)

    def test_periodic(self):
        """Test a periodic lattice with wrap edges on super edges."""
        lat = Lattice(4, 4, 'periodic')
        validate_partition(partition_blocks(lat, 2, 2), lat)

    def test_missing_super_edge(self):
        """Test that a dropped super edge is detected."""
        lat = Lattice(6, 6)
        part = partition_blocks(lat, 3, 3)
        broken = replace(part, super_edges=part.super_edges[1:])
        with pytest.raises(PartitionError):
            validate_partition(broken, lat)

    def test_overlapping_blocks(self):
        """Test that a site owned twice is detected."""
        lat = Lattice(6, 6)
        part = partition_blocks(lat, 3, 3)
        broken = replace(part, blocks=(part.blocks[0],) + part.blocks[:3])
        with pytest.raises(PartitionError):
            validate_partition(broken, lat)


class TestCoveringOffsets:
    """Tests for covering_offsets and assign_bonds."""

    def test_default_offsets(self):
        """Test the half-block shift."""
        assert default_offsets((3, 3)) == [(0, 0), (2, 2)]
        assert default_offsets((4, 2)) == [(0, 0), (2, 1)]

    def test_two_grids_cover(self):
        """Test that the default pair covers a 6x6 lattice."""
        lat = Lattice(6, 6)
        offsets = covering_offsets(lat, (3, 3))
        assert offsets == [(0, 0), (2, 2)]
        covered = set()
        for off in offsets:
            covered |= center_bonds(partition_blocks(lat, 3, 3, off))
        assert set(lat.bonds()) <= covered

    def test_single_site_center_cannot_cover(self):
        """Test that a center without bonds raises."""
        with pytest.raises(PartitionError):
            covering_offsets(Lattice(6, 6), (3, 3), center=(1, 1))

    def test_each_bond_assigned_once(self):
        """Test that assign_bonds gives every bond to one block."""
        lat = Lattice(6, 6)
        parts = [partition_blocks(lat, 3, 3, off) for off in covering_offsets(lat, (3, 3))]
        assigned = assign_bonds(lat.bonds(), parts)
        seen = [lb.bond for by_block in assigned for bonds in by_block.values() for lb in bonds]
        assert len(seen) == len(set(seen)) == len(lat.bonds())

    def test_uncovered_bonds_left_out(self):
        """Test that bonds outside every center are skipped."""
        lat = Lattice(6, 6)
        assigned = assign_bonds(lat.bonds(), [partition_blocks(lat, 3, 3)])
        count = sum(len(v) for v in assigned[0].values())
        assert count == 4 * 12
