"""
Boundary-MPS environments of a rectangular grid of flat tensors.

``GridEnvironment`` lazily builds and caches the four families of
boundary MPS (from the top, bottom, left and right edges) and contracts
a row or column against them with some sites replaced by tensors that
carry an extra open leg. ``BlockEnvironment`` ties such a grid to the
lattice sites it holds; it is what observables and the local tensor
update consume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from blockbp.constants import MAX_SWEEPS, ZIPUP_TOL
from blockbp.errors import ConfigError, EnvironmentRegionError, ShapeMismatchError
from blockbp.mps import Mps, absorb_line
from blockbp.network import LEG, Bond, Lattice, PepsNetwork, Site, double_tensor
from blockbp.partition import Block
from blockbp.tensor_core import TruncationSpec
from blockbp.utils import derive_seed

Position = Tuple[int, int]


def _line_contract(
    upper: Mps,
    lower: Mps,
    line: Sequence[np.ndarray],
    replacements: Mapping[int, np.ndarray],
) -> np.ndarray:
    """Contract upper boundary, one line of (u, l, d, r) tensors and lower boundary.

    Replacement tensors are (x, u, l, d, r); the result has one leg per
    replacement, in line order.
    """
    env = np.ones((1, 1, 1), dtype=complex)
    for j, t in enumerate(line):
        top = upper.tensors[j]
        bot = lower.tensors[j]
        f = np.tensordot(env, top, axes=([-3], [0]))
        if j in replacements:
            f = np.tensordot(f, replacements[j], axes=([-4, -2], [2, 1]))
            f = np.tensordot(f, bot, axes=([-5, -2], [0, 1]))
            env = np.moveaxis(f, -3, -4)
        else:
            f = np.tensordot(f, t, axes=([-4, -2], [1, 0]))
            env = np.tensordot(f, bot, axes=([-4, -2], [0, 1]))
    return env.reshape(env.shape[:-3])


class GridEnvironment:
    """Cached boundary MPS of a grid of (up, left, down, right) tensors.

    ``top(k)`` holds rows 0..k-1 and ``bottom(k)`` rows k+1..; likewise
    ``left(k)`` holds columns 0..k-1 and ``right(k)`` columns k+1... The
    outer legs of the grid must have dim 1.
    """

    def __init__(
        self,
        grid: Sequence[Sequence[np.ndarray]],
        spec: TruncationSpec,
        seed: int = 0,
        tol: float = ZIPUP_TOL,
        max_sweeps: int = MAX_SWEEPS,
    ) -> None:
        self._grid = [[np.asarray(t, dtype=complex) for t in row] for row in grid]
        if not self._grid or not self._grid[0]:
            raise ShapeMismatchError("empty grid", left=0, right=None)
        width = len(self._grid[0])
        if any(len(row) != width for row in self._grid):
            raise ShapeMismatchError("ragged grid", left=[len(r) for r in self._grid], right=width)
        self.spec = spec
        self.seed = seed
        self.tol = tol
        self.max_sweeps = max_sweeps
        self._cache: Dict[str, Dict[int, Mps]] = {'top': {}, 'bottom': {}, 'left': {}, 'right': {}}

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self._grid), len(self._grid[0])

    def tensor(self, pos: Position) -> np.ndarray:
        return self._grid[pos[0]][pos[1]]

    def row(self, i: int) -> List[np.ndarray]:
        return list(self._grid[i])

    def column(self, j: int) -> List[np.ndarray]:
        return [row[j] for row in self._grid]

    def _absorb(self, boundary: Mps, line: List[np.ndarray], direction: str, k: int) -> Mps:
        return absorb_line(
            boundary, line, direction, self.spec, self.tol, self.max_sweeps,
            seed=derive_seed(self.seed, direction, k),
        )

    def top(self, k: int) -> Mps:
        """Boundary after absorbing rows 0..k-1 moving down."""
        rows, cols = self.shape
        cache = self._cache['top']
        if k not in cache:
            start = max((i for i in cache if i < k), default=0)
            mps = cache[start] if start in cache else Mps.trivial(cols)
            for i in range(start + 1, k + 1):
                mps = self._absorb(mps, self.row(i - 1), 'down', i)
                cache[i] = mps
            cache.setdefault(0, Mps.trivial(cols))
        return cache[k]

    def bottom(self, k: int) -> Mps:
        """Boundary after absorbing rows k+1.. moving up."""
        rows, cols = self.shape
        cache = self._cache['bottom']
        if k not in cache:
            start = min((i for i in cache if i > k), default=rows - 1)
            mps = cache[start] if start in cache else Mps.trivial(cols)
            for i in range(start - 1, k - 1, -1):
                mps = self._absorb(mps, self.row(i + 1), 'up', i)
                cache[i] = mps
            cache.setdefault(rows - 1, Mps.trivial(cols))
        return cache[k]

    def left(self, k: int) -> Mps:
        """Boundary after absorbing columns 0..k-1 moving right."""
        rows, cols = self.shape
        cache = self._cache['left']
        if k not in cache:
            start = max((j for j in cache if j < k), default=0)
            mps = cache[start] if start in cache else Mps.trivial(rows)
            for j in range(start + 1, k + 1):
                mps = self._absorb(mps, self.column(j - 1), 'right', j)
                cache[j] = mps
            cache.setdefault(0, Mps.trivial(rows))
        return cache[k]

    def right(self, k: int) -> Mps:
        """Boundary after absorbing columns k+1.. moving left."""
        rows, cols = self.shape
        cache = self._cache['right']
        if k not in cache:
            start = min((j for j in cache if j > k), default=cols - 1)
            mps = cache[start] if start in cache else Mps.trivial(rows)
            for j in range(start - 1, k - 1, -1):
                mps = self._absorb(mps, self.column(j + 1), 'left', j)
                cache[j] = mps
            cache.setdefault(cols - 1, Mps.trivial(rows))
        return cache[k]

    def update_sites(self, updates: Mapping[Position, np.ndarray]) -> None:
        """Replace grid tensors and drop every boundary that absorbed them."""
        for (r, c), t in updates.items():
            self._grid[r][c] = np.asarray(t, dtype=complex)
            self._cache['top'] = {k: v for k, v in self._cache['top'].items() if k <= r}
            self._cache['bottom'] = {k: v for k, v in self._cache['bottom'].items() if k >= r}
            self._cache['left'] = {k: v for k, v in self._cache['left'].items() if k <= c}
            self._cache['right'] = {k: v for k, v in self._cache['right'].items() if k >= c}

    def row_contract(self, i: int, replacements: Optional[Mapping[int, np.ndarray]] = None) -> np.ndarray:
        """Contract row ``i`` between its boundaries.

        The value is exact up to the positive factor
        ``exp(row_log_scale(i))``. Replacements map columns to
        (x, u, l, d, r) tensors whose x legs stay open.
        """
        return _line_contract(self.top(i), self.bottom(i), self.row(i), replacements or {})

    def row_log_scale(self, i: int) -> float:
        return self.top(i).log_scale + self.bottom(i).log_scale

    def column_contract(self, j: int, replacements: Optional[Mapping[int, np.ndarray]] = None) -> np.ndarray:
        """Contract column ``j`` between its boundaries; see ``row_contract``."""
        line = [np.transpose(t, (1, 0, 3, 2)) for t in self.column(j)]
        reps = {i: np.transpose(t, (0, 2, 1, 4, 3)) for i, t in (replacements or {}).items()}
        return _line_contract(self.left(j), self.right(j), line, reps)

    def column_log_scale(self, j: int) -> float:
        return self.left(j).log_scale + self.right(j).log_scale

    def site_value(self) -> complex:
        """Full contraction of the grid."""
        raw = complex(self.row_contract(0))
        return raw * float(np.exp(self.row_log_scale(0)))


def message_tensor(msg: Mps, side: str) -> List[np.ndarray]:
    """Grid tensors of a message placed on ``side`` of a block.

    Top and bottom messages run left to right, left and right messages
    top to bottom; the physical leg points into the block.
    """
    if side == 'up':
        return [t[None] for t in msg.tensors]
    if side == 'down':
        return [t.transpose(1, 0, 2)[:, :, None, :] for t in msg.tensors]
    if side == 'left':
        return [t.transpose(0, 2, 1)[:, None, :, :] for t in msg.tensors]
    if side == 'right':
        return [t[:, :, :, None] for t in msg.tensors]
    raise ValueError(f"unknown side {side!r}")


def dressed_grid(core: Sequence[Sequence[np.ndarray]], messages: Mapping[str, Mps]) -> List[List[np.ndarray]]:
    """Surround ``core`` with incoming messages and unit corners.

    A side without a message gets dim-1 unit tensors, so the
    corresponding boundary of the result is trivial.

    Raises:
        ShapeMismatchError: If a message does not fit its side
    """
    rows, cols = len(core), len(core[0])
    one = np.ones((1, 1, 1, 1), dtype=complex)
    grid = [[one] * (cols + 2) for _ in range(rows + 2)]
    for i in range(rows):
        for j in range(cols):
            grid[i + 1][j + 1] = core[i][j]

    def legs(side: str) -> List[int]:
        if side == 'up':
            return [core[0][j].shape[LEG['up']] for j in range(cols)]
        if side == 'down':
            return [core[rows - 1][j].shape[LEG['down']] for j in range(cols)]
        if side == 'left':
            return [core[i][0].shape[LEG['left']] for i in range(rows)]
        return [core[i][cols - 1].shape[LEG['right']] for i in range(rows)]

    for side, msg in messages.items():
        expected = legs(side)
        if list(msg.phys_dims) != expected:
            raise ShapeMismatchError(
                f"{side} message has physical dims {msg.phys_dims}, block legs are {expected}",
                left=msg.phys_dims, right=tuple(expected),
            )
        tensors = message_tensor(msg, side)
        for k, t in enumerate(tensors):
            if side == 'up':
                grid[0][k + 1] = t
            elif side == 'down':
                grid[rows + 1][k + 1] = t
            elif side == 'left':
                grid[k + 1][0] = t
            else:
                grid[k + 1][cols + 1] = t
    return grid


@dataclass
class BlockEnvironment:
    """Boundary-MPS environment of a (dressed) block.

    Attributes:
        grid: Environment over the dressed grid
        site_at: Grid position -> lattice site, for every tensor that is
            a lattice site
        center: Positions where 1- and 2-site quantities may be evaluated
        lattice: Lattice of the network the block was cut from
        block: Partition block, None for a whole-lattice environment
        messages: Incoming messages by side
    """
    grid: GridEnvironment
    site_at: Dict[Position, Site]
    center: FrozenSet[Position]
    lattice: Lattice
    block: Optional[Block] = None
    messages: Dict[str, Mps] = field(default_factory=dict)

    def positions(self, site: Site) -> List[Position]:
        return sorted(p for p, s in self.site_at.items() if s == site)

    def site_position(self, site: Site) -> Position:
        """First center position holding ``site``."""
        for pos in sorted(self.center):
            if self.site_at.get(pos) == site:
                return pos
        raise EnvironmentRegionError(
            f"site {site} is not in the environment center",
            bond=site, center=self.block.center if self.block else None,
        )

    def bond_positions(self, bond: Bond) -> Tuple[Position, Position]:
        """Grid positions of both ends of ``bond`` inside the center.

        Raises:
            EnvironmentRegionError: If no copy of the bond lies in the center
        """
        a, b = self.lattice.bond_sites(bond)
        step = (0, 1) if bond.orientation == 'h' else (1, 0)
        for pos in sorted(self.center):
            if self.site_at.get(pos) != a:
                continue
            other = (pos[0] + step[0], pos[1] + step[1])
            if other in self.center and self.site_at.get(other) == b:
                return pos, other
        raise EnvironmentRegionError(
            f"bond {bond} is not inside the environment center",
            bond=bond, center=self.block.center if self.block else None,
        )

    def update_lattice_sites(self, updates: Mapping[Site, np.ndarray]) -> None:
        """Replace every copy of the given sites by new ket tensors."""
        grid_updates = {}
        for site, ket in updates.items():
            dt = double_tensor(ket)
            for pos in self.positions(site):
                grid_updates[pos] = dt
        self.grid.update_sites(grid_updates)


def lattice_environment(psi: PepsNetwork, spec: TruncationSpec, seed: int = 0) -> BlockEnvironment:
    """Boundary-MPS environment of a whole open PEPS (the bMPS method)."""
    lattice = psi.lattice
    if lattice.boundary != 'open':
        raise ConfigError(f"boundary-MPS evaluation needs an open lattice, got {lattice.boundary!r}")
    grid = [[double_tensor(psi.site((r, c))) for c in range(lattice.cols)] for r in range(lattice.rows)]
    site_at = {(r, c): (r, c) for r, c in lattice.sites()}
    return BlockEnvironment(
        grid=GridEnvironment(grid, spec, seed=derive_seed(seed, 'bmps')),
        site_at=site_at,
        center=frozenset(site_at),
        lattice=lattice,
    )
