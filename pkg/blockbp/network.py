"""
Lattices and tensor networks.

A ``Lattice`` fixes the geometry (open, periodic or infinite unit cell),
a ``PepsNetwork`` holds one rank-5 tensor (phys, up, left, down, right)
per site and a ``FlatNetwork`` holds rank-4 tensors (up, left, down,
right) of a double-layer norm network or a classical partition function.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from blockbp.constants import BOUNDARIES, OPPOSITE, SIDE_STEP, SIDES
from blockbp.errors import ConfigError, ShapeMismatchError
from blockbp.tensor_core import fuse_legs
from blockbp.utils import rng_for

Site = Tuple[int, int]

# Position of each virtual leg in a rank-4 flat tensor (a PEPS tensor adds 1)
LEG: Dict[str, int] = {side: i for i, side in enumerate(SIDES)}


@dataclass(frozen=True)
class Bond:
    """The lattice edge leaving ``site`` to the right ('h') or downward ('v')."""
    site: Site
    orientation: str

    def __post_init__(self) -> None:
        if self.orientation not in ('h', 'v'):
            raise ValueError(f"orientation must be 'h' or 'v', got {self.orientation!r}")

    @property
    def side(self) -> str:
        return 'right' if self.orientation == 'h' else 'down'

    @property
    def key(self) -> str:
        return f"{self.site[0]},{self.site[1]},{self.orientation}"

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class Lattice:
    """Square lattice geometry.

    Sites are (row, col) with rows increasing downward. Periodic and
    infinite lattices wrap; an infinite lattice describes its unit cell,
    so an axis of length 1 wraps onto itself.
    """
    rows: int
    cols: int
    boundary: str = 'open'

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"lattice must be at least 1x1, got {self.rows}x{self.cols}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def sites(self) -> List[Site]:
        return [(r, c) for r in range(self.rows) for c in range(self.cols)]

    def index(self, site: Site) -> int:
        return site[0] * self.cols + site[1]

    def neighbor(self, site: Site, side: str) -> Optional[Site]:
        """Site across ``side`` of ``site``, or None if there is none."""
        dr, dc = SIDE_STEP[side]
        r, c = site[0] + dr, site[1] + dc
        if self.boundary == 'infinite':
            return (r % self.rows, c % self.cols)
        if 0 <= r < self.rows and 0 <= c < self.cols:
            return (r, c)
        if self.boundary == 'open':
            return None
        length = self.rows if dr else self.cols
        if length < 2:
            return None
        return (r % self.rows, c % self.cols)

    def edges(self) -> List[Bond]:
        """Every pairing of virtual legs, as (site, right|down) bonds."""
        out = []
        for site in self.sites():
            for orientation, side in (('h', 'right'), ('v', 'down')):
                if self.neighbor(site, side) is not None:
                    out.append(Bond(site, orientation))
        return out

    def bonds(self) -> List[Bond]:
        """Hamiltonian couplings; every edge of the geometry carries one."""
        return self.edges()

    def bond_sites(self, bond: Bond) -> Tuple[Site, Site]:
        other = self.neighbor(bond.site, bond.side)
        if other is None:
            raise ConfigError(f"bond {bond} leaves the lattice")
        return bond.site, other

    def coordination(self, site: Site) -> int:
        """Number of bonds that touch ``site`` (self bonds count twice)."""
        count = 0
        for bond in self.bonds():
            a, b = self.bond_sites(bond)
            count += (a == site) + (b == site)
        return count

    def is_bipartite(self) -> bool:
        """Whether the (r + c) parity is a proper two-coloring."""
        for bond in self.bonds():
            a, b = self.bond_sites(bond)
            if (a[0] + a[1]) % 2 == (b[0] + b[1]) % 2:
                return False
        return True


def _check_site_dims(lattice: Lattice, sites: Sequence[np.ndarray], offset: int) -> None:
    """Adjacent virtual dims agree; legs with no neighbor have dim 1."""
    for site in lattice.sites():
        t = sites[lattice.index(site)]
        for side in SIDES:
            nb = lattice.neighbor(site, side)
            dim = t.shape[offset + LEG[side]]
            if nb is None:
                if dim != 1:
                    raise ShapeMismatchError(
                        f"site {site} leg {side} has no neighbor but dim {dim}",
                        left=(site, side, dim), right=None,
                    )
                continue
            other = sites[lattice.index(nb)].shape[offset + LEG[OPPOSITE[side]]]
            if dim != other:
                raise ShapeMismatchError(
                    f"site {site} leg {side} (dim {dim}) does not match "
                    f"site {nb} leg {OPPOSITE[side]} (dim {other})",
                    left=(site, side, dim), right=(nb, OPPOSITE[side], other),
                )


@dataclass(frozen=True)
class PepsNetwork:
    """PEPS with rank-5 site tensors (phys, up, left, down, right), row-major."""
    lattice: Lattice
    sites: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        sites = tuple(np.asarray(t, dtype=complex) for t in self.sites)
        object.__setattr__(self, 'sites', sites)
        if len(sites) != self.lattice.n_sites:
            raise ShapeMismatchError(
                f"{len(sites)} tensors for {self.lattice.n_sites} sites",
                left=len(sites), right=self.lattice.n_sites,
            )
        for i, t in enumerate(sites):
            if t.ndim != 5:
                raise ShapeMismatchError(f"site {i} has rank {t.ndim}, expected 5", left=t.shape, right=5)
        dims = {t.shape[0] for t in sites}
        if len(dims) != 1:
            raise ShapeMismatchError(f"non-uniform physical dims {sorted(dims)}", left=sorted(dims), right=None)
        _check_site_dims(self.lattice, sites, offset=1)

    @property
    def phys_dim(self) -> int:
        return self.sites[0].shape[0]

    @property
    def bond_dim(self) -> int:
        return max(max(t.shape[1:]) for t in self.sites)

    def site(self, site: Site) -> np.ndarray:
        return self.sites[self.lattice.index(site)]

    def with_sites(self, updates: Mapping[Site, np.ndarray]) -> 'PepsNetwork':
        """Copy with some site tensors replaced."""
        sites = list(self.sites)
        for site, t in updates.items():
            sites[self.lattice.index(site)] = t
        return PepsNetwork(self.lattice, tuple(sites))

    def with_lattice(self, lattice: Lattice) -> 'PepsNetwork':
        return PepsNetwork(lattice, self.sites)

    @classmethod
    def random(cls, lattice: Lattice, d: int, D: int, seed: int = 0) -> 'PepsNetwork':
        """Seeded complex-normal PEPS with bond dim D, each tensor unit norm."""
        rng = rng_for(seed, 'initial_peps')
        sites = []
        for site in lattice.sites():
            shape = (d,) + tuple(D if lattice.neighbor(site, s) is not None else 1 for s in SIDES)
            t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            sites.append(t / np.linalg.norm(t))
        return cls(lattice, tuple(sites))

    @classmethod
    def product_state(
        cls,
        lattice: Lattice,
        vectors: Union[np.ndarray, Mapping[Site, np.ndarray]],
    ) -> 'PepsNetwork':
        """Bond-dim-1 product state from one vector or one vector per site."""
        sites = []
        for site in lattice.sites():
            v = vectors[site] if isinstance(vectors, Mapping) else vectors
            v = np.asarray(v, dtype=complex)
            sites.append(v.reshape(v.size, 1, 1, 1, 1))
        return cls(lattice, tuple(sites))


@dataclass(frozen=True)
class FlatNetwork:
    """Rank-4 (up, left, down, right) tensors, row-major.

    ``double_layer`` marks a norm network whose legs fuse (ket, bra) pairs;
    a single-layer network is a classical partition function.
    """
    lattice: Lattice
    sites: Tuple[np.ndarray, ...]
    double_layer: bool = True

    def __post_init__(self) -> None:
        sites = tuple(np.asarray(t, dtype=complex) for t in self.sites)
        object.__setattr__(self, 'sites', sites)
        if len(sites) != self.lattice.n_sites:
            raise ShapeMismatchError(
                f"{len(sites)} tensors for {self.lattice.n_sites} sites",
                left=len(sites), right=self.lattice.n_sites,
            )
        for i, t in enumerate(sites):
            if t.ndim != 4:
                raise ShapeMismatchError(f"site {i} has rank {t.ndim}, expected 4", left=t.shape, right=4)
        _check_site_dims(self.lattice, sites, offset=0)

    def site(self, site: Site) -> np.ndarray:
        return self.sites[self.lattice.index(site)]

    def leg_dim(self, site: Site, side: str) -> int:
        return self.site(site).shape[LEG[side]]

    def with_sites(self, updates: Mapping[Site, np.ndarray]) -> 'FlatNetwork':
        sites = list(self.sites)
        for site, t in updates.items():
            sites[self.lattice.index(site)] = t
        return FlatNetwork(self.lattice, tuple(sites), self.double_layer)

    def grid(self) -> List[List[np.ndarray]]:
        return [[self.site((r, c)) for c in range(self.lattice.cols)] for r in range(self.lattice.rows)]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.sites)


def double_tensor(t: np.ndarray) -> np.ndarray:
    """Contract a (phys, u, l, d, r) tensor with its conjugate over phys.

    Each virtual leg of the result fuses (ket, bra) with the ket index
    major.
    """
    dt = np.einsum('puldr,pULDR->uUlLdDrR', t, t.conj())
    return fuse_legs(dt, [[0, 1], [2, 3], [4, 5], [6, 7]])


def open_double_tensor(t: np.ndarray) -> np.ndarray:
    """Like ``double_tensor`` but keeps the first leg of ``t`` open.

    Input (x, u, l, d, r); output (x*x, u^2, l^2, d^2, r^2) with the open
    pair fused as (ket, bra).
    """
    dt = np.einsum('xuldr,XULDR->xXuUlLdDrR', t, t.conj())
    return fuse_legs(dt, [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]])


def build_double_layer(psi: PepsNetwork) -> FlatNetwork:
    """The <psi|psi> network with squared leg dims."""
    return FlatNetwork(psi.lattice, tuple(double_tensor(t) for t in psi.sites), double_layer=True)


def embed_obc_in_pbc(net: Union[PepsNetwork, FlatNetwork]) -> Union[PepsNetwork, FlatNetwork]:
    """View an open network as periodic with dim-1 wrap legs.

    The boundary legs of an open network already have dim 1, so only the
    geometry changes and the contraction value is unchanged.
    """
    if net.lattice.boundary != 'open':
        raise ConfigError(f"expected an open lattice, got {net.lattice.boundary!r}")
    lattice = Lattice(net.lattice.rows, net.lattice.cols, 'periodic')
    if isinstance(net, PepsNetwork):
        return PepsNetwork(lattice, net.sites)
    return FlatNetwork(lattice, net.sites, net.double_layer)


def tile_unit_cell(cell: PepsNetwork, target_rows: int, target_cols: int, seed: int = 0) -> PepsNetwork:
    """Finite open PEPS cut out of a periodic tiling of ``cell``.

    Interior tensors are copies of the cell tensors; each outermost
    virtual leg is contracted with a seeded standard-normal vector.

    Raises:
        ConfigError: If the target shape is not a multiple of the cell
    """
    cr, cc = cell.lattice.rows, cell.lattice.cols
    if target_rows % cr or target_cols % cc:
        raise ConfigError(
            f"target {target_rows}x{target_cols} is not a multiple of the {cr}x{cc} unit cell"
        )
    rng = rng_for(seed, 'boundaries')
    sites = []
    for r in range(target_rows):
        for c in range(target_cols):
            t = cell.site((r % cr, c % cc))
            edges = {
                'up': r == 0,
                'left': c == 0,
                'down': r == target_rows - 1,
                'right': c == target_cols - 1,
            }
            for side in SIDES:
                if not edges[side]:
                    continue
                axis = 1 + LEG[side]
                vec = rng.standard_normal(t.shape[axis])
                t = np.expand_dims(np.tensordot(t, vec, axes=([axis], [0])), axis)
            sites.append(t)
    return PepsNetwork(Lattice(target_rows, target_cols, 'open'), tuple(sites))
