"""
Observables: reduced density matrices, energies and magnetization.

RDMs come from any ``BlockEnvironment`` (a converged blockBP block, a
whole-lattice boundary MPS, or a BP pair environment). Energies are
assembled from 2-site RDMs per bond plus 1-site field terms. The
classical Ising part builds the single-layer partition-function network
and measures the magnetization at block centers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from blockbp.constants import EIG_CLIP_TOL, IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z
from blockbp.engine import block_environment, run_to_fixed_point
from blockbp.environment import BlockEnvironment, lattice_environment
from blockbp.errors import ConfigError, ShapeMismatchError, ZeroNormError
from blockbp.logging import logger
from blockbp.models import MethodSpec, ModelSpec, ObservableReport
from blockbp.network import (
    LEG,
    Bond,
    FlatNetwork,
    Lattice,
    PepsNetwork,
    Site,
    build_double_layer,
    open_double_tensor,
    tile_unit_cell,
)
from blockbp.partition import assign_bonds, covering_offsets, partition_blocks
from blockbp.tensor_core import TruncationSpec, fuse_legs, hermitize, split_leg
from blockbp.utils import derive_seed

# Inverse critical temperature of the square-lattice Ising model
BETA_C = math.asinh(1.0) / 2.0

SYMMETRY_BREAKING_FIELD = 1e-6


@dataclass(frozen=True)
class Rdm:
    """Reduced density matrix on one or two sites.

    Built through ``Rdm.from_raw`` it is hermitian, unit trace and PSD.
    """
    support: Tuple[Site, ...]
    matrix: np.ndarray

    @classmethod
    def from_raw(cls, support: Sequence[Site], raw: np.ndarray) -> 'Rdm':
        """Hermitize, clip negative eigenvalues and normalize the trace.

        Raises:
            ZeroNormError: If the trace vanishes
        """
        h = hermitize(np.asarray(raw, dtype=complex))
        tr = float(np.trace(h).real)
        if tr == 0.0 or not np.isfinite(tr):
            raise ZeroNormError(f"RDM on {tuple(support)} has trace {tr}")
        h = h / tr
        w, v = scipy.linalg.eigh(h)
        if w[0] < 0:
            if w[0] < -EIG_CLIP_TOL:
                logger.warning(f"RDM on {tuple(support)}: clipped eigenvalue {w[0]:.3e}")
            w = np.clip(w, 0.0, None)
            h = (v * w) @ v.conj().T
            h = hermitize(h / np.trace(h).real)
        return cls(tuple(support), h)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(self.matrix @ op).real)

    def marginal(self, which: int) -> np.ndarray:
        """One-site marginal (0 = first site) of a 2-site RDM."""
        d = int(round(math.sqrt(self.dim)))
        r = self.matrix.reshape(d, d, d, d)
        if which == 0:
            return np.einsum('aqbq->ab', r)
        return np.einsum('qaqb->ab', r)


def trace_distance(r1: Rdm, r2: Rdm) -> float:
    """Half the trace norm of r1 - r2, in [0, 1].

    Raises:
        ShapeMismatchError: If the RDMs have different dimensions
    """
    if r1.matrix.shape != r2.matrix.shape:
        raise ShapeMismatchError(
            f"RDM shapes {r1.matrix.shape} and {r2.matrix.shape} differ",
            left=r1.matrix.shape, right=r2.matrix.shape,
        )
    w = scipy.linalg.eigvalsh(hermitize(r1.matrix - r2.matrix))
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(w)))))


# --- Local Hamiltonian terms -------------------------------------------------

def coupling_operator(model: ModelSpec) -> np.ndarray:
    """Two-site coupling of one bond (d^2 x d^2)."""
    if model.model == 'transverse-ising':
        return -np.kron(SIGMA_Z, SIGMA_Z)
    if model.model == 'afh':
        return (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y) + np.kron(SIGMA_Z, SIGMA_Z)).real / 4.0 + 0j
    raise ConfigError(f"model {model.model!r} has no quantum Hamiltonian")


def field_operator(model: ModelSpec) -> np.ndarray:
    """Single-site term of the Hamiltonian."""
    if model.model == 'transverse-ising':
        return -model.B * SIGMA_X
    if model.model == 'afh':
        return np.zeros((2, 2), dtype=complex)
    raise ConfigError(f"model {model.model!r} has no quantum Hamiltonian")


def bond_hamiltonian(model: ModelSpec, lattice: Lattice, bond: Bond) -> np.ndarray:
    """Coupling plus each endpoint's field weighted by 1/coordination."""
    a, b = lattice.bond_sites(bond)
    f = field_operator(model)
    return (
        coupling_operator(model)
        + np.kron(f, IDENTITY_2) / lattice.coordination(a)
        + np.kron(IDENTITY_2, f) / lattice.coordination(b)
    )


# --- RDMs from environments --------------------------------------------------

def rdm_from_environment(env: BlockEnvironment, psi: PepsNetwork, bond: Bond) -> Rdm:
    """Two-site RDM of ``bond`` (first index: ``bond.site``).

    Raises:
        EnvironmentRegionError: If the bond is outside the center
    """
    pa, pb = env.bond_positions(bond)
    a, b = env.site_at[pa], env.site_at[pb]
    xa = open_double_tensor(psi.site(a))
    xb = open_double_tensor(psi.site(b))
    if bond.orientation == 'h':
        raw = env.grid.row_contract(pa[0], {pa[1]: xa, pb[1]: xb})
    else:
        raw = env.grid.column_contract(pa[1], {pa[0]: xa, pb[0]: xb})
    d = psi.phys_dim
    raw = split_leg(split_leg(raw, 1, (d, d)), 0, (d, d))
    raw = fuse_legs(raw, [[0, 2], [1, 3]])
    return Rdm.from_raw((a, b), raw)


def site_rdm_from_environment(env: BlockEnvironment, psi: PepsNetwork, site: Site) -> Rdm:
    """One-site RDM of ``site`` from a center position of ``env``."""
    pos = env.site_position(site)
    x = open_double_tensor(psi.site(site))
    raw = env.grid.row_contract(pos[0], {pos[1]: x})
    d = psi.phys_dim
    return Rdm.from_raw((site,), raw.reshape(d, d))


def blockbp_partitions(lattice: Lattice, method: MethodSpec) -> list:
    """Partitions whose block centers together cover every bond.

    An infinite cell gets one self-messaging block with a centered core
    of at least 2x2 unless a center is given.
    """
    block = method.block
    center = method.center
    if lattice.boundary == 'infinite' and center is None:
        center = (min(block[0], max(2, lattice.rows)), min(block[1], max(2, lattice.cols)))
    offsets = method.offsets or covering_offsets(lattice, block, center)
    return [partition_blocks(lattice, block[0], block[1], off, center) for off in offsets]


def bond_rdms(
    psi: PepsNetwork,
    method: MethodSpec,
    bonds: Optional[Iterable[Bond]] = None,
    executor: Any = None,
) -> Dict[Bond, Rdm]:
    """Two-site RDMs of ``bonds`` (default: all bonds) by ``method``."""
    lattice = psi.lattice
    wanted = list(bonds) if bonds is not None else lattice.bonds()
    D = psi.bond_dim
    if method.kind == 'exact':
        from blockbp.oracles import exact_rdm, peps_to_state

        state = peps_to_state(psi)
        return {bond: exact_rdm(psi, bond, state=state) for bond in wanted}

    if method.kind == 'bmps':
        env = lattice_environment(psi, method.truncation.environment_spec(D), seed=method.seed)
        return {bond: rdm_from_environment(env, psi, bond) for bond in wanted}

    net = build_double_layer(psi)
    if method.block == (1, 1):
        from blockbp.bp import block_messages_as_bp, pair_environment

        partition = partition_blocks(lattice, 1, 1)
        msgs, _ = run_to_fixed_point(
            net, partition, method.truncation.message_spec(D), method.tol, method.max_rounds,
            seed=method.seed, executor=executor,
        )
        vectors = block_messages_as_bp(msgs, lattice)
        return {bond: rdm_from_environment(pair_environment(net, vectors, bond), psi, bond) for bond in wanted}

    partitions = blockbp_partitions(lattice, method)
    out: Dict[Bond, Rdm] = {}
    for index, (partition, assigned) in enumerate(zip(partitions, assign_bonds(wanted, partitions))):
        if not assigned:
            continue
        msgs, stats = run_to_fixed_point(
            net, partition, method.truncation.message_spec(D), method.tol, method.max_rounds,
            seed=derive_seed(method.seed, 'offset', index), executor=executor,
        )
        for block_id, local_bonds in sorted(assigned.items()):
            env = block_environment(
                net, partition, msgs, block_id, method.truncation.environment_spec(D),
                seed=derive_seed(method.seed, 'offset', index),
            )
            for lb in local_bonds:
                out[lb.bond] = rdm_from_environment(env, psi, lb.bond)
    missing = [b for b in wanted if b not in out]
    if missing:
        raise ConfigError(f"partition offsets leave bonds uncovered: {[str(b) for b in missing[:4]]}")
    return out


def energy_from_rdms(
    model: ModelSpec,
    lattice: Lattice,
    rdms: Mapping[Bond, Rdm],
    method: str,
    n_sites: Optional[int] = None,
) -> ObservableReport:
    """Energy per site from bond RDMs.

    Bond energies are the coupling terms; each site's field term uses the
    mean of its marginals over the bonds that touch it.
    """
    coupling = coupling_operator(model)
    field = field_operator(model)
    bond_energies = {}
    marginals: Dict[Site, List[np.ndarray]] = {}
    for bond, rdm in rdms.items():
        bond_energies[bond.key] = rdm.expectation(coupling)
        a, b = lattice.bond_sites(bond)
        marginals.setdefault(a, []).append(rdm.marginal(0))
        marginals.setdefault(b, []).append(rdm.marginal(1))
    field_total = 0.0
    mz = []
    for site, ms in marginals.items():
        rho = np.mean(ms, axis=0)
        field_total += float(np.trace(rho @ field).real)
        mz.append(float(np.trace(rho @ SIGMA_Z).real))
    n = n_sites or lattice.n_sites
    energy = (sum(bond_energies.values()) + field_total) / n
    return ObservableReport(
        energy_per_site=energy,
        bond_energies=bond_energies,
        mz=float(np.mean(mz)) if mz else 0.0,
        method=method,
    )


def energy_report(
    psi: PepsNetwork,
    model: ModelSpec,
    method: MethodSpec,
    executor: Any = None,
) -> ObservableReport:
    """Energy per site, bond energies and m_z of ``psi``.

    The blockBP method iterates partition offsets so that every bond is
    evaluated inside some block center.
    """
    if not model.is_quantum:
        raise ConfigError(f"energy_report needs a quantum model, got {model.model!r}")
    rdms = bond_rdms(psi, method, executor=executor)
    return energy_from_rdms(model, psi.lattice, rdms, method.kind)


def center_energy(
    cell: PepsNetwork,
    model: ModelSpec,
    k: int,
    spec: TruncationSpec,
    seed: int = 0,
) -> float:
    """Energy per site of a unit cell tiled into a finite PEPS.

    The cell is tiled into (k+1) cell copies per axis with random
    boundary vectors; the bonds leaving the central cell copy are
    evaluated by boundary MPS.
    """
    cr, cc = cell.lattice.rows, cell.lattice.cols
    tiled = tile_unit_cell(cell, cr * (k + 1), cc * (k + 1), seed=seed)
    r0 = cr * ((k + 1) // 2) - cr // 2
    c0 = cc * ((k + 1) // 2) - cc // 2
    bonds = [Bond((r0 + i, c0 + j), o) for i in range(cr) for j in range(cc) for o in ('h', 'v')]
    env = lattice_environment(tiled, spec, seed=seed)
    rdms = {bond: rdm_from_environment(env, tiled, bond) for bond in bonds}
    cell_lattice = cell.lattice
    coupling = coupling_operator(model)
    field = field_operator(model)
    total = sum(r.expectation(coupling) for r in rdms.values())
    for i in range(cr):
        for j in range(cc):
            site = (r0 + i, c0 + j)
            ms = [r.marginal(0) for b, r in rdms.items() if b.site == site]
            total += float(np.trace(np.mean(ms, axis=0) @ field).real)
    return total / cell_lattice.n_sites


def trace_distance_grid(
    psi: PepsNetwork,
    method_a: MethodSpec,
    method_b: MethodSpec,
    executor: Any = None,
) -> np.ndarray:
    """Trace distances of horizontal-bond RDMs between two methods.

    Returns a rows x cols array, NaN where a site has no horizontal bond.
    """
    lattice = psi.lattice
    bonds = [b for b in lattice.bonds() if b.orientation == 'h']
    ra = bond_rdms(psi, method_a, bonds, executor)
    rb = bond_rdms(psi, method_b, bonds, executor)
    grid = np.full((lattice.rows, lattice.cols), np.nan)
    for bond in bonds:
        grid[bond.site] = trace_distance(ra[bond], rb[bond])
    return grid


# --- Classical Ising ---------------------------------------------------------

def onsager_magnetization(beta: float) -> float:
    """Spontaneous magnetization of the square-lattice Ising model."""
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    if beta <= BETA_C:
        return 0.0
    return (1.0 - math.sinh(2.0 * beta) ** -4) ** 0.125


def sublattice_sign(lattice: Lattice, site: Site) -> int:
    """-1 on the odd sublattice of a bipartite lattice, else +1."""
    if lattice.is_bipartite() and (site[0] + site[1]) % 2:
        return -1
    return 1


def _bond_factor(beta: float, bipartite: bool) -> np.ndarray:
    """Q with Q Q^T equal to the (gauge-frame) bond weight."""
    sign = 1.0 if bipartite else -1.0
    weight = np.array([[math.exp(sign * beta), math.exp(-sign * beta)],
                       [math.exp(-sign * beta), math.exp(sign * beta)]])
    w, v = np.linalg.eigh(weight)
    return v * np.sqrt(w.astype(complex))


def ising_site_tensor(
    beta: float,
    lattice: Lattice,
    site: Site,
    impurity: bool = False,
    field: float = 0.0,
) -> np.ndarray:
    """Rank-4 tensor of one site of the classical Ising network.

    Spins live in the gauge frame (flipped on the odd sublattice of a
    bipartite lattice); ``impurity`` weights by the gauge-frame spin.
    """
    bipartite = lattice.is_bipartite()
    q = _bond_factor(beta, bipartite)
    ones = np.ones((2, 1), dtype=complex)
    spins = np.array([1.0, -1.0])
    weight = np.exp(beta * field * spins).astype(complex)
    if impurity:
        weight = weight * spins
    factors = [q if lattice.neighbor(site, side) is not None else ones for side in LEG]
    return np.einsum('s,su,sl,sd,sr->uldr', weight, *factors)


def classical_ising_network(
    beta: float,
    lattice: Lattice,
    impurity: Optional[Site] = None,
    field: float = 0.0,
) -> FlatNetwork:
    """Single-layer network of Z(beta) for H = sum over bonds of s s'.

    With ``impurity`` the network contracts to Z <s> at that site in the
    gauge frame; ``field`` couples to the gauge-frame spin.
    """
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    sites = tuple(
        ising_site_tensor(beta, lattice, site, impurity=(site == impurity), field=field)
        for site in lattice.sites()
    )
    return FlatNetwork(lattice, sites, double_layer=False)


def classical_magnetization(
    beta: float,
    lattice: Lattice,
    block: Tuple[int, int] = (5, 5),
    center: Optional[Tuple[int, int]] = (1, 1),
    chi_m: Optional[int] = None,
    chi: Optional[int] = None,
    tol: float = 1e-5,
    max_rounds: int = 10,
    seed: int = 0,
    field: Optional[float] = None,
    executor: Any = None,
) -> Tuple[float, Any]:
    """|m_z| from blockBP environments at the block centers.

    Below the critical temperature a tiny gauge-frame field breaks the
    up/down symmetry unless ``field`` is given explicitly.

    Returns:
        (|m_z|, convergence statistics)
    """
    if field is None:
        field = SYMMETRY_BREAKING_FIELD if beta > BETA_C else 0.0
        if field:
            logger.warning(f"classical Ising at beta={beta}: symmetry-breaking field {field:g}")
    net = classical_ising_network(beta, lattice, field=field)
    partition = partition_blocks(lattice, block[0], block[1], (0, 0), center)
    msgs, stats = run_to_fixed_point(
        net, partition, TruncationSpec(chi_m or 4), tol, max_rounds, seed=seed, executor=executor,
    )
    values = []
    for b in partition.blocks:
        env = block_environment(net, partition, msgs, b.id, TruncationSpec(chi or 18), seed=seed)
        for pos in sorted(env.center):
            site = env.site_at[pos]
            plain = env.grid.row_contract(pos[0], {pos[1]: net.site(site)[None]})
            imp = ising_site_tensor(beta, lattice, site, impurity=True, field=field)
            weighted = env.grid.row_contract(pos[0], {pos[1]: imp[None]})
            values.append(complex(weighted[0] / plain[0]).real)
    return abs(float(np.mean(values))), stats
