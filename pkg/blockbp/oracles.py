"""
Exact references for small systems.

Brute-force network contraction by labeled legs, PEPS to state vector,
state-vector RDMs, sparse exact diagonalization and Boltzmann-weight
enumeration of the classical Ising partition function. All of them cap
the problem size and raise ``SizeLimitError`` above it.
"""
from __future__ import annotations

from functools import reduce
from typing import Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from blockbp.constants import (
    MAX_ED_SITES,
    MAX_EXACT_ENTRIES,
    MAX_EXACT_TENSORS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SIDES,
)
from blockbp.errors import ConfigError, SizeLimitError
from blockbp.logging import logger
from blockbp.models import ModelSpec
from blockbp.network import LEG, Bond, FlatNetwork, Lattice, PepsNetwork, Site
from blockbp.observables import Rdm, sublattice_sign
from blockbp.tensor_core import DenseTensor
from blockbp.utils import rng_for

# Dense eigensolver below this Hilbert space dimension
DENSE_ED_DIM = 256

# Boltzmann enumeration: configurations handled per chunk
ENUMERATION_CHUNK = 1 << 16


def _check_finite(lattice: Lattice) -> None:
    if lattice.boundary == 'infinite':
        raise ConfigError("exact references need a finite lattice")


def _leg_label(lattice: Lattice, site: Site, side: str) -> Optional[Hashable]:
    """Label of the lattice edge on ``side`` of ``site``; None for no edge."""
    nb = lattice.neighbor(site, side)
    if nb is None:
        return None
    if side == 'right':
        return ('h',) + tuple(site)
    if side == 'down':
        return ('v',) + tuple(site)
    if side == 'left':
        return ('h',) + tuple(nb)
    return ('v',) + tuple(nb)


def _labeled(lattice: Lattice, site: Site, t: np.ndarray, offset: int, head: Tuple[Hashable, ...]) -> DenseTensor:
    """Attach edge labels to a site tensor; legs without an edge are summed (dim 1)."""
    labels = list(head)
    keep = list(range(offset))
    for side in SIDES:
        axis = offset + LEG[side]
        label = _leg_label(lattice, site, side)
        if label is None:
            continue
        keep.append(axis)
        labels.append(label)
    drop = [i for i in range(t.ndim) if i not in keep]
    data = t.sum(axis=tuple(drop)) if drop else t
    return DenseTensor(data, tuple(labels))


def _contract_all(tensors: Sequence[DenseTensor]) -> DenseTensor:
    """Contract labeled tensors one by one in the given order."""
    if len(tensors) > MAX_EXACT_TENSORS:
        raise SizeLimitError(
            f"exact contraction capped at {MAX_EXACT_TENSORS} tensors, got {len(tensors)}",
            limit=MAX_EXACT_TENSORS, requested=len(tensors),
        )
    acc = tensors[0]
    for t in tensors[1:]:
        shared = set(acc.labels) & set(t.labels)
        size = 1
        for lab, dim in zip(acc.labels, acc.shape):
            if lab not in shared:
                size *= dim
        for lab, dim in zip(t.labels, t.shape):
            if lab not in shared:
                size *= dim
        if size > MAX_EXACT_ENTRIES:
            raise SizeLimitError(
                f"intermediate of {size} entries exceeds the exact-contraction cap",
                limit=MAX_EXACT_ENTRIES, requested=size,
            )
        acc = acc.contract(t)
    return acc


def exact_contract(net: FlatNetwork) -> complex:
    """Value of a finite flat network by brute-force contraction.

    Raises:
        SizeLimitError: Above the tensor-count or intermediate-size cap
        ConfigError: For infinite lattices
    """
    lattice = net.lattice
    _check_finite(lattice)
    tensors = [_labeled(lattice, site, net.site(site), 0, ()) for site in lattice.sites()]
    return complex(_contract_all(tensors).data)


def peps_to_state(psi: PepsNetwork) -> np.ndarray:
    """State vector of a finite PEPS, sites in row-major order (first site most significant)."""
    lattice = psi.lattice
    _check_finite(lattice)
    tensors = [_labeled(lattice, site, psi.site(site), 1, (('p', site),)) for site in lattice.sites()]
    out = _contract_all(tensors)
    order = [out.labels.index(('p', site)) for site in lattice.sites()]
    return np.transpose(out.data, order).reshape(-1)


def exact_rdm(
    psi: PepsNetwork,
    bond: Union[Bond, Sequence[Site]],
    state: Optional[np.ndarray] = None,
) -> Rdm:
    """RDM of one bond (or of a list of sites) from the full state vector."""
    lattice = psi.lattice
    sites: List[Site] = list(lattice.bond_sites(bond)) if isinstance(bond, Bond) else [tuple(s) for s in bond]
    if state is None:
        state = peps_to_state(psi)
    d = psi.phys_dim
    n = lattice.n_sites
    tensor = np.asarray(state).reshape((d,) * n)
    axes = [lattice.index(s) for s in sites]
    rest = [i for i in range(n) if i not in axes]
    m = np.transpose(tensor, axes + rest).reshape(d ** len(sites), -1)
    return Rdm.from_raw(sites, m @ m.conj().T)


def _coupling_terms(model: ModelSpec) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    if model.model == 'transverse-ising':
        return [(-1.0, SIGMA_Z, SIGMA_Z)]
    if model.model == 'afh':
        return [(0.25, SIGMA_X, SIGMA_X), (0.25, SIGMA_Y, SIGMA_Y), (0.25, SIGMA_Z, SIGMA_Z)]
    raise ConfigError(f"model {model.model!r} has no quantum Hamiltonian")


def _embed(ops: Dict[int, np.ndarray], n: int) -> scipy.sparse.csr_matrix:
    """Kronecker product of ``ops`` on their sites and identities elsewhere."""
    eye = scipy.sparse.identity(2, dtype=complex, format='csr')
    factors = [scipy.sparse.csr_matrix(ops[i]) if i in ops else eye for i in range(n)]
    return reduce(lambda a, b: scipy.sparse.kron(a, b, format='csr'), factors)


def hamiltonian_matrix(model: ModelSpec, lattice: Optional[Lattice] = None) -> scipy.sparse.csr_matrix:
    """Sparse Hamiltonian of a quantum model on a finite lattice.

    Raises:
        SizeLimitError: For more than MAX_ED_SITES sites
    """
    lattice = lattice or model.lattice
    _check_finite(lattice)
    n = lattice.n_sites
    if n > MAX_ED_SITES:
        raise SizeLimitError(
            f"exact diagonalization capped at {MAX_ED_SITES} sites, got {n}",
            limit=MAX_ED_SITES, requested=n,
        )
    terms = _coupling_terms(model)
    h = scipy.sparse.csr_matrix((2 ** n, 2 ** n), dtype=complex)
    for bond in lattice.bonds():
        a, b = (lattice.index(s) for s in lattice.bond_sites(bond))
        for coef, op_a, op_b in terms:
            h = h + coef * _embed({a: op_a, b: op_b}, n)
    if model.model == 'transverse-ising' and model.B:
        for site in lattice.sites():
            h = h - model.B * _embed({lattice.index(site): SIGMA_X}, n)
    return h


def exact_diag(model: ModelSpec, lattice: Optional[Lattice] = None, seed: int = 0) -> Tuple[float, np.ndarray]:
    """Ground state of a small quantum model.

    Returns:
        (ground-state energy per site, normalized ground state vector)
    """
    lattice = lattice or model.lattice
    h = hamiltonian_matrix(model, lattice)
    if not np.any(h.imag.data):
        h = h.real
    dim = h.shape[0]
    if dim <= DENSE_ED_DIM:
        w, v = scipy.linalg.eigh(h.toarray())
        energy, state = float(w[0]), v[:, 0]
    else:
        v0 = rng_for(seed, 'exact_diag').standard_normal(dim)
        w, v = scipy.sparse.linalg.eigsh(h, k=1, which='SA', v0=v0)
        energy, state = float(w[0]), v[:, 0]
    logger.debug(f"exact diagonalization of {model.model} on {lattice.rows}x{lattice.cols}: E0={energy:.10f}")
    return energy / lattice.n_sites, state.astype(complex) / np.linalg.norm(state)


def exact_partition_function(
    beta: float,
    lattice: Lattice,
    field: float = 0.0,
    impurity: Optional[Site] = None,
) -> float:
    """Z of H = sum over bonds of s s' by enumerating all configurations.

    ``field`` and ``impurity`` act on the gauge-frame spin (flipped on the
    odd sublattice of a bipartite lattice), matching the tensor network.
    With ``impurity`` the value is Z <s> at that site.

    Raises:
        SizeLimitError: For more than MAX_EXACT_TENSORS sites
    """
    _check_finite(lattice)
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    n = lattice.n_sites
    if n > MAX_EXACT_TENSORS:
        raise SizeLimitError(
            f"enumeration capped at {MAX_EXACT_TENSORS} sites, got {n}",
            limit=MAX_EXACT_TENSORS, requested=n,
        )
    pairs = np.array([[lattice.index(s) for s in lattice.bond_sites(b)] for b in lattice.bonds()], dtype=int)
    eta = np.array([sublattice_sign(lattice, s) for s in lattice.sites()], dtype=float)
    shifts = np.arange(n - 1, -1, -1)
    total = 0.0
    for start in range(0, 2 ** n, ENUMERATION_CHUNK):
        configs = np.arange(start, min(start + ENUMERATION_CHUNK, 2 ** n))
        spins = 1.0 - 2.0 * ((configs[:, None] >> shifts) & 1)
        energy = np.sum(spins[:, pairs[:, 0]] * spins[:, pairs[:, 1]], axis=1) if len(pairs) else 0.0
        gauge = spins * eta
        weight = np.exp(-beta * energy + beta * field * gauge.sum(axis=1))
        if impurity is not None:
            weight = weight * gauge[:, lattice.index(impurity)]
        total += float(np.sum(weight))
    return total
