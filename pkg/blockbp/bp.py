"""
Plain belief propagation on a flat network.

One message per directed lattice edge, keyed by (sending site, side).
On double-layer networks a message is a D x D matrix over the fused
(ket, bra) leg, stored flattened; it is kept hermitian and positive.
"""
from __future__ import annotations

from typing import Dict, Hashable, Mapping, Optional, Tuple

import numpy as np

from blockbp.constants import EIG_CLIP_TOL, MAX_ROUNDS, MESSAGE_TOL, OPPOSITE, SIDES
from blockbp.engine import MessageSet, iterate_to_fixed_point, mean_change, message_kind
from blockbp.environment import BlockEnvironment, GridEnvironment, dressed_grid
from blockbp.logging import logger
from blockbp.models import ConvergenceStats
from blockbp.mps import Mps, random_message
from blockbp.network import LEG, Bond, FlatNetwork, Lattice, PepsNetwork, Site
from blockbp.tensor_core import TruncationSpec, hermitize, psd_clip, split_leg
from blockbp.utils import derive_seed

BpKey = Tuple[Site, str]

# Pair environments hold product boundaries only, so nothing is truncated
EXACT = TruncationSpec(max_rank=2 ** 31 - 1, cutoff=0.0)


def bp_message_keys(lattice: Lattice) -> list:
    return [(site, side) for site in lattice.sites() for side in SIDES if lattice.neighbor(site, side) is not None]


def initial_bp_messages(net: FlatNetwork, seed: int = 0) -> MessageSet:
    """Seeded random messages; the same draws as 1x1-block messages."""
    kind = message_kind(net)
    lattice = net.lattice
    msgs = {}
    for site, side in bp_message_keys(lattice):
        dim = net.leg_dim(site, side)
        m = random_message([site], [dim], kind, seed=derive_seed(seed, 'init', lattice.index(site), side))
        msgs[(site, side)] = m.tensors[0][0, :, 0]
    return MessageSet(msgs, 0)


def incoming(net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], site: Site, side: str) -> np.ndarray:
    """Message entering ``site`` through ``side``; [1] across open edges."""
    nb = net.lattice.neighbor(site, side)
    if nb is None:
        return np.ones(net.leg_dim(site, side), dtype=complex)
    return msgs[(nb, OPPOSITE[side])]


def _repair(v: np.ndarray, double_layer: bool, key: Hashable) -> np.ndarray:
    """Hermitize, normalize and, if needed, clip a message."""
    if double_layer:
        dim = int(round(np.sqrt(v.size)))
        mat = hermitize(split_leg(v, 0, (dim, dim)))
        norm = np.linalg.norm(mat)
        if norm > 0:
            mat = mat / norm
        clipped, worst = psd_clip(mat)
        if worst < -EIG_CLIP_TOL:
            logger.warning(f"BP message {key}: clipped eigenvalue {worst:.3e}")
            mat = clipped
        v = mat.reshape(-1)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def outgoing(t: np.ndarray, inbound: Mapping[str, np.ndarray], side: str) -> np.ndarray:
    """Contract a flat tensor with the messages on all sides but ``side``."""
    letters = 'uldr'
    keep = letters[LEG[side]]
    operands = [t]
    subscripts = [letters]
    for other in SIDES:
        if other == side:
            continue
        operands.append(inbound[other])
        subscripts.append(letters[LEG[other]])
    return np.einsum(','.join(subscripts) + '->' + keep, *operands)


def bp_message(net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], site: Site, side: str) -> np.ndarray:
    """Repaired message that ``site`` sends through ``side``."""
    inbound = {s: incoming(net, msgs, site, s) for s in SIDES}
    return _repair(outgoing(net.site(site), inbound, side), net.double_layer, (site, side))


def bp_round(net: FlatNetwork, msgs: MessageSet) -> MessageSet:
    """Simultaneous update of every plain-BP message from the previous round."""
    new: Dict[BpKey, np.ndarray] = {}
    for site, side in bp_message_keys(net.lattice):
        new[(site, side)] = bp_message(net, msgs, site, side)
    return MessageSet(new, msgs.round_index + 1, mean_change(msgs, new))


def run_bp_to_fixed_point(
    net: FlatNetwork,
    tol: float = MESSAGE_TOL,
    max_rounds: int = MAX_ROUNDS,
    seed: int = 0,
    initial: Optional[Mapping[BpKey, np.ndarray]] = None,
) -> Tuple[MessageSet, ConvergenceStats]:
    """Iterate ``bp_round`` until eps_l / eps_1 < tol or the budget runs out."""
    start = initial_bp_messages(net, seed)
    if initial:
        start = MessageSet(
            {k: initial[k] if k in initial and np.shape(initial[k]) == np.shape(v) else v for k, v in start.items()},
            getattr(initial, 'round_index', 0),
        )
    return iterate_to_fixed_point(lambda m: bp_round(net, m), start, tol, max_rounds)


def _product_mps(vectors: list) -> Mps:
    return Mps(tuple(np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors))


def pair_environment(net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], bond: Bond) -> BlockEnvironment:
    """Exact environment of one bond under the product of BP messages.

    The two sites of ``bond`` sit in a 1x2 (or 2x1) grid dressed with the
    messages entering them from every other edge.
    """
    lattice = net.lattice
    a, b = lattice.bond_sites(bond)

    def m(site: Site, side: str) -> np.ndarray:
        return incoming(net, msgs, site, side)

    if bond.orientation == 'h':
        core = [[net.site(a), net.site(b)]]
        messages = {
            'up': _product_mps([m(a, 'up'), m(b, 'up')]),
            'down': _product_mps([m(a, 'down'), m(b, 'down')]),
            'left': _product_mps([m(a, 'left')]),
            'right': _product_mps([m(b, 'right')]),
        }
        site_at = {(1, 1): a, (1, 2): b}
    else:
        core = [[net.site(a)], [net.site(b)]]
        messages = {
            'up': _product_mps([m(a, 'up')]),
            'down': _product_mps([m(b, 'down')]),
            'left': _product_mps([m(a, 'left'), m(b, 'left')]),
            'right': _product_mps([m(a, 'right'), m(b, 'right')]),
        }
        site_at = {(1, 1): a, (2, 1): b}
    grid = GridEnvironment(dressed_grid(core, messages), EXACT)
    return BlockEnvironment(grid, site_at, frozenset(site_at), lattice, None, messages)


def site_environment(net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], site: Site) -> BlockEnvironment:
    """Exact environment of one site under its incoming BP messages."""
    messages = {side: _product_mps([incoming(net, msgs, site, side)]) for side in SIDES}
    grid = GridEnvironment(dressed_grid([[net.site(site)]], messages), EXACT)
    return BlockEnvironment(grid, {(1, 1): site}, frozenset({(1, 1)}), net.lattice, None, messages)


def bp_site_rdm(psi: PepsNetwork, net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], site: Site) -> 'Rdm':
    """Single-site RDM from the BP messages around ``site``."""
    from blockbp.observables import site_rdm_from_environment

    return site_rdm_from_environment(site_environment(net, msgs, site), psi, site)


def bp_bond_rdm(psi: PepsNetwork, net: FlatNetwork, msgs: Mapping[BpKey, np.ndarray], bond: Bond) -> 'Rdm':
    """Two-site RDM of ``bond`` from the BP messages around it."""
    from blockbp.observables import rdm_from_environment

    return rdm_from_environment(pair_environment(net, msgs, bond), psi, bond)


def block_messages_as_bp(msgs: Mapping[Tuple[int, str], Mps], lattice: Lattice) -> Dict[BpKey, np.ndarray]:
    """Messages of a 1x1-block partition at offset (0, 0) as BP vectors."""
    out = {}
    for site, side in bp_message_keys(lattice):
        m = msgs[(lattice.index(site), side)]
        out[(site, side)] = m.tensors[0][0, :, 0] * np.exp(m.log_scale)
    return out
