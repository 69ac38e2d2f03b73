"""
Block belief propagation.

Each block of a partition, dressed with the messages it receives on its
four sides, is contracted by boundary MPS toward each side; the results
are the messages it sends. Rounds update every message simultaneously
from the previous round's snapshot, so blocks can be processed in
parallel.
"""
from __future__ import annotations

import time
from collections.abc import Mapping as _MappingBase
from dataclasses import dataclass
from typing import Any, Dict, Hashable, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from blockbp.constants import MAX_ROUNDS, MAX_SWEEPS, MESSAGE_TOL, SIDES, ZIPUP_TOL
from blockbp.environment import BlockEnvironment, GridEnvironment, dressed_grid
from blockbp.errors import ShapeMismatchError
from blockbp.logging import log_round, logger
from blockbp.models import ConvergenceStats
from blockbp.mps import Mps, mps_mean_square_error, random_message
from blockbp.network import FlatNetwork
from blockbp.partition import Block, BlockPartition, MessageKey
from blockbp.tensor_core import TruncationSpec
from blockbp.utils import derive_seed, parallel_map


class MessageSet(_MappingBase):
    """Immutable snapshot of all directed messages of one round.

    Values are ``Mps`` (blockBP) or 1D arrays (plain BP). ``change`` is
    the mean square difference to the previous round, None for an
    initial set.
    """

    def __init__(
        self,
        messages: Mapping[Hashable, Any],
        round_index: int = 0,
        change: Optional[float] = None,
    ) -> None:
        self._messages = dict(messages)
        self.round_index = round_index
        self.change = change

    def __getitem__(self, key: Hashable) -> Any:
        return self._messages[key]

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._messages)

    def __len__(self) -> int:
        return len(self._messages)

    def __repr__(self) -> str:
        return f"MessageSet({len(self)} messages, round={self.round_index}, change={self.change})"


def message_error(a: Any, b: Any) -> float:
    """Phase-insensitive mean square distance between two unit messages."""
    if isinstance(a, Mps):
        return mps_mean_square_error(a, b)
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"message shapes {a.shape} and {b.shape} differ", left=a.shape, right=b.shape)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return max(0.0, 2.0 - 2.0 * abs(np.vdot(a, b)) / (na * nb))


def mean_change(old: Mapping[Hashable, Any], new: Mapping[Hashable, Any]) -> float:
    """Arithmetic mean of ``message_error`` over all directed messages."""
    if not new:
        return 0.0
    return float(np.mean([message_error(old[k], new[k]) for k in new]))


def message_kind(net: FlatNetwork) -> str:
    return 'double' if net.double_layer else 'single'


def message_leg_dims(net: FlatNetwork, partition: BlockPartition, block: Block, side: str) -> List[int]:
    """Leg dims along ``side`` of ``block``, in boundary order."""
    return [net.leg_dim(partition.site(block, loc), side) for loc in partition.side_locals(block, side)]


def initial_messages(net: FlatNetwork, partition: BlockPartition, seed: int = 0) -> MessageSet:
    """Seeded random messages for every directed super edge."""
    kind = message_kind(net)
    msgs = {}
    for block in partition.blocks:
        for side in SIDES:
            sites = [partition.site(block, loc) for loc in partition.side_locals(block, side)]
            dims = message_leg_dims(net, partition, block, side)
            msgs[(block.id, side)] = random_message(sites, dims, kind, seed=derive_seed(seed, 'init', block.id, side))
    return MessageSet(msgs, 0)


def align_messages(
    net: FlatNetwork,
    partition: BlockPartition,
    msgs: Optional[Mapping[MessageKey, Mps]],
    seed: int = 0,
) -> MessageSet:
    """Reuse messages whose shapes still fit ``net``; draw the rest fresh.

    Messages go stale in shape when bond dimensions change between
    partition rounds of a ground-state sweep.
    """
    fresh = initial_messages(net, partition, seed)
    if not msgs:
        return fresh
    out = {}
    for key, m in fresh.items():
        old = msgs.get(key)
        out[key] = old if isinstance(old, Mps) and old.phys_dims == m.phys_dims else m
    return MessageSet(out, getattr(msgs, 'round_index', 0))


def block_core(net: FlatNetwork, partition: BlockPartition, block: Block) -> List[List[np.ndarray]]:
    br, bc = block.shape
    return [[net.site(partition.site(block, (i, j))) for j in range(bc)] for i in range(br)]


def incoming_messages(partition: BlockPartition, msgs: Mapping[MessageKey, Mps], block: Block) -> Dict[str, Mps]:
    return {side: msgs[partition.incoming_key(block.id, side)] for side in SIDES}


@dataclass
class BlockTask:
    """Everything one worker needs to compute a block's outgoing messages."""
    block_id: int
    core: List[List[np.ndarray]]
    incoming: Dict[str, Mps]
    spec: TruncationSpec
    seed: int
    tol: float = ZIPUP_TOL
    max_sweeps: int = MAX_SWEEPS


def compute_block_messages(task: BlockTask) -> Tuple[int, Dict[str, Mps], float]:
    """Outgoing messages of one dressed block.

    The message leaving through a side is the boundary MPS of everything
    except the incoming message column/row on that side.
    """
    start = time.perf_counter()
    grid = dressed_grid(task.core, task.incoming)
    env = GridEnvironment(grid, task.spec, seed=task.seed, tol=task.tol, max_sweeps=task.max_sweeps)
    rows, cols = env.shape
    out = {
        'left': env.right(0),
        'right': env.left(cols - 1),
        'up': env.bottom(0),
        'down': env.top(rows - 1),
    }
    msgs = {side: m.strip_trivial_ends().normalized() for side, m in out.items()}
    return task.block_id, msgs, time.perf_counter() - start


def blockbp_round(
    net: FlatNetwork,
    partition: BlockPartition,
    msgs: MessageSet,
    spec: TruncationSpec,
    executor: Any = None,
    seed: int = 0,
    tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> MessageSet:
    """One simultaneous update of every block message.

    Blocks are mapped through ``executor`` when one is given; results do
    not depend on it. Emits one round record.
    """
    tasks = [
        BlockTask(
            block_id=block.id,
            core=block_core(net, partition, block),
            incoming=incoming_messages(partition, msgs, block),
            spec=spec,
            seed=derive_seed(seed, 'zipup', msgs.round_index, block.id),
            tol=tol,
            max_sweeps=max_sweeps,
        )
        for block in partition.blocks
    ]
    results = parallel_map(compute_block_messages, tasks, executor)
    new: Dict[MessageKey, Mps] = {}
    block_seconds = {}
    for block_id, out, seconds in results:
        block_seconds[block_id] = round(seconds, 6)
        for side, m in out.items():
            new[(block_id, side)] = m
    change = mean_change(msgs, new)
    log_round(round=msgs.round_index + 1, eps=change, block_seconds=block_seconds)
    return MessageSet(new, msgs.round_index + 1, change)


def iterate_to_fixed_point(
    step: Any,
    initial: MessageSet,
    tol: float = MESSAGE_TOL,
    max_rounds: int = MAX_ROUNDS,
) -> Tuple[MessageSet, ConvergenceStats]:
    """Apply ``step`` until eps_l / eps_1 < tol or the budget runs out.

    eps_1 = 0 (the initial messages are already a fixed point) counts as
    converged.
    """
    msgs = initial
    stats = ConvergenceStats()
    for _ in range(max_rounds):
        msgs = step(msgs)
        eps = float(msgs.change or 0.0)
        stats.eps.append(eps)
        stats.rounds += 1
        if stats.eps[0] == 0.0:
            stats.ratios.append(0.0)
            stats.converged = True
            break
        ratio = eps / stats.eps[0]
        stats.ratios.append(ratio)
        if stats.rounds > 1 and ratio < tol:
            stats.converged = True
            break
    if not stats.converged:
        logger.info(
            f"messages not converged after {stats.rounds} rounds "
            f"(ratio {stats.last_ratio})"
        )
    return msgs, stats


def run_to_fixed_point(
    net: FlatNetwork,
    partition: BlockPartition,
    spec: TruncationSpec,
    tol: float = MESSAGE_TOL,
    max_rounds: int = MAX_ROUNDS,
    seed: int = 0,
    initial: Optional[Mapping[MessageKey, Mps]] = None,
    executor: Any = None,
    zipup_tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> Tuple[MessageSet, ConvergenceStats]:
    """Iterate ``blockbp_round`` from random (or warm-start) messages.

    Non-convergence is reported in the statistics, never raised.
    ``max_rounds`` 0 returns the initial messages unconverged.
    """
    start = align_messages(net, partition, initial, seed) if initial else initial_messages(net, partition, seed)

    def step(msgs: MessageSet) -> MessageSet:
        return blockbp_round(net, partition, msgs, spec, executor, seed, zipup_tol, max_sweeps)

    return iterate_to_fixed_point(step, start, tol, max_rounds)


def block_environment(
    net: FlatNetwork,
    partition: BlockPartition,
    msgs: Mapping[MessageKey, Mps],
    block_id: int,
    spec: TruncationSpec,
    seed: int = 0,
    tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> BlockEnvironment:
    """Environment of one block from its converged incoming messages.

    Valid for 1- and 2-site quantities inside the block center.
    """
    block = partition.blocks[block_id]
    incoming = incoming_messages(partition, msgs, block)
    grid = dressed_grid(block_core(net, partition, block), incoming)
    site_at = {(i + 1, j + 1): partition.site(block, (i, j)) for i, j in block.locals()}
    center = frozenset((i + 1, j + 1) for i, j in block.locals() if block.in_center((i, j)))
    return BlockEnvironment(
        grid=GridEnvironment(grid, spec, seed=derive_seed(seed, 'environment', block_id), tol=tol, max_sweeps=max_sweeps),
        site_at=site_at,
        center=center,
        lattice=partition.lattice,
        block=block,
        messages=incoming,
    )
