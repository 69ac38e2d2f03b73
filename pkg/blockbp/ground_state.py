"""
Imaginary-time ground-state search.

A sweep applies one first-order Trotter gate to every bond. Bonds inside
block centers are updated with full-update style local least squares in
the block environment built from converged blockBP messages; with 1x1
blocks every bond crosses a super edge and the update uses the product
environment of the incoming messages, which is the plain-BP (simple
update) scheme. Partition offsets alternate within each sweep so that
every bond is updated exactly once.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import scipy.linalg

from blockbp.bp import (
    bp_bond_rdm,
    bp_message,
    block_messages_as_bp,
    pair_environment,
    run_bp_to_fixed_point,
)
from blockbp.constants import ALS_MAX_ITER, ALS_TOL, EIG_CLIP_TOL, GATE_GROUPS, OPPOSITE, RIDGE
from blockbp.engine import MessageSet, block_environment, run_to_fixed_point
from blockbp.environment import BlockEnvironment
from blockbp.errors import ConfigError, ShapeMismatchError
from blockbp.logging import logger
from blockbp.models import EvolutionConfig, MethodSpec, ModelSpec, ObservableReport, TraceRow
from blockbp.mps import Mps
from blockbp.network import (
    Bond,
    FlatNetwork,
    Lattice,
    PepsNetwork,
    Site,
    build_double_layer,
    double_tensor,
    open_double_tensor,
)
from blockbp.observables import blockbp_partitions, bond_hamiltonian, energy_from_rdms, energy_report
from blockbp.partition import BlockPartition, assign_bonds, partition_blocks
from blockbp.tensor_core import TruncationSpec, hermitize, psd_clip, qr_split, svd_truncate
from blockbp.utils import derive_seed, parallel_map


@dataclass(frozen=True)
class TwoSiteGate:
    """exp(-dtau h_b) on one bond, indices (site a, site b) with a = bond.site."""
    bond: Bond
    matrix: np.ndarray
    group: str


def gate_group(bond: Bond) -> str:
    """Gate group by orientation and the parity of the bond's column (h) or row (v)."""
    if bond.orientation == 'h':
        return 'horizontal-even' if bond.site[1] % 2 == 0 else 'horizontal-odd'
    return 'vertical-even' if bond.site[0] % 2 == 0 else 'vertical-odd'


def trotter_gates(model: ModelSpec, dtau: float, lattice: Optional[Lattice] = None) -> List[TwoSiteGate]:
    """First-order gate stream, grouped in GATE_GROUPS order, row-major within a group.

    Raises:
        ConfigError: For the classical model or a negative step
    """
    if not model.is_quantum:
        raise ConfigError(f"no imaginary-time evolution for model {model.model!r}")
    if dtau < 0:
        raise ConfigError(f"dtau must be >= 0, got {dtau}")
    lattice = lattice or model.lattice
    gates = [
        TwoSiteGate(bond, scipy.linalg.expm(-dtau * bond_hamiltonian(model, lattice, bond)), gate_group(bond))
        for bond in lattice.bonds()
    ]
    order = {g: i for i, g in enumerate(GATE_GROUPS)}
    return sorted(gates, key=lambda g: (order[g.group], g.bond.site, g.bond.orientation))


# --- Local update ------------------------------------------------------------

# Reduced-tensor split per orientation: legs kept on Q for site a and b
_Q_LEGS = {
    'h': ((1, 2, 3), (1, 3, 4)),
    'v': ((1, 2, 4), (2, 3, 4)),
}


def _q_replacement(q: np.ndarray, orientation: str, first: bool) -> np.ndarray:
    """Q of a reduced split as an (x, u, l, d, r) ket with the cut leg of dim 1."""
    x = np.moveaxis(q, -1, 0)
    if orientation == 'h':
        cut = 4 if first else 2
    else:
        cut = 3 if first else 1
    return open_double_tensor(np.expand_dims(x, cut))


def _reduced_environment(env: BlockEnvironment, bond: Bond, qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Environment of the two reduced tensors as a (bra, bra', ket, ket') tensor."""
    pa, pb = env.bond_positions(bond)
    xa = _q_replacement(qa, bond.orientation, True)
    xb = _q_replacement(qb, bond.orientation, False)
    if bond.orientation == 'h':
        raw = env.grid.row_contract(pa[0], {pa[1]: xa, pb[1]: xb})
    else:
        raw = env.grid.column_contract(pa[1], {pa[0]: xa, pb[0]: xb})
    k, kk = qa.shape[-1], qb.shape[-1]
    e = raw.reshape(k, k, kk, kk).transpose(1, 3, 0, 2).reshape(k * kk, k * kk)
    e = hermitize(e)
    if np.trace(e).real < 0:
        e = -e
    clipped, worst = psd_clip(e)
    if worst < -EIG_CLIP_TOL:
        logger.warning(f"bond {bond}: environment eigenvalue {worst:.3e} clipped")
        e = clipped
    return e.reshape(k, kk, k, kk)


def _env_inner(e: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> complex:
    """<bra|ket> weighted by the environment; wavefunctions are (k, p, q, k')."""
    return complex(np.einsum('abce,apqb,cpqe->', e, bra.conj(), ket, optimize=True))


def _solve(s: np.ndarray, b: np.ndarray, bond: Bond) -> np.ndarray:
    """Hermitian solve, falling back to a ridge-regularized least squares."""
    with warnings.catch_warnings():
        warnings.simplefilter('error', scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(s, b, assume_a='her')
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            pass
    scale = max(float(np.trace(s).real) / s.shape[0], np.finfo(float).tiny)
    logger.warning(f"bond {bond}: singular local problem, ridge {RIDGE:g} applied")
    return scipy.linalg.lstsq(s + RIDGE * scale * np.eye(s.shape[0]), b)[0]


def _two_site(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum('kps,lqs->kpql', x, y)


def _als(
    e: np.ndarray,
    target: np.ndarray,
    D: int,
    bond: Bond,
    max_iter: int,
    tol: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Minimize |X Y - target| in the environment metric at bond dim D.

    Starts from the truncated SVD of the target and alternates the two
    normal-equation solves until the relative cost change is below tol.
    """
    k, p, q, kk = target.shape
    u, s, vh, _ = svd_truncate(target, [0, 1], TruncationSpec(D))
    root = np.sqrt(s)
    x = u * root
    y = np.transpose(vh * root[:, None, None], (2, 1, 0))
    chi = s.size
    ref = max(abs(_env_inner(e, target, target)), np.finfo(float).tiny)
    previous = None
    for _ in range(max_iter):
        sx = np.einsum('abce,bqt,eqs->atcs', e, y.conj(), y, optimize=True).reshape(k * chi, k * chi)
        bx = np.einsum('abce,bqt,cpqe->atp', e, y.conj(), target, optimize=True).reshape(k * chi, p)
        x = _solve(sx, bx, bond).reshape(k, chi, p).transpose(0, 2, 1)
        sy = np.einsum('abce,apt,cps->btes', e, x.conj(), x, optimize=True).reshape(kk * chi, kk * chi)
        by = np.einsum('abce,apt,cpqe->btq', e, x.conj(), target, optimize=True).reshape(kk * chi, q)
        y = _solve(sy, by, bond).reshape(kk, chi, q).transpose(0, 2, 1)
        theta = _two_site(x, y)
        cost = (_env_inner(e, theta, theta) - 2 * _env_inner(e, theta, target)).real / ref + 1.0
        if previous is not None and abs(previous - cost) < tol * max(abs(cost), 1.0):
            break
        previous = cost
    return x, y


def _update_pair(
    kets: Mapping[Site, np.ndarray],
    env: BlockEnvironment,
    bond: Bond,
    gate: np.ndarray,
    D: int,
    als_max_iter: int = ALS_MAX_ITER,
    als_tol: float = ALS_TOL,
) -> Dict[Site, np.ndarray]:
    a, b = env.lattice.bond_sites(bond)
    if a == b:
        raise ConfigError(f"bond {bond} joins a site to itself")
    ta, tb = kets[a], kets[b]
    legs_a, legs_b = _Q_LEGS[bond.orientation]
    qa, ra = qr_split(ta, legs_a)
    qb, rb = qr_split(tb, legs_b)
    d = ta.shape[0]
    if gate.shape != (d * d, d * d):
        raise ShapeMismatchError(f"gate shape {gate.shape} for physical dim {d}", left=gate.shape, right=d)

    e = _reduced_environment(env, bond, qa, qb)
    theta = np.einsum('kps,lqs->kpql', ra, rb)
    # unit local norm of the incoming pair fixes the scale of e
    n_old = abs(_env_inner(e, theta, theta))
    if n_old > 0:
        e = e / n_old
    g = gate.reshape(d, d, d, d)
    target = np.einsum('PQpq,kpql->kPQl', g, theta)

    x, y = _als(e, target, D, bond, als_max_iter, als_tol)
    u, s, vh, _ = svd_truncate(_two_site(x, y), [0, 1], TruncationSpec(D))
    root = np.sqrt(s)
    x = u * root
    y = np.transpose(vh * root[:, None, None], (2, 1, 0))

    n_new = abs(_env_inner(e, _two_site(x, y), _two_site(x, y)))
    if n_new > 0:
        factor = n_new ** -0.25
        x, y = x * factor, y * factor

    if bond.orientation == 'h':
        new_a = np.einsum('uldk,kps->pulds', qa, x)
        new_b = np.einsum('udrk,kqs->qusdr', qb, y)
    else:
        new_a = np.einsum('ulrk,kps->pulsr', qa, x)
        new_b = np.einsum('ldrk,kqs->qsldr', qb, y)
    return {a: new_a, b: new_b}


def apply_gate_in_block(
    psi: PepsNetwork,
    env: BlockEnvironment,
    bond: Bond,
    gate: np.ndarray,
    D: int,
    als_max_iter: int = ALS_MAX_ITER,
    als_tol: float = ALS_TOL,
) -> Dict[Site, np.ndarray]:
    """Gate one bond in a block center and truncate back to bond dim D.

    Both tensors are split by QR into an isometry and a reduced tensor
    carrying the physical and shared legs; the gated reduced pair is
    refitted at bond dim D against the hermitized, clipped environment,
    SVD-balanced and rescaled to unit local norm. The environment is
    first normalized so that the incoming pair has local norm 1, so a
    normalized PEPS stays normalized under an exact environment.

    Returns:
        The two updated site tensors keyed by site

    Raises:
        EnvironmentRegionError: If the bond is outside the center
    """
    a, b = psi.lattice.bond_sites(bond)
    return _update_pair({a: psi.site(a), b: psi.site(b)}, env, bond, gate, D, als_max_iter, als_tol)


@dataclass
class BlockUpdateTask:
    """Gates of one block, applied in order inside its environment."""
    block_id: int
    env: BlockEnvironment
    kets: Dict[Site, np.ndarray]
    gates: List[Tuple[Bond, np.ndarray]]
    D: int
    als_max_iter: int = ALS_MAX_ITER
    als_tol: float = ALS_TOL


def update_block(task: BlockUpdateTask) -> Tuple[int, Dict[Site, np.ndarray], float]:
    """Apply a block's gates, refreshing its interior after each one."""
    start = time.perf_counter()
    kets = dict(task.kets)
    touched: Dict[Site, np.ndarray] = {}
    for bond, gate in task.gates:
        updates = _update_pair(kets, task.env, bond, gate, task.D, task.als_max_iter, task.als_tol)
        kets.update(updates)
        touched.update(updates)
        task.env.update_lattice_sites(updates)
    return task.block_id, touched, time.perf_counter() - start


# --- Initial states ----------------------------------------------------------

def initial_state(model: ModelSpec, config: EvolutionConfig, lattice: Optional[Lattice] = None) -> PepsNetwork:
    """Seeded random PEPS for TI, Neel product state for AFH, or as configured."""
    lattice = lattice or model.lattice
    kind = config.initial
    if kind == 'auto':
        kind = 'neel' if model.model == 'afh' else 'random'
    if kind == 'random':
        return PepsNetwork.random(lattice, config.d, config.D, seed=config.seed)
    if kind == 'plus':
        return PepsNetwork.product_state(lattice, np.ones(config.d) / np.sqrt(config.d))
    up, down = np.eye(config.d)[0], np.eye(config.d)[1]
    return PepsNetwork.product_state(lattice, {s: up if (s[0] + s[1]) % 2 == 0 else down for s in lattice.sites()})


# --- Sweeps ------------------------------------------------------------------

def _pair_sweep(
    psi: PepsNetwork,
    vectors: Dict[Tuple[Site, str], np.ndarray],
    gates: List[TwoSiteGate],
    config: EvolutionConfig,
) -> PepsNetwork:
    """Update every bond in the product environment of BP messages.

    The two messages across an updated bond are recomputed right away,
    because the bond dimension may have changed.
    """
    net = build_double_layer(psi)
    lattice = psi.lattice
    for gate in gates:
        bond = gate.bond
        env = pair_environment(net, vectors, bond)
        a, b = lattice.bond_sites(bond)
        updates = _update_pair(
            {a: psi.site(a), b: psi.site(b)}, env, bond, gate.matrix, config.D,
            config.als_max_iter, config.als_tol,
        )
        psi = psi.with_sites(updates)
        net = net.with_sites({s: double_tensor(t) for s, t in updates.items()})
        vectors[(a, bond.side)] = bp_message(net, vectors, a, bond.side)
        vectors[(b, OPPOSITE[bond.side])] = bp_message(net, vectors, b, OPPOSITE[bond.side])
    return psi


def _vectors_as_block_messages(vectors: Mapping[Tuple[Site, str], np.ndarray], lattice: Lattice) -> Dict[Tuple[int, str], Mps]:
    return {(lattice.index(site), side): Mps((np.asarray(v).reshape(1, -1, 1),)) for (site, side), v in vectors.items()}


def _message_seed(config: EvolutionConfig, offset_index: int) -> int:
    return derive_seed(config.seed, 'messages', offset_index)


def _check_evolution(model: ModelSpec, config: EvolutionConfig, lattice: Lattice) -> None:
    if not model.is_quantum:
        raise ConfigError(f"no imaginary-time evolution for model {model.model!r}")
    if lattice.boundary == 'infinite' and (lattice.rows < 2 or lattice.cols < 2):
        raise ConfigError(f"unit cell {lattice.rows}x{lattice.cols} has self bonds; use at least 2x2")


class _Sweeper:
    """Holds warm-start messages and partitions across sweeps."""

    def __init__(self, config: EvolutionConfig, lattice: Lattice, executor: Any) -> None:
        self.config = config
        self.lattice = lattice
        self.executor = executor
        self.truncation = config.truncation
        self.warm: Dict[int, Optional[MessageSet]] = {}
        self.vectors: Optional[Dict[Tuple[Site, str], np.ndarray]] = None
        self.single_site = config.block == (1, 1) and lattice.boundary != 'infinite'
        if self.single_site:
            self.partitions = [partition_blocks(lattice, 1, 1)]
        else:
            self.partitions = blockbp_partitions(lattice, MethodSpec.from_evolution(config))

    def converge(self, psi: PepsNetwork, index: int) -> Tuple[FlatNetwork, MessageSet, Any]:
        net = build_double_layer(psi)
        msgs, stats = run_to_fixed_point(
            net, self.partitions[index], self.truncation.message_spec(self.config.D),
            self.config.message_tol, self.config.max_rounds,
            seed=_message_seed(self.config, index), initial=self.warm.get(index),
            executor=self.executor, zipup_tol=self.config.zipup_tol, max_sweeps=self.config.max_sweeps,
        )
        self.warm[index] = msgs
        return net, msgs, stats

    def sweep(self, psi: PepsNetwork, gates: List[TwoSiteGate], sweep: int, dtau: float) -> Tuple[PepsNetwork, List[TraceRow]]:
        if self.single_site:
            return self._sweep_single_site(psi, gates, sweep, dtau)
        if self.lattice.boundary == 'infinite':
            return self._sweep_infinite(psi, gates, sweep, dtau)
        return self._sweep_blocks(psi, gates, sweep, dtau)

    def _sweep_single_site(self, psi, gates, sweep, dtau):
        start = time.perf_counter()
        _, msgs, stats = self.converge(psi, 0)
        vectors = block_messages_as_bp(msgs, self.lattice)
        psi = _pair_sweep(psi, vectors, gates, self.config)
        self.warm[0] = MessageSet(_vectors_as_block_messages(vectors, self.lattice), msgs.round_index)
        row = TraceRow(sweep, 0, None, stats.last_ratio, stats.converged, dtau, time.perf_counter() - start)
        return psi, [row]

    def _sweep_blocks(self, psi, gates, sweep, dtau):
        rows = []
        by_bond = {g.bond: g.matrix for g in gates}
        assignments = assign_bonds([g.bond for g in gates], self.partitions)
        for index, (partition, assigned) in enumerate(zip(self.partitions, assignments)):
            if not assigned:
                continue
            start = time.perf_counter()
            net, msgs, stats = self.converge(psi, index)
            env_spec = self.truncation.environment_spec(self.config.D)
            tasks = []
            for block_id, local_bonds in sorted(assigned.items()):
                env = block_environment(
                    net, partition, msgs, block_id, env_spec,
                    seed=derive_seed(self.config.seed, 'environment', sweep, index),
                    tol=self.config.zipup_tol, max_sweeps=self.config.max_sweeps,
                )
                sites = {s for lb in local_bonds for s in self.lattice.bond_sites(lb.bond)}
                tasks.append(BlockUpdateTask(
                    block_id=block_id,
                    env=env,
                    kets={s: psi.site(s) for s in sites},
                    gates=[(lb.bond, by_bond[lb.bond]) for lb in local_bonds],
                    D=self.config.D,
                    als_max_iter=self.config.als_max_iter,
                    als_tol=self.config.als_tol,
                ))
            updates: Dict[Site, np.ndarray] = {}
            for _, touched, _ in parallel_map(update_block, tasks, self.executor):
                updates.update(touched)
            psi = psi.with_sites(updates)
            rows.append(TraceRow(sweep, index, None, stats.last_ratio, stats.converged, dtau, time.perf_counter() - start))
        return psi, rows

    def _sweep_infinite(self, psi, gates, sweep, dtau):
        """One self-messaging block; messages are re-converged before every gate."""
        rows = []
        by_bond = {g.bond: g.matrix for g in gates}
        assignments = assign_bonds([g.bond for g in gates], self.partitions)
        env_spec = self.truncation.environment_spec(self.config.D)
        for index, (partition, assigned) in enumerate(zip(self.partitions, assignments)):
            if not assigned:
                continue
            start = time.perf_counter()
            ratios, converged = [], True
            for block_id, local_bonds in sorted(assigned.items()):
                for lb in local_bonds:
                    net, msgs, stats = self.converge(psi, index)
                    ratios.append(stats.last_ratio)
                    converged = converged and stats.converged
                    env = block_environment(
                        net, partition, msgs, block_id, env_spec,
                        seed=derive_seed(self.config.seed, 'environment', sweep, index),
                        tol=self.config.zipup_tol, max_sweeps=self.config.max_sweeps,
                    )
                    psi = psi.with_sites(apply_gate_in_block(
                        psi, env, lb.bond, by_bond[lb.bond], self.config.D,
                        self.config.als_max_iter, self.config.als_tol,
                    ))
            ratio = max((r for r in ratios if r is not None), default=None)
            rows.append(TraceRow(sweep, index, None, ratio, converged, dtau, time.perf_counter() - start))
        return psi, rows


def evolve_sweep(
    model: ModelSpec,
    config: EvolutionConfig,
    psi: PepsNetwork,
    executor: Any = None,
) -> Tuple[PepsNetwork, List[TraceRow]]:
    """One blockBP-update sweep at ``config.dtau``, cold-started, no energy."""
    _check_evolution(model, config, psi.lattice)
    sweeper = _Sweeper(config, psi.lattice, executor)
    gates = trotter_gates(model, config.dtau, psi.lattice)
    return sweeper.sweep(psi, gates, 1, config.dtau)


def _run(
    model: ModelSpec,
    config: EvolutionConfig,
    psi: PepsNetwork,
    sweep_fn: Any,
    measure: Any,
    on_sweep: Optional[Callable[[PepsNetwork, List[TraceRow]], None]] = None,
) -> Tuple[PepsNetwork, List[TraceRow]]:
    """Sweep loop shared by the blockBP and plain-BP evolutions.

    ``on_sweep`` sees the state and the trace so far after the initial
    measurement and after every sweep.
    """
    dtau = config.dtau
    gates = trotter_gates(model, dtau, psi.lattice)
    rows = [TraceRow(0, 0, measure(psi).energy_per_site, None, True, dtau, 0.0)]
    if on_sweep is not None:
        on_sweep(psi, rows)
    last_energy = rows[0].energy
    for sweep in range(1, config.steps + 1):
        psi, sweep_rows = sweep_fn(psi, gates, sweep, dtau)
        if sweep % config.measure_every == 0 or sweep == config.steps:
            energy = measure(psi).energy_per_site
            if sweep_rows:
                sweep_rows[-1].energy = energy
            logger.info(f"sweep {sweep}: energy/site {energy:.10f} (dtau {dtau:g})")
            if (
                config.dtau_schedule == 'halving'
                and last_energy is not None
                and energy >= last_energy - 1e-10 * abs(last_energy)
                and dtau / 2 >= config.min_dtau
            ):
                dtau = dtau / 2
                gates = trotter_gates(model, dtau, psi.lattice)
                logger.info(f"energy stalled, dtau halved to {dtau:g}")
            last_energy = energy
        rows.extend(sweep_rows)
        if on_sweep is not None:
            on_sweep(psi, rows)
    return psi, rows


def run_ground_state(
    model: ModelSpec,
    config: EvolutionConfig,
    psi0: Optional[PepsNetwork] = None,
    executor: Any = None,
    on_sweep: Optional[Callable[[PepsNetwork, List[TraceRow]], None]] = None,
) -> Tuple[PepsNetwork, List[TraceRow]]:
    """blockBP-update imaginary-time evolution.

    Each sweep visits the partition offsets in order; at each offset the
    messages are converged (warm started from the previous sweep) and the
    bonds assigned to that offset are updated in their block centers,
    blocks in parallel through ``executor``. Energies are measured with
    blockBP every ``measure_every`` sweeps and after the last one.
    ``on_sweep(psi, rows)`` is called after each sweep with the progress
    so far.

    Returns:
        (final PEPS, trace rows; row 0 is the initial state)
    """
    lattice = model.lattice
    _check_evolution(model, config, lattice)
    psi = psi0 if psi0 is not None else initial_state(model, config, lattice)
    if psi.lattice != lattice:
        raise ConfigError(f"initial PEPS lattice {psi.lattice} does not match the model lattice {lattice}")
    sweeper = _Sweeper(config, lattice, executor)
    method = MethodSpec.from_evolution(config)

    def measure(state: PepsNetwork) -> ObservableReport:
        return energy_report(state, model, method, executor)

    return _run(model, config, psi, sweeper.sweep, measure, on_sweep)


def bp_energy_report(psi: PepsNetwork, model: ModelSpec, config: EvolutionConfig) -> ObservableReport:
    """Energy per site from plain-BP pair environments."""
    net = build_double_layer(psi)
    msgs, _ = run_bp_to_fixed_point(net, config.message_tol, config.max_rounds, seed=_message_seed(config, 0))
    rdms = {bond: bp_bond_rdm(psi, net, msgs, bond) for bond in psi.lattice.bonds()}
    return energy_from_rdms(model, psi.lattice, rdms, 'bp')


def run_bp_ground_state(
    model: ModelSpec,
    config: EvolutionConfig,
    psi0: Optional[PepsNetwork] = None,
) -> Tuple[PepsNetwork, List[TraceRow]]:
    """Plain-BP imaginary-time evolution, the simple-update baseline.

    Messages are converged once per sweep and refreshed across each
    updated bond.
    """
    lattice = model.lattice
    _check_evolution(model, config, lattice)
    if lattice.boundary == 'infinite':
        raise ConfigError("the plain-BP baseline runs on finite lattices")
    psi = psi0 if psi0 is not None else initial_state(model, config, lattice)
    warm: Dict[str, Any] = {}

    def sweep_fn(state: PepsNetwork, gates: List[TwoSiteGate], sweep: int, dtau: float):
        start = time.perf_counter()
        net = build_double_layer(state)
        msgs, stats = run_bp_to_fixed_point(
            net, config.message_tol, config.max_rounds, seed=_message_seed(config, 0), initial=warm.get('msgs'),
        )
        vectors = dict(msgs)
        state = _pair_sweep(state, vectors, gates, config)
        warm['msgs'] = MessageSet(vectors, msgs.round_index)
        return state, [TraceRow(sweep, 0, None, stats.last_ratio, stats.converged, dtau, time.perf_counter() - start)]

    def measure(state: PepsNetwork) -> ObservableReport:
        return bp_energy_report(state, model, config)

    return _run(model, config, psi, sweep_fn, measure)


def block_partitions(config: EvolutionConfig, lattice: Lattice) -> List[BlockPartition]:
    """Partitions a ground-state sweep visits, in order."""
    return list(_Sweeper(config, lattice, None).partitions)
