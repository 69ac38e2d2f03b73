"""
Experiment drivers behind the command-line subcommands.

Each ``cmd_*`` takes a ``RunConfig`` (and an optional executor), writes
its artifacts under ``config.out`` and returns their paths. CSV and JSON
artifacts start with a header (config hash, seed, version, command) and
contain no wall-clock figures, so a rerun with the same configuration
reproduces them byte for byte; timings go to ``*_timing.csv``.
"""
from __future__ import annotations

import json
import math
import time
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from blockbp.constants import MAX_ED_SITES, MAX_EXACT_TENSORS, ensure_directories
from blockbp.errors import BlockBPError, ConfigError
from blockbp.hashing import config_hash
from blockbp.logging import logger
from blockbp.models import MethodSpec, RunConfig
from blockbp.mps import Mps, bmps_contract
from blockbp.network import build_double_layer
from blockbp.observables import (
    center_energy,
    classical_magnetization,
    onsager_magnetization,
    trace_distance_grid,
)
from blockbp.oracles import exact_contract, exact_partition_function
from blockbp.storage import load_peps, save_peps
from blockbp.tensor_core import TruncationSpec
from blockbp.utils import human_duration, make_executor

CSV_FLOAT_FORMAT = '%.12g'

# Environment rank of the boundary-MPS reference in rdm-compare
REFERENCE_CHI = 64


# --- Artifact writers --------------------------------------------------------

def run_header(config: RunConfig, command: str) -> Dict[str, Any]:
    from blockbp import __version__

    return {
        'command': command,
        'config_hash': config_hash(config.to_dict()),
        'seed': config.seed,
        'version': __version__,
    }


def write_csv(frame: pd.DataFrame, path: Path, header: Mapping[str, Any]) -> Path:
    """CSV preceded by '# key: value' comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for key in sorted(header):
            f.write(f"# {key}: {header[key]}\n")
        frame.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Read a CSV written by ``write_csv``, skipping the header."""
    return pd.read_csv(path, comment='#')


def write_json(payload: Mapping[str, Any], path: Path, header: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump({'header': dict(header), **payload}, f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return path


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    ensure_directories(out)
    return out


def _load_stored(config: RunConfig):
    if not config.peps:
        raise ConfigError("this command needs a stored PEPS (set 'peps' in the config)")
    psi, meta = load_peps(Path(config.peps))
    return psi, meta


def _peps_metadata(config: RunConfig, header: Mapping[str, Any], **extra: Any) -> Dict[str, Any]:
    return {
        'model': config.model.to_dict(),
        'D': config.evolution.D,
        'seed': config.evolution.seed,
        'config_hash': header['config_hash'],
        **extra,
    }


def _write_partial_ground_state(
    config: RunConfig,
    out: Path,
    header: Mapping[str, Any],
    progress: Mapping[str, Any],
) -> Dict[str, Path]:
    """Trace and last completed PEPS of an evolution that failed."""
    paths: Dict[str, Path] = {}
    partial_header = {**header, 'partial': True}
    rows = progress.get('rows') or []
    if rows:
        paths['trace'] = write_csv(
            pd.DataFrame([r.to_dict() for r in rows]), out / 'ground_state_trace.csv', partial_header,
        )
    psi = progress.get('psi')
    if psi is not None:
        paths['peps'] = save_peps(
            psi, out / 'ground_state.peps', _peps_metadata(config, header, partial=True, sweeps_completed=progress.get('sweep', 0)),
        )
    logger.warning(f"ground-state failed after {progress.get('sweep', 0)} sweep(s); partial artifacts kept in {out}")
    return paths


# --- Commands ----------------------------------------------------------------

def cmd_ground_state(config: RunConfig, executor: Any = None) -> Dict[str, Path]:
    """Imaginary-time evolution; writes the trace, summary and final PEPS.

    A stored PEPS named by ``config.peps`` is used as the starting state.
    For an infinite unit cell the summary also carries the energy of the
    cell tiled into a finite PEPS of (k+1) cells per axis, evaluated by
    boundary MPS.
    """
    from blockbp.ground_state import run_ground_state

    model, evo = config.model, config.evolution
    if not model.is_quantum:
        raise ConfigError(f"ground-state needs a quantum model, got {model.model!r}")
    out = _out_dir(config)
    header = run_header(config, 'ground-state')
    psi0 = _load_stored(config)[0] if config.peps else None

    progress: Dict[str, Any] = {'psi': psi0, 'rows': [], 'sweep': 0}

    def record(state: Any, rows: List[Any]) -> None:
        progress.update(psi=state, rows=list(rows), sweep=rows[-1].sweep)

    start = time.perf_counter()
    try:
        psi, rows = run_ground_state(model, evo, psi0=psi0, executor=executor, on_sweep=record)
    except (BlockBPError, np.linalg.LinAlgError, FloatingPointError):
        _write_partial_ground_state(config, out, header, progress)
        raise
    wall = time.perf_counter() - start

    paths = {
        'trace': write_csv(pd.DataFrame([r.to_dict() for r in rows]), out / 'ground_state_trace.csv', header),
        'timing': write_csv(
            pd.DataFrame([r.timing_dict() for r in rows]),
            out / 'ground_state_trace_timing.csv',
            {**header, 'wall_seconds': f"{wall:.3f}"},
        ),
        'peps': save_peps(psi, out / 'ground_state.peps', _peps_metadata(config, header)),
    }
    measured = [r for r in rows if r.energy is not None]
    ratios = [r.eps_ratio for r in rows if r.eps_ratio is not None]
    summary: Dict[str, Any] = {
        'model': model.to_dict(),
        'evolution': evo.to_dict(),
        'energy_per_site': measured[-1].energy if measured else None,
        'initial_energy_per_site': rows[0].energy,
        'sweeps': evo.steps,
        'all_converged': all(r.converged for r in rows),
        'max_eps_ratio': max(ratios) if ratios else None,
    }
    if model.boundary == 'infinite':
        summary['tiled_energy_per_site'] = center_energy(
            psi, model, config.k, TruncationSpec(evo.resolved_chi), seed=evo.seed,
        )
    paths['summary'] = write_json(summary, out / 'ground_state_summary.json', header)
    logger.info(f"ground-state finished in {human_duration(wall)}: E/site = {summary['energy_per_site']}")
    return paths


def cmd_classical(config: RunConfig, executor: Any = None) -> Dict[str, Path]:
    """|m_z| of the classical Ising model over ``config.betas``.

    Each row carries the Onsager value and the deviation from it, and
    log Z by enumeration on lattices small enough for it. The center
    shape defaults to single sites at the block centers.
    """
    model, evo = config.model, config.evolution
    if model.model != 'classical-ising':
        raise ConfigError(f"classical needs the classical-ising model, got {model.model!r}")
    out = _out_dir(config)
    header = run_header(config, 'classical')
    lattice = model.lattice
    center = evo.center or (1, 1)
    records, timing = [], []
    for beta in config.betas:
        start = time.perf_counter()
        mz, stats = classical_magnetization(
            beta, lattice, block=evo.block, center=center, chi_m=evo.chi_m, chi=evo.chi,
            tol=evo.message_tol, max_rounds=evo.max_rounds, seed=evo.seed, executor=executor,
        )
        reference = onsager_magnetization(beta)
        records.append({
            'beta': beta,
            'mz': mz,
            'onsager': reference,
            'deviation': abs(mz - reference),
            'rounds': stats.rounds,
            'converged': stats.converged,
        })
        if lattice.n_sites <= MAX_EXACT_TENSORS:
            records[-1]['log_z'] = math.log(exact_partition_function(beta, lattice))
        timing.append({'beta': beta, 'seconds': time.perf_counter() - start})
        logger.info(f"beta={beta}: |m_z|={mz:.6f} (Onsager {reference:.6f})")
    return {
        'magnetization': write_csv(pd.DataFrame(records), out / 'classical.csv', header),
        'timing': write_csv(pd.DataFrame(timing), out / 'classical_timing.csv', header),
    }


def cmd_rdm_compare(config: RunConfig, executor: Any = None) -> Dict[str, Path]:
    """Horizontal-bond trace distances, blockBP against a reference.

    The reference is the exact state vector on small lattices and a
    large-rank boundary MPS otherwise.
    """
    psi, _ = _load_stored(config)
    out = _out_dir(config)
    header = run_header(config, 'rdm-compare')
    blockbp = MethodSpec.from_evolution(config.evolution)
    if psi.lattice.n_sites <= MAX_ED_SITES:
        reference = MethodSpec(kind='exact', seed=config.seed)
    else:
        reference = MethodSpec(kind='bmps', chi=REFERENCE_CHI, seed=config.seed)
    grid = trace_distance_grid(psi, blockbp, reference, executor)
    frame = pd.DataFrame(grid, columns=[f"c{j}" for j in range(grid.shape[1])])
    values = grid[~np.isnan(grid)]
    summary = {
        'reference': reference.kind,
        'mean': float(values.mean()) if values.size else None,
        'max': float(values.max()) if values.size else None,
        'bonds': int(values.size),
    }
    return {
        'grid': write_csv(frame, out / 'rdm_compare.csv', {**header, 'reference': reference.kind}),
        'summary': write_json(summary, out / 'rdm_compare_summary.json', header),
    }


def cmd_bench_parallel(config: RunConfig) -> Dict[str, Path]:
    """Time one message fixed point plus update sweep per worker count.

    The deterministic CSV records, per worker count, the largest
    deviation of the resulting site tensors from the first run; the
    timing CSV records seconds per sweep and the speedup.
    """
    from blockbp.ground_state import evolve_sweep, initial_state

    model, evo = config.model, config.evolution
    out = _out_dir(config)
    header = run_header(config, 'bench-parallel')
    psi0 = _load_stored(config)[0] if config.peps else initial_state(model, evo)
    baseline = None
    records, timing = [], []
    for workers in config.worker_counts:
        executor = make_executor(workers)
        try:
            start = time.perf_counter()
            psi, _ = evolve_sweep(model, evo, psi0, executor)
            seconds = time.perf_counter() - start
        finally:
            if executor is not None:
                executor.shutdown()
        if baseline is None:
            baseline = (psi, seconds)
        deviation = max(float(np.max(np.abs(a - b))) for a, b in zip(psi.sites, baseline[0].sites))
        records.append({'workers': workers, 'max_deviation': deviation, 'identical': deviation == 0.0})
        timing.append({'workers': workers, 'seconds_per_sweep': seconds, 'speedup': baseline[1] / seconds})
        logger.info(f"{workers} worker(s): {human_duration(seconds)} per sweep")
    return {
        'numerics': write_csv(pd.DataFrame(records), out / 'bench_parallel.csv', header),
        'timing': write_csv(pd.DataFrame(timing), out / 'bench_parallel_timing.csv', header),
    }


def cmd_contract(config: RunConfig) -> Dict[str, Path]:
    """Norm <psi|psi> of a stored PEPS by exact or boundary-MPS contraction.

    The result is written as log|value| plus its phase, which does not
    overflow on large lattices.
    """
    psi, meta = _load_stored(config)
    out = _out_dir(config)
    header = run_header(config, 'contract')
    net = build_double_layer(psi)
    if config.method == 'exact':
        value = exact_contract(net)
        log_abs = math.log(abs(value)) if value != 0 else float('-inf')
        phase = float(np.angle(value))
    else:
        if psi.lattice.boundary != 'open':
            raise ConfigError(f"boundary-MPS contraction needs an open lattice, got {psi.lattice.boundary!r}")
        chi = config.evolution.chi or config.evolution.truncation.environment_spec(psi.bond_dim).max_rank
        boundary = bmps_contract(net, 'down', TruncationSpec(chi), seed=config.seed)
        raw = complex(Mps(boundary.tensors).to_dense()[0])
        log_abs = boundary.log_scale + (math.log(abs(raw)) if raw != 0 else float('-inf'))
        phase = float(np.angle(raw))
    payload = {
        'method': config.method,
        'rows': psi.lattice.rows,
        'cols': psi.lattice.cols,
        'D': psi.bond_dim,
        'log_abs_value': log_abs,
        'phase': phase,
        'source_config_hash': meta.get('config_hash'),
    }
    logger.info(f"contract ({config.method}): log|<psi|psi>| = {log_abs:.10f}")
    return {'result': write_json(payload, out / 'contract.json', header)}


COMMANDS = {
    'ground-state': cmd_ground_state,
    'classical': cmd_classical,
    'rdm-compare': cmd_rdm_compare,
    'bench-parallel': cmd_bench_parallel,
    'contract': cmd_contract,
}

# Commands that own their executors
SERIAL_COMMANDS = frozenset({'bench-parallel', 'contract'})


def run_command(name: str, config: RunConfig, workers: Optional[int] = None) -> Dict[str, Path]:
    """Run one command, managing the worker pool for it."""
    fn = COMMANDS[name]
    if name in SERIAL_COMMANDS:
        return fn(config)
    executor = make_executor(workers if workers is not None else config.workers)
    try:
        return fn(config, executor)
    finally:
        if executor is not None:
            executor.shutdown()


def list_artifacts(paths: Mapping[str, Path]) -> List[str]:
    return [f"{key}: {path}" for key, path in sorted(paths.items())]
