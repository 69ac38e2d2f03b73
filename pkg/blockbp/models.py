"""
Data models for blockbp.

This module contains the configuration and report dataclasses used
throughout the package: truncation policy, model and evolution
settings, run configuration, convergence statistics and observable
reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from blockbp.constants import (
    ALS_MAX_ITER,
    ALS_TOL,
    BOUNDARIES,
    DTAU,
    MAX_ROUNDS,
    MAX_SWEEPS,
    MESSAGE_TOL,
    MODELS,
    TRUNCATION_CUTOFF,
    ZIPUP_TOL,
    default_chi,
    default_chi_m,
)
from blockbp.errors import ConfigError
from blockbp.tensor_core import TruncationSpec

QUANTUM_MODELS = ('transverse-ising', 'afh')


def _pair(value: Any, name: str) -> Optional[Tuple[int, int]]:
    """Normalize ``3`` / ``[3, 3]`` / ``(3, 3)`` to a tuple of two ints."""
    if value is None:
        return None
    if isinstance(value, int):
        return (value, value)
    try:
        a, b = value
        return (int(a), int(b))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be an integer or a pair of integers, got {value!r}") from e


@dataclass
class TruncationPolicy:
    """Truncation ranks for messages and environments.

    Attributes:
        chi_m: Message rank (None -> D^2)
        chi: Environment rank (None -> 2 D^2 + 10)
        cutoff: Relative singular-value cutoff
    """
    chi_m: Optional[int] = None
    chi: Optional[int] = None
    cutoff: float = TRUNCATION_CUTOFF

    def message_spec(self, bond_dim: int) -> TruncationSpec:
        return TruncationSpec(self.chi_m or default_chi_m(bond_dim), self.cutoff)

    def environment_spec(self, bond_dim: int) -> TruncationSpec:
        return TruncationSpec(self.chi or default_chi(bond_dim), self.cutoff)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {'chi_m': self.chi_m, 'chi': self.chi, 'cutoff': self.cutoff}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TruncationPolicy':
        """Create TruncationPolicy from dictionary."""
        return cls(
            chi_m=data.get('chi_m'),
            chi=data.get('chi'),
            cutoff=data.get('cutoff', TRUNCATION_CUTOFF),
        )


@dataclass
class ModelSpec:
    """Lattice model and its parameters.

    Attributes:
        model: 'transverse-ising', 'afh' or 'classical-ising'
        B: Transverse field strength (transverse Ising)
        beta: Inverse temperature (classical Ising)
        rows: Lattice rows (unit-cell rows for infinite lattices)
        cols: Lattice columns
        boundary: 'open', 'periodic' or 'infinite'
    """
    model: str = 'transverse-ising'
    B: float = 0.0
    beta: Optional[float] = None
    rows: int = 4
    cols: int = 4
    boundary: str = 'open'

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check model invariants.

        Raises:
            ConfigError: On unknown model/boundary, negative field or
                non-positive temperature
        """
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        if self.B < 0:
            raise ConfigError(f"field B must be >= 0, got {self.B}")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"lattice must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def is_quantum(self) -> bool:
        return self.model in QUANTUM_MODELS

    @property
    def lattice(self) -> 'Lattice':
        from blockbp.network import Lattice
        return Lattice(self.rows, self.cols, self.boundary)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'model': self.model,
            'B': self.B,
            'beta': self.beta,
            'rows': self.rows,
            'cols': self.cols,
            'boundary': self.boundary,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        """Create ModelSpec from dictionary with defaults for missing fields."""
        return cls(
            model=data.get('model', 'transverse-ising'),
            B=float(data.get('B', 0.0)),
            beta=data.get('beta'),
            rows=int(data.get('rows', 4)),
            cols=int(data.get('cols', 4)),
            boundary=data.get('boundary', 'open'),
        )


@dataclass
class EvolutionConfig:
    """Imaginary-time evolution and contraction settings.

    Attributes:
        dtau: Imaginary time step
        steps: Number of sweeps (one Trotter step per bond each)
        D: Target PEPS bond dimension
        d: Physical dimension
        chi_m: Message truncation rank (None -> D^2)
        chi: Environment truncation rank (None -> 2 D^2 + 10)
        block: Block shape (rows, cols)
        center: Center shape inside a block (None -> whole block)
        offsets: Partition offsets (None -> default/covering offsets)
        seed: Root seed of all random streams
        message_tol: Fixed-point tolerance on eps_l / eps_1
        max_rounds: Message round budget
        zipup_tol: Zip-up relative loss deviation tolerance
        max_sweeps: Zip-up sweep budget
        als_max_iter: Local least-squares iteration budget
        als_tol: Local least-squares relative tolerance
        measure_every: Energy measured every this many sweeps
        dtau_schedule: 'fixed' or 'halving'
        min_dtau: Smallest step reached by the halving schedule
        initial: 'auto', 'random', 'neel' or 'plus'
    """
    dtau: float = DTAU
    steps: int = 10
    D: int = 2
    d: int = 2
    chi_m: Optional[int] = None
    chi: Optional[int] = None
    block: Tuple[int, int] = (2, 2)
    center: Optional[Tuple[int, int]] = None
    offsets: Optional[List[Tuple[int, int]]] = None
    seed: int = 0
    message_tol: float = MESSAGE_TOL
    max_rounds: int = MAX_ROUNDS
    zipup_tol: float = ZIPUP_TOL
    max_sweeps: int = MAX_SWEEPS
    als_max_iter: int = ALS_MAX_ITER
    als_tol: float = ALS_TOL
    measure_every: int = 1
    dtau_schedule: str = 'fixed'
    min_dtau: float = 1e-5
    initial: str = 'auto'

    def __post_init__(self) -> None:
        self.block = _pair(self.block, 'block')
        self.center = _pair(self.center, 'center')
        if self.offsets is not None:
            self.offsets = [_pair(o, 'offset') for o in self.offsets]
        self.validate()

    def validate(self) -> None:
        """Check evolution invariants.

        Raises:
            ConfigError: On non-positive dtau / D, negative steps or an
                unknown schedule / initial state
        """
        if self.dtau < 0:
            raise ConfigError(f"dtau must be >= 0, got {self.dtau}")
        if self.D < 1:
            raise ConfigError(f"D must be >= 1, got {self.D}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.block[0] < 1 or self.block[1] < 1:
            raise ConfigError(f"block must be positive, got {self.block}")
        if self.center is not None and (
            not 1 <= self.center[0] <= self.block[0] or not 1 <= self.center[1] <= self.block[1]
        ):
            raise ConfigError(f"center {self.center} does not fit in block {self.block}")
        if self.dtau_schedule not in ('fixed', 'halving'):
            raise ConfigError(f"unknown dtau schedule {self.dtau_schedule!r}")
        if self.initial not in ('auto', 'random', 'neel', 'plus'):
            raise ConfigError(f"unknown initial state {self.initial!r}")
        if self.measure_every < 1:
            raise ConfigError(f"measure_every must be >= 1, got {self.measure_every}")

    @property
    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(chi_m=self.chi_m, chi=self.chi)

    @property
    def resolved_chi_m(self) -> int:
        return self.chi_m or default_chi_m(self.D)

    @property
    def resolved_chi(self) -> int:
        return self.chi or default_chi(self.D)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'dtau': self.dtau,
            'steps': self.steps,
            'D': self.D,
            'd': self.d,
            'chi_m': self.resolved_chi_m,
            'chi': self.resolved_chi,
            'block': list(self.block),
            'center': list(self.center) if self.center else None,
            'offsets': [list(o) for o in self.offsets] if self.offsets else None,
            'seed': self.seed,
            'message_tol': self.message_tol,
            'max_rounds': self.max_rounds,
            'zipup_tol': self.zipup_tol,
            'max_sweeps': self.max_sweeps,
            'als_max_iter': self.als_max_iter,
            'als_tol': self.als_tol,
            'measure_every': self.measure_every,
            'dtau_schedule': self.dtau_schedule,
            'min_dtau': self.min_dtau,
            'initial': self.initial,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvolutionConfig':
        """Create EvolutionConfig from dictionary with defaults for missing fields."""
        return cls(
            dtau=float(data.get('dtau', DTAU)),
            steps=int(data.get('steps', 10)),
            D=int(data.get('D', 2)),
            d=int(data.get('d', 2)),
            chi_m=data.get('chi_m'),
            chi=data.get('chi'),
            block=data.get('block', (2, 2)),
            center=data.get('center'),
            offsets=data.get('offsets'),
            seed=int(data.get('seed', 0)),
            message_tol=float(data.get('message_tol', MESSAGE_TOL)),
            max_rounds=int(data.get('max_rounds', MAX_ROUNDS)),
            zipup_tol=float(data.get('zipup_tol', ZIPUP_TOL)),
            max_sweeps=int(data.get('max_sweeps', MAX_SWEEPS)),
            als_max_iter=int(data.get('als_max_iter', ALS_MAX_ITER)),
            als_tol=float(data.get('als_tol', ALS_TOL)),
            measure_every=int(data.get('measure_every', 1)),
            dtau_schedule=data.get('dtau_schedule', 'fixed'),
            min_dtau=float(data.get('min_dtau', 1e-5)),
            initial=data.get('initial', 'auto'),
        )


@dataclass
class RunConfig:
    """Everything one command-line run needs.

    Attributes:
        model: Lattice model
        evolution: Evolution / contraction settings (D, chi, block, seed, ...)
        workers: Worker processes for block-parallel work
        out: Output directory
        betas: Inverse temperatures for the classical sweep
        peps: Stored PEPS to load (warm start, rdm-compare, contract)
        worker_counts: Worker counts for the parallel benchmark
        method: Contraction method for 'contract' ('bmps' or 'exact')
        k: Tiling parameter for infinite-lattice energy checks
    """
    model: ModelSpec = field(default_factory=ModelSpec)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    workers: int = 1
    out: str = 'runs'
    betas: List[float] = field(default_factory=lambda: [0.2, 0.44, 0.6])
    peps: Optional[str] = None
    worker_counts: List[int] = field(default_factory=lambda: [1, 2, 4])
    method: str = 'bmps'
    k: int = 3

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.method not in ('bmps', 'exact'):
            raise ConfigError(f"unknown contraction method {self.method!r}")

    @property
    def seed(self) -> int:
        return self.evolution.seed

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization.

        ``workers`` and ``out`` are left out so that the configuration
        hash only covers settings that change numerical results.
        """
        return {
            'model': self.model.to_dict(),
            'evolution': self.evolution.to_dict(),
            'betas': list(self.betas),
            'peps': self.peps,
            'worker_counts': list(self.worker_counts),
            'method': self.method,
            'k': self.k,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Create RunConfig from a (YAML) mapping.

        Model and evolution keys may be nested under ``model`` /
        ``evolution`` or given at the top level.
        """
        if not isinstance(data, dict):
            raise ConfigError(f"configuration must be a mapping, got {type(data).__name__}")
        model_keys = {'model', 'B', 'beta', 'rows', 'cols', 'boundary'}
        evo_keys = set(EvolutionConfig().to_dict())
        model_data = dict(data['model']) if isinstance(data.get('model'), dict) else {}
        evo_data = dict(data.get('evolution') or {})
        for key, value in data.items():
            if key in model_keys and not (key == 'model' and isinstance(value, dict)):
                model_data.setdefault(key, value)
            elif key in evo_keys:
                evo_data.setdefault(key, value)
        return cls(
            model=ModelSpec.from_dict(model_data),
            evolution=EvolutionConfig.from_dict(evo_data),
            workers=int(data.get('workers', 1)),
            out=str(data.get('out', 'runs')),
            betas=[float(b) for b in data.get('betas', [0.2, 0.44, 0.6])],
            peps=data.get('peps'),
            worker_counts=[int(w) for w in data.get('worker_counts', [1, 2, 4])],
            method=data.get('method', 'bmps'),
            k=int(data.get('k', 3)),
        )


@dataclass
class ConvergenceStats:
    """Message fixed-point bookkeeping.

    Attributes:
        eps: Mean squared message change per round
        ratios: eps_l / eps_1 per round
        converged: Whether the tolerance was met within budget
        rounds: Rounds performed
    """
    eps: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    converged: bool = False
    rounds: int = 0

    @property
    def last_ratio(self) -> Optional[float]:
        return self.ratios[-1] if self.ratios else None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'eps': list(self.eps),
            'ratios': list(self.ratios),
            'converged': self.converged,
            'rounds': self.rounds,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ConvergenceStats':
        """Create ConvergenceStats from dictionary."""
        return cls(
            eps=list(data.get('eps', [])),
            ratios=list(data.get('ratios', [])),
            converged=bool(data.get('converged', False)),
            rounds=int(data.get('rounds', 0)),
        )


@dataclass
class ObservableReport:
    """Energy and magnetization of a state.

    Attributes:
        energy_per_site: Mean of bond energies plus field terms per site
        bond_energies: Coupling energy per bond, keyed by ``"r,c,h|v"``
        mz: Mean <sigma_z>
        method: 'blockbp', 'bmps' or 'exact'
    """
    energy_per_site: float
    bond_energies: Dict[str, float] = field(default_factory=dict)
    mz: float = 0.0
    method: str = 'blockbp'

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'energy_per_site': self.energy_per_site,
            'bond_energies': dict(self.bond_energies),
            'mz': self.mz,
            'method': self.method,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ObservableReport':
        """Create ObservableReport from dictionary."""
        return cls(
            energy_per_site=float(data['energy_per_site']),
            bond_energies=dict(data.get('bond_energies', {})),
            mz=float(data.get('mz', 0.0)),
            method=data.get('method', 'blockbp'),
        )


@dataclass
class TraceRow:
    """One row of the ground-state energy trace."""
    sweep: int
    offset: int
    energy: Optional[float]
    eps_ratio: Optional[float]
    converged: bool = True
    dtau: float = DTAU
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary (timing excluded, see ``timing_dict``)."""
        return {
            'sweep': self.sweep,
            'offset': self.offset,
            'energy': self.energy,
            'eps_ratio': self.eps_ratio,
            'converged': self.converged,
            'dtau': self.dtau,
        }

    def timing_dict(self) -> Dict[str, Any]:
        return {'sweep': self.sweep, 'offset': self.offset, 'seconds': self.seconds}


@dataclass
class MethodSpec:
    """How an observable is evaluated.

    Attributes:
        kind: 'blockbp', 'bmps' or 'exact'
        block: Block shape for blockBP
        center: Center shape (None -> whole block / centered cell)
        offsets: Partition offsets (None -> covering offsets)
        chi_m: Message rank (None -> D^2)
        chi: Environment rank (None -> 2 D^2 + 10)
        tol: Message fixed-point tolerance
        max_rounds: Message round budget
        seed: Root seed
    """
    kind: str = 'blockbp'
    block: Tuple[int, int] = (2, 2)
    center: Optional[Tuple[int, int]] = None
    offsets: Optional[List[Tuple[int, int]]] = None
    chi_m: Optional[int] = None
    chi: Optional[int] = None
    tol: float = MESSAGE_TOL
    max_rounds: int = MAX_ROUNDS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ('blockbp', 'bmps', 'exact'):
            raise ConfigError(f"unknown method {self.kind!r}")
        self.block = _pair(self.block, 'block')
        self.center = _pair(self.center, 'center')
        if self.offsets is not None:
            self.offsets = [_pair(o, 'offset') for o in self.offsets]

    @property
    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(chi_m=self.chi_m, chi=self.chi)

    @classmethod
    def from_evolution(cls, config: EvolutionConfig, kind: str = 'blockbp') -> 'MethodSpec':
        """Evaluation settings matching an evolution run."""
        return cls(
            kind=kind,
            block=config.block,
            center=config.center,
            offsets=config.offsets,
            chi_m=config.chi_m,
            chi=config.chi,
            tol=config.message_tol,
            max_rounds=config.max_rounds,
            seed=config.seed,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'kind': self.kind,
            'block': list(self.block),
            'center': list(self.center) if self.center else None,
            'offsets': [list(o) for o in self.offsets] if self.offsets else None,
            'chi_m': self.chi_m,
            'chi': self.chi,
            'tol': self.tol,
            'max_rounds': self.max_rounds,
            'seed': self.seed,
        }
