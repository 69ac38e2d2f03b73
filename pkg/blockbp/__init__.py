"""
blockbp - Block belief propagation for PEPS tensor networks

Approximate contraction of 2D PEPS networks by belief propagation whose
messages are MPS exchanged between blocks of sites, with observables and
imaginary-time ground-state searches built on the resulting environments.
"""
from __future__ import annotations

__version__ = "0.1.0"
__author__ = "Conrad"

# Re-export main components for convenient imports
from blockbp.errors import (
    BlockBPError,
    ConfigError,
    DecompositionError,
    EnvironmentRegionError,
    PartitionError,
    PepsFormatError,
    ShapeMismatchError,
    SizeLimitError,
    ZeroNormError,
)
from blockbp.models import (
    ConvergenceStats,
    EvolutionConfig,
    MethodSpec,
    ModelSpec,
    ObservableReport,
    RunConfig,
    TraceRow,
    TruncationPolicy,
)
from blockbp.tensor_core import (
    DenseTensor,
    TruncationSpec,
    contract,
    lq_split,
    qr_split,
    svd_truncate,
)
from blockbp.network import (
    Bond,
    FlatNetwork,
    Lattice,
    PepsNetwork,
    build_double_layer,
    embed_obc_in_pbc,
    tile_unit_cell,
)
from blockbp.partition import (
    BlockPartition,
    assign_bonds,
    covering_offsets,
    partition_blocks,
    validate_partition,
)
from blockbp.mps import Mpo, Mps, bmps_contract, zip_up, zip_up_apply
from blockbp.engine import (
    MessageSet,
    block_environment,
    blockbp_round,
    run_to_fixed_point,
)
from blockbp.bp import bp_round, run_bp_to_fixed_point
from blockbp.observables import (
    Rdm,
    classical_ising_network,
    classical_magnetization,
    energy_report,
    onsager_magnetization,
    rdm_from_environment,
    trace_distance,
)
from blockbp.oracles import exact_contract, exact_diag, exact_rdm
from blockbp.ground_state import (
    TwoSiteGate,
    apply_gate_in_block,
    run_bp_ground_state,
    run_ground_state,
    trotter_gates,
)
from blockbp.storage import load_peps, read_sidecar, save_peps

__all__ = [
    # Version info
    "__version__",
    "__author__",
    # Errors
    "BlockBPError",
    "ConfigError",
    "DecompositionError",
    "EnvironmentRegionError",
    "PartitionError",
    "PepsFormatError",
    "ShapeMismatchError",
    "SizeLimitError",
    "ZeroNormError",
    # Models
    "ConvergenceStats",
    "EvolutionConfig",
    "MethodSpec",
    "ModelSpec",
    "ObservableReport",
    "RunConfig",
    "TraceRow",
    "TruncationPolicy",
    # Tensors
    "DenseTensor",
    "TruncationSpec",
    "contract",
    "lq_split",
    "qr_split",
    "svd_truncate",
    # Networks and partitions
    "Bond",
    "FlatNetwork",
    "Lattice",
    "PepsNetwork",
    "build_double_layer",
    "embed_obc_in_pbc",
    "tile_unit_cell",
    "BlockPartition",
    "assign_bonds",
    "covering_offsets",
    "partition_blocks",
    "validate_partition",
    # MPS
    "Mpo",
    "Mps",
    "bmps_contract",
    "zip_up",
    "zip_up_apply",
    # Message passing
    "MessageSet",
    "block_environment",
    "blockbp_round",
    "run_to_fixed_point",
    "bp_round",
    "run_bp_to_fixed_point",
    # Observables
    "Rdm",
    "classical_ising_network",
    "classical_magnetization",
    "energy_report",
    "onsager_magnetization",
    "rdm_from_environment",
    "trace_distance",
    "exact_contract",
    "exact_diag",
    "exact_rdm",
    # Ground state
    "TwoSiteGate",
    "apply_gate_in_block",
    "run_bp_ground_state",
    "run_ground_state",
    "trotter_gates",
    # Storage
    "load_peps",
    "read_sidecar",
    "save_peps",
]
