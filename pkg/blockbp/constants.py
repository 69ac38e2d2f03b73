"""
Constants and configuration defaults for blockbp.

Defines numerical defaults, Pauli matrices, lattice side names and
output path configuration.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Tuple

import numpy as np


# --- Numerical defaults ------------------------------------------------------

# Singular values below CUTOFF * largest are dropped by svd_truncate
TRUNCATION_CUTOFF = 1e-12

# Message fixed point: eps_l / eps_1 tolerance and round budget
MESSAGE_TOL = 1e-5
MAX_ROUNDS = 10

# Zip-up MPO x MPS: relative std of the sweep loss and sweep budget
ZIPUP_TOL = 1e-6
MAX_SWEEPS = 10

# Negative eigenvalues of environments/RDMs above -EIG_CLIP_TOL are noise
EIG_CLIP_TOL = 1e-10

# Local full-update least squares
RIDGE = 1e-12
ALS_MAX_ITER = 20
ALS_TOL = 1e-10

# Imaginary time step
DTAU = 0.01

# Exact oracles
MAX_ED_SITES = 16
MAX_EXACT_TENSORS = 20
MAX_EXACT_ENTRIES = 1 << 26


def default_chi_m(bond_dim: int) -> int:
    """Message truncation rank: chi_m = D^2."""
    return bond_dim * bond_dim


def default_chi(bond_dim: int) -> int:
    """Environment truncation rank: chi = 2 D^2 + 10."""
    return 2 * bond_dim * bond_dim + 10


# --- Lattice geometry --------------------------------------------------------

BOUNDARIES: Tuple[str, ...] = ('open', 'periodic', 'infinite')

# Virtual leg order of a PEPS site tensor after the physical leg
SIDES: Tuple[str, ...] = ('up', 'left', 'down', 'right')

OPPOSITE: Dict[str, str] = {
    'up': 'down',
    'down': 'up',
    'left': 'right',
    'right': 'left',
}

# (row, col) step taken when crossing a side
SIDE_STEP: Dict[str, Tuple[int, int]] = {
    'up': (-1, 0),
    'down': (1, 0),
    'left': (0, -1),
    'right': (0, 1),
}

GATE_GROUPS: Tuple[str, ...] = (
    'horizontal-even',
    'horizontal-odd',
    'vertical-even',
    'vertical-odd',
)

MODELS: Tuple[str, ...] = ('transverse-ising', 'afh', 'classical-ising')


# --- Pauli matrices ----------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


# --- Path Configuration ------------------------------------------------------

def get_default_paths(base: Path | None = None) -> Dict[str, Path]:
    """Get default paths relative to a base directory.

    Args:
        base: Base directory, defaults to the current working directory

    Returns:
        Dictionary with 'log_dir' and 'out_dir'
    """
    base = Path('.') if base is None else base
    return {
        'log_dir': base / 'logs',
        'out_dir': base / 'runs',
    }


def ensure_directories(out_dir: Path | None = None) -> Dict[str, Path]:
    """Create the output directory (and the default one) if missing.

    Returns:
        Dictionary of created paths
    """
    paths = get_default_paths()
    if out_dir is not None:
        paths['out_dir'] = out_dir
    paths['out_dir'].mkdir(parents=True, exist_ok=True)
    return paths
