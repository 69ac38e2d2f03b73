"""
Matrix product states and operators.

Boundary MPS and block messages are ``Mps`` objects with tensors
(left, phys, right); a line of a flat network absorbed into a boundary
is an ``Mpo`` with tensors (left, out, in, right). ``zip_up_apply``
applies an MPO to an MPS and compresses the result in one variational
pass of alternating local updates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blockbp.constants import MAX_SWEEPS, ZIPUP_TOL
from blockbp.errors import ShapeMismatchError, ZeroNormError
from blockbp.tensor_core import TruncationSpec, lq_split, qr_split
from blockbp.utils import rng_for


@dataclass(frozen=True)
class Mps:
    """Matrix product state; the represented vector is exp(log_scale) times
    the contraction of ``tensors``."""
    tensors: Tuple[np.ndarray, ...]
    periodic: bool = False
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        tensors = tuple(np.asarray(t, dtype=complex) for t in self.tensors)
        object.__setattr__(self, 'tensors', tensors)
        if not tensors:
            raise ShapeMismatchError("an MPS needs at least one site", left=0, right=None)
        for i, t in enumerate(tensors):
            if t.ndim != 3:
                raise ShapeMismatchError(f"MPS site {i} has rank {t.ndim}, expected 3", left=t.shape, right=3)
        for i in range(len(tensors) - 1):
            if tensors[i].shape[2] != tensors[i + 1].shape[0]:
                raise ShapeMismatchError(
                    f"MPS bond {i}: right dim {tensors[i].shape[2]} != left dim {tensors[i + 1].shape[0]}",
                    left=(i, tensors[i].shape), right=(i + 1, tensors[i + 1].shape),
                )
        first, last = tensors[0].shape[0], tensors[-1].shape[2]
        if self.periodic and first != last:
            raise ShapeMismatchError(f"periodic MPS closes {last} onto {first}", left=last, right=first)
        if not self.periodic and (first != 1 or last != 1):
            raise ShapeMismatchError(f"open MPS needs dim-1 ends, got {first} and {last}", left=first, right=last)

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> Tuple[int, ...]:
        return tuple(t.shape[1] for t in self.tensors)

    @property
    def bond_dims(self) -> Tuple[int, ...]:
        return tuple(t.shape[2] for t in self.tensors[:-1])

    def _raw_overlap(self, other: 'Mps') -> complex:
        if len(self) != len(other) or self.phys_dims != other.phys_dims:
            raise ShapeMismatchError(
                f"cannot overlap MPS with physical dims {self.phys_dims} and {other.phys_dims}",
                left=self.phys_dims, right=other.phys_dims,
            )
        if self.periodic or other.periodic:
            a0, b0 = self.tensors[0].shape[0], other.tensors[0].shape[0]
            env = np.eye(a0 * b0, dtype=complex).reshape(a0, b0, a0, b0)
            for a, b in zip(self.tensors, other.tensors):
                env = np.einsum('xyab,apc,bpd->xycd', env, a.conj(), b)
            return complex(np.einsum('xyxy->', env))
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum('ab,apc,bpd->cd', env, a.conj(), b)
        return complex(env[0, 0])

    def overlap(self, other: 'Mps') -> complex:
        """<self|other>, conjugating ``self``."""
        return self._raw_overlap(other) * math.exp(self.log_scale + other.log_scale)

    def _raw_norm(self) -> float:
        return math.sqrt(max(self._raw_overlap(self).real, 0.0))

    def norm(self) -> float:
        return self._raw_norm() * math.exp(self.log_scale)

    def normalized(self) -> 'Mps':
        """Unit-norm copy with ``log_scale`` 0.

        Raises:
            ZeroNormError: If the MPS is zero
        """
        n = self._raw_norm()
        if n == 0.0 or not np.isfinite(n):
            raise ZeroNormError(f"cannot normalize an MPS of norm {n}")
        tensors = list(self.tensors)
        tensors[0] = tensors[0] / n
        return Mps(tuple(tensors), self.periodic, 0.0)

    def scaled_log(self) -> Tuple['Mps', float]:
        """Unit-norm copy plus the log of the removed norm."""
        n = self._raw_norm()
        if n == 0.0 or not np.isfinite(n):
            raise ZeroNormError(f"cannot normalize an MPS of norm {n}")
        tensors = list(self.tensors)
        tensors[0] = tensors[0] / n
        return Mps(tuple(tensors), self.periodic, 0.0), self.log_scale + math.log(n)

    def to_dense(self) -> np.ndarray:
        """Full vector over the product of physical dims."""
        out = self.tensors[0]
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=([-1], [0]))
        if self.periodic:
            out = np.trace(out, axis1=0, axis2=out.ndim - 1)
        return out.reshape(-1) * math.exp(self.log_scale)

    def strip_trivial_ends(self) -> 'Mps':
        """Drop the first and last sites, which must have physical dim 1."""
        if len(self) < 3:
            raise ShapeMismatchError(f"cannot strip the ends of a {len(self)}-site MPS", left=len(self), right=3)
        if self.tensors[0].shape[1] != 1 or self.tensors[-1].shape[1] != 1:
            raise ShapeMismatchError(
                f"end sites have physical dims {self.tensors[0].shape[1]} and {self.tensors[-1].shape[1]}",
                left=self.tensors[0].shape, right=self.tensors[-1].shape,
            )
        head = self.tensors[0][:, 0, :]
        tail = self.tensors[-1][:, 0, :]
        body = list(self.tensors[1:-1])
        body[0] = np.tensordot(head, body[0], axes=([1], [0]))
        body[-1] = np.tensordot(body[-1], tail, axes=([2], [0]))
        return Mps(tuple(body), False, self.log_scale)

    @classmethod
    def trivial(cls, length: int) -> 'Mps':
        """All sites (1, 1, 1) with entry 1: the empty boundary."""
        return cls(tuple(np.ones((1, 1, 1), dtype=complex) for _ in range(length)))

    @property
    def is_trivial(self) -> bool:
        return all(t.shape == (1, 1, 1) for t in self.tensors)


def trivial_boundary(length: int) -> Mps:
    return Mps.trivial(length)


@dataclass(frozen=True)
class Mpo:
    """Matrix product operator with tensors (left, out, in, right)."""
    tensors: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        tensors = tuple(np.asarray(t, dtype=complex) for t in self.tensors)
        object.__setattr__(self, 'tensors', tensors)
        for i, t in enumerate(tensors):
            if t.ndim != 4:
                raise ShapeMismatchError(f"MPO site {i} has rank {t.ndim}, expected 4", left=t.shape, right=4)
        for i in range(len(tensors) - 1):
            if tensors[i].shape[3] != tensors[i + 1].shape[0]:
                raise ShapeMismatchError(
                    f"MPO bond {i}: {tensors[i].shape[3]} != {tensors[i + 1].shape[0]}",
                    left=tensors[i].shape, right=tensors[i + 1].shape,
                )
        if tensors and (tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1):
            raise ShapeMismatchError(
                f"MPO needs dim-1 ends, got {tensors[0].shape[0]} and {tensors[-1].shape[3]}",
                left=tensors[0].shape, right=tensors[-1].shape,
            )

    def __len__(self) -> int:
        return len(self.tensors)

    def to_dense(self) -> np.ndarray:
        """Operator matrix (prod out) x (prod in)."""
        out = self.tensors[0]
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=([-1], [0]))
        n = len(self.tensors)
        out = out.reshape(out.shape[1:-1])
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        out = out.transpose(perm)
        rows = int(np.prod([t.shape[1] for t in self.tensors]))
        return out.reshape(rows, -1)


@dataclass
class ZipUpEnvs:
    """Left/right environments of the zip-up sweeps, indexed (y, o, x)."""
    left_envs: List[Optional[np.ndarray]]
    right_envs: List[Optional[np.ndarray]]

    @classmethod
    def empty(cls, n: int) -> 'ZipUpEnvs':
        left: List[Optional[np.ndarray]] = [None] * n
        right: List[Optional[np.ndarray]] = [None] * n
        left[0] = np.ones((1, 1, 1), dtype=complex)
        right[n - 1] = np.ones((1, 1, 1), dtype=complex)
        return cls(left, right)


@dataclass
class ZipUpResult:
    mps: Mps
    losses: List[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False


def _left_env(env: np.ndarray, y: np.ndarray, o: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.tensordot(env, x, axes=([2], [0]))
    t = np.tensordot(t, o, axes=([1, 2], [0, 2]))
    t = np.tensordot(t, y.conj(), axes=([0, 2], [0, 1]))
    return t.transpose(2, 1, 0)


def _right_env(env: np.ndarray, y: np.ndarray, o: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.tensordot(x, env, axes=([2], [2]))
    t = np.tensordot(o, t, axes=([2, 3], [1, 3]))
    return np.tensordot(y.conj(), t, axes=([1, 2], [1, 3]))


def _site_target(left: np.ndarray, right: np.ndarray, o: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.tensordot(left, x, axes=([2], [0]))
    t = np.tensordot(t, o, axes=([1, 2], [0, 2]))
    return np.tensordot(t, right, axes=([1, 3], [2, 1]))


def _check_apply(o: Mpo, x: Mps) -> None:
    if x.periodic:
        raise ShapeMismatchError("zip-up does not take periodic MPS", left='periodic', right='open')
    if len(o) != len(x):
        raise ShapeMismatchError(f"MPO of length {len(o)} applied to MPS of length {len(x)}", left=len(o), right=len(x))
    for i, (ot, xt) in enumerate(zip(o.tensors, x.tensors)):
        if ot.shape[2] != xt.shape[1]:
            raise ShapeMismatchError(
                f"site {i}: MPO input dim {ot.shape[2]} != MPS physical dim {xt.shape[1]}",
                left=(i, ot.shape), right=(i, xt.shape),
            )


def _target_bond_dims(phys: Sequence[int], max_rank: int) -> List[int]:
    dims = []
    for i in range(len(phys) - 1):
        left = math.prod(phys[:i + 1])
        right = math.prod(phys[i + 1:])
        dims.append(min(max_rank, left, right))
    return dims


def zip_up(
    o: Mpo,
    x: Mps,
    spec: TruncationSpec,
    tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
    seed: int = 0,
) -> ZipUpResult:
    """Variational Y ~= O X with bond dims at most ``spec.max_rank``.

    Y starts from seeded complex-normal tensors, right-canonicalized.
    Each site update sets Y_i to the environment contraction A O X B;
    left-to-right passes keep the Q of its QR, right-to-left passes the Q
    of its LQ, and the final site of each pass keeps the full update.
    The loss -|Y_i|^2 is recorded per update, and a full sweep with
    std/|mean| of its losses below ``tol`` ends the iteration.

    Raises:
        ZeroNormError: If X or O X vanishes
        ShapeMismatchError: On length / physical dim mismatch or
            periodic input
    """
    _check_apply(o, x)
    if x._raw_norm() == 0.0:
        raise ZeroNormError("zip-up input MPS has zero norm")
    n = len(x)
    phys = [t.shape[1] for t in o.tensors]
    dims = [1] + _target_bond_dims(phys, spec.max_rank) + [1]

    rng = rng_for(seed, 'zipup')
    ys: List[np.ndarray] = []
    for i in range(n):
        shape = (dims[i], phys[i], dims[i + 1])
        ys.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    for i in range(n - 1, 0, -1):
        lower, ys[i] = lq_split(ys[i], [1, 2])
        ys[i - 1] = np.tensordot(ys[i - 1], lower, axes=([2], [0]))

    envs = ZipUpEnvs.empty(n)
    for i in range(n - 1, 0, -1):
        envs.right_envs[i - 1] = _right_env(envs.right_envs[i], ys[i], o.tensors[i], x.tensors[i])

    losses: List[float] = []
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        sweep_losses: List[float] = []
        for i in range(n):
            target = _site_target(envs.left_envs[i], envs.right_envs[i], o.tensors[i], x.tensors[i])
            sweep_losses.append(-float(np.vdot(target, target).real))
            if i == n - 1:
                ys[i] = target
                break
            ys[i], _ = qr_split(target, [0, 1])
            envs.left_envs[i + 1] = _left_env(envs.left_envs[i], ys[i], o.tensors[i], x.tensors[i])
        for i in range(n - 1, -1, -1):
            if i == n - 1:
                target = ys[i]
            else:
                target = _site_target(envs.left_envs[i], envs.right_envs[i], o.tensors[i], x.tensors[i])
                sweep_losses.append(-float(np.vdot(target, target).real))
            if i == 0:
                ys[i] = target
                break
            _, ys[i] = lq_split(target, [1, 2])
            envs.right_envs[i - 1] = _right_env(envs.right_envs[i], ys[i], o.tensors[i], x.tensors[i])
        losses.extend(sweep_losses)

        arr = np.asarray(sweep_losses)
        mean = float(arr.mean())
        if mean == 0.0:
            raise ZeroNormError("MPO applied to the MPS gives zero")
        if float(arr.std()) / abs(mean) < tol:
            converged = True
            break

    return ZipUpResult(Mps(tuple(ys), False, x.log_scale), losses, sweeps, converged)


def zip_up_apply(
    o: Mpo,
    x: Mps,
    spec: TruncationSpec,
    tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
    seed: int = 0,
) -> Tuple[Mps, List[float]]:
    """Apply ``o`` to ``x`` with zip-up compression; see ``zip_up``.

    Returns:
        (compressed MPS, loss history)
    """
    result = zip_up(o, x, spec, tol, max_sweeps, seed)
    return result.mps, result.losses


# Flat tensor (up, left, down, right) -> MPO (left, out, in, right) for a
# boundary moving in the given direction
_MPO_AXES = {
    'right': (0, 3, 1, 2),
    'left': (0, 1, 3, 2),
    'down': (1, 2, 0, 3),
    'up': (1, 0, 2, 3),
}


def line_mpo(line: Sequence[np.ndarray], direction: str) -> Mpo:
    """A row or column of flat tensors as an MPO acting toward ``direction``."""
    axes = _MPO_AXES[direction]
    return Mpo(tuple(np.transpose(t, axes) for t in line))


def absorb_line(
    boundary: Mps,
    line: Sequence[np.ndarray],
    direction: str,
    spec: TruncationSpec,
    tol: float = ZIPUP_TOL,
    max_sweeps: int = MAX_SWEEPS,
    seed: int = 0,
) -> Mps:
    """Absorb one line into a boundary MPS and renormalize.

    The first line after a trivial boundary is taken exactly; later ones
    go through the zip-up. The removed norm is added to ``log_scale``.
    """
    mpo = line_mpo(line, direction)
    if boundary.is_trivial:
        if any(t.shape[2] != 1 for t in mpo.tensors):
            raise ShapeMismatchError(
                "first line must have dim-1 legs toward the trivial boundary",
                left=[t.shape for t in mpo.tensors], right=boundary.phys_dims,
            )
        scalar = np.prod([t[0, 0, 0] for t in boundary.tensors])
        tensors = [t[:, :, 0, :] for t in mpo.tensors]
        tensors[0] = tensors[0] * scalar
        out = Mps(tuple(tensors), False, boundary.log_scale)
    else:
        out = zip_up(mpo, boundary, spec, tol, max_sweeps, seed).mps
    normed, log_scale = out.scaled_log()
    return Mps(normed.tensors, False, log_scale)


def bmps_contract(
    net: 'FlatNetwork',
    direction: str,
    spec: TruncationSpec,
    upto: Optional[int] = None,
    seed: int = 0,
) -> Mps:
    """Boundary MPS after absorbing ``upto`` lines (default all).

    ``direction`` is the way the boundary moves: 'down' starts at the top
    row, 'up' at the bottom row, 'right' at the left column and 'left' at
    the right column.
    """
    from blockbp.environment import GridEnvironment

    env = GridEnvironment(net.grid(), spec, seed=seed)
    rows, cols = env.shape
    if direction == 'down':
        return env.top(rows if upto is None else upto)
    if direction == 'up':
        return env.bottom(-1 if upto is None else rows - 1 - upto)
    if direction == 'right':
        return env.left(cols if upto is None else upto)
    if direction == 'left':
        return env.right(-1 if upto is None else cols - 1 - upto)
    raise ValueError(f"unknown direction {direction!r}")


def bmps_value(net: 'FlatNetwork', spec: TruncationSpec, seed: int = 0) -> complex:
    """Full contraction of an open flat network by boundary MPS."""
    boundary = bmps_contract(net, 'down', spec, seed=seed)
    return complex(boundary.to_dense()[0])


def random_message(
    edge_sites: Sequence[Tuple[int, int]],
    leg_dims: Sequence[int],
    kind: str = 'double',
    seed: int = 0,
) -> Mps:
    """Seeded unit-norm product MPS over the legs of one super edge.

    ``edge_sites`` are the sender's lattice sites along the edge in
    boundary order, one per leg; each site tensor is drawn from its own
    stream keyed by the site. ``kind`` 'double' draws each site as
    M M^H over the fused (ket, bra) leg, so every leg dim must be a
    perfect square; 'single' draws uniform entries in [0, 1).
    """
    if len(edge_sites) != len(leg_dims):
        raise ShapeMismatchError(
            f"{len(edge_sites)} edge sites for {len(leg_dims)} legs", left=tuple(edge_sites), right=tuple(leg_dims),
        )
    tensors = []
    for site, p in zip(edge_sites, leg_dims):
        rng = rng_for(seed, 'messages', *site)
        if kind == 'double':
            dim = math.isqrt(p)
            if dim * dim != p:
                raise ShapeMismatchError(f"double-layer leg dim {p} is not a square", left=p, right=dim * dim)
            m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            v = (m @ m.conj().T).reshape(-1)
        elif kind == 'single':
            v = rng.uniform(0.0, 1.0, size=p).astype(complex)
        else:
            raise ValueError(f"unknown message kind {kind!r}")
        tensors.append((v / np.linalg.norm(v)).reshape(1, p, 1))
    return Mps(tuple(tensors))


def mps_mean_square_error(m1: Mps, m2: Mps) -> float:
    """2 - 2 |<m1|m2>| after normalizing both, so global phases drop out."""
    ov = m1._raw_overlap(m2)
    n1, n2 = m1._raw_norm(), m2._raw_norm()
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroNormError("mean square error of a zero MPS")
    return max(0.0, 2.0 - 2.0 * abs(ov) / (n1 * n2))
