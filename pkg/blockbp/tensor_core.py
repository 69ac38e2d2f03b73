"""
Dense tensor arithmetic.

Contraction over paired legs and the QR / LQ / truncated-SVD
factorizations used by every higher module. Tensors are complex numpy
arrays; ``DenseTensor`` adds optional leg labels on top so that
networks can be contracted by matching labels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from blockbp.constants import TRUNCATION_CUTOFF
from blockbp.errors import DecompositionError, ShapeMismatchError

Leg = Union[int, Hashable]


@dataclass(frozen=True)
class DenseTensor:
    """Complex dense tensor with optional per-leg labels.

    Attributes:
        data: Entries, stored as complex128 in row-major order
        labels: One identifier per leg, or None
    """
    data: np.ndarray
    labels: Optional[Tuple[Hashable, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, 'data', np.asarray(self.data, dtype=complex))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.data.ndim:
                raise ShapeMismatchError(
                    f"{len(labels)} labels for a rank-{self.data.ndim} tensor",
                    left=labels, right=self.data.shape,
                )
            object.__setattr__(self, 'labels', labels)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    def leg(self, leg: Leg) -> int:
        """Position of a leg given by index or label."""
        if isinstance(leg, (int, np.integer)) and (self.labels is None or leg not in self.labels):
            return int(leg)
        if self.labels is None or leg not in self.labels:
            raise KeyError(f"unknown leg {leg!r}")
        return self.labels.index(leg)

    def contract(self, other: 'DenseTensor') -> 'DenseTensor':
        """Contract over every label shared with ``other``."""
        if self.labels is None or other.labels is None:
            raise ValueError("label contraction needs labeled tensors")
        shared = [lab for lab in self.labels if lab in other.labels]
        return contract(self, other, [(lab, lab) for lab in shared])

    def scaled(self, alpha: complex) -> 'DenseTensor':
        return DenseTensor(alpha * self.data, self.labels)


TensorLike = Union[DenseTensor, np.ndarray]


def _data(t: TensorLike) -> np.ndarray:
    return t.data if isinstance(t, DenseTensor) else np.asarray(t)


def _leg(t: TensorLike, leg: Leg) -> int:
    if isinstance(t, DenseTensor):
        return t.leg(leg)
    return int(leg)


def _rest_labels(t: TensorLike, used: Sequence[int]) -> Optional[List[Hashable]]:
    if not isinstance(t, DenseTensor) or t.labels is None:
        return None
    return [lab for i, lab in enumerate(t.labels) if i not in used]


def contract(t1: TensorLike, t2: TensorLike, pairs: Sequence[Tuple[Leg, Leg]]) -> TensorLike:
    """Sum over paired legs of two tensors.

    The result carries the unpaired legs of ``t1`` followed by those of
    ``t2``, each in original order. A ``DenseTensor`` result is returned
    when either input is a ``DenseTensor``.

    Raises:
        ShapeMismatchError: If a pair of legs has different dimensions
    """
    a, b = _data(t1), _data(t2)
    legs1 = [_leg(t1, p) for p, _ in pairs]
    legs2 = [_leg(t2, q) for _, q in pairs]
    for (p, q), i, j in zip(pairs, legs1, legs2):
        if a.shape[i] != b.shape[j]:
            raise ShapeMismatchError(
                f"cannot pair leg {p!r} (dim {a.shape[i]}) with leg {q!r} (dim {b.shape[j]})",
                left=(p, a.shape[i]), right=(q, b.shape[j]),
            )
    out = np.tensordot(a, b, axes=(legs1, legs2))
    if not (isinstance(t1, DenseTensor) or isinstance(t2, DenseTensor)):
        return out
    lab1, lab2 = _rest_labels(t1, legs1), _rest_labels(t2, legs2)
    labels = None if lab1 is None or lab2 is None else tuple(lab1 + lab2)
    return DenseTensor(out, labels)


def matricize(t: np.ndarray, row_legs: Sequence[int]) -> Tuple[np.ndarray, Tuple[int, ...], Tuple[int, ...], List[int]]:
    """Reshape ``t`` into a matrix with ``row_legs`` as rows.

    Returns:
        (matrix, row_shape, col_shape, column legs)
    """
    row_legs = [int(i) for i in row_legs]
    if not row_legs or len(row_legs) >= t.ndim:
        raise ValueError(f"row legs {row_legs} must be a proper nonempty subset of {t.ndim} legs")
    col_legs = [i for i in range(t.ndim) if i not in row_legs]
    row_shape = tuple(t.shape[i] for i in row_legs)
    col_shape = tuple(t.shape[i] for i in col_legs)
    m = np.transpose(t, row_legs + col_legs).reshape(int(np.prod(row_shape)), int(np.prod(col_shape)))
    return m, row_shape, col_shape, col_legs


def fuse_legs(t: np.ndarray, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Transpose ``t`` to the concatenated ``groups`` and fuse each group.

    The first leg of a group is the major index of the fused leg. Every
    leg must appear in exactly one group.
    """
    order = [int(i) for g in groups for i in g]
    if sorted(order) != list(range(t.ndim)):
        raise ValueError(f"groups {groups} do not partition {t.ndim} legs")
    shape = tuple(int(np.prod([t.shape[i] for i in g])) for g in groups)
    return np.transpose(t, order).reshape(shape)


def split_leg(t: np.ndarray, leg: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of fusing: replace ``leg`` by legs of ``dims`` (major first)."""
    leg = leg % t.ndim
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims)) != t.shape[leg]:
        raise ShapeMismatchError(f"cannot split leg {leg} into {dims}", t.shape[leg], dims)
    return t.reshape(t.shape[:leg] + dims + t.shape[leg + 1:])


def _split_result(t: TensorLike, left_legs: Sequence[int], right_legs: Sequence[int],
                  a: np.ndarray, b: np.ndarray, bond: Hashable) -> Tuple[TensorLike, TensorLike]:
    if isinstance(t, DenseTensor) and t.labels is not None:
        la = tuple(t.labels[i] for i in left_legs) + (bond,)
        lb = (bond,) + tuple(t.labels[i] for i in right_legs)
        return DenseTensor(a, la), DenseTensor(b, lb)
    return a, b


def qr_split(t: TensorLike, left_legs: Sequence[Leg], bond: Hashable = '_bond') -> Tuple[TensorLike, TensorLike]:
    """QR factorization ``t = Q R`` with ``left_legs`` on Q.

    Q has orthonormal columns when matricized on ``left_legs``; its last
    leg and the first leg of R are the new bond.
    """
    data = _data(t)
    rows = [_leg(t, leg) for leg in left_legs]
    m, row_shape, col_shape, cols = matricize(data, rows)
    q, r = scipy.linalg.qr(m, mode='economic')
    k = q.shape[1]
    return _split_result(t, rows, cols, q.reshape(row_shape + (k,)), r.reshape((k,) + col_shape), bond)


def lq_split(t: TensorLike, right_legs: Sequence[Leg], bond: Hashable = '_bond') -> Tuple[TensorLike, TensorLike]:
    """LQ factorization ``t = L Q`` with ``right_legs`` on Q.

    Q has orthonormal rows (QQᴴ = 1) when matricized on ``right_legs``.
    """
    data = _data(t)
    qlegs = [_leg(t, leg) for leg in right_legs]
    rows = [i for i in range(data.ndim) if i not in qlegs]
    m, row_shape, _, _ = matricize(data, rows)
    col_shape = tuple(data.shape[i] for i in qlegs)
    q, r = scipy.linalg.qr(m.conj().T, mode='economic')
    k = q.shape[1]
    lower = r.conj().T.reshape(row_shape + (k,))
    upper = q.conj().T.reshape((k,) + col_shape)
    return _split_result(t, rows, qlegs, lower, upper, bond)


@dataclass(frozen=True)
class TruncationSpec:
    """Truncation policy for SVD-based and variational compressions.

    Attributes:
        max_rank: Largest bond dimension kept
        cutoff: Singular values below cutoff * largest are dropped
    """
    max_rank: int
    cutoff: float = TRUNCATION_CUTOFF

    def __post_init__(self) -> None:
        if self.max_rank < 1:
            raise ValueError(f"max_rank must be positive, got {self.max_rank}")
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be nonnegative, got {self.cutoff}")


def _svd(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver='gesdd')
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver='gesvd')
        except np.linalg.LinAlgError as e:
            raise DecompositionError(f"SVD did not converge: {e}", shape=m.shape) from e


def svd_truncate(
    t: TensorLike,
    left_legs: Sequence[Leg],
    spec: TruncationSpec,
    bond: Hashable = '_bond',
) -> Tuple[TensorLike, np.ndarray, TensorLike, float]:
    """Truncated SVD ``t ≈ U diag(s) Vh``.

    Returns:
        (U, s, Vh, discarded_weight) where discarded_weight is the sum of
        dropped squared singular values over the total.
    """
    data = _data(t)
    rows = [_leg(t, leg) for leg in left_legs]
    m, row_shape, col_shape, cols = matricize(data, rows)
    u, s, vh = _svd(m)
    total = float(np.sum(s ** 2))
    if total == 0.0:
        keep = 1
    else:
        keep = int(np.count_nonzero(s > spec.cutoff * s[0]))
        keep = max(1, min(spec.max_rank, keep))
    discarded = float(np.sum(s[keep:] ** 2)) / total if total > 0 else 0.0
    u = u[:, :keep].reshape(row_shape + (keep,))
    vh = vh[:keep, :].reshape((keep,) + col_shape)
    uu, vv = _split_result(t, rows, cols, u, vh, bond)
    return uu, s[:keep].copy(), vv, discarded


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (m + mᴴ) / 2 of a square matrix."""
    return 0.5 * (m + m.conj().T)


def psd_clip(m: np.ndarray) -> Tuple[np.ndarray, float]:
    """Project a hermitian matrix onto the PSD cone.

    Returns:
        (clipped matrix, most negative eigenvalue relative to the largest
        magnitude).
    """
    h = hermitize(m)
    w, v = scipy.linalg.eigh(h)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    worst = float(w[0] / scale) if scale > 0 else 0.0
    if worst >= 0:
        return h, worst
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T, worst
