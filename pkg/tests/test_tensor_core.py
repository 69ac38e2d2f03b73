"""
Tests for blockbp.tensor_core module.
"""
import numpy as np
import pytest

from blockbp.errors import ShapeMismatchError
from blockbp.tensor_core import (
    DenseTensor,
    TruncationSpec,
    contract,
    fuse_legs,
    hermitize,
    lq_split,
    matricize,
    psd_clip,
    qr_split,
    split_leg,
    svd_truncate,
)


def _random(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestContract:
    """Tests for pairwise contraction."""

    def test_matches_einsum(self):
        """Test contraction over two leg pairs."""
        a, b = _random((2, 3, 4)), _random((4, 5, 3), seed=1)
        out = contract(a, b, [(1, 2), (2, 0)])
        np.testing.assert_allclose(out, np.einsum('ijk,kmj->im', a, b))

    def test_dimension_mismatch(self):
        """Test that mismatched legs name both sides."""
        with pytest.raises(ShapeMismatchError) as info:
            contract(_random((2, 3)), _random((4, 2)), [(1, 0)])
        assert info.value.left == (1, 3)
        assert info.value.right == (0, 4)

    def test_labeled_contraction(self):
        """Test that labeled tensors contract over shared labels."""
        a = DenseTensor(_random((2, 3)), ('i', 'j'))
        b = DenseTensor(_random((3, 4), seed=2), ('j', 'k'))
        out = a.contract(b)
        assert out.labels == ('i', 'k')
        np.testing.assert_allclose(out.data, a.data @ b.data)

    def test_scalar_result(self):
        """Test contraction over every leg."""
        a = _random((2, 3))
        assert np.isclose(complex(contract(a, a.conj(), [(0, 0), (1, 1)])), np.vdot(a, a))

    def test_label_count_checked(self):
        """Test that a wrong number of labels is rejected."""
        with pytest.raises(ShapeMismatchError):
            DenseTensor(np.zeros((2, 2)), ('a',))


class TestFactorizations:
    """Tests for QR, LQ and truncated SVD."""

    def test_qr_reconstructs(self):
        """Test that Q R equals the input and Q is an isometry."""
        t = _random((2, 3, 4, 2))
        q, r = qr_split(t, [0, 2])
        assert q.shape[:2] == (2, 4)
        rebuilt = np.einsum('ack,kbd->abcd', q, r)
        np.testing.assert_allclose(rebuilt, t, atol=1e-12)
        m = q.reshape(-1, q.shape[-1])
        np.testing.assert_allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=1e-12)

    def test_lq_reconstructs(self):
        """Test that L Q equals the input and Q has orthonormal rows."""
        t = _random((3, 4, 2))
        lower, q = lq_split(t, [1, 2])
        np.testing.assert_allclose(np.tensordot(lower, q, axes=([1], [0])), t, atol=1e-12)
        m = q.reshape(q.shape[0], -1)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-12)

    def test_svd_full_rank_exact(self):
        """Test that an untruncated SVD reconstructs the input."""
        t = _random((3, 2, 4))
        u, s, vh, discarded = svd_truncate(t, [0, 1], TruncationSpec(100, 0.0))
        np.testing.assert_allclose(np.einsum('abk,k,kc->abc', u, s, vh), t, atol=1e-12)
        assert discarded == pytest.approx(0.0, abs=1e-15)

    def test_svd_truncates_to_rank(self):
        """Test rank truncation and the discarded weight."""
        m = np.diag([4.0, 2.0, 1.0, 0.5]).astype(complex)
        u, s, vh, discarded = svd_truncate(m, [0], TruncationSpec(2))
        np.testing.assert_allclose(s, [4.0, 2.0])
        assert discarded == pytest.approx((1.0 + 0.25) / (16 + 4 + 1 + 0.25))

    def test_svd_cutoff(self):
        """Test that singular values below the cutoff are dropped."""
        m = np.diag([1.0, 1e-14]).astype(complex)
        _, s, _, _ = svd_truncate(m, [0], TruncationSpec(10))
        assert s.size == 1

    def test_zero_tensor_keeps_one(self):
        """Test that a zero tensor keeps a single zero singular value."""
        _, s, _, discarded = svd_truncate(np.zeros((3, 3)), [0], TruncationSpec(2))
        assert s.size == 1
        assert discarded == 0.0

    def test_matricize_rejects_all_legs(self):
        """Test that rows must be a proper subset of the legs."""
        with pytest.raises(ValueError):
            matricize(np.zeros((2, 2)), [0, 1])

    def test_invalid_spec(self):
        """Test TruncationSpec validation."""
        with pytest.raises(ValueError):
            TruncationSpec(0)
        with pytest.raises(ValueError):
            TruncationSpec(2, -1.0)


class TestPsd:
    """Tests for hermitization and eigenvalue clipping."""

    def test_hermitize(self):
        """Test that the hermitian part is hermitian."""
        h = hermitize(_random((4, 4)))
        np.testing.assert_allclose(h, h.conj().T)

    def test_psd_unchanged(self):
        """Test that a PSD matrix passes through."""
        a = _random((3, 3))
        m = a @ a.conj().T
        clipped, worst = psd_clip(m)
        assert worst >= -1e-12
        np.testing.assert_allclose(clipped, m, atol=1e-12)

    def test_negative_eigenvalue_clipped(self):
        """Test clipping and the reported relative eigenvalue."""
        m = np.diag([2.0, -0.5]).astype(complex)
        clipped, worst = psd_clip(m)
        assert worst == pytest.approx(-0.25)
        np.testing.assert_allclose(clipped, np.diag([2.0, 0.0]), atol=1e-12)


class TestLegFusion:
    """Tests for fusing and splitting legs."""

    def test_fuse_order(self):
        """Test that the first leg of a group is the major index."""
        t = _random((2, 3, 4), seed=3)
        fused = fuse_legs(t, [[2, 0], [1]])
        assert fused.shape == (8, 3)
        assert fused[3 * 2 + 1, 2] == t[1, 2, 3]

    def test_split_inverts_fuse(self):
        """Test that splitting recovers the fused tensor."""
        t = _random((2, 3, 5), seed=4)
        fused = fuse_legs(t, [[0], [1, 2]])
        np.testing.assert_array_equal(split_leg(fused, -1, (3, 5)), t)

    def test_bad_groups(self):
        """Test that groups must cover each leg once."""
        with pytest.raises(ValueError):
            fuse_legs(np.zeros((2, 2)), [[0], [0]])

    def test_bad_split(self):
        """Test that split dims must multiply to the leg dim."""
        with pytest.raises(ShapeMismatchError):
            split_leg(np.zeros((6,)), 0, (4, 2))
