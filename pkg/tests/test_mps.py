"""
Tests for blockbp.mps module.
"""
import numpy as np
import pytest

from blockbp.errors import ShapeMismatchError, ZeroNormError
from blockbp.mps import (
    Mpo,
    Mps,
    bmps_value,
    mps_mean_square_error,
    random_message,
    zip_up,
    zip_up_apply,
)
from blockbp.network import Lattice, PepsNetwork, build_double_layer
from blockbp.oracles import exact_contract
from blockbp.tensor_core import TruncationSpec


def _random(shape, rng):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _random_mps(phys, bond, seed=0, periodic=False):
    rng = np.random.default_rng(seed)
    n = len(phys)
    dims = [bond] * (n + 1) if periodic else [1] + [bond] * (n - 1) + [1]
    return Mps(tuple(_random((dims[i], phys[i], dims[i + 1]), rng) for i in range(n)), periodic)


def _random_mpo(phys, bond, seed=0):
    rng = np.random.default_rng(seed)
    n = len(phys)
    dims = [1] + [bond] * (n - 1) + [1]
    return Mpo(tuple(_random((dims[i], phys[i], phys[i], dims[i + 1]), rng) for i in range(n)))


class TestMps:
    """Tests for the Mps container."""

    def test_open_ends_must_be_trivial(self):
        """Test the dim-1 end check."""
        with pytest.raises(ShapeMismatchError):
            Mps((np.ones((2, 2, 1)),))

    def test_bond_mismatch(self):
        """Test adjacent bond dims must agree."""
        with pytest.raises(ShapeMismatchError):
            Mps((np.ones((1, 2, 2)), np.ones((3, 2, 1))))

    def test_overlap_matches_dense(self):
        """Test <a|b> against dense vectors."""
        a = _random_mps([2, 3, 2], 3, seed=1)
        b = _random_mps([2, 3, 2], 2, seed=2)
        expected = np.vdot(a.to_dense(), b.to_dense())
        assert a.overlap(b) == pytest.approx(expected, rel=1e-10)

    def test_periodic_overlap(self):
        """Test the traced overlap of periodic MPS."""
        a = _random_mps([2, 2, 2], 2, seed=3, periodic=True)
        b = _random_mps([2, 2, 2], 3, seed=4, periodic=True)
        expected = np.vdot(a.to_dense(), b.to_dense())
        assert a.overlap(b) == pytest.approx(expected, rel=1e-10)

    def test_log_scale(self):
        """Test that log_scale multiplies the represented vector."""
        a = _random_mps([2, 2], 2, seed=5)
        scaled = Mps(a.tensors, False, np.log(3.0))
        np.testing.assert_allclose(scaled.to_dense(), 3.0 * a.to_dense())
        assert scaled.norm() == pytest.approx(3.0 * a.norm())

    def test_normalized(self):
        """Test normalization and the removed log norm."""
        a = _random_mps([2, 3], 2, seed=6)
        unit, log_norm = a.scaled_log()
        assert unit.norm() == pytest.approx(1.0)
        assert np.exp(log_norm) == pytest.approx(a.norm())
        assert a.normalized().log_scale == 0.0

    def test_zero_norm(self):
        """Test that a zero MPS cannot be normalized."""
        zero = Mps((np.zeros((1, 2, 1)),))
        with pytest.raises(ZeroNormError):
            zero.normalized()

    def test_strip_trivial_ends(self):
        """Test removing dim-1 end sites keeps the vector."""
        a = _random_mps([1, 2, 3, 1], 2, seed=7)
        stripped = a.strip_trivial_ends()
        assert stripped.phys_dims == (2, 3)
        np.testing.assert_allclose(stripped.to_dense(), a.to_dense())

    def test_trivial(self):
        """Test the empty boundary."""
        t = Mps.trivial(4)
        assert t.is_trivial
        assert t.norm() == pytest.approx(1.0)

    def test_mean_square_error_ignores_phase(self):
        """Test that a rescaled MPS is at zero distance."""
        a = _random_mps([2, 2, 2], 2, seed=8)
        b = Mps(tuple([2j * a.tensors[0]] + list(a.tensors[1:])))
        assert mps_mean_square_error(a, b) == pytest.approx(0.0, abs=1e-12)
        c = _random_mps([2, 2, 2], 2, seed=9)
        assert mps_mean_square_error(a, c) > 0.0


class TestMpo:
    """Tests for the Mpo container."""

    def test_to_dense_product(self):
        """Test that a product MPO is a Kronecker product."""
        x = np.array([[0, 1], [1, 0]])
        z = np.array([[1, 0], [0, -1]])
        mpo = Mpo((x.reshape(1, 2, 2, 1), z.reshape(1, 2, 2, 1)))
        np.testing.assert_allclose(mpo.to_dense(), np.kron(x, z))

    def test_ends(self):
        """Test the dim-1 end check."""
        with pytest.raises(ShapeMismatchError):
            Mpo((np.ones((2, 2, 2, 1)),))


class TestZipUp:
    """Tests for the variational MPO x MPS compression."""

    def test_exact_at_full_rank(self):
        """Test that an untruncated zip-up reproduces O X."""
        o = _random_mpo([2, 2, 2], 2, seed=1)
        x = _random_mps([2, 2, 2], 2, seed=2)
        result = zip_up(o, x, TruncationSpec(16), seed=3)
        expected = o.to_dense() @ x.to_dense()
        np.testing.assert_allclose(result.mps.to_dense(), expected, rtol=1e-8, atol=1e-10)
        assert result.converged
        assert result.sweeps >= 1

    def test_truncated_rank(self):
        """Test bond dims are capped by max_rank."""
        o = _random_mpo([2, 2, 2, 2], 2, seed=4)
        x = _random_mps([2, 2, 2, 2], 3, seed=5)
        y, losses = zip_up_apply(o, x, TruncationSpec(2), seed=6)
        assert max(y.bond_dims) <= 2
        assert losses
        assert all(loss <= 0.0 for loss in losses)

    def test_seeded(self):
        """Test that the same seed gives the same result."""
        o = _random_mpo([2, 2, 2, 2], 2, seed=4)
        x = _random_mps([2, 2, 2, 2], 3, seed=5)
        a, _ = zip_up_apply(o, x, TruncationSpec(2), seed=11)
        b, _ = zip_up_apply(o, x, TruncationSpec(2), seed=11)
        for s, t in zip(a.tensors, b.tensors):
            np.testing.assert_array_equal(s, t)

    @pytest.mark.parametrize('trial', range(50))
    def test_untruncated_fidelity_and_monotone_loss(self, trial):
        """Test random untruncated applications against the dense product."""
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(2, 7))
        phys = [int(p) for p in rng.integers(2, 4, size=n)]
        o = _random_mpo(phys, int(rng.integers(1, 3)), seed=trial)
        x = _random_mps(phys, int(rng.integers(1, 4)), seed=trial + 1000)
        result = zip_up(o, x, TruncationSpec(int(np.prod(phys))), seed=trial)

        expected = o.to_dense() @ x.to_dense()
        got = result.mps.to_dense()
        fidelity = abs(np.vdot(got, expected)) ** 2 / (np.vdot(got, got).real * np.vdot(expected, expected).real)
        assert fidelity >= 1 - 1e-10

        per_sweep = 2 * n - 1
        assert len(result.losses) == per_sweep * result.sweeps
        ends = [result.losses[(k + 1) * per_sweep - 1] for k in range(result.sweeps)]
        scale = abs(ends[0])
        assert all(b <= a + 1e-10 * scale for a, b in zip(ends, ends[1:]))

    def test_sweep_counter_and_tolerance(self):
        """Test that sweeps stop at the tolerance or at the sweep budget."""
        o = _random_mpo([2, 2, 2, 2, 2], 2, seed=7)
        x = _random_mps([2, 2, 2, 2, 2], 3, seed=8)
        result = zip_up(o, x, TruncationSpec(2), tol=1e-6, max_sweeps=10, seed=9)
        assert 1 <= result.sweeps <= 10
        per_sweep = 2 * 5 - 1
        last = np.asarray(result.losses[-per_sweep:])
        below = float(last.std()) / abs(float(last.mean())) < 1e-6
        assert result.converged == below
        if not result.converged:
            assert result.sweeps == 10

        capped = zip_up(o, x, TruncationSpec(2), tol=0.0, max_sweeps=3, seed=9)
        assert capped.sweeps == 3
        assert not capped.converged

    def test_length_mismatch(self):
        """Test that lengths must agree."""
        with pytest.raises(ShapeMismatchError):
            zip_up(_random_mpo([2, 2], 1), _random_mps([2, 2, 2], 1), TruncationSpec(4))

    def test_zero_input(self):
        """Test that a zero input MPS is rejected."""
        zero = Mps(tuple(np.zeros((1, 2, 1)) for _ in range(2)))
        with pytest.raises(ZeroNormError):
            zip_up(_random_mpo([2, 2], 1), zero, TruncationSpec(4))


class TestBoundaryContraction:
    """Tests for boundary-MPS contraction and message initialization."""

    def test_bmps_matches_exact(self):
        """Test that a three-column grid is contracted exactly."""
        net = build_double_layer(PepsNetwork.random(Lattice(3, 3), 2, 2, seed=2))
        value = bmps_value(net, TruncationSpec(64))
        assert value == pytest.approx(exact_contract(net), rel=1e-8)

    def test_random_message(self):
        """Test seeded unit-norm product messages."""
        edge = [(0, 2), (1, 2)]
        m = random_message(edge, [4, 9], seed=3)
        assert m.phys_dims == (4, 9)
        assert m.norm() == pytest.approx(1.0)
        first = m.tensors[0].reshape(2, 2)
        np.testing.assert_allclose(first, first.conj().T, atol=1e-12)
        again = random_message(edge, [4, 9], seed=3)
        np.testing.assert_array_equal(m.tensors[1], again.tensors[1])

    def test_random_message_draws_per_site(self):
        """Test that each site tensor depends on its own site only."""
        long = random_message([(0, 2), (1, 2), (2, 2)], [4, 4, 4], seed=5)
        short = random_message([(1, 2)], [4], seed=5)
        np.testing.assert_allclose(long.tensors[1], short.tensors[0], atol=1e-14)
        other = random_message([(1, 3)], [4], seed=5)
        assert not np.allclose(other.tensors[0], short.tensors[0])

    def test_random_message_kinds(self):
        """Test single-layer draws and invalid inputs."""
        m = random_message([(0, 0), (0, 1)], [2, 2], kind='single', seed=1)
        assert np.all(m.to_dense().real >= 0)
        with pytest.raises(ShapeMismatchError):
            random_message([(0, 0)], [3], kind='double')
        with pytest.raises(ShapeMismatchError):
            random_message([(0, 0)], [4, 4])
        with pytest.raises(ValueError):
            random_message([(0, 0)], [2], kind='triple')

