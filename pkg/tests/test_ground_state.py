"""
Tests for blockbp.ground_state module.
"""
import numpy as np
import pytest

from blockbp.environment import lattice_environment
from blockbp.errors import ConfigError
from blockbp.models import EvolutionConfig, MethodSpec, ModelSpec
from blockbp.network import Bond, Lattice, PepsNetwork
from blockbp.observables import center_energy, energy_report
from blockbp.oracles import exact_diag, hamiltonian_matrix, peps_to_state
from blockbp.ground_state import (
    apply_gate_in_block,
    block_partitions,
    evolve_sweep,
    gate_group,
    initial_state,
    run_bp_ground_state,
    run_ground_state,
    trotter_gates,
)
from blockbp.tensor_core import TruncationSpec


def _ising(rows=2, cols=2, B=1.0):
    return ModelSpec('transverse-ising', B=B, rows=rows, cols=cols)


class TestTrotterGates:
    """Tests for the gate stream."""

    def test_groups(self):
        """Test group labels by orientation and parity."""
        assert gate_group(Bond((0, 0), 'h')) == 'horizontal-even'
        assert gate_group(Bond((3, 1), 'h')) == 'horizontal-odd'
        assert gate_group(Bond((2, 5), 'v')) == 'vertical-even'
        assert gate_group(Bond((1, 0), 'v')) == 'vertical-odd'

    def test_one_gate_per_bond_in_group_order(self):
        """Test ordering and coverage of the stream."""
        model = _ising(3, 3)
        gates = trotter_gates(model, 0.01)
        assert len(gates) == len(model.lattice.bonds())
        groups = [g.group for g in gates]
        assert groups == sorted(groups, key=['horizontal-even', 'horizontal-odd', 'vertical-even', 'vertical-odd'].index)

    def test_gate_matrices(self):
        """Test identity at zero step and hermitian positive gates."""
        model = _ising()
        for gate in trotter_gates(model, 0.0):
            np.testing.assert_allclose(gate.matrix, np.eye(4), atol=1e-14)
        for gate in trotter_gates(model, 0.1):
            np.testing.assert_allclose(gate.matrix, gate.matrix.conj().T, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(gate.matrix) > 0)

    def test_classical_model_rejected(self):
        """Test that the classical model has no gates."""
        with pytest.raises(ConfigError):
            trotter_gates(ModelSpec('classical-ising', beta=0.3, rows=2, cols=2), 0.01)
        with pytest.raises(ConfigError):
            trotter_gates(_ising(), -0.1)


class TestInitialState:
    """Tests for initial_state."""

    def test_auto(self):
        """Test random TI and Neel AFH defaults."""
        config = EvolutionConfig(D=2, seed=3)
        psi = initial_state(_ising(), config)
        assert psi.bond_dim == 2
        neel = initial_state(ModelSpec('afh', rows=2, cols=2), config)
        assert neel.bond_dim == 1
        state = peps_to_state(neel)
        assert abs(state[0b0110]) == pytest.approx(1.0)

    def test_plus(self):
        """Test the |+> product state."""
        psi = initial_state(_ising(), EvolutionConfig(initial='plus'))
        np.testing.assert_allclose(np.abs(peps_to_state(psi)), np.full(16, 0.25))


class TestLocalUpdate:
    """Tests for the gate application in an environment."""

    def test_identity_gate_keeps_state(self):
        """Test that an identity gate at full bond dim changes nothing physical."""
        psi = PepsNetwork.random(Lattice(2, 2), d=2, D=2, seed=5)
        env = lattice_environment(psi, TruncationSpec(64))
        bond = Bond((0, 0), 'h')
        updated = psi.with_sites(apply_gate_in_block(psi, env, bond, np.eye(4), D=2))
        before, after = peps_to_state(psi), peps_to_state(updated)
        fidelity = abs(np.vdot(before, after)) / (np.linalg.norm(before) * np.linalg.norm(after))
        assert fidelity == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(after) == pytest.approx(np.linalg.norm(before), rel=1e-6)

    def test_gated_state_keeps_unit_norm(self):
        """Test that a non-unitary gate under the exact environment leaves a normalized G|psi>."""
        psi = PepsNetwork.random(Lattice(2, 2), d=2, D=2, seed=7)
        n = np.linalg.norm(peps_to_state(psi))
        psi = psi.with_sites({(0, 0): psi.site((0, 0)) / n})
        bond = Bond((0, 0), 'h')
        gate = next(g for g in trotter_gates(_ising(B=1.0), 0.3) if g.bond == bond)
        env = lattice_environment(psi, TruncationSpec(64))
        updated = psi.with_sites(apply_gate_in_block(psi, env, bond, gate.matrix, D=4))

        after = peps_to_state(updated)
        expected = np.kron(gate.matrix, np.eye(4)) @ peps_to_state(psi)
        assert np.linalg.norm(after) == pytest.approx(1.0, rel=1e-8)
        fidelity = abs(np.vdot(expected, after)) / np.linalg.norm(expected)
        assert fidelity == pytest.approx(1.0, abs=1e-8)

    def test_vertical_bond_shapes(self):
        """Test that a vertical update keeps the bond dim."""
        psi = PepsNetwork.random(Lattice(2, 2), d=2, D=2, seed=6)
        env = lattice_environment(psi, TruncationSpec(64))
        gate = trotter_gates(_ising(), 0.1)[-1]
        assert gate.bond.orientation == 'v'
        updates = apply_gate_in_block(psi, env, gate.bond, gate.matrix, D=2)
        for site, t in updates.items():
            assert t.shape == psi.site(site).shape


class TestRunGroundState:
    """Tests for the imaginary-time drivers."""

    def test_zero_steps(self):
        """Test that no sweeps give only the initial row."""
        psi, rows = run_ground_state(_ising(), EvolutionConfig(steps=0, D=2, block=(2, 2), seed=1))
        assert len(rows) == 1
        assert rows[0].sweep == 0 and rows[0].energy is not None

    def test_energy_decreases(self):
        """Test a few sweeps on a lattice covered by one block."""
        config = EvolutionConfig(steps=3, dtau=0.05, D=2, block=(2, 2), seed=1)
        _, rows = run_ground_state(_ising(), config)
        assert len(rows) == 4
        assert rows[-1].energy < rows[0].energy

    def test_lattice_mismatch(self):
        """Test that the initial PEPS must live on the model lattice."""
        psi0 = PepsNetwork.random(Lattice(2, 3), d=2, D=2)
        with pytest.raises(ConfigError):
            run_ground_state(_ising(), EvolutionConfig(steps=0), psi0=psi0)

    def test_classical_model_rejected(self):
        """Test that classical models cannot be evolved."""
        with pytest.raises(ConfigError):
            run_ground_state(ModelSpec('classical-ising', beta=0.3, rows=2, cols=2), EvolutionConfig(steps=1))

    def test_single_site_blocks_match_bp(self):
        """Test that 1x1 blocks follow the plain-BP update."""
        config = EvolutionConfig(
            steps=1, dtau=0.05, D=2, block=(1, 1), seed=2, message_tol=1e-12, max_rounds=60,
        )
        model = _ising(2, 3)
        _, block_rows = run_ground_state(model, config)
        _, bp_rows = run_bp_ground_state(model, config)
        assert block_rows[0].energy == pytest.approx(bp_rows[0].energy, abs=1e-5)
        assert block_rows[-1].energy == pytest.approx(bp_rows[-1].energy, abs=1e-5)

    def test_evolve_sweep(self):
        """Test one sweep without energy measurement."""
        config = EvolutionConfig(dtau=0.05, D=2, block=(2, 2), seed=4)
        model = _ising(4, 4)
        psi = initial_state(model, config)
        out, rows = evolve_sweep(model, config, psi)
        assert out.lattice == psi.lattice
        assert rows and all(r.energy is None for r in rows)

    def test_block_partitions(self):
        """Test the offsets visited on a 4x4 lattice."""
        parts = block_partitions(EvolutionConfig(block=(2, 2)), Lattice(4, 4))
        assert [p.offset for p in parts] == [(0, 0), (1, 1)]
        single = block_partitions(EvolutionConfig(block=(1, 1)), Lattice(4, 4))
        assert len(single) == 1 and len(single[0].blocks) == 16

    def test_bp_baseline_needs_finite_lattice(self):
        """Test that the plain-BP driver refuses unit cells."""
        model = ModelSpec('transverse-ising', B=1.0, rows=2, cols=2, boundary='infinite')
        with pytest.raises(ConfigError):
            run_bp_ground_state(model, EvolutionConfig(steps=1))

    @pytest.mark.slow
    def test_approaches_exact_ground_state(self):
        """Test the energy after many sweeps against exact diagonalization."""
        model = _ising(2, 2, B=2.0)
        config = EvolutionConfig(steps=60, dtau=0.05, D=2, block=(2, 2), seed=3, dtau_schedule='halving', min_dtau=0.005)
        _, rows = run_ground_state(model, config)
        exact, _ = exact_diag(model)
        assert rows[-1].energy == pytest.approx(exact, abs=2e-2)
        assert rows[-1].energy >= exact - 1e-8


def _dense_energy(psi, model):
    state = peps_to_state(psi)
    h = hamiltonian_matrix(model)
    return float((np.vdot(state, h @ state) / np.vdot(state, state)).real) / psi.lattice.n_sites


def _gauge_bond(psi, bond, g):
    """Insert g g^-1 on ``bond``."""
    a, b = psi.lattice.bond_sites(bond)
    ginv = np.linalg.inv(g)
    if bond.orientation == 'h':
        ta = np.einsum('puldx,xr->puldr', psi.site(a), g)
        tb = np.einsum('lx,puxdr->puldr', ginv, psi.site(b))
    else:
        ta = np.einsum('pulxr,xd->puldr', psi.site(a), g)
        tb = np.einsum('ux,pxldr->puldr', ginv, psi.site(b))
    return psi.with_sites({a: ta, b: tb})


class TestEnergyConsistency:
    """Energies of evolved and transformed states against dense references."""

    @pytest.mark.parametrize('model', [
        ModelSpec('transverse-ising', B=2.0, rows=3, cols=3),
        ModelSpec('afh', rows=3, cols=3),
    ], ids=['ising', 'afh'])
    def test_matches_dense_hamiltonian(self, model):
        """Test RDM energies of an evolved state against <psi|H|psi> / <psi|psi>."""
        config = EvolutionConfig(steps=2, dtau=0.05, D=2, block=(3, 3), seed=5)
        psi, rows = run_ground_state(model, config)
        dense = _dense_energy(psi, model)
        exact = energy_report(psi, model, MethodSpec(kind='exact'))
        bmps = energy_report(psi, model, MethodSpec(kind='bmps', chi=64))
        assert exact.energy_per_site == pytest.approx(dense, abs=1e-8)
        assert bmps.energy_per_site == pytest.approx(dense, abs=1e-8)
        assert rows[-1].energy == pytest.approx(dense, abs=1e-7)

    @pytest.mark.parametrize('method', [
        MethodSpec(kind='exact'),
        MethodSpec(kind='bmps', chi=64),
        MethodSpec(kind='blockbp', block=(2, 2), chi_m=16, chi=64, tol=1e-20, max_rounds=200, seed=3),
    ], ids=['exact', 'bmps', 'blockbp'])
    def test_gauge_invariance(self, method):
        """Test that G and G^-1 on three bonds leave every energy unchanged."""
        model = _ising(4, 4, B=1.5)
        psi = PepsNetwork.random(Lattice(4, 4), d=2, D=2, seed=21)
        rng = np.random.default_rng(4)
        gauged = psi
        for bond in (Bond((0, 0), 'h'), Bond((1, 1), 'h'), Bond((1, 2), 'v')):
            g = np.eye(2) + 0.3 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            gauged = _gauge_bond(gauged, bond, g)
        np.testing.assert_allclose(peps_to_state(gauged), peps_to_state(psi), atol=1e-10)

        before = energy_report(psi, model, method)
        after = energy_report(gauged, model, method)
        assert after.energy_per_site == pytest.approx(before.energy_per_site, abs=1e-8)
        for key, value in before.bond_energies.items():
            assert after.bond_energies[key] == pytest.approx(value, abs=1e-8)


class TestEvolutionTrace:
    """Tests for the shape of the energy trace."""

    def test_vanishing_step_keeps_energy(self):
        """Test that one sweep at dtau = 1e-8 moves the energy by less than 1e-6 relative."""
        model = _ising(3, 3, B=2.0)
        _, rows = run_ground_state(model, EvolutionConfig(steps=1, dtau=1e-8, D=2, block=(3, 3), seed=6))
        assert abs(rows[-1].energy - rows[0].energy) < 1e-6 * abs(rows[0].energy)

    def test_energy_trace_is_monotone(self):
        """Test a nonincreasing energy after a five-sweep transient."""
        model = _ising(3, 3, B=3.0)
        config = EvolutionConfig(steps=12, dtau=0.02, D=2, block=(3, 3), seed=1)
        _, rows = run_ground_state(model, config)
        energies = [r.energy for r in rows if r.energy is not None]
        assert len(energies) == 13
        tail = energies[5:]
        assert all(b <= a + 1e-8 for a, b in zip(tail, tail[1:]))
        assert energies[-1] < energies[0]

    @pytest.mark.slow
    def test_single_site_blocks_follow_bp_trajectory(self):
        """Test fifty sweeps of 1x1 blocks against the plain-BP evolution on 4x4."""
        config = EvolutionConfig(
            steps=50, dtau=0.05, D=2, block=(1, 1), seed=2, message_tol=1e-12, max_rounds=60,
        )
        model = _ising(4, 4, B=2.5)
        _, block_rows = run_ground_state(model, config)
        _, bp_rows = run_bp_ground_state(model, config)
        block_energies = [r.energy for r in block_rows if r.energy is not None]
        bp_energies = [r.energy for r in bp_rows if r.energy is not None]
        assert len(block_energies) == len(bp_energies) == 51
        np.testing.assert_allclose(block_energies, bp_energies, rtol=0, atol=1e-6)


@pytest.mark.slow
class TestGroundStateAccuracy:
    """Long evolutions against exact and published energies."""

    @pytest.mark.parametrize('B', [2.5, 3.0, 3.5])
    def test_transverse_ising_against_exact_diagonalization(self, B):
        """Test 4x4 TI with D = 3 within 5e-3 relative of the exact ground state."""
        model = _ising(4, 4, B=B)
        config = EvolutionConfig(
            steps=120, dtau=0.05, D=3, block=(2, 2), seed=3, dtau_schedule='halving', min_dtau=0.005,
        )
        _, rows = run_ground_state(model, config)
        exact, _ = exact_diag(model)
        assert abs(rows[-1].energy - exact) / abs(exact) <= 5e-3

    def test_heisenberg_ten_by_ten(self):
        """Test 10x10 AFH with D = 2 and 5x5 blocks against -0.61310 per site."""
        model = ModelSpec('afh', rows=10, cols=10)
        config = EvolutionConfig(
            steps=200, dtau=0.05, D=2, block=(5, 5), seed=1, dtau_schedule='halving', min_dtau=0.001,
        )
        _, rows = run_ground_state(model, config)
        assert abs(rows[-1].energy - (-0.61310)) <= 1e-3

    def test_unit_cell_matches_tiled_lattice(self):
        """Test the 2x2-cell blockBP energy against boundary MPS on tiled lattices."""
        model = ModelSpec('afh', rows=2, cols=2, boundary='infinite')
        config = EvolutionConfig(steps=10, dtau=0.05, D=2, block=(4, 4), seed=4)
        psi, rows = run_ground_state(model, config)
        spec = TruncationSpec(32)
        tiled_5 = center_energy(psi, model, 5, spec, seed=4)
        tiled_3 = center_energy(psi, model, 3, spec, seed=4)
        assert rows[-1].energy == pytest.approx(tiled_5, abs=1e-4)
        assert tiled_3 == pytest.approx(tiled_5, abs=1e-4)
