"""
Tests for blockbp.storage module.
"""
import json

import numpy as np
import pytest

from blockbp.errors import PepsFormatError
from blockbp.network import Lattice, PepsNetwork
from blockbp.storage import (
    MAGIC,
    decode_peps,
    encode_peps,
    load_peps,
    read_sidecar,
    save_peps,
    sidecar_path,
)


@pytest.fixture
def psi():
    return PepsNetwork.random(Lattice(2, 3, 'periodic'), d=2, D=2, seed=9)


class TestContainer:
    """Tests for the binary container."""

    def test_round_trip(self, psi):
        """Test that decoding restores lattice and tensors exactly."""
        out = decode_peps(encode_peps(psi))
        assert out.lattice == psi.lattice
        for a, b in zip(out.sites, psi.sites):
            np.testing.assert_array_equal(a, b)

    def test_layout(self, psi):
        """Test magic, header size and total length."""
        data = encode_peps(psi)
        assert data.startswith(MAGIC)
        entries = sum(t.size for t in psi.sites)
        assert len(data) == 8 + 20 + 24 * len(psi.sites) + 16 * entries

    def test_bad_magic(self, psi):
        """Test that foreign files are rejected."""
        with pytest.raises(PepsFormatError):
            decode_peps(b'NOTAPEPS' + encode_peps(psi)[8:])

    def test_truncated(self, psi):
        """Test that a cut-off file is rejected."""
        with pytest.raises(PepsFormatError):
            decode_peps(encode_peps(psi)[:-5])

    def test_trailing_bytes(self, psi):
        """Test that extra bytes are rejected."""
        with pytest.raises(PepsFormatError):
            decode_peps(encode_peps(psi) + b'\x00')

    def test_unknown_version(self, psi):
        """Test the format version check."""
        data = bytearray(encode_peps(psi))
        data[8] = 99
        with pytest.raises(PepsFormatError):
            decode_peps(bytes(data))


class TestFiles:
    """Tests for save/load with sidecars."""

    def test_save_and_load(self, psi, tmp_path):
        """Test the file round trip and sidecar contents."""
        path = save_peps(psi, tmp_path / 'state.peps', {'seed': 9})
        loaded, meta = load_peps(path)
        assert loaded.lattice == psi.lattice
        assert meta['seed'] == 9
        assert meta['D'] == 2 and meta['boundary'] == 'periodic'
        assert len(meta['sha256']) == 64
        assert sidecar_path(path).name == 'state.peps.json'

    def test_digest_mismatch(self, psi, tmp_path):
        """Test that a modified container fails verification."""
        path = save_peps(psi, tmp_path / 'state.peps')
        data = bytearray(path.read_bytes())
        data[-1] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(PepsFormatError):
            load_peps(path)
        loaded, _ = load_peps(path, verify=False)
        assert loaded.lattice == psi.lattice

    def test_missing_file(self, tmp_path):
        """Test that a missing container raises."""
        with pytest.raises(PepsFormatError):
            load_peps(tmp_path / 'absent.peps')

    def test_missing_sidecar(self, psi, tmp_path):
        """Test loading without a sidecar."""
        path = save_peps(psi, tmp_path / 'state.peps')
        sidecar_path(path).unlink()
        assert read_sidecar(path) == {}
        loaded, meta = load_peps(path)
        assert meta == {}
        assert loaded.lattice == psi.lattice

    def test_broken_sidecar(self, psi, tmp_path):
        """Test that an unreadable sidecar raises."""
        path = save_peps(psi, tmp_path / 'state.peps')
        sidecar_path(path).write_text('{not json', encoding='utf-8')
        with pytest.raises(PepsFormatError):
            read_sidecar(path)

    def test_deterministic_bytes(self, psi, tmp_path):
        """Test that saving twice writes identical files."""
        a = save_peps(psi, tmp_path / 'a.peps', {'seed': 1})
        b = save_peps(psi, tmp_path / 'b.peps', {'seed': 1})
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(sidecar_path(a).read_text()) == json.loads(sidecar_path(b).read_text())
