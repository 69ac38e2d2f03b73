"""
Tests for blockbp.hashing module.
"""
import io

from blockbp.hashing import calculate_hash, config_hash, hash_file


class TestCalculateHash:
    """Tests for calculate_hash function."""

    def test_hash_bytes_md5(self):
        """Test MD5 hash of bytes."""
        assert calculate_hash(b'Hello, World!', algorithm='md5') == '65a8e27d8879283831b664bd8b7f0ad4'

    def test_hash_bytes_sha256(self):
        """Test SHA256 hash of bytes."""
        result = calculate_hash(b'Hello, World!', algorithm='sha256')
        assert result == 'dffd6021bb2bd5b0af676290809ec3a53191dd81c7f70a4b28688a362182986f'

    def test_hash_file_object(self):
        """Test hashing from a file-like object in small chunks."""
        data = b'Test data for hashing' * 100
        assert calculate_hash(io.BytesIO(data), chunk_size=7) == calculate_hash(data)

    def test_empty_data(self):
        """Test hash of empty data."""
        assert calculate_hash(b'', algorithm='md5') == 'd41d8cd98f00b204e9800998ecf8427e'


class TestHashFile:
    """Tests for hash_file function."""

    def test_hash_existing_file(self, tmp_path):
        """Test hashing a file on disk."""
        path = tmp_path / 'test.bin'
        path.write_bytes(b'File content for testing')
        result = hash_file(path)
        assert result == calculate_hash(b'File content for testing')
        assert len(result) == 64

    def test_hash_nonexistent_file(self, tmp_path):
        """Test hashing a file that doesn't exist."""
        assert hash_file(tmp_path / 'missing.bin') is None


class TestConfigHash:
    """Tests for configuration hashes."""

    def test_key_order_irrelevant(self):
        """Test that key order does not change the hash."""
        assert config_hash({'a': 1, 'b': [1, 2]}) == config_hash({'b': [1, 2], 'a': 1})

    def test_values_matter(self):
        """Test that a changed value changes the hash."""
        assert config_hash({'seed': 1}) != config_hash({'seed': 2})

    def test_length(self):
        """Test the requested hash length."""
        assert len(config_hash({'x': 1})) == 16
        assert len(config_hash({'x': 1}, length=8)) == 8
