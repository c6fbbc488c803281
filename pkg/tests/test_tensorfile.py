"""
Tensor File Testing for mrfsim

Tests for the header/payload container and its failure modes.
"""

import json

import numpy as np
import pytest

from mrfsim.core.cache import MemoryCache, content_hash
from mrfsim.core.errors import TensorFormatError
from mrfsim.core.tensorfile import TensorFile


class TestTensorFile:
    """Test reading and writing tensor files."""

    def test_complex_with_blocks(self, tmp_path):
        """Test a complex primary array with a secondary block survives a save/load."""
        data = (np.arange(12) + 1j * np.arange(12)[::-1]).reshape(3, 4).astype(np.complex64)
        tensor = TensorFile(data, meta={"kind": "demo", "n": 3}, blocks={"order": np.arange(3, dtype=np.float64)})
        loaded = TensorFile.load(tensor.save(tmp_path / "demo.mrft"))
        assert loaded.data.dtype == np.complex64
        np.testing.assert_array_equal(loaded.data, data)
        np.testing.assert_array_equal(loaded.blocks["order"], np.arange(3))
        assert loaded.meta == {"kind": "demo", "n": 3}

    def test_header_is_sorted_json(self):
        """Test the header is a single sorted JSON line."""
        raw = TensorFile(np.zeros(2), meta={"b": 1, "a": 2}).to_bytes()
        head = raw.split(b"\n", 1)[0]
        header = json.loads(head)
        assert header["magic"] == "MRFTENSOR"
        assert header["dtype"] == "f64"
        assert header["shape"] == [2]
        assert head.decode() == json.dumps(header, sort_keys=True)

    def test_unsupported_dtype(self):
        """Test integer payloads are refused."""
        with pytest.raises(TensorFormatError):
            TensorFile(np.arange(3)).to_bytes()

    def test_truncated_payload(self):
        """Test a short payload is reported."""
        raw = TensorFile(np.ones((4, 4))).to_bytes()
        with pytest.raises(TensorFormatError) as exc:
            TensorFile.from_bytes(raw[:-8])
        assert "truncated" in exc.value.message

    def test_trailing_bytes(self):
        """Test extra bytes after the payload are reported."""
        raw = TensorFile(np.ones(3, dtype=np.float32)).to_bytes()
        with pytest.raises(TensorFormatError):
            TensorFile.from_bytes(raw + b"\x00")

    def test_bad_magic_and_header(self):
        """Test foreign files are rejected."""
        with pytest.raises(TensorFormatError):
            TensorFile.from_bytes(b'{"magic": "NOPE", "version": 1}\n')
        with pytest.raises(TensorFormatError):
            TensorFile.from_bytes(b"not json\n")
        with pytest.raises(TensorFormatError):
            TensorFile.from_bytes(b"no newline")

    def test_missing_file(self, tmp_path):
        """Test loading an absent path."""
        with pytest.raises(TensorFormatError):
            TensorFile.load(tmp_path / "absent.mrft")

    def test_require_meta(self):
        """Test required metadata keys are enforced."""
        tensor = TensorFile(np.zeros(1), meta={"a": 1})
        tensor.require_meta("a")
        with pytest.raises(TensorFormatError) as exc:
            tensor.require_meta("a", "b")
        assert exc.value.details["missing"] == ["b"]


class TestCaching:
    """Test content hashing and the in-memory LRU."""

    def test_content_hash_sensitivity(self):
        """Test hashes change with values, dtype and metadata."""
        a = np.arange(4, dtype=np.float64)
        assert content_hash(a, {"k": 1}) == content_hash(a.copy(), {"k": 1})
        assert content_hash(a) != content_hash(a.astype(np.float32))
        assert content_hash(a, {"k": 1}) != content_hash(a, {"k": 2})
        assert len(content_hash(a)) == 16

    def test_lru_eviction(self):
        """Test the least recently used entry is evicted."""
        cache = MemoryCache(max_size=2)
        cache.set("a", 1)
        cache.set("b", 2)
        assert cache.get("a") == 1
        cache.set("c", 3)
        assert "b" not in cache
        assert "a" in cache
        stats = cache.get_stats()
        assert stats["evictions"] == 1
        assert stats["hits"] == 1

    def test_delete_and_clear(self):
        """Test explicit removal from the cache."""
        cache = MemoryCache(max_size=4)
        cache.set("a", 1)
        cache.set("b", 2)
        assert cache.delete("a")
        assert not cache.delete("a")
        assert "a" not in cache
        cache.clear()
        assert cache.get("b") is None
        assert cache.get_stats()["misses"] == 1
