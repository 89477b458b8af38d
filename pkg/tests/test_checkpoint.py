"""
Tests for binary parameter checkpoints.
"""

import numpy as np
import pytest

from proxyfed.model import ShapeError, load_params, save_params
from proxyfed.model.checkpoint import MAGIC, decode_params, encode_params


class TestCheckpoint:
    """Test encode/decode of ModelParams."""

    def test_save_and_load(self, small_params, tmp_path):
        """Test that a saved checkpoint loads back bit-identical."""
        path = tmp_path / "params.bin"
        save_params(small_params, path)
        loaded = load_params(path)
        np.testing.assert_array_equal(loaded.flatten(), small_params.flatten())
        assert [layer.weight.shape for layer in loaded.layers] == [
            layer.weight.shape for layer in small_params.layers
        ]

    def test_header(self, small_params):
        """Test the magic prefix."""
        assert encode_params(small_params).startswith(MAGIC)

    def test_bad_magic(self, small_params):
        """Test that a foreign blob is rejected."""
        blob = b"XXXX" + encode_params(small_params)[4:]
        with pytest.raises(ShapeError):
            decode_params(blob)

    def test_truncated(self, small_params):
        """Test that a truncated payload is rejected."""
        blob = encode_params(small_params)
        with pytest.raises(ShapeError):
            decode_params(blob[:-8])
        with pytest.raises(ShapeError):
            decode_params(blob[:12])
