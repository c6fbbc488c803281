"""
Error Handling Testing for mrfsim
"""

import pytest

from mrfsim.core.errors import (
    USAGE_ERRORS,
    CacheInvalidError,
    InvalidArgumentError,
    MRFSimError,
    OptimizationAbortedError,
    SegmentError,
    TensorFormatError,
    error_boundary,
    require,
)


class TestErrorHierarchy:
    """Test error codes, payloads and classification."""

    def test_error_code_from_class_name(self):
        """Test codes derive from the class name."""
        assert InvalidArgumentError("x").error_code == "INVALIDARGUMENT"
        assert TensorFormatError("x").error_code == "TENSORFORMAT"
        assert SegmentError("x").error_code == "SEGMENT"
        assert MRFSimError("x", error_code="CUSTOM").error_code == "CUSTOM"

    def test_to_dict(self):
        """Test the serialized payload carries details and component."""
        payload = CacheInvalidError("stale", details={"key": "abc"}).to_dict()
        assert payload["error_type"] == "CacheInvalidError"
        assert payload["message"] == "stale"
        assert payload["details"] == {"key": "abc"}
        assert payload["component"] == "core"
        assert payload["raised_at"] > 0

    def test_invalid_argument_is_value_error(self):
        """Test argument errors can be caught as ValueError."""
        with pytest.raises(ValueError):
            raise InvalidArgumentError("bad")

    def test_usage_errors(self):
        """Test which errors count as user-correctable."""
        assert issubclass(TensorFormatError, USAGE_ERRORS)
        assert not issubclass(InvalidArgumentError, USAGE_ERRORS)

    def test_aborted_keeps_trace(self):
        """Test the partial trace travels with the abort."""
        error = OptimizationAbortedError("stopped", trace=[1, 2], details={"iteration": 2})
        assert error.trace == [1, 2]
        assert error.details["iteration"] == 2
        assert OptimizationAbortedError("stopped").trace == []


class TestHelpers:
    """Test require() and error_boundary()."""

    def test_require(self):
        """Test require raises with details only on a false condition."""
        require(True, "never")
        with pytest.raises(InvalidArgumentError) as exc:
            require(False, "n must be positive", n=-1)
        assert exc.value.details == {"n": -1}

    def test_error_boundary_reraises(self):
        """Test both mrfsim and foreign errors propagate unchanged."""
        with pytest.raises(SegmentError):
            with error_boundary("stage", label="wm"):
                raise SegmentError("empty")
        with pytest.raises(KeyError):
            with error_boundary("stage"):
                raise KeyError("k")

    def test_error_boundary_passes_through(self):
        """Test a clean block is untouched."""
        with error_boundary("stage"):
            value = 1
        assert value == 1
