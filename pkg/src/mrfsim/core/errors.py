"""
mrfsim Error Handling

Provides the exception hierarchy shared by every pipeline stage and an error boundary
that logs failures with their structured payload before re-raising.
"""

import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

import structlog

logger = structlog.get_logger(__name__)


class MRFSimError(Exception):
    """A simulation, matching or optimization step could not produce its result.

    ``error_code`` defaults to the class name without its Error suffix (CACHEINVALID for
    CacheInvalidError) and is what the CLI prints; ``details`` carries the offending values
    (shapes, hashes, parameters) so a failed stage can be reproduced from the log alone.
    """

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or type(self).__name__.removesuffix("Error").upper()
        self.details = dict(details or {})
        self.raised_at = time.time()
        # Package that defines the error class (core, imaging, sequence, ...).
        self.component = type(self).__module__.split(".")[-2:][0]

    def to_dict(self) -> Dict[str, Any]:
        """Structured payload for log events and error reports."""
        return {
            "error_type": type(self).__name__,
            "error_code": self.error_code,
            "message": self.message,
            "component": self.component,
            "raised_at": self.raised_at,
            "details": self.details,
        }


class InvalidArgumentError(MRFSimError, ValueError):
    """An operation received arguments outside its domain."""
    pass


class TensorFormatError(MRFSimError):
    """A tensor file or schedule document is malformed."""
    pass


class CacheInvalidError(MRFSimError):
    """A cached artifact no longer matches the inputs it was built from."""
    pass


class InfeasibleTrajectoryError(MRFSimError):
    """The requested spiral design cannot Nyquist-sample the matrix."""
    pass


class ConfigurationError(MRFSimError):
    """Errors related to configuration issues."""
    pass


class SegmentError(MRFSimError):
    """A tissue segment has no pixels to evaluate."""
    pass


class OptimizationAbortedError(MRFSimError):
    """The annealing chain stopped because the objective failed."""

    def __init__(self, message: str, trace: Optional[List[Any]] = None, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.trace = trace or []


# Errors a user can fix by changing inputs; the CLI maps them to exit code 2.
USAGE_ERRORS = (ConfigurationError, TensorFormatError, CacheInvalidError)


@contextmanager
def error_boundary(operation_name: str, **context: Any) -> Iterator[None]:
    """Log any failure inside the block with its structured payload, then re-raise."""
    start_time = time.time()
    try:
        yield
    except MRFSimError as e:
        logger.error("Operation failed", operation=operation_name,
                     duration=time.time() - start_time, **context, **e.to_dict())
        raise
    except Exception as e:
        logger.error("Operation failed", operation=operation_name,
                     duration=time.time() - start_time, error_type=e.__class__.__name__,
                     message=str(e), **context)
        raise


def require(condition: bool, message: str, **details: Any) -> None:
    """Raise InvalidArgumentError with details when condition is false."""
    if not condition:
        raise InvalidArgumentError(message, details=details)
