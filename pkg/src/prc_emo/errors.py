"""Error types shared across the package.

The CLI maps these onto exit codes: DataError -> 3, ServiceError -> 4.
"""


class PrcEmoError(Exception):
    """Base class for all package errors."""


class DataError(PrcEmoError):
    """Invalid input data, configuration, or violated contract."""


class ServiceError(PrcEmoError):
    """An upstream chat/embedding service failed permanently."""


class TransientServiceError(ServiceError):
    """A retryable upstream failure (timeouts, 5xx, rate limits)."""
