"""Error taxonomy shared by the library, the HTTP service, and the CLI.

Every failure is classified into one of three kinds so callers can
translate errors without inspecting message text:

- ``usage``: the request itself is malformed — bad argument values,
  incompatible shapes, empty parameter sets.  CLI exit 2, HTTP 400.
- ``io``: a file or directory is missing, unreadable, unwritable, or
  its contents are malformed.  CLI exit 3, HTTP 404.
- ``invariant``: data violates a structural guarantee — manifest
  counting, duplicate identifiers, out-of-set parameters, non-finite
  numerics.  CLI exit 4, HTTP 409.
"""

from __future__ import annotations


class DahazeError(Exception):
    """Base class for all toolkit errors."""

    kind: str = "usage"
    exit_code: int = 2

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class UsageError(DahazeError):
    """A request that can never succeed as stated (bad arguments)."""

    kind = "usage"
    exit_code = 2


class IOFailure(DahazeError):
    """A filesystem or file-format problem."""

    kind = "io"
    exit_code = 3


class InvariantViolation(DahazeError):
    """Data that breaks a structural guarantee of the toolkit."""

    kind = "invariant"
    exit_code = 4


EXIT_CODES = {"usage": 2, "io": 3, "invariant": 4}
HTTP_STATUS = {"usage": 400, "io": 404, "invariant": 409}
