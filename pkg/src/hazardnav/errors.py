"""Exception types shared across the package.

Every error carries a short machine-parsable ``code`` so the CLI and the
HTTP service can report failures as ``CODE: message`` lines.
"""

from __future__ import annotations


class HazardNavError(Exception):
    """Base class for all domain errors."""

    code = "E_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InputError(HazardNavError):
    """Invalid caller-supplied value (bad level, empty list, bad parameter)."""

    code = "E_INPUT"


class GraphValidationError(InputError):
    """An environment file or graph violates a structural invariant."""

    code = "E_ENV_INVALID"


class DegenerateEvidenceError(HazardNavError):
    """A Bayes update produced an all-zero unnormalized posterior.

    Only possible with unsmoothed likelihood matrices; the caller decides
    whether to fall back or abort, so this is never swallowed internally.
    """

    code = "E_DEGENERATE_EVIDENCE"


class PlanningError(HazardNavError):
    """No exit is reachable from the requested source node."""

    code = "E_NO_ROUTE"
