"""Exception hierarchy for the holdout meter.

Every error carries a machine-readable ``code`` so the gateway can map it to
an HTTP status / CLI exit code without string matching.
"""

from __future__ import annotations


class MeterError(Exception):
    """Base class for all holdout-meter errors."""

    code = "error"


class ValidationError(MeterError):
    """A parameter or payload violates its contract."""

    code = "validation_error"


class ParameterRangeError(ValidationError):
    """A numeric parameter is outside its admissible range."""

    code = "parameter_out_of_range"


class InvalidRevertScheduleError(ValidationError):
    """Revert budget or revert steps violate their constraints."""

    code = "invalid_revert_schedule"


class IncompatibleSpecError(ValidationError):
    """Requested feature combination has no analyzed guarantee."""

    code = "incompatible_spec"


class CoverageError(ValidationError):
    """A prediction upload does not cover the datasets exactly once."""

    code = "coverage_error"

    def __init__(self, message: str, missing: int = 0, extra: int = 0):
        super().__init__(message)
        self.missing = missing
        self.extra = extra


class FormatError(ValidationError):
    """A structured-text upload is malformed; carries the offending line."""

    code = "format_error"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EnumerationCapError(ValidationError):
    """Brute-force enumeration would exceed the state cap."""

    code = "enumeration_cap_exceeded"


class ScaleCapError(ValidationError):
    """A simulation would exceed the sampled-loss cap."""

    code = "scale_cap_exceeded"


class RoleViolationError(MeterError):
    """Principal's role does not permit the operation."""

    code = "role_violation"


class AuthenticationError(MeterError):
    """Missing or unknown credential."""

    code = "authentication_error"


class NotFoundError(MeterError):
    """Referenced dataset or session does not exist."""

    code = "not_found"


class StateError(MeterError):
    """Operation is invalid in the session's current state."""

    code = "state_violation"


class UndersizedTestSetError(StateError):
    """Test set smaller than the planned requirement."""

    code = "undersized_test_set"

    def __init__(self, required: int, actual: int):
        super().__init__(
            f"test set has {actual} examples but the plan requires {required}"
            f" (deficit {required - actual})"
        )
        self.required = required
        self.actual = actual


class UnsealedTestSetError(StateError):
    code = "unsealed_test_set"


class ExhaustedSessionError(StateError):
    code = "session_exhausted"


class ClosedSessionError(StateError):
    code = "session_closed"


class NoRevertBudgetError(StateError):
    code = "no_revert_budget"


class EmptyHistoryError(StateError):
    code = "empty_history"


class PrematureHandoffError(StateError):
    code = "premature_handoff"


class NoRemainingTenantError(StateError):
    code = "no_remaining_tenant"


class TenantBudgetError(StateError):
    """Current tenant's sub-budget is used up; a handoff is required."""

    code = "tenant_budget_exhausted"


class NotExhaustedError(StateError):
    code = "session_not_exhausted"


class IdentityReuseError(StateError):
    code = "dataset_identity_reuse"


class ConflictError(MeterError):
    """Optimistic-concurrency precondition failed."""

    code = "sequence_conflict"


class StorageError(MeterError):
    """Durable storage failed."""

    code = "storage_fault"


class CorruptLogError(StorageError):
    """The event log contains an unreadable record."""

    code = "corrupt_log"

    def __init__(self, message: str, record: int):
        super().__init__(f"{message} (record {record})")
        self.record = record


class ImmutableDatasetError(MeterError):
    code = "dataset_immutable"
