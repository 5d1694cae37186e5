"""Error taxonomy shared by every protocol module.

Protocol-level aborts are *data* (AbortRecord in the session layer), not
exceptions.  Exceptions here signal contract violations: bad parameters,
out-of-domain arguments, misuse of single-shot resources.
"""


class ConfigurationError(ValueError):
    """Parameter block violates a documented invariant."""


class DomainError(ValueError):
    """Argument outside the declared domain (e.g. x >= 2^x_bits)."""


class ArgumentError(ValueError):
    """Malformed argument: wrong length, wrong schema, wrong shape."""


class InversionError(ValueError):
    """No preimage under the requested branch."""


class DecodeError(ValueError):
    """Bitstring outside the range of the injection J."""


class ProtocolOrderError(RuntimeError):
    """Operation invoked before its protocol prerequisite."""


class StateConsumedError(RuntimeError):
    """Single-shot resource (device state, SFE receiver state) reused."""


class ProtocolError(RuntimeError):
    """Cross-session or backend-mismatched message."""


class CapabilityError(TypeError):
    """Party lacks a required capability (e.g. not snapshotable)."""


class SessionError(RuntimeError):
    """Schedule violation inside the session layer."""


class RestoreError(RuntimeError):
    """Snapshot token does not belong to this session."""


class ExtractionError(RuntimeError):
    """Extractor failed with diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
