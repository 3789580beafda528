"""Exception types shared across the nsb pipeline."""


class NsbError(Exception):
    """Base class for all nsb errors."""


# --- catalog ---------------------------------------------------------------

class CatalogError(NsbError):
    pass


class MissingFile(CatalogError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing file or directory: {self.path}")


class ParseError(CatalogError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ValidationError(CatalogError):
    """Carries every violation found, not just the first."""

    def __init__(self, violations):
        # violations: list of (spec_id, field, reason)
        self.violations = list(violations)
        lines = [f"{sid}.{field}: {reason}" for sid, field, reason in self.violations]
        super().__init__("catalog validation failed:\n  " + "\n  ".join(lines))


# --- parameter resolution ---------------------------------------------------

class ParameterError(NsbError):
    pass


class UnknownParameter(ParameterError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown parameter: {name}")


class OutOfBounds(ParameterError):
    def __init__(self, name, value, bounds):
        self.name = name
        self.value = value
        self.bounds = bounds
        super().__init__(f"parameter {name}={value!r} outside bounds {bounds}")


class TypeMismatch(ParameterError):
    def __init__(self, name, expected, value):
        self.name = name
        super().__init__(f"parameter {name}: expected {expected}, got {value!r}")


# --- planner ----------------------------------------------------------------

class PlanError(NsbError):
    pass


class UnresolvedReference(PlanError):
    def __init__(self, kind, ref):
        self.kind = kind
        self.ref = ref
        super().__init__(f"unresolved {kind} reference: {ref}")


class EmptySelection(PlanError):
    pass


# --- runtime ----------------------------------------------------------------

class RuntimeAdapterError(NsbError):
    pass


class ImageUnavailable(RuntimeAdapterError):
    pass


class StartTimeout(RuntimeAdapterError):
    pass


class AdapterUnreachable(RuntimeAdapterError):
    pass


class WorkloadGone(RuntimeAdapterError):
    pass


class HookNotFound(RuntimeAdapterError):
    pass


class HookLaunchFailure(RuntimeAdapterError):
    pass


# --- capture ----------------------------------------------------------------

class CaptureError(NsbError):
    pass


class BadMagic(CaptureError):
    def __init__(self, magic):
        self.magic = magic
        super().__init__(f"not a pcap file (magic {magic:#010x})")


class TruncatedRecord(CaptureError):
    """Raised when a pcap ends mid-record; carries everything read so far."""

    def __init__(self, offset, records):
        self.offset = offset
        self.records = records
        super().__init__(f"truncated pcap record at offset {offset}")


class CapturePermissionDenied(CaptureError):
    pass


class InterfaceNotFound(CaptureError):
    pass


class CommandNotFound(CaptureError):
    pass


# --- metrics ----------------------------------------------------------------

class EmptyInput(NsbError):
    pass


# --- dataset ----------------------------------------------------------------

class DatasetError(NsbError):
    pass


class ManifestMissing(DatasetError):
    def __init__(self, run_dir):
        self.run_dir = str(run_dir)
        super().__init__(f"no manifest in {self.run_dir}")


class DigestMismatch(DatasetError):
    def __init__(self, run_dir, artifact):
        self.run_dir = str(run_dir)
        self.artifact = artifact
        super().__init__(f"{self.run_dir}: digest mismatch for {artifact}")


class MissingSummary(DatasetError):
    pass
