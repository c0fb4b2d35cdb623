"""Exception hierarchy for the mesh memory package."""


class MeshMemError(Exception):
    """Base class for all package errors."""


# --- cat7 ---

class EmptyText(MeshMemError):
    pass


class DegenerateEmbedding(MeshMemError):
    pass


class MoodOutOfRange(MeshMemError):
    pass


class InvalidKeyRequest(MeshMemError):
    pass


# --- svaf ---

class ZeroVector(MeshMemError):
    pass


class DimensionMismatch(MeshMemError):
    pass


class EmptyCandidates(MeshMemError):
    pass


class AllWeightsZero(MeshMemError):
    pass


class MissingField(MeshMemError):
    pass


# --- lineage ---

class DuplicateKey(MeshMemError):
    pass


class SelfParent(MeshMemError):
    pass


class UnknownKey(MeshMemError):
    pass


class CycleDetected(MeshMemError):
    pass


# --- store ---

class ObserveConflict(MeshMemError):
    pass


class NotAdmitted(MeshMemError):
    pass


class MalformedCMB(MeshMemError):
    pass


class StorageFailure(MeshMemError):
    pass


class CorruptStore(MeshMemError):
    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


# --- wire ---

class MalformedFrame(MeshMemError):
    pass


class SchemaViolation(MeshMemError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class MalformedEntry(MeshMemError):
    pass


# --- peer / config ---

class BindFailure(MeshMemError):
    pass


class ConfigError(MeshMemError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


# --- simulator ---

class ScriptError(MeshMemError):
    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index
