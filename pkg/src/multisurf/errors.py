"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class MultiSurfError(Exception):
    """Base class for all operational errors raised by multisurf."""


# -- ingest -----------------------------------------------------------------

class FileUnreadable(MultiSurfError):
    def __init__(self, path, reason: str = ""):
        self.path = str(path)
        super().__init__(f"cannot read {self.path}" + (f": {reason}" if reason else ""))


class SchemaViolation(MultiSurfError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"manifest field {field!r}: {message}")


class DuplicateClassLabel(MultiSurfError):
    def __init__(self, label: str, other: str):
        self.label = label
        self.other = other
        super().__init__(f"class label {label!r} collides with {other!r} after case-folding")


class NonNumericFeature(MultiSurfError):
    def __init__(self, row: int, col: int, value: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: non-numeric feature {value!r}")


class UnknownLabel(MultiSurfError):
    def __init__(self, row: int, label: str = ""):
        self.row = row
        self.label = label
        super().__init__(f"row {row}: label {label!r} not among the declared classes")


class EmptyTable(MultiSurfError):
    def __init__(self, what: str = "table"):
        super().__init__(f"{what} has no data rows")


class RaggedRow(MultiSurfError):
    def __init__(self, row: int, expected: int, got: int):
        self.row = row
        super().__init__(f"row {row}: expected {expected} columns, found {got}")


class MissingClassDirectory(MultiSurfError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"no directory for class {label!r}")


class EmptyClass(MultiSurfError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"class {label!r} has no usable samples")


class UndecodableImage(MultiSurfError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"cannot decode image {self.path}")


class DuplicateSampleId(MultiSurfError):
    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"duplicate sample id {sample_id!r}")


class WrongModality(MultiSurfError):
    pass


# -- prompt -----------------------------------------------------------------

class UnknownModelName(MultiSurfError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"model name must be 'SVM' or 'RF', got {name!r}")


class EmptyAttachment(MultiSurfError):
    pass


class EmptyClassList(MultiSurfError):
    pass


class ExemplarClassMismatch(MultiSurfError):
    pass


# -- llm --------------------------------------------------------------------

class MissingCredential(MultiSurfError):
    pass


class EndpointError(MultiSurfError):
    def __init__(self, status: int | None, body: str = ""):
        self.status = status
        self.body = body[:500]
        super().__init__(f"endpoint error (status={status}): {self.body}")


class Timeout(MultiSurfError):
    pass


class CacheMiss(MultiSurfError):
    def __init__(self, digests):
        if isinstance(digests, str):
            digests = [digests]
        self.digests = list(digests)
        shown = ", ".join(self.digests[:5])
        more = f" (+{len(self.digests) - 5} more)" if len(self.digests) > 5 else ""
        super().__init__(f"replay cache miss for {len(self.digests)} request(s): {shown}{more}")


class CorruptCacheLine(MultiSurfError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        super().__init__(f"corrupt cache line {line}" + (f": {reason}" if reason else ""))


class ProfileParse(MultiSurfError):
    def __init__(self, raw_text: str):
        self.raw_text = raw_text
        super().__init__("could not find equipment, method and usage segments in response")


class ConfigError(MultiSurfError):
    pass


# -- classify ---------------------------------------------------------------

class ClassTooSmall(MultiSurfError):
    def __init__(self, label: str, count: int):
        self.label = label
        self.count = count
        super().__init__(f"class {label!r} has {count} row(s); a stratified split needs at least 2")


class SingleClass(MultiSurfError):
    pass


# -- eval -------------------------------------------------------------------

class EmptyPredictionList(MultiSurfError):
    pass


class DatasetMismatch(MultiSurfError):
    pass


class WriteFailure(MultiSurfError):
    pass


# -- context ----------------------------------------------------------------

class EmptyProfileStore(MultiSurfError):
    pass


class DuplicateMethod(MultiSurfError):
    pass
