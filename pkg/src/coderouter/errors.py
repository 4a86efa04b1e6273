"""Exception types shared across the pipeline and gateway."""

from __future__ import annotations


class CoderouterError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus ingestion -------------------------------------------------------

class IngestError(CoderouterError):
    """Ingestion failure carrying a report of the first offenders found.

    `report` holds up to 20 human-readable offender descriptions; the
    exception message describes the first one.
    """

    def __init__(self, message: str, report: list[str] | None = None):
        super().__init__(message)
        self.report = report if report is not None else [message]


class MalformedLine(IngestError):
    def __init__(self, path: str, line_no: int, detail: str, report=None):
        super().__init__(f"{path}:{line_no}: {detail}", report)
        self.path = path
        self.line_no = line_no


class UnknownReference(IngestError):
    def __init__(self, ref_id: str, detail: str = "", report=None):
        super().__init__(f"unknown reference {ref_id!r}" + (f": {detail}" if detail else ""), report)
        self.ref_id = ref_id


class DuplicateKey(IngestError):
    def __init__(self, key: str, detail: str = "", report=None):
        super().__init__(f"duplicate key {key!r}" + (f": {detail}" if detail else ""), report)
        self.key = key


# --- artifact persistence ---------------------------------------------------

class VersionMismatch(CoderouterError):
    def __init__(self, path: str, found, expected: int):
        super().__init__(f"{path}: format_version {found!r}, expected {expected}")
        self.found = found
        self.expected = expected


class SchemaError(CoderouterError):
    pass


# --- numerics ---------------------------------------------------------------

class NonPositiveArgument(CoderouterError):
    pass


class MissingSamples(CoderouterError):
    def __init__(self, problem_id: str, model_id: str, found: int, expected: int):
        super().__init__(
            f"problem {problem_id!r} model {model_id!r}: {found} samples, expected {expected}"
        )
        self.problem_id = problem_id
        self.model_id = model_id
        self.found = found
        self.expected = expected


class NoCotData(CoderouterError):
    def __init__(self, reasoning_model_id: str):
        super().__init__(f"no reasoning traces recorded for {reasoning_model_id!r}")
        self.reasoning_model_id = reasoning_model_id


class TooFewDistinctValues(CoderouterError):
    def __init__(self, distinct: int, k: int):
        super().__init__(f"{distinct} distinct values cannot form {k} clusters")
        self.distinct = distinct
        self.k = k


class DegenerateDistribution(CoderouterError):
    pass


class ItemSetMismatch(CoderouterError):
    pass


class MissingEmbedding(CoderouterError):
    def __init__(self, problem_id: str):
        super().__init__(f"no imported vector for {problem_id!r}")
        self.problem_id = problem_id


class InsufficientCluster(CoderouterError):
    def __init__(self, tier: str, detail: str = ""):
        super().__init__(f"cluster {tier!r} too small" + (f": {detail}" if detail else ""))
        self.tier = tier


class NonFiniteLoss(CoderouterError):
    pass


class EmptyTrainingSet(CoderouterError):
    pass


class DimensionMismatch(CoderouterError):
    pass


class DomainError(CoderouterError):
    pass


class SpecError(CoderouterError):
    pass


class EmbeddingUnavailable(CoderouterError):
    pass
