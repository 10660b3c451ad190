"""Exception hierarchy shared across the harness.

The split mirrors the CLI exit-code contract: usage errors (1) are raised by
argument handling, DataError subclasses map to exit code 2, and judge/backend
failures map to exit code 3.
"""


class EthibenchError(Exception):
    """Base class for all harness errors."""


class DataError(EthibenchError):
    """Invalid or missing on-disk data (ground truth, findings, registry)."""


class GroundTruthError(DataError):
    """Ground-truth file or revision violates an invariant."""


class FindingsError(DataError):
    """Findings file is malformed or violates an invariant."""


class RegistryError(DataError):
    """Run registry conflict or lookup failure."""


class ReportError(DataError):
    """Evaluation report missing or malformed."""


class JudgeBackendError(EthibenchError):
    """The judge backend is unreachable or persistently unusable."""


class JudgePairError(JudgeBackendError):
    """A single finding/entry pair could not be judged.

    Carries the pair coordinates so callers can surface the failure in the
    evaluation report instead of silently treating it as a no-match.
    """

    def __init__(self, finding_index: int, gt_id: str, reason: str):
        super().__init__(f"pair (finding {finding_index}, {gt_id}): {reason}")
        self.finding_index = finding_index
        self.gt_id = gt_id
        self.reason = reason
