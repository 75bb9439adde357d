"""Exception types shared across the package."""


class NVFError(Exception):
    """Base class for every error raised by nvf."""


class DegenerateProjection(NVFError):
    pass


class IllFormedMesh(NVFError):
    pass


class ShapeError(NVFError, ValueError):
    pass


class EmptyBatch(NVFError, ValueError):
    pass


class EmptyGrid(NVFError):
    pass


class InsufficientSamples(NVFError):
    pass


class InvalidPlacement(NVFError):
    pass


class DegenerateAlignment(NVFError):
    pass


class TrainingDiverged(NVFError):
    pass


class CheckpointError(NVFError):
    pass


class NoValidVoters(NVFError):
    """Raised when one or more joints received no usable vote.

    ``joints`` lists the offending joint indices and ``partial`` holds the
    (T, 3) estimate with NaN rows for those joints, so callers can choose
    their own fallback.
    """

    def __init__(self, joints, partial=None):
        self.joints = list(joints)
        self.partial = partial
        super().__init__(f"no valid voters for joints {self.joints}")
