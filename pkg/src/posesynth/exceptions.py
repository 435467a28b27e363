"""Exception hierarchy shared by every stage of the synthesis pipeline."""


class PoseSynthError(Exception):
    """Base class for all errors raised by posesynth."""


class SkeletonError(PoseSynthError, ValueError):
    """Malformed skeleton definition or pose/skeleton mismatch."""


class DegenerateLimbError(PoseSynthError, ValueError):
    """The anchoring limb has zero length, so no rotation can be estimated."""


class CoincidentJointError(PoseSynthError, ValueError):
    """Another joint sits exactly on the query joint (inverse distance undefined)."""


class DegenerateGeometryError(PoseSynthError, ValueError):
    """Collinear or otherwise rank-deficient point configuration."""


class ProjectionError(PoseSynthError, ValueError):
    """A joint lies on or behind the camera plane."""


class NoCandidateError(PoseSynthError, LookupError):
    """No corpus entry has the anchoring joints visible."""


class CorpusFormatError(PoseSynthError, ValueError):
    """A corpus record could not be parsed or validated."""


class ConfigError(PoseSynthError, ValueError):
    """Invalid run configuration."""
