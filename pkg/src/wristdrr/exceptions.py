"""Exception hierarchy for the simulation engine."""


class WristDRRError(Exception):
    """Base class for all engine errors."""


class ConfigError(WristDRRError, ValueError):
    """A configuration value violates its documented invariant."""


class MalformedHeader(WristDRRError):
    """Volume header is inconsistent with its payload."""


class UnsupportedDatatype(WristDRRError):
    """Voxel datatype outside uint8 / int16 / float32."""


class UnsupportedOrientation(WristDRRError):
    """NIfTI orientation matrix is oblique."""


class IoFailure(WristDRRError, OSError):
    """Reading or writing a file failed."""


class DegenerateVolume(WristDRRError, ValueError):
    """Volume too small for the requested operation."""


class SpecOutOfBounds(WristDRRError, ValueError):
    """A phantom primitive lies entirely outside the volume."""


class DimensionMismatch(WristDRRError, ValueError):
    """Paired arrays do not share a shape."""


class EmptyRegion(WristDRRError):
    """A label needed for a surface distance is absent from a mask."""


class PairingMismatch(WristDRRError):
    """Prediction and ground-truth manifests do not pair 1:1."""
