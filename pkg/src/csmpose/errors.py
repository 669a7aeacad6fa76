"""Exception types shared across the package.

Everything raised on bad input or unusable data derives from CsmError so the
CLI can map it to a single exit code.
"""
from __future__ import annotations


class CsmError(Exception):
    """Base class for all errors raised by this package."""


class LabelAbsent(CsmError):
    """A requested label id does not occur in the label image."""


class EmptyMask(CsmError):
    """An operation that needs at least one foreground pixel got none."""


class DegeneratePoints(CsmError):
    """Orientation analysis needs at least two distinct coordinates."""


class NoSeeds(CsmError):
    """The seed set handed to the forest transform is empty."""


class SeedOutsideDomain(CsmError):
    """A seed pixel is neither inside the active domain nor 8-adjacent to it."""


class OverlappingInteriors(CsmError):
    """Two cloud interiors claim the same pixel when composing a label map."""


class MissingPart(CsmError):
    """A part required by the body schema is absent from the init mask."""


class DisconnectedPart(CsmError):
    """A part's pixels split into more than one 8-connected component."""


class EmptyJointIntersection(CsmError):
    """Two uncertainty regions that should share a joint do not intersect.

    Callers that can fall back (closest-point midpoint) catch this internally;
    it still surfaces from the low-level joint finder.
    """


class OffFrame(CsmError):
    """A projected cloud window has no overlap with the image raster."""


class NoForegroundSeeds(CsmError):
    """A part group produced no foreground seeds at the candidate pose."""


class MissingArm(CsmError):
    """Arm angle extraction needs both arm chains in the skeleton."""


class EmptySeries(CsmError):
    """Sequence statistics need at least one evaluable frame."""


class BadConfig(CsmError):
    """A config file or value fails validation."""


class BadPuppetSpec(CsmError):
    """A synthetic sequence spec fails validation (overlap, bad colors, ...)."""
