"""Exception taxonomy for the toolkit.

Every error raised by library code derives from IbisError so the CLI can
map data problems to a single exit code. Usage errors (bad flags) are the
CLI's own concern and never reach this hierarchy.
"""


class IbisError(Exception):
    """Base class for all toolkit errors."""


# --- CSI domain / file format ---------------------------------------------

class UnsupportedBandwidth(IbisError):
    pass


class BadMagic(IbisError):
    pass


class UnsupportedVersion(IbisError):
    pass


class HeaderMismatch(IbisError):
    """Declared counts disagree with the payload actually present."""


class NonFiniteValue(IbisError):
    pass


class InvariantViolation(IbisError):
    pass


class UpsampleRequested(IbisError):
    pass


# --- sanitizer -------------------------------------------------------------

class DegenerateInput(IbisError):
    pass


# --- doppler ----------------------------------------------------------------

class SignalTooShort(IbisError):
    pass


class NyquistViolation(IbisError):
    pass


# --- neural net --------------------------------------------------------------

class ShapeMismatch(IbisError):
    pass


class EmptyDataset(IbisError):
    pass


# --- svm ----------------------------------------------------------------------

class SingleClassInput(IbisError):
    pass


class DimensionMismatch(IbisError):
    pass


class InsufficientClassMembers(IbisError):
    pass


# --- pipeline -------------------------------------------------------------------

class EmptyInput(IbisError):
    pass


class MixedSampleIds(IbisError):
    pass


class LengthMismatch(IbisError):
    pass


class CountExceedsAntennas(IbisError):
    pass


class EmptySelection(IbisError):
    pass


# --- config ------------------------------------------------------------------------

class ParseError(IbisError):
    pass


class UnknownKey(IbisError):
    pass
