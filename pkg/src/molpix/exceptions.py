"""Exception hierarchy shared across the pipeline."""


class MolpixError(Exception):
    """Base class for all errors raised by molpix."""


# -- parsing -----------------------------------------------------------------

class SmilesSyntaxError(MolpixError, ValueError):
    """Malformed SMILES: bad token, unbalanced branch, unmatched ring closure."""


class UnsupportedElement(MolpixError, ValueError):
    """Element outside the supported set (or a wildcard atom)."""


class MultiFragment(MolpixError, ValueError):
    """Disconnected input ('.' separated fragments)."""


# -- depiction ---------------------------------------------------------------

class LayoutDegenerate(MolpixError, ValueError):
    """Atoms could not be placed without overlap."""


class LayoutTooLarge(MolpixError, ValueError):
    """Molecule does not fit inside the 40 A image field."""


class PixelCollision(MolpixError, ValueError):
    """Two atoms snapped to the same pixel."""


# -- numerics ----------------------------------------------------------------

class ShapeMismatch(MolpixError, ValueError):
    pass


class NumericalFault(MolpixError, ArithmeticError):
    """A NaN or Inf appeared in a forward value or a gradient."""


class SpecInvalid(MolpixError, ValueError):
    pass


class CheckpointError(MolpixError, OSError):
    """Unreadable, truncated or inconsistent checkpoint file."""


class VersionMismatch(CheckpointError):
    """Checkpoint format version or network spec does not match."""


# -- data / training -----------------------------------------------------------

class MalformedCSV(MolpixError, ValueError):
    pass


class UnknownTask(MolpixError, KeyError):
    pass


class TooFewRecords(MolpixError, ValueError):
    pass


class DegenerateClass(MolpixError, ValueError):
    """A split or metric input lacks one of the two classes."""


class EmptyInput(MolpixError, ValueError):
    pass


class ConfigError(MolpixError, ValueError):
    pass
