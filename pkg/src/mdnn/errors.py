"""Exception types shared across the library.

Exit-code mapping used by the CLI:
  usage errors -> 1, data/format errors -> 2, numeric failures -> 3.
"""


class MdnnError(Exception):
    """Base class for all library errors."""


class DimensionError(MdnnError):
    """Tensor shapes inconsistent with an operation's contract."""


class ParameterError(MdnnError):
    """Invalid scalar parameter (e.g. dropout rate >= 1)."""


class ConfigError(MdnnError):
    """A network or training configuration is unbuildable."""


class FormatError(MdnnError):
    """On-disk artifact (tensor container, manifest) is malformed."""


class UnsupportedFormatError(FormatError):
    """Input file is structurally valid but uses an unsupported encoding."""


class InputError(MdnnError):
    """Input data violates a precondition (empty clip, too short, ...)."""


class DomainError(MdnnError):
    """Numeric argument outside the mathematical domain of an operation."""


class TrainingError(MdnnError):
    """Non-finite loss or gradient encountered during optimization."""


class GradientCheckError(MdnnError):
    """Analytic/numeric gradient comparison failed or hit non-finite values."""
