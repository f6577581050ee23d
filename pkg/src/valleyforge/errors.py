"""Exception types raised across the package.

Every error carries a short ``code`` string; the command line front-end
prints it as ``ERROR <code>: <message>``.
"""


class ValleyForgeError(Exception):
    code = "Error"


class MissingColumn(ValleyForgeError, KeyError):
    code = "MissingColumn"

    def __str__(self):
        return Exception.__str__(self)


class EmptyFile(ValleyForgeError, ValueError):
    code = "EmptyFile"


class UnmappableCategory(ValleyForgeError, ValueError):
    code = "UnmappableCategory"


class AllRowsDropped(ValleyForgeError, ValueError):
    code = "AllRowsDropped"


class DimensionMismatch(ValleyForgeError, ValueError):
    code = "DimensionMismatch"


class DegenerateSplit(ValleyForgeError, ValueError):
    code = "DegenerateSplit"


class BadShape(ValleyForgeError, ValueError):
    code = "BadShape"


class TooFewRows(ValleyForgeError, ValueError):
    code = "TooFewRows"


class WeightOutOfRange(ValleyForgeError, ValueError):
    code = "WeightOutOfRange"


class BadK(ValleyForgeError, ValueError):
    code = "BadK"


class PopulationTooSmall(ValleyForgeError, ValueError):
    code = "PopulationTooSmall"


class NonFiniteInput(ValleyForgeError, ValueError):
    code = "NonFiniteInput"


class NonFiniteFitness(ValleyForgeError, ValueError):
    code = "NonFiniteFitness"


class UnknownFunction(ValleyForgeError, KeyError):
    code = "UnknownFunction"

    def __str__(self):
        return Exception.__str__(self)


class ShapeMismatch(ValleyForgeError, ValueError):
    code = "ShapeMismatch"


class StaleTrace(ValleyForgeError, RuntimeError):
    code = "StaleTrace"


class EmptyTable(ValleyForgeError, ValueError):
    code = "EmptyTable"


class LengthMismatch(ValleyForgeError, ValueError):
    code = "LengthMismatch"


class SingleClass(ValleyForgeError, ValueError):
    code = "SingleClass"


class ConfigInvalid(ValleyForgeError, ValueError):
    code = "ConfigInvalid"


class SchemaMismatch(ValleyForgeError, ValueError):
    code = "SchemaMismatch"


class VersionMismatch(ValleyForgeError, ValueError):
    code = "VersionMismatch"


class CorruptArtifact(ValleyForgeError, ValueError):
    code = "CorruptArtifact"
