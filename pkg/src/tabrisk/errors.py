"""Exception hierarchy.

Three roots map onto CLI exit codes: ``ConfigError`` (2), ``DataError`` (3)
and everything else deriving from ``TabriskError`` (4).
"""


class TabriskError(Exception):
    pass


class ConfigError(TabriskError, ValueError):
    pass


class DataError(TabriskError, ValueError):
    pass


# data
class MissingColumn(DataError):
    pass


class LabelNotBinary(DataError):
    pass


class NotEnoughNeighbors(DataError):
    pass


class WrongKind(DataError):
    pass


class UnseenCategory(DataError):
    pass


class ArityMismatch(DataError):
    pass


class AllRowsDropped(DataError):
    pass


class EmptyColumn(DataError):
    pass


# resampling
class SingleClass(DataError):
    pass


class TooFewMinority(DataError):
    pass


class EmptyDangerSet(TabriskError):
    pass


class AllSafe(TabriskError):
    pass


# learners / evaluation
class EmptyInput(DataError):
    pass


class NonBinaryLabels(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooFewPerClass(DataError):
    pass


class ConstantTruth(DataError):
    pass


class InvalidParamForFamily(ConfigError):
    pass


# explanation
class TooFewRows(DataError):
    pass


class SingularSystem(TabriskError):
    pass


# persistence
class VersionMismatch(TabriskError):
    pass


class CorruptDocument(TabriskError):
    pass
