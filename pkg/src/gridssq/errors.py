"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration and
validation failures, 3 for parse/data failures, 4 for anything unexpected.
"""


class GridSsqError(Exception):
    exit_code = 4


class ValidationError(GridSsqError, ValueError):
    exit_code = 2


class DataError(GridSsqError):
    exit_code = 3


# inventory / events
class DuplicateId(ValidationError):
    pass


class NonPositiveImportance(ValidationError):
    pass


class EmptyInventory(ValidationError):
    pass


class DegradationOutOfRange(ValidationError):
    pass


class NonPositiveWindow(ValidationError):
    pass


class TimestampOutOfHorizon(ValidationError):
    pass


class SeverityBelowOne(ValidationError):
    pass


class ZeroCount(ValidationError):
    pass


# index arithmetic
class EmptyInput(ValidationError):
    pass


class NonPositiveEntry(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class WeightsNotNormalized(ValidationError):
    pass


class NonPositiveEta(ValidationError):
    pass


# network / GA
class DimensionMismatch(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class EmptyPopulation(ValidationError):
    pass


class ConfigInvalid(ValidationError):
    pass


class CountExceedsDataset(ValidationError):
    pass


# data files
class ParseError(DataError):
    def __init__(self, message: str, path=None, line_no: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
            if line_no is not None:
                where += f"{line_no}:"
            where += " "
        elif line_no is not None:
            where = f"line {line_no}: "
        super().__init__(where + message)
        self.path = path
        self.line_no = line_no


class MalformedLine(ParseError):
    pass


class UnknownField(ParseError):
    pass


class UnknownEntity(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class DatasetInvalid(DataError):
    pass


class IoError(DataError):
    pass
