"""Exception and warning classes.

Two families matter to callers: :class:`DataError` for invalid inputs or
configuration, and :class:`NumericError` for failures of a numerical stage
(non-existent MLE, singular systems, degenerate resamples).
"""


class PswError(Exception):
    """Base class for all package errors."""


class DataError(PswError, ValueError):
    pass


class NumericError(PswError, ArithmeticError):
    pass


class ConfigError(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"MissingColumn: column {column!r} not found")


class NonBinaryGroup(DataError):
    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"NonBinaryGroup: row {row} has group value {value!r}")


class MissingValue(DataError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"MissingValue: row {row}, column {column!r}")


class InvalidLevel(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        super().__init__(
            f"InvalidLevel: row {row}, column {column!r} has undeclared level {value!r}"
        )


class EmptyGroup(DataError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"EmptyGroup: no units with group == {group}")


class DimensionMismatch(DataError):
    pass


class NegativeOutcome(DataError):
    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"NegativeOutcome: negative outcome at rows {self.rows[:10]}")


class RequiresUntrimmed(DataError):
    def __init__(self):
        super().__init__(
            "RequiresUntrimmed: the sandwich variance assumes untrimmed weights; "
            "use bootstrap variance with trimming"
        )


class RankDeficient(NumericError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"RankDeficient: dependent or constant columns {self.columns}")


class Separation(NumericError):
    def __init__(self, units):
        self.units = list(units)
        super().__init__(
            f"Separation: fitted probabilities at 0 or 1 for {len(self.units)} units "
            f"(first: {self.units[:10]}); the maximum likelihood estimate does not exist"
        )


class NoConvergence(NumericError):
    def __init__(self, max_iter, score):
        self.max_iter = max_iter
        self.score = score
        super().__init__(
            f"NoConvergence: not converged after {max_iter} iterations "
            f"(max |score| = {score:.3e})"
        )


class SingularJacobian(NumericError):
    pass


class ZeroGroupWeight(NumericError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"ZeroGroupWeight: total weight in group {group} is zero")


class AllZeroWeights(NumericError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"AllZeroWeights: every weight in group {group} is zero")


class DegenerateResample(NumericError):
    pass


class ExtremeWeightWarning(UserWarning):
    pass


class TailMassWarning(UserWarning):
    pass


class TrimmingWarning(UserWarning):
    pass


class InvalidScenario(DataError):
    pass
