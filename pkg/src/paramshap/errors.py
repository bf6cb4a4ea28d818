"""Exception hierarchy.

``InputError`` covers anything the caller can fix by changing inputs (bad
files, malformed queries, precondition mismatches).  ``ComputationError``
covers failures of an otherwise valid run (budgets, internal self-checks).
The CLI maps them to exit codes 2 and 1.
"""


class ParamShapError(Exception):
    pass


class InputError(ParamShapError):
    pass


class DataError(InputError):
    """Schema or CSV problems; the message names relation, row and column."""


class QueryParseError(InputError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ValueKindError(InputError):
    """Two values of different kinds were compared."""


class PreconditionError(InputError):
    """The chosen method does not apply to the given query/distribution."""


class ComputationError(ParamShapError):
    pass


class BudgetExceeded(ComputationError):
    pass
