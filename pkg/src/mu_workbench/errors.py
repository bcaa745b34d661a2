"""Exception types raised by the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class ShapeError(WorkbenchError, ValueError):
    """Operator, functional or space dimensions do not fit together."""


class PositivityError(WorkbenchError, ValueError):
    """An operator expected to be positive with trivial kernel is not."""


class BudgetError(WorkbenchError, RuntimeError):
    """A dense computation would exceed the configured dimension budget."""


class PreconditionError(WorkbenchError, ValueError):
    """Input data does not satisfy the precondition of an operation."""


class FormatError(WorkbenchError, ValueError):
    """A serialized operator or table could not be parsed."""
