"""Finite-dimensional workbench for modular multiplicative unitaries."""

__version__ = "0.1.0"

from .errors import (BudgetError, FormatError, PositivityError,  # noqa: E402
                     PreconditionError, ShapeError, WorkbenchError)
from .munit import CheckReport, ModularStructure, MultUnitary  # noqa: E402
from .tensor import Functional, Operator, PositiveOperator, Space  # noqa: E402

__all__ = ["BudgetError", "CheckReport", "FormatError", "Functional",
           "ModularStructure", "MultUnitary", "Operator", "PositiveOperator",
           "PositivityError", "PreconditionError", "ShapeError", "Space",
           "WorkbenchError", "__version__"]
