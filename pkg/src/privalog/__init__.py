"""PrivaLog: a Datalog dialect compiled to vectorised blackbox programs.

The pipeline is parse, adorn, unfold and prune, then code generation to a
core IR that `simexec` runs on a simulated secure blackbox.  `refeval`
gives the plaintext reference semantics the compiled program is checked
against.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CompileError,
    DataError,
    EvaluationError,
    ExecutionError,
    IRError,
    LabelError,
    ParseError,
    PrivaLogError,
    ValidationError,
)
from .parser import parse  # noqa: E402
from .codegen import CompileOptions, compile_program, compile_source  # noqa: E402
from .refeval import eval_program  # noqa: E402
from .simexec import run  # noqa: E402
from .datastore import load_database, save_database  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "CompileError", "CompileOptions", "DataError", "EvaluationError",
    "ExecutionError", "IRError", "LabelError", "ParseError", "PrivaLogError",
    "ValidationError", "compile_program", "compile_source", "eval_program",
    "load_database", "parse", "run", "save_database",
]
