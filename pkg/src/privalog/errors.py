"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class PrivaLogError(Exception):
    """Base class for all errors raised by this package."""

    stage = "privalog"


class ParseError(PrivaLogError):
    """Lexical or syntactic problem in PrivaLog source text."""

    stage = "parse"

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + message)


class ValidationError(PrivaLogError):
    """The program parsed but violates a static well-formedness rule."""

    stage = "validate"


class CompileError(PrivaLogError):
    """A preprocessing or code generation pass rejected the program."""

    stage = "compile"


class EvaluationError(PrivaLogError):
    """The reference evaluator could not evaluate the program."""

    stage = "eval-ref"


class DataError(PrivaLogError):
    """A table on disk does not match its manifest or the program schema."""

    stage = "datastore"


class IRError(PrivaLogError):
    """Malformed core IR text or structure."""

    stage = "ir"


class ExecutionError(PrivaLogError):
    """Runtime failure inside the simulated blackbox."""

    stage = "simexec"


class LabelError(ExecutionError):
    """A private value reached a public location without declassify."""
