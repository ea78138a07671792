"""Session-typed processes over subsingleton logic with fixed points."""

from .core import Program, validate_program
from .syntax import ParseError, SourceFile, parse_file, parse_program, print_program
from .typecheck import check_def, check_program, types_equal

__all__ = [
    "ParseError",
    "Program",
    "SourceFile",
    "check_def",
    "check_program",
    "parse_file",
    "parse_program",
    "print_program",
    "types_equal",
    "validate_program",
]
