"""SETL: a small claim language for contracts, instances and client blocks."""

from .parser import ParseError, parse, parse_expr, parse_statements
from .printer import print_script, print_statements

__all__ = ["ParseError", "parse", "parse_expr", "parse_statements", "print_script", "print_statements"]
