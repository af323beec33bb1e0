"""Errors raised by the figure pipeline."""

__all__ = ["SchemaMismatch"]


class SchemaMismatch(Exception):
    """The input CSV does not match the figure kind's column contract.

    Carries the offending column name so batch callers can report which
    part of the contract broke.
    """

    def __init__(self, message: str, column: str):
        super().__init__(message)
        self.column = column
