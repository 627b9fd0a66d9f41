"""
Error types shared by every package.

Anything that violates an operation's contract raises a ContractError (or one of
its subclasses). The CLI maps these to exit code 1.
"""

from typing import Dict, Optional


class ContractError(ValueError):
    """A precondition or contract of an operation was violated."""


class ShapeError(ContractError):
    """Input shapes are incompatible for an operation."""


class DomainError(ContractError):
    """An input lies outside an operation's mathematical domain."""


class NonFiniteError(ContractError):
    """A NaN or Inf appeared where finite values are required."""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ', '.join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"
