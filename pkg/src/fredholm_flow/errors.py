"""Exception types shared across the package."""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` is the dotted JSON key that failed."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalFailure(RuntimeError):
    """Non-finite values produced during iteration.

    ``step`` is the iteration index at which the failure occurred and
    ``index`` the offending particle/bin, when known.
    """

    def __init__(self, message: str, *, step: int | None = None, index: int | None = None):
        self.step = step
        self.index = index
        parts = [message]
        if step is not None:
            parts.append(f"step={step}")
        if index is not None:
            parts.append(f"index={index}")
        super().__init__(" ".join(parts))
