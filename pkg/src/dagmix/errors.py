"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed (singular or non positive-definite block)."""

    def __init__(self, message, node=None):
        if node is not None:
            message = f"{message} (node {node})"
        super().__init__(message)
        self.node = node


class InvalidMoveError(ValueError):
    """An edge operator cannot be applied to the given graph."""


class StickLimitError(RuntimeError):
    """Stick-breaking extension hit the configured hard cap."""
