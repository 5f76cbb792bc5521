"""Exception types shared across the package."""


class RnsError(Exception):
    """Base class for errors raised by this package."""


class VisibilityError(RnsError):
    """An operation asked for a field that the dataset's visibility hides."""


class ConvergenceError(RnsError):
    """A numerical routine failed to bracket or converge to a solution."""
