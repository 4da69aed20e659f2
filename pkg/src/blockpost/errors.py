"""Exception types shared across the package."""


class BlockpostError(Exception):
    """Base class for all package-specific errors."""


class SpecError(BlockpostError, ValueError):
    """Invalid model specification, parameter or configuration."""


class CapExceededError(BlockpostError, RuntimeError):
    """An enumeration or resource cap would be exceeded.

    Callers must shrink the instance; the cap is never silently raised.
    """


class TheoryPreconditionError(BlockpostError, ValueError):
    """A precondition of a theorem-level computation is violated.

    Examples: perturbation radius outside the admissible range, or a
    connectivity matrix whose entries are all identical so that the
    minimal divergence between blocks is undefined.
    """
