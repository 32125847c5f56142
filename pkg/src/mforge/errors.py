"""Exception types shared across the package."""


class MforgeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateForm(MforgeError):
    """The bilinear/quadratic form has a nontrivial radical."""


class AxiomViolation(MforgeError):
    """An incidence axiom failed; carries a witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotOpposite(MforgeError):
    """Two elements required to be opposite are not."""


class BadDimension(MforgeError):
    """Subspace dimension outside the operation's domain."""


class NoFrame(MforgeError):
    """No polar frame satisfies the given constraints."""


class BadIndices(MforgeError):
    """Frame indices do not describe a valid root."""


class BadConfiguration(MforgeError):
    """Construction input violates its incidence preconditions."""


class RecipeDegenerate(MforgeError):
    """An auxiliary point of an elation recipe is undefined."""


class ChainNotOpposite(MforgeError):
    """A projectivity base sequence has a non-opposite consecutive pair."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# Alias used by chain-evaluation entry points; same failure mode.
ConsecutiveNotOpposite = ChainNotOpposite


class LinesNotOpposite(MforgeError):
    """Copying an action requires a pair of opposite lines."""


class CoverageIncomplete(MforgeError):
    """Breadth-first copying stalled before covering its domain."""


class NoHostPair(MforgeError):
    """No admissible opposite host pair exists for a point."""


class ClosureCapExceeded(MforgeError):
    """Group closure grew past the configured cap."""


class CacheError(MforgeError):
    """A geometry cache file is missing, malformed, or inconsistent."""
