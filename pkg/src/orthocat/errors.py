"""Exception types shared across the package."""


class RegimeError(ValueError):
    """Parameters lie outside the regime where the computation is defined
    (e.g. attractive coupling too weak for a finite-box bound state, or a
    box too small to hold any particle below the Fermi energy)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced an unusable
    result (root bracketing failure, singular matrix, quadrature failure)."""


class SeriesDivergenceError(NumericalError):
    """The projection trace series cannot converge because the largest
    singular value of the occupied/unoccupied block is >= 1."""
