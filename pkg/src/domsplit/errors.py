"""Exception types shared across the package."""


class DomsplitError(Exception):
    """Base class for all library errors."""


class ZeroMatrix(DomsplitError):
    """All matrix entries are below the zero tolerance."""


class SingularMatrix(DomsplitError):
    """Operation requires an invertible matrix."""


class ZeroVector(DomsplitError):
    """Vector norm is below the zero tolerance."""


class KernelHit(DomsplitError):
    """Projective action evaluated on (numerically) the kernel line."""


class Degenerate(DomsplitError):
    """Singular values coincide; contracted/expanding directions undefined."""


class WindowExceeded(DomsplitError):
    """Requested indices fall outside the sequence window."""


class ProductVanished(DomsplitError):
    """An intermediate windowed product is numerically the zero matrix."""


class NoConvergence(DomsplitError):
    """Direction estimates did not meet the stopping rule within n_max."""


class NotUnimodular(DomsplitError):
    """Sequence entries are not (normalized to) unit determinant."""


class InvalidSpec(DomsplitError):
    """Generator or sequence specification violates a declared invariant."""
