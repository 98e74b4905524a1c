"""Exception and warning types raised across the package."""


class CFSError(Exception):
    """Base class for all package errors."""


class ConfigError(CFSError, ValueError):
    """A configuration value is missing, unknown or out of range."""


class DomainError(CFSError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class DispersionRangeExceeded(CFSError, ValueError):
    """A dispersion model was asked for an index outside its validity range."""


class InternallyUnstablePlant(CFSError):
    """The DOPO cavity oscillates on its own; closed-loop analysis is meaningless."""


class AsymmetricConfiguration(CFSError):
    """A symmetric-path routine received a configuration without carrier symmetry."""


class UnsupportedConfiguration(CFSError):
    """The requested quantity is not defined for this device family."""


class MarginallyUnstableEvaluation(CFSError, ZeroDivisionError):
    """The closed-loop denominator vanished at a sampled frequency."""


class SingularController(CFSError, ZeroDivisionError):
    """The feedback composition divides by a vanishing controller or path element."""


class RefinementRequired(CFSError):
    """Two consecutive trace samples subtend too large an angle about the point."""


class PointOnCurve(CFSError):
    """A trace sample lies on the point whose winding number was requested."""


class RefinementBudgetExceeded(CFSError):
    """Adaptive locus refinement ran out of its sample budget."""


class BudgetExceeded(CFSError):
    """A search (for example a boundary bisection) did not converge in budget."""


class MarginalCase(UserWarning):
    """A Nyquist locus passed within the exclusion disk around the critical point."""
