"""Exception types shared across the package."""


class SpecdetError(Exception):
    """Base class for all package errors."""


class ConfigError(SpecdetError):
    """Malformed configuration: unknown keys, bad ranges, missing sections."""


class NonConvergence(SpecdetError):
    """An iterative solver failed to reach its tolerance.

    Carries the last residual so callers can report diagnostics.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureFailure(SpecdetError):
    """A numerical integral did not converge to the requested tolerance."""


class NoRoot(SpecdetError):
    """A bracketed root solve found no sign change in the admissible range."""


class NoRealRoot(NoRoot):
    """The defining polynomial has no real root in the admissible branch."""


class OutOfPhase(SpecdetError):
    """The requested quantity is undefined in this region of parameter space."""


class OutOfRange(SpecdetError):
    """Argument outside the attainable range (e.g. maps to q <= -1)."""


class SizeGuard(SpecdetError):
    """Dense-matrix work refused: problem exceeds the configured size guard."""


class ExactSingularity(SpecdetError):
    """A factorization hit an exactly singular pivot."""


class BlockSingular(SpecdetError):
    """A block pivot in the chain recursion is numerically singular."""


class DegenerateFlow(SpecdetError):
    """det Psi passed exactly through zero during flow propagation."""


class StepCollapse(SpecdetError):
    """Adaptive step-size control underflowed (near-collision of particles)."""


class IntegrationError(SpecdetError):
    """ODE integration failed; message carries step diagnostics."""
