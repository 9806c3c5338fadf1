"""Exception hierarchy. The CLI maps these onto its exit-code contract."""


class AtomSphereError(Exception):
    """Base class for all package errors."""


class ConfigError(AtomSphereError, ValueError):
    """A configuration file or parameter set failed parsing or validation."""


class DomainError(AtomSphereError, ValueError):
    """A function was evaluated outside its domain (e.g. inside the sphere)."""


class ResonanceError(DomainError):
    """Real-frequency polarizability requested inside a resonance guard band."""


class ConvergenceError(AtomSphereError, RuntimeError):
    """A numerical convergence criterion (l_max, b_max, r_max, quadrature) failed."""


class ConvergenceWarning(UserWarning):
    """Non-fatal convergence diagnostic."""


class CoverageError(DomainError):
    """A tabulated curve does not span enough of a thermal distribution."""
