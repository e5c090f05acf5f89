"""Exception hierarchy shared by all nozzleflow modules."""


class NozzleFlowError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NozzleFlowError, ValueError):
    """An argument lies outside the domain of a thermodynamic or geometric map."""


class SupersonicStateError(NozzleFlowError):
    """The kinetic term exceeds the sonic threshold, so no subsonic density exists."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class FarFieldError(NozzleFlowError):
    """No subsonic asymptotic state exists for the requested mass flux or exit width."""


class ConvergenceError(NozzleFlowError):
    """An iteration hit its cap. ``history`` and ``last`` carry the diagnostic trail."""

    def __init__(self, message, history=None, last=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.last = last


class LinearSolveError(ConvergenceError):
    """The conjugate-gradient inner solve stagnated or broke down."""


class AssemblyError(NozzleFlowError):
    """A non-finite coefficient appeared while assembling the discrete operator."""


class ConfigError(NozzleFlowError):
    """Invalid run configuration. ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
