"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class KortewegError(Exception):
    """Base class for every error raised by this package."""


class DomainError(KortewegError, ValueError):
    """A constitutive function was evaluated outside (0, inf)."""


class ParameterError(KortewegError, ValueError):
    """Model parameters violate an admissibility constraint."""


class GridError(KortewegError, ValueError):
    pass


class VacuumError(KortewegError):
    """Density reached the vacuum floor."""


class ConsistencyError(KortewegError):
    """An evolved drift velocity drifted away from grad(mu(rho))/rho."""


class NonFiniteError(KortewegError):
    pass


class TimeRangeError(KortewegError, ValueError):
    pass


class SeriesError(KortewegError, ValueError):
    """Malformed time series handed to the Gronwall certifier."""


class ConfigError(KortewegError, ValueError):
    pass


class IncompatibleRunsError(KortewegError, ValueError):
    pass


class SimulationAborted(KortewegError):
    """Wraps a vacuum/consistency/non-finite failure with the partial trajectory.

    ``cause`` is the underlying error, ``trajectory`` holds every snapshot
    recorded before the failure (its last state is the last valid one).
    """

    def __init__(self, cause, trajectory):
        super().__init__(f"simulation aborted at t={trajectory.times[-1]:.6g}: {cause}")
        self.cause = cause
        self.trajectory = trajectory

    @property
    def last_state(self):
        return self.trajectory.states[-1]
