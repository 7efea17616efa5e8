"""
Exception hierarchy for PopLab.
Each family maps to one process exit code (see ExitCode).
"""
from app.models.enums import ExitCode


class LabError(Exception):
    """Base class for every error raised by the lab."""
    exit_code = ExitCode.NUMERICAL_FAILURE


# Configuration ----------------------------------------------------------------

class ConfigError(LabError):
    """Invalid settings; `field` is the dotted path of the offending entry."""
    exit_code = ExitCode.CONFIG_ERROR

    def __init__(self, message: str, field: str = None, line: int = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ''
        super().__init__(f"{prefix}{message}")


class OutOfRangeError(ConfigError):
    """A temperature or frequency outside its valid interval."""

    def __init__(self, name: str, value: float, low: float, high: float):
        self.value = value
        self.low = low
        self.high = high
        super().__init__(f"{value} outside [{low}, {high}]", field=name)


# Data ---------------------------------------------------------------------------

class DataError(LabError):
    """Missing or malformed data."""
    exit_code = ExitCode.DATA_ERROR


class DimensionError(DataError):
    pass


class EmptyContextError(DataError):
    pass


class DegenerateTargetError(DataError):
    """Observation set with zero spread; NMSE is undefined."""
    pass


class RankError(DataError):
    def __init__(self, requested: int, rank: int):
        self.requested = requested
        self.rank = rank
        super().__init__(f"requested {requested} components but data rank is {rank}")


# Numerical -----------------------------------------------------------------------

class NumericalError(LabError):
    exit_code = ExitCode.NUMERICAL_FAILURE


class InvalidPhysicsError(NumericalError):
    def __init__(self, spring: int, temperature: float, stiffness: float):
        self.spring = spring
        self.temperature = temperature
        self.stiffness = stiffness
        super().__init__(
            f"spring {spring} has non-positive stiffness {stiffness:.6g} N/m at T={temperature}"
        )


class SingularSystemError(NumericalError):
    def __init__(self, frequency: float):
        self.frequency = frequency
        super().__init__(f"dynamic stiffness matrix is singular at f={frequency} Hz")


class StabilityError(NumericalError):
    def __init__(self, dt: float, omega_max: float, limit: float):
        self.dt = dt
        self.omega_max = omega_max
        super().__init__(
            f"dt={dt} too large: dt*omega_max={dt * omega_max:.4g} exceeds {limit}"
        )


class DivergenceError(NumericalError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"time integration diverged at step {step}")


class NonFiniteError(NumericalError):
    def __init__(self, node: str, message: str = None):
        self.node = node
        super().__init__(message or f"non-finite value produced by '{node}'")


class TrainingDivergenceError(NumericalError):
    def __init__(self, epoch: int, task_id: str = None, detail: str = None):
        self.epoch = epoch
        self.task_id = task_id
        where = f"epoch {epoch}" + (f", task {task_id}" if task_id is not None else '')
        super().__init__(f"non-finite loss at {where}" + (f" ({detail})" if detail else ''))


class CholeskyError(NumericalError):
    def __init__(self, jitter: float):
        self.jitter = jitter
        super().__init__(f"kernel matrix not positive definite with jitter {jitter:g}")


class SelectionError(NumericalError):
    """Every hyperparameter candidate failed."""
    pass


# Output ----------------------------------------------------------------------------

class OutputError(LabError):
    exit_code = ExitCode.OUTPUT_ERROR
