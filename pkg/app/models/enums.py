"""
Enumerations for the PopLab system
"""
from enum import Enum, IntEnum


class Problem(Enum):
    """Regression problems studied on the population"""
    LINE_1HZ = 1
    LINE_50HZ = 2
    FULL_FRF = 3

    @property
    def target_frequency(self):
        """Spectral line in Hz, or None for the full-FRF problem."""
        return {1: 1.0, 2: 50.0}.get(self.value)

    @property
    def label(self) -> str:
        return {1: '1 Hz line', 2: '50 Hz line', 3: 'full FRF (PCA)'}[self.value]


class Method(Enum):
    """Few-shot regressors compared by the experiment harness"""
    MAML = "maml"
    CNP = "cnp"
    GP = "gp"


class TemperatureMode(Enum):
    """How the temperature law combines with a structure's sampled stiffness"""
    ABSOLUTE = "absolute"
    SCALED = "scaled"


class FrfMethod(Enum):
    """FRF pipeline used to generate targets"""
    DIRECT = "direct"
    TIME_DOMAIN = "time_domain"


class MetaOptimizer(Enum):
    """Update rule applied to the summed meta-gradient"""
    SGD = "sgd"
    ADAM = "adam"


class SplitTag(Enum):
    """Row tags inside a TaskDataset"""
    TRAIN = "train"
    CONTEXT = "context"
    QUERY = "query"


class CellStatus(Enum):
    """Outcome of one experiment grid cell"""
    OK = "ok"
    FAILED = "failed"


class ExitCode(IntEnum):
    """Process exit codes (stable; click reserves 1 and 2)"""
    OK = 0
    CONFIG_ERROR = 3
    DATA_ERROR = 4
    NUMERICAL_FAILURE = 5
    OUTPUT_ERROR = 6
