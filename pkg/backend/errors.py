class LabError(Exception):
    """Base class for errors raised by the consensus laboratory"""

    exit_code = 1


class ConfigError(LabError, ValueError):
    """Experiment configuration could not be parsed or validated"""

    exit_code = 2


class AcceptanceFailure(LabError):
    """An experiment ran to completion but missed its acceptance window"""

    exit_code = 3


class BudgetExceeded(LabError, ValueError):
    """An exact enumeration would exceed its configured budget"""

    exit_code = 4


class MajorizationError(LabError, ValueError):
    """A pair of configurations is not ordered the way an operation requires"""


class HypothesisViolation(LabError):
    """A trajectory violates a hypothesis of the bound being validated"""

    def __init__(self, message: str, path_index: int, step: int):
        super().__init__(f"path {path_index}, step {step}: {message}")
        self.path_index = path_index
        self.step = step
