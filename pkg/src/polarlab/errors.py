"""Exception types raised by polarlab."""


class PolarlabError(Exception):
    """Base class for all polarlab errors."""


class InvalidGridError(PolarlabError, ValueError):
    pass


class InvalidConstantError(PolarlabError, ValueError):
    pass


class ConfigurationError(PolarlabError, ValueError):
    """Numerical parameters that the chosen scheme cannot accept (CFL etc.)."""


class UnsupportedSystemError(PolarlabError, ValueError):
    pass


class UndefinedConstraintError(PolarlabError, ValueError):
    pass


class SolverDivergedError(PolarlabError, RuntimeError):
    def __init__(self, step, detail=""):
        self.step = step
        msg = f"solver diverged at step {step}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class DomainExitError(PolarlabError, RuntimeError):
    """Amplitude left the admissible domain (R <= 0) while integrating."""

    def __init__(self, x):
        self.x = x
        super().__init__(f"amplitude reached R <= 0 at x = {x:.12g}")


class ConfigError(PolarlabError, ValueError):
    """Malformed scenario configuration."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
