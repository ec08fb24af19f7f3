"""Exception types shared across the package."""


class CosimError(Exception):
    pass


class ConfigError(CosimError):
    """Malformed or inconsistent configuration document."""


class ConvergenceError(CosimError):
    """An eigen-solve or root-find failed to converge."""


class DispersiveError(CosimError):
    """A qubit transition is (nearly) resonant with an EM mode or network pole."""


class StabilityError(CosimError):
    """A time-marching run blew up or violated a conservation monitor."""


class AnalysisError(CosimError):
    """Post-processing input does not meet a routine's sampling requirements."""
