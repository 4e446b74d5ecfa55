"""Exception hierarchy shared by every module."""


class AcselError(Exception):
    """Base class for all library errors."""


class ValidationError(AcselError, ValueError):
    """Invalid input data or configuration (CLI exit code 2)."""


class NumericalError(AcselError, ArithmeticError):
    """A numerical routine failed (CLI exit code 3)."""


class ConstantColumn(ValidationError):
    def __init__(self, column, name=None):
        self.column = column
        label = f"{column}" if name is None else f"{column} ({name})"
        super().__init__(f"column {label} has zero variance")


class TooFewRows(ValidationError):
    def __init__(self, n_obs):
        self.n_obs = n_obs
        super().__init__(f"need at least 3 observations, got {n_obs}")


class NotInHyperplane(ValidationError):
    pass


class ZeroResultant(NumericalError):
    pass


class DegenerateKappa(ValidationError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, lam, sweeps):
        self.lam = lam
        self.sweeps = sweeps
        super().__init__(f"coordinate descent did not converge at lambda={lam:.6g} after {sweeps} sweeps")


class DegenerateDf(NumericalError):
    pass


class SingularFit(NumericalError):
    pass


class SingularGram(NumericalError):
    pass


class SubsampleTooSmall(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class ExternalMatrixMissing(ValidationError):
    pass


class ZeroSignal(ValidationError):
    pass
