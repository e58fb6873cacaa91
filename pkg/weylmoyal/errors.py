"""Exception hierarchy shared by all weylmoyal modules."""


class WeylMoyalError(Exception):
    pass


class DimensionError(WeylMoyalError, ValueError):
    pass


class AntisymmetryError(WeylMoyalError, ValueError):
    pass


class RankError(WeylMoyalError, ValueError):
    pass


class CommensurabilityError(WeylMoyalError, ValueError):
    """A frequency or shift does not lie on the lattice a grid requires."""


class UnsupportedRepresentationError(WeylMoyalError, TypeError):
    pass


class GridSizeError(WeylMoyalError, ValueError):
    pass


class UnitarityError(WeylMoyalError, ValueError):
    pass


class ConvergenceError(WeylMoyalError, RuntimeError):
    def __init__(self, message, lower=None, upper=None, iterations=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.iterations = iterations


class StabilizerError(WeylMoyalError, ValueError):
    pass


class SignatureError(WeylMoyalError, ValueError):
    pass


class LorentzError(WeylMoyalError, ValueError):
    pass


class UnknownPointError(WeylMoyalError, KeyError):
    pass


class ExperimentConfigError(WeylMoyalError, ValueError):
    pass
