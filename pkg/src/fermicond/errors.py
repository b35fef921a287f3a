"""Exception hierarchy.  Each class carries a machine-readable ``kind``."""


class FermiCondError(Exception):
    kind = "error"


class DomainError(FermiCondError, ValueError):
    kind = "domain-error"


class ConfigurationError(FermiCondError, ValueError):
    kind = "configuration-error"


class NearThresholdError(DomainError):
    kind = "near-threshold"


class PotentialDataError(FermiCondError, ValueError):
    kind = "potential-data-error"


class BoundStatesPresent(FermiCondError):
    kind = "bound-states-present"


class NonConvergenceError(FermiCondError, ArithmeticError):
    kind = "non-convergence"


class ExtentTooSmall(ConfigurationError):
    kind = "extent-too-small"
