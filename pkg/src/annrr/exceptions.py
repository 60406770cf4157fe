class ContractError(ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class WeightOrderError(ContractError):
    """Penalty weights are not in non-decreasing order."""


class NumericalError(RuntimeError):
    """A numerical kernel failed (e.g. SVD did not converge)."""


class ConfigurationError(ContractError):
    """Run options are invalid or inconsistent with each other."""
