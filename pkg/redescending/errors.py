"""Exceptions raised by the estimation library."""


class EstimationError(RuntimeError):
    """Base class for numerical failures."""


class QuadratureError(EstimationError):
    """Adaptive quadrature did not reach the requested tolerance."""


class AllRejectedError(EstimationError):
    """Every observation received a negligible weight."""

    def __init__(self, total_weight: float):
        super().__init__(f"all observations rejected (sum of weights = {total_weight:.3e})")
        self.total_weight = total_weight


class RankDeficiencyError(EstimationError):
    """Weighted design matrix does not have full column rank."""

    def __init__(self, deficient_columns: int, n_columns: int):
        super().__init__(
            f"weighted design is rank-deficient: {deficient_columns} of {n_columns} column(s) deficient"
        )
        self.deficient_columns = deficient_columns
        self.n_columns = n_columns


class DescentError(EstimationError):
    """The objective increased during an inner reweighting step."""


class ExperimentInterrupted(Exception):
    """A stop request arrived while an experiment was running."""
