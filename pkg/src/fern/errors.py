"""Exception types shared across the package."""


class SchemaError(ValueError):
    """An artifact file is structurally invalid or incompatible."""


class GridMismatchError(ValueError):
    """A POD model was asked to predict on a grid other than the one it is bound to."""


class SolverError(RuntimeError):
    """A PDE solve failed (blow-up or positivity loss).

    Attributes
    ----------
    t : float
        Simulation time at which the failure was detected.
    column : int or None
        Batch column (sample index) that failed, when solving a batch.
    """

    def __init__(self, message: str, t: float, column: int | None = None):
        where = f" (at t={t:.6g}" + (f", sample {column})" if column is not None else ")")
        super().__init__(message + where)
        self.message = message
        self.t = t
        self.column = column


class TrainingError(RuntimeError):
    """Training aborted on a non-finite loss or gradient.

    Attributes
    ----------
    epoch : int
        Epoch index at which the failure occurred.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch
