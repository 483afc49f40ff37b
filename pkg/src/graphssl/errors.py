"""Exception types shared across the library."""


class InputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class DegenerateGraphError(ValueError):
    """Raised when a graph cannot support the requested computation
    (zero-degree node in a normalized Laplacian, zero volume, or an
    unlabeled component that makes a hard solve singular)."""


class SolverError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance.

    Carries the final relative residual in ``residual``.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual
