"""Exception types raised by the numerical kernels."""


class SolvabilityError(ValueError):
    """Right-hand side of a Fokker-Planck solve has a kernel component."""

    def __init__(self, kernel_component: float, norm: float):
        self.kernel_component = kernel_component
        self.norm = norm
        super().__init__(
            f"right-hand side not orthogonal to Ker L: |rhs_0| = {kernel_component:.3e} "
            f"(|rhs| = {norm:.3e})"
        )


class NumericalError(RuntimeError):
    """Eigensolve failed or produced an unacceptable residual."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration did not converge."""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")


class FitError(ValueError):
    """Least-squares fit is underdetermined."""


class PositivityError(ValueError):
    """A distribution function is nonpositive where positivity is required."""

    def __init__(self, message: str, min_value: float):
        self.min_value = min_value
        super().__init__(f"{message} (min f = {min_value:.3e})")


class BlowUpError(RuntimeError):
    """Time integration produced non-finite values."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"non-finite state at t = {time:.6g}")
