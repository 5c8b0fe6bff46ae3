"""Exception hierarchy shared by all optobec modules."""


class OptoBecError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(OptoBecError, ValueError):
    """A physical parameter violates its declared constraint.

    Parameters
    ----------
    field : str
        Name of the offending field.
    message : str
        Human-readable description.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(OptoBecError, ValueError):
    """A parameter file or override could not be parsed.

    ``problems`` holds one ``(field, message)`` pair per defect so callers can
    report every missing/unknown key at once.
    """

    def __init__(self, problems, line=None):
        self.problems = list(problems)
        self.line = line
        where = f" (line {line})" if line is not None else ""
        text = "; ".join(f"{f}: {m}" for f, m in self.problems)
        super().__init__(f"invalid parameters{where}: {text}")


class NumericalError(OptoBecError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class UnstableSystemError(NumericalError):
    """The drift matrix has an eigenvalue with non-negative real part."""

    def __init__(self, max_real_eig):
        self.max_real_eig = max_real_eig
        super().__init__(
            f"linear system is not stable (max Re(eig) = {max_real_eig:.6g}); "
            "no stationary covariance exists"
        )


class IllConditionedError(NumericalError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"Lyapunov solve is ill-conditioned (cond ~ {condition:.3g})")


class SimulationDivergedError(NumericalError):
    def __init__(self, step, norm):
        self.step = step
        self.norm = norm
        super().__init__(f"trajectory diverged at step {step} (|u| = {norm:.3g})")


class DegenerateModelError(NumericalError):
    """The adiabatic effective model is singular or undefined at this point."""
