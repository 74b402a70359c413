"""Exception types shared across the toolkit."""


class SivstarkError(Exception):
    """Base class for all toolkit-specific errors."""


class DegenerateQuadratic(SivstarkError):
    """Quadratic coefficient too small: the parabola vertex is unidentifiable."""


class NoConvergence(SivstarkError):
    """Iterative field solve did not reach the residual tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class OutOfDomain(SivstarkError):
    """Probe point lies outside the solved grid."""


class LineOutsideScan(SivstarkError):
    """Stark-shifted line center falls outside the scan window.

    Carries the offending voltages so batch callers can report them.
    """

    def __init__(self, voltages, message: str | None = None):
        self.voltages = list(voltages)
        if message is None:
            message = "line center outside scan window at voltage(s): " + ", ".join(
                f"{v:g} V" for v in self.voltages
            )
        super().__init__(message)


class NoPeakFound(SivstarkError):
    """No local maximum rises above the spectrum's noise floor."""


class NotConverged(SivstarkError):
    """Nonlinear fit hit the iteration cap; carries the best fit so far."""

    def __init__(self, fit, message: str = "fit did not converge"):
        super().__init__(message)
        self.fit = fit


class IllConditioned(SivstarkError):
    """Normal equations of a fit are singular."""


class InsufficientSpread(SivstarkError):
    """Field values span too small a range for a meaningful quadratic fit."""


class Unreachable(SivstarkError):
    """Target frequency cannot be reached within the allowed voltage range."""


class ConfigError(SivstarkError):
    """Invalid or missing configuration value.

    ``key_path`` names the offending entry as ``section.key``.
    """

    def __init__(self, key_path: str, message: str):
        super().__init__(f"{key_path}: {message}")
        self.key_path = key_path
