"""Exception types shared across the package."""

from __future__ import annotations


class ContractViolation(ValueError):
    """An operation was called outside its documented domain."""


class NonInvertibleError(ContractViolation):
    """The linear part of a jet is singular."""


class SmallDivisorError(ArithmeticError):
    """A homological coefficient exceeded the configured cap."""

    def __init__(self, component: int, index: tuple[int, ...], divisor: float, peak: float):
        self.component = component
        self.index = tuple(index)
        self.divisor = divisor
        self.peak = peak
        super().__init__(
            f"small divisor at component {component}, monomial {self.index}: "
            f"divisor magnitude {divisor:.3e}, coefficient peak {peak:.3e}"
        )

    def payload(self) -> dict:
        return {
            "error": "small_divisor",
            "component": self.component,
            "index": list(self.index),
            "divisor": self.divisor,
            "peak": self.peak,
        }


class ComplexResonanceError(ArithmeticError):
    """A complex resonance blocks linearization."""

    def __init__(self, component: int, index: tuple[int, ...]):
        self.component = component
        self.index = tuple(index)
        super().__init__(f"complex resonance at component {component}, monomial {self.index}")


class NonConvergenceError(RuntimeError):
    """An iterative limit did not settle within its budget."""

    def __init__(self, message: str, history: list[float] | None = None):
        self.history = list(history or [])
        super().__init__(message)

    def payload(self) -> dict:
        return {"error": "non_convergence", "message": str(self), "history": self.history}


class CertificateError(RuntimeError):
    """A quantitative certificate (bounded coefficients, degrees) could not be issued."""
