"""
Error types for nsklimit
"""
from typing import Optional


class NskError(Exception):
    """Base class for all nsklimit errors"""


class DomainError(NskError, ValueError):
    """An input lies outside the domain of an operation"""


class ConfigError(NskError, ValueError):
    """A configuration file or value could not be used"""


class ContaminationError(NskError):
    """Waves reached the boundary layer of the truncated domain"""


class NumericalError(NskError, RuntimeError):
    """A numerical procedure failed"""


class VacuumError(NumericalError):
    """Density lost positivity during an NSK run"""

    def __init__(self, index: int, x: float, time: float, value: float):
        self.index = index
        self.x = x
        self.time = time
        self.value = value
        super().__init__(
            f"Nonpositive density {value:.6g} in cell {index} (x={x:.6g}) at t={time:.6g}"
        )


class TimeStepUnderflow(NumericalError):
    """Stable time step fell below the hard floor"""

    def __init__(self, dt: float, time: Optional[float] = None):
        self.dt = dt
        self.time = time
        where = f" at t={time:.6g}" if time is not None else ""
        super().__init__(f"Time step underflow: dt={dt:.3e}{where}")


class NonFiniteError(NumericalError):
    """NaN or Inf appeared in a field"""


class QuadratureError(NumericalError):
    """Kernel quadrature did not pass the node-doubling check"""


class RootFindError(NumericalError):
    """Riemann middle-state equation not solved to tolerance"""
