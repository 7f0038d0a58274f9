"""Reduced-order Riccati feedback for linear parabolic systems via snapshot POD."""
from .errors import StabError
from .tolerances import DEFAULT, ToleranceProfile

__all__ = ["StabError", "ToleranceProfile", "DEFAULT"]
__version__ = "0.1.0"
