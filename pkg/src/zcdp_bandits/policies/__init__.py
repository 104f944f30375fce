"""Private bandit policies for finite-armed, linear and contextual linear settings."""

from .contextual import ContextualEnvironment, OfulConfig, run_oful
from .finite import FiniteConfig, run_finite
from .linear import LinearConfig, run_gope

__all__ = ["ContextualEnvironment", "FiniteConfig", "LinearConfig", "OfulConfig",
           "run_finite", "run_gope", "run_oful"]
