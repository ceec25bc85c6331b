"""Monte Carlo and analytic tools for adaptive network-coded cooperation
(ANDCoop) in single-cell industrial wireless networks."""

__version__ = "0.1.0"

from .channel import NetworkConfig  # noqa: E402
from .engine import RunSpec, run, run_many, sweep  # noqa: E402
from .protocol import ConfigurationError, ProtocolParams  # noqa: E402

__all__ = ["NetworkConfig", "ProtocolParams", "ConfigurationError", "RunSpec", "run",
           "run_many", "sweep", "__version__"]
