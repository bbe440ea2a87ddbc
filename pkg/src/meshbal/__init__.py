"""Discrete-event simulator of 802.11 mesh networks comparing AP association policies."""

__version__ = "0.1.0"

from .builtin import builtin_scenario  # noqa: E402
from .engine import RunMetrics, run  # noqa: E402
from .scenario import Scenario, parse_scenario, serialize_scenario  # noqa: E402

__all__ = ["RunMetrics", "Scenario", "builtin_scenario", "parse_scenario", "run",
           "serialize_scenario", "__version__"]
