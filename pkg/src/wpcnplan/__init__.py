"""Two-stage UAV hover/power and obstacle-aware trajectory planning for wireless-powered sensor networks."""

__version__ = "0.1.0"
