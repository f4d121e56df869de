"""Movement-pattern classification of GNSS and UWB trajectories."""

__version__ = "0.1.0"
