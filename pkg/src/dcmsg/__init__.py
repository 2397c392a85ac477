"""Choice-modelling serious game platform: estimation engine, game sessions
and telemetry analytics."""

__version__ = "0.1.0"
