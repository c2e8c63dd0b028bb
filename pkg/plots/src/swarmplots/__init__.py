"""Figure rendering for exported swarm simulation run directories."""

__version__ = "0.1.0"
