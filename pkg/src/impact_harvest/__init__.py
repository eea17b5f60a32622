"""Vibro-impact energy harvester: impact maps, periodic orbits, stability, sweeps."""
__version__ = "0.1.0"
