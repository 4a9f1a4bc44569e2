"""wbansim - Coexistence simulator for body area networks and IoT devices."""

__version__ = "0.1.0"
