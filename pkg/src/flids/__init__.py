"""FANET routing-attack simulator and federated intrusion detection testbed."""

__version__ = "0.1.0"
