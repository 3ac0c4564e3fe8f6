"""Multi-group SAIRS epidemic model with vaccination on community networks."""

__version__ = "0.1.0"
